#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lesionlab/autodiff.hpp"
#include "lesionlab/tensor.hpp"

namespace lesionlab {

/// Named, ordered collection of trainable tensors.
class ParameterStore {
 public:
  ParamId add(std::string name, Tensor value);

  std::size_t size() const noexcept { return tensors_.size(); }
  const std::string& name(ParamId id) const { return names_.at(id); }
  Tensor& tensor(ParamId id) { return tensors_.at(id); }
  const Tensor& tensor(ParamId id) const { return tensors_.at(id); }

  std::optional<ParamId> find(const std::string& name) const;
  /// Throws LookupError for unknown names.
  ParamId id(const std::string& name) const;

  std::size_t element_count() const;
  /// FNV-1a over names, shapes and raw value bytes.
  std::uint64_t checksum() const;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

}  // namespace lesionlab
