#include "lesionlab/params.hpp"

#include "lesionlab/errors.hpp"
#include "lesionlab/fingerprint.hpp"

namespace lesionlab {

ParamId ParameterStore::add(std::string name, Tensor value) {
  if (find(name)) throw ConfigError("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(value));
  return tensors_.size() - 1;
}

std::optional<ParamId> ParameterStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

ParamId ParameterStore::id(const std::string& name) const {
  if (auto found = find(name)) return *found;
  throw LookupError("unknown parameter: " + name);
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::uint64_t ParameterStore::checksum() const {
  Fingerprint fp;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    fp.text(names_[i]);
    for (auto d : tensors_[i].shape()) fp.u64(d);
    fp.f64s(tensors_[i].values());
  }
  return fp.value();
}

}  // namespace lesionlab
