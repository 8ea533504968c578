#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "lesionlab/checkpoint.hpp"
#include "lesionlab/errors.hpp"
#include "lesionlab/model.hpp"
#include "lesionlab/rng.hpp"

namespace lesionlab {
namespace {

using fixtures::tiny_config;
using fixtures::tiny_model;

TEST(Model, MoeInventoryIsLayersTimesExperts) {
  ModelConfig c = tiny_config(Architecture::moe);
  c.layers = 6;
  c.experts = 16;
  const Model m = build_model(c);
  EXPECT_EQ(m.units().size(), 96u);
  EXPECT_EQ(m.units().front().kind, UnitKind::expert);
}

TEST(Model, DenseInventoryIsLayersTimesGroups) {
  ModelConfig c = tiny_config(Architecture::dense);
  c.layers = 6;
  c.width = 64;
  c.heads = 4;
  c.ffn_hidden = 512;
  c.groups = 16;
  const Model m = build_model(c);
  ASSERT_EQ(m.units().size(), 96u);
  // A group of 32 hidden dims owns 32 input columns, 32 bias entries and 32 output rows.
  std::size_t weights = 0;
  for (const auto& s : unit_parameters(m, {2, 5, UnitKind::neuron_group})) {
    if (m.params().tensor(s.param).rank() == 2) weights += s.element_count(m.params().tensor(s.param));
  }
  EXPECT_EQ(weights, 32u * 64u + 64u * 32u);
}

TEST(Model, ExpertOwnsTwoMatricesAndTwoBiases) {
  const Model m = tiny_model(Architecture::moe);
  const auto slices = unit_parameters(m, {1, 2, UnitKind::expert});
  ASSERT_EQ(slices.size(), 4u);
  std::size_t matrices = 0, vectors = 0;
  for (const auto& s : slices) {
    EXPECT_EQ(s.axis, SliceAxis::whole);
    (m.params().tensor(s.param).rank() == 2 ? matrices : vectors) += 1;
  }
  EXPECT_EQ(matrices, 2u);
  EXPECT_EQ(vectors, 2u);
}

// Every FFN entry of a layer belongs to exactly one unit.
void expect_partition(const Model& m, std::size_t layer, const std::vector<ParamId>& ffn_params) {
  std::map<ParamId, std::vector<int>> owner;
  for (ParamId id : ffn_params) owner[id].assign(m.params().tensor(id).size(), 0);
  for (const auto& u : m.units()) {
    if (u.layer != layer) continue;
    for (const auto& s : unit_parameters(m, u)) {
      ASSERT_TRUE(owner.contains(s.param)) << m.params().name(s.param);
      s.for_each(m.params().tensor(s.param), [&](std::size_t i) { owner[s.param][i] += 1; });
    }
  }
  for (const auto& [id, counts] : owner)
    for (int c : counts) ASSERT_EQ(c, 1) << m.params().name(id);
}

TEST(Model, UnitsPartitionTheDenseFfn) {
  const Model m = tiny_model(Architecture::dense);
  const auto& lp = m.layer(1);
  expect_partition(m, 1, {lp.ffn_w_in, lp.ffn_b_in, lp.ffn_w_out});
}

TEST(Model, UnitsPartitionTheExperts) {
  const Model m = tiny_model(Architecture::moe);
  std::vector<ParamId> ids;
  for (const auto& e : m.layer(0).experts) ids.insert(ids.end(), {e.w_in, e.b_in, e.w_out, e.b_out});
  expect_partition(m, 0, ids);
}

TEST(Model, SameSeedSameChecksum) {
  EXPECT_EQ(tiny_model(Architecture::moe, 3).params().checksum(), tiny_model(Architecture::moe, 3).params().checksum());
  EXPECT_NE(tiny_model(Architecture::moe, 3).params().checksum(), tiny_model(Architecture::moe, 4).params().checksum());
}

TEST(Model, InvalidConfigsAreRejected) {
  ModelConfig c = tiny_config(Architecture::moe);
  c.active_experts = c.experts + 1;
  EXPECT_THROW(build_model(c), ConfigError);
  c = tiny_config(Architecture::dense);
  c.ffn_hidden = 10;  // not divisible into 4 groups
  EXPECT_THROW(build_model(c), ConfigError);
  c = tiny_config(Architecture::dense);
  c.heads = 3;
  EXPECT_THROW(build_model(c), ConfigError);
}

TEST(Model, UnitLabelsRoundTrip) {
  EXPECT_EQ(unit_label({2, 5, UnitKind::expert}), "L2.E5");
  EXPECT_EQ(unit_label({0, 11, UnitKind::neuron_group}), "L0.G11");
  EXPECT_EQ(parse_unit_label("L3.G7"), (UnitId{3, 7, UnitKind::neuron_group}));
  EXPECT_THROW(parse_unit_label("L3.X7"), LookupError);
  EXPECT_THROW(parse_unit_label("L.E1"), LookupError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  for (Architecture a : {Architecture::dense, Architecture::moe}) {
    Model m = tiny_model(a);
    m.mask_unit(m.units()[1]);
    const std::string bytes = serialize_checkpoint(m);
    const Model back = deserialize_checkpoint(bytes);
    EXPECT_EQ(back.params(), m.params());
    EXPECT_EQ(back.config(), m.config());
    EXPECT_EQ(back.zero_mask(), m.zero_mask());
    EXPECT_EQ(back.fingerprint(), m.fingerprint());
    EXPECT_EQ(serialize_checkpoint(back), bytes);
  }
}

TEST(Checkpoint, CorruptBytesAreDataErrors) {
  const std::string bytes = serialize_checkpoint(tiny_model(Architecture::moe));
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), DataError);
  EXPECT_THROW(deserialize_checkpoint("not a checkpoint"), DataError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), DataError);
}

TEST(ForwardLoss, GradientMatchesFiniteDifferencesOnSampledEntries) {
  for (Architecture a : {Architecture::dense, Architecture::moe}) {
    Model m = tiny_model(a, 21);
    const std::vector<std::vector<int>> seqs{fixtures::sequence("the dog runs"), fixtures::sequence("a cat sleeps")};
    const Batch batch = make_batch(seqs);
    Graph g;
    const Gradients grads = g.backward(forward_loss(g, m, batch));
    Rng rng(9);
    auto loss_at = [&] {
      Graph gg;
      return gg.value(forward_loss(gg, m, batch)).item();
    };
    for (int trial = 0; trial < 40; ++trial) {
      const ParamId id = rng.below(m.params().size());
      Tensor& t = m.params().tensor(id);
      const std::size_t i = rng.below(t.size());
      const double saved = t[i], h = 1e-5;
      t[i] = saved + h;
      const double up = loss_at();
      t[i] = saved - h;
      const double down = loss_at();
      t[i] = saved;
      // Parameters the graph never touched have no entry: their gradient is 0.
      const double numeric = (up - down) / (2 * h), analytic = grads.contains(id) ? grads.at(id)[i] : 0.0;
      EXPECT_LT(std::abs(numeric - analytic) / std::max(1.0, std::abs(numeric) + std::abs(analytic)), 1e-4)
          << architecture_name(a) << ' ' << m.params().name(id) << '[' << i << ']';
    }
  }
}

}  // namespace
}  // namespace lesionlab
