#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "lesionlab/autodiff.hpp"
#include "lesionlab/inference.hpp"
#include "lesionlab/vocab.hpp"

namespace lesionlab {
namespace {

using fixtures::sequence;
using fixtures::tiny_model;

TEST(Scoring, UniformLogitsScoreMinusLogV) {
  Model m = tiny_model(Architecture::moe);
  m.params().tensor(m.lm_head()).fill(0.0);
  const double V = static_cast<double>(m.config().vocab_size);
  for (const char* s : {"the dog runs", "a big cat sleeps"})
    EXPECT_NEAR(avg_log_prob(m, sequence(s)), -std::log(V), 1e-12);
}

TEST(Scoring, EmptyOverridesMatchThePlainPassAndTheGraph) {
  for (Architecture a : {Architecture::dense, Architecture::moe}) {
    const Model m = tiny_model(a);
    const auto s = sequence("these happy dogs are chasing the big cat");
    const double plain = avg_log_prob(m, s);
    EXPECT_EQ(avg_log_prob(m, s, {}), plain);
    Graph g;
    const std::vector<std::vector<int>> one{s};
    EXPECT_NEAR(-g.value(forward_loss(g, m, make_batch(one))).item(), plain, 1e-12);
  }
}

TEST(Scoring, AblatedExpertMatchesTheNoFfnReference) {
  const Model m = fixtures::agreement_model();
  const UnitOverrideSet ablate{{0, 0, UnitKind::expert}};
  for (const auto& [good, bad] : fixtures::agreement_task().pairs) {
    for (const auto* s : {&good, &bad}) {
      EXPECT_NEAR(avg_log_prob(m, *s), fixtures::reference_avg_log_prob(m, *s, true), 1e-12);
      EXPECT_NEAR(avg_log_prob(m, *s, ablate), fixtures::reference_avg_log_prob(m, *s, false), 1e-12);
    }
  }
}

TEST(Scoring, ResumedScoringIsBitIdentical) {
  for (Architecture a : {Architecture::dense, Architecture::moe}) {
    const Model m = tiny_model(a, 13);
    const auto s = sequence("the girl is eating the apple");
    const ForwardTrace trace = trace_sequence(m, s);
    EXPECT_EQ(trace.avg_log_prob(), avg_log_prob(m, s));
    for (const auto& u : m.units()) {
      const UnitOverrideSet o{u};
      EXPECT_EQ(avg_log_prob_resumed(m, s, trace, o), avg_log_prob(m, s, o)) << unit_label(u);
    }
    const UnitOverrideSet pair{m.units()[1], m.units().back()};
    EXPECT_EQ(avg_log_prob_resumed(m, s, trace, pair), avg_log_prob(m, s, pair));
  }
}

TEST(Scoring, ZeroMaskEqualsOverride) {
  for (Architecture a : {Architecture::dense, Architecture::moe}) {
    const Model m = tiny_model(a);
    Model masked = m;
    const UnitId u = m.units()[2];
    masked.mask_unit(u);
    const auto s = sequence("the king sees the queen");
    EXPECT_EQ(avg_log_prob(masked, s), avg_log_prob(m, s, {u}));
    EXPECT_EQ(generate(masked, s, 5), generate(m, s, 5, {u}));
  }
}

TEST(Generation, ZeroNewTokensReturnsPrompt) {
  const Model m = tiny_model(Architecture::moe);
  const std::vector<int> prompt{1, Vocabulary::standard().id("the")};
  EXPECT_EQ(generate(m, prompt, 0), prompt);
}

TEST(Generation, GreedyIsDeterministicAndFollowsTheLogits) {
  for (Architecture a : {Architecture::dense, Architecture::moe}) {
    const Model m = tiny_model(a, 17);
    std::vector<int> prompt{Vocabulary::standard().bos(), Vocabulary::standard().id("the")};
    const auto out = generate(m, prompt, 6);
    EXPECT_EQ(out, generate(m, prompt, 6));
    ASSERT_GE(out.size(), prompt.size());
    std::vector<int> prefix = prompt;
    for (std::size_t i = prompt.size(); i < out.size(); ++i) {
      const auto logits = next_token_logits(m, prefix);
      const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
      EXPECT_EQ(out[i], best);
      prefix.push_back(out[i]);
    }
  }
}

TEST(Capture, AblatedUnitOutputIsZeroButDownstreamChanges) {
  const Model m = tiny_model(Architecture::dense, 5);
  const auto s = sequence("the dog sees a cat");
  const UnitId target{0, 1, UnitKind::neuron_group};
  const auto intact = capture_unit_output(m, s, target);
  EXPECT_TRUE(std::any_of(intact.begin(), intact.end(), [](double v) { return v != 0.0; }));
  const auto ablated = capture_unit_output(m, s, target, {target});
  EXPECT_TRUE(std::all_of(ablated.begin(), ablated.end(), [](double v) { return v == 0.0; }));
  const UnitId downstream{1, 0, UnitKind::neuron_group};
  EXPECT_NE(capture_unit_output(m, s, downstream), capture_unit_output(m, s, downstream, {target}));
}

}  // namespace
}  // namespace lesionlab
