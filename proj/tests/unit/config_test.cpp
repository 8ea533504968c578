#include <gtest/gtest.h>

#include "lesionlab/config.hpp"
#include "lesionlab/errors.hpp"

namespace lesionlab {
namespace {

TEST(Config, CanonicalTextRoundTrips) {
  const RunConfig c;
  const std::string text = config_to_ini(c);
  EXPECT_EQ(config_to_ini(parse_config(text)), text);
}

TEST(Config, PartialFileKeepsDefaults) {
  const RunConfig c = parse_config("[run]\nseed = 99\narchitectures = moe\n\n[lesion]\nbudgets = 1, 3\nqualitative_budget = 1\n");
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.architectures, std::vector<Architecture>{Architecture::moe});
  EXPECT_EQ(c.budgets, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(c.train_sequences, RunConfig{}.train_sequences);
  EXPECT_EQ(parse_config("[run]\narchitectures = both\n").architectures.size(), 2u);
}

TEST(Config, UnknownKeysAndSectionsAreErrors) {
  EXPECT_THROW(parse_config("[run]\nsed = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[runs]\nseed = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[run]\nseed = one\n"), ConfigError);
  EXPECT_THROW(parse_config("[run\nseed = 1\n"), ConfigError);
}

TEST(Config, InvariantsAreChecked) {
  EXPECT_THROW(parse_config("[lesion]\nbudgets = 4,2\n"), ConfigError);
  EXPECT_THROW(parse_config("[lesion]\nbudgets = 1,2,4,8,200\n"), ConfigError);
  EXPECT_THROW(parse_config("[lesion]\nqualitative_budget = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[lesion]\nschemes = random-zeroing\n"), ConfigError);
  EXPECT_THROW(parse_config("[align]\nreference = 4\n"), ConfigError);
  EXPECT_THROW(parse_config("[lesion]\nqualitative_prompt = how are you zorbly\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\nheads = 5\n"), ConfigError);
  EXPECT_THROW(parse_config("[finetune]\nseeds = 3\n"), ConfigError);
}

TEST(Config, ItemBankResolvesAgainstTheConfigDirectory) {
  const RunConfig c = parse_config("[run]\nitem_bank = ../data/items.json\n", "/srv/exp/configs");
  EXPECT_EQ(c.item_bank, std::filesystem::path("/srv/exp/data/items.json"));
}

TEST(Config, PerArchitectureModelSeeds) {
  const RunConfig c;
  EXPECT_EQ(c.model_for(Architecture::moe).architecture, Architecture::moe);
  EXPECT_NE(c.model_for(Architecture::moe).seed, c.model_for(Architecture::dense).seed);
  EXPECT_GT(c.model_for(Architecture::dense).vocab_size, 0u);
}

TEST(Config, BundledConfigsLoad) {
  for (const char* name : {"default.ini", "smoke.ini"}) {
    const RunConfig c = load_config(std::filesystem::path(LESIONLAB_SOURCE_DIR) / "configs" / name);
    EXPECT_TRUE(std::filesystem::exists(c.item_bank)) << name;
  }
  EXPECT_EQ(config_to_ini(load_config(std::filesystem::path(LESIONLAB_SOURCE_DIR) / "configs/default.ini")),
            config_to_ini([] {
              RunConfig c;
              c.item_bank = (std::filesystem::path(LESIONLAB_SOURCE_DIR) / "data/wab_items.json").lexically_normal();
              return c;
            }()));
}

TEST(Config, MissingFileIsConfigError) { EXPECT_THROW(load_config("/nonexistent/run.ini"), ConfigError); }

}  // namespace
}  // namespace lesionlab
