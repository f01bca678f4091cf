#include <doctest.h>

#include <cstdlib>

#include "navlab/common.hpp"
#include "navlab/config.hpp"

using namespace navlab;

TEST_CASE("defaults parse from an empty file") {
  const auto c = RunConfig::parse("");
  CHECK(c.seed == 1);
  CHECK(c.world.width == 32);
  CHECK(c.stages[2].lr == 3e-4);
  CHECK(c.stages[3].tau == 0.9);
  CHECK(c.stages[3].lambda == 1.0);
  CHECK(c.eval_goals == 5);
}

TEST_CASE("overrides and propagation") {
  const auto c = RunConfig::parse(
      "[run]\nseed = 9\n[world]\ncategories = 4\n[reward]\nweight = exp\ngamma = 0.5\n[stage2]\nlr = 0.002\nbatch = 16\n");
  CHECK(c.seed == 9);
  CHECK(c.policy.categories == 4);
  CHECK(c.stages[2].lr == 0.002);
  CHECK(c.stages[2].batch_size == 16);
  const auto s3 = c.stage(3);
  CHECK(s3.stage == 3);
  CHECK(s3.reward.weight_kind == WeightKind::Exp);
  CHECK(s3.reward.gamma == 0.5);
  CHECK(c.stage(2).seed != c.stage(3).seed);
  CHECK_THROWS_AS(c.stage(4), ConfigError);
}

TEST_CASE("bad input is rejected") {
  CHECK_THROWS_AS(RunConfig::parse("[stage2]\nbatch_size = 4\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[stage2]\nlr = fast\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[stage3]\ntau = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[eval]\ndecode = beam\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[map]\npatch = 10\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("[run\n"), ConfigError);
}

TEST_CASE("to_ini round trip and hash") {
  const auto c = RunConfig::parse("[stage1]\nepochs = 7\n[collect]\nmix = 1:1:1\n");
  const auto again = RunConfig::parse(c.to_ini());
  CHECK(again.to_ini() == c.to_ini());
  CHECK(again.hash() == c.hash());
  CHECK(c.hash().size() == 64);
  CHECK(c.hash() != RunConfig::parse("").hash());
}

TEST_CASE("seed override from the environment") {
  RunConfig c = RunConfig::parse("");
  ::setenv("NAVLAB_SEED", "42", 1);
  apply_seed_override(c);
  CHECK(c.seed == 42);
  ::setenv("NAVLAB_SEED", "4x", 1);
  CHECK_THROWS_AS(apply_seed_override(c), ConfigError);
  ::unsetenv("NAVLAB_SEED");
}
