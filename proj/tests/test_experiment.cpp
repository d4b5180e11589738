#include <doctest.h>

#include "ctca/common.hpp"
#include "ctca/experiment.hpp"

using namespace ctca;

TEST_CASE("desk experiment config survives a config-file round trip") {
    DeskExperimentConfig config;
    config.work_dir = "/tmp/somewhere";
    config.seed = 99;
    config.workers = 3;
    config.symbols = "xyz";
    config.base_writers = 7;
    config.min_chars = 1;
    config.max_chars = 9;
    config.base_divergence = 0.125;
    config.target_divergence = 0.875;
    config.base_iterations = 5000;
    config.base_combo = "B1";
    config.clusters = {16, 64};
    config.budgets = {120, 240};
    config.runs_per_writer = 2;
    config.eval_limit = 40;
    config.aug_combo = "B2C2G3M2";
    config.none_arm = false;
    config.estimator_factor = 2.5;

    const KeyValueConfig kv = KeyValueConfig::parse_text(config.to_config().serialize());
    const DeskExperimentConfig back = DeskExperimentConfig::from_config(kv);
    CHECK(back.work_dir == config.work_dir);
    CHECK(back.seed == config.seed);
    CHECK(back.workers == config.workers);
    CHECK(back.symbols == config.symbols);
    CHECK(back.base_writers == config.base_writers);
    CHECK(back.min_chars == config.min_chars);
    CHECK(back.max_chars == config.max_chars);
    CHECK(back.base_divergence == config.base_divergence);
    CHECK(back.target_divergence == config.target_divergence);
    CHECK(back.base_iterations == config.base_iterations);
    CHECK(back.base_combo == config.base_combo);
    CHECK(back.clusters == config.clusters);
    CHECK(back.budgets == config.budgets);
    CHECK(back.runs_per_writer == config.runs_per_writer);
    CHECK(back.eval_limit == config.eval_limit);
    CHECK(back.aug_combo == config.aug_combo);
    CHECK(back.none_arm == config.none_arm);
    CHECK(back.estimator_factor == config.estimator_factor);
}

TEST_CASE("desk experiment config validation rejects malformed protocols") {
    DeskExperimentConfig config;
    config.validate();

    DeskExperimentConfig bad = config;
    bad.budgets = {240, 640};
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = config;
    bad.clusters = {64, 16, 256};
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = config;
    bad.budgets[0] = 90;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = config;
    bad.aug_combo = "B9";
    CHECK_THROWS_AS(bad.validate(), RegistryError);

    bad = config;
    bad.estimator_factor = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("tiny variant shrinks the protocol but keeps placement knobs") {
    DeskExperimentConfig config;
    config.work_dir = "/tmp/elsewhere";
    config.workers = 5;
    config.seed = 31;
    const DeskExperimentConfig tiny = config.tiny_variant();
    tiny.validate();
    CHECK(tiny.work_dir == config.work_dir);
    CHECK(tiny.workers == config.workers);
    CHECK(tiny.seed == config.seed);
    CHECK(tiny.base_writers < config.base_writers);
    CHECK(tiny.target_writers < config.target_writers);
    CHECK(tiny.base_iterations < config.base_iterations);
    CHECK(tiny.clusters.size() == 1);
    CHECK(tiny.budgets.size() == 1);
    CHECK_FALSE(tiny.none_arm);
}
