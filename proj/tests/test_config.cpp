#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "amber/config.hpp"

using namespace amber;

namespace {

json minimal_config() {
    json j;
    j["model.input_dim"] = 8;
    j["model.patch_len"] = 4;
    j["model.hidden_dim"] = 6;
    j["model.num_classes"] = 4;
    j["schedule.tasks"] = json::array({json::array({0, 1}), json::array({2, 3})});
    return j;
}

std::string error_text(const json& j) {
    try {
        parse_run_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("a minimal config parses with documented defaults") {
    const RunConfig rc = parse_run_config(minimal_config());
    REQUIRE(rc.train.tau == 0.1);
    REQUIRE(rc.train.alpha == 0.9);
    REQUIRE(rc.train.lambda == 1.0);
    REQUIRE(rc.train.m == 2);
    REQUIRE(rc.train.adam.lr == 1e-3);
    REQUIRE(rc.train.adam.beta1 == 0.9);
    REQUIRE(rc.train.adam.beta2 == 0.999);
    REQUIRE(rc.train.adam.eps == 1e-8);
    REQUIRE(rc.train.use_apa);
    REQUIRE(rc.train.use_mf);
    REQUIRE_FALSE(rc.train.freeze_feedback);
    REQUIRE(rc.train.replay_batch == rc.schedule.batch_size);
    REQUIRE(rc.model.pooling == Pooling::mean);
    REQUIRE(rc.train.inference == InferenceRule::proto_nearest);
    REQUIRE(rc.data.source == DataConfig::Source::synthetic);
    REQUIRE(rc.data.synthetic.seed == rc.train.seed);
    REQUIRE(rc.data.synthetic.num_classes == 4);
    REQUIRE(rc.data.synthetic.d == 8);
    REQUIRE_FALSE(rc.hash.empty());
}

TEST_CASE("config errors name the offending field") {
    json j = minimal_config();
    j["train.tau"] = -1.0;
    REQUIRE(error_text(j).find("train.tau") != std::string::npos);

    j = minimal_config();
    j["model.patch_len"] = 3;
    REQUIRE(error_text(j).find("model.patch_len") != std::string::npos);

    j = minimal_config();
    j["train.alpha"] = 1.5;
    REQUIRE(error_text(j).find("train.alpha") != std::string::npos);

    j = minimal_config();
    j["bogus.key"] = 1;
    REQUIRE(error_text(j).find("bogus.key") != std::string::npos);

    j = minimal_config();
    j["train.lr"] = "fast";
    REQUIRE(error_text(j).find("train.lr") != std::string::npos);

    j = minimal_config();
    j.erase("schedule.tasks");
    REQUIRE(error_text(j).find("schedule.tasks") != std::string::npos);

    j = minimal_config();
    j["schedule.tasks"] = json::array({json::array({0, 1}), json::array({1, 2})});
    REQUIRE(error_text(j).find("schedule.tasks") != std::string::npos);

    j = minimal_config();
    j["data.source"] = "cifar10";
    REQUIRE(error_text(j).find("data.train_files") != std::string::npos);

    j = minimal_config();
    j["data.stddev"] = 0.0;
    REQUIRE(error_text(j).find("data.stddev") != std::string::npos);
}

TEST_CASE("overrides replace values, parsing JSON where possible") {
    json j = minimal_config();
    apply_override(j, "train.tau=0.25");
    apply_override(j, "model.pooling=last");
    apply_override(j, "train.use_mf=false");
    apply_override(j, "schedule.tasks=[[0,1,2,3]]");
    const RunConfig rc = parse_run_config(j);
    REQUIRE(rc.train.tau == 0.25);
    REQUIRE(rc.model.pooling == Pooling::last);
    REQUIRE_FALSE(rc.train.use_mf);
    REQUIRE(rc.schedule.tasks == std::vector<std::vector<std::size_t>>{{0, 1, 2, 3}});
    REQUIRE_THROWS_AS(apply_override(j, "no-equals-sign"), ConfigError);
}

TEST_CASE("the config hash tracks semantic changes only") {
    const RunConfig a = parse_run_config(minimal_config());
    const RunConfig b = parse_run_config(minimal_config());
    REQUIRE(a.hash == b.hash);

    json changed = minimal_config();
    changed["train.tau"] = 0.2;
    REQUIRE(parse_run_config(changed).hash != a.hash);

    // Spelling out a default leaves the resolved hash unchanged.
    json with_default = minimal_config();
    with_default["train.tau"] = 0.1;
    REQUIRE(parse_run_config(with_default).hash == a.hash);
}

TEST_CASE("synthetic datasets honor the parsed spec") {
    json j = minimal_config();
    j["data.samples_per_class"] = 30;
    j["data.separation"] = 7.5;
    const RunConfig rc = parse_run_config(j);
    const auto [train, test] = load_datasets(rc);
    REQUIRE(train.size() == 4 * 24);
    REQUIRE(test.size() == 4 * 6);
    REQUIRE(train.d == 8);
}
