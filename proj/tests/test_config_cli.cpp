#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "refctl/cli.hpp"
#include "refctl/config.hpp"
#include "refctl/errors.hpp"
#include "refctl/json_writer.hpp"

using namespace refctl;
namespace fs = std::filesystem;

namespace {

const char* kOuConfig = R"({
  "schema_version": 1,
  "diffusion": {"kind": "ou", "mu": 0.1, "theta": 1.0, "sigma": 0.894427190999915878},
  "reward": {"r": 0.05, "kappa": 1.0, "eta": {"kind": "constant", "value": 0.5}},
  "grid": {"cells": 2000}
})";

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("refctl_test_" + name);
    fs::remove_all(dir);
    return dir;
}

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "refctl");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string write_config(const fs::path& dir, const std::string& text) {
    fs::create_directories(dir);
    const auto file = dir / "config.json";
    std::ofstream(file) << text;
    return file.string();
}

}  // namespace

TEST_CASE("JSON writer prints 17 significant digits and nulls non-finite values") {
    CHECK(JsonWriter::format_double(0.1) == "0.10000000000000001");
    CHECK(JsonWriter::format_double(1.0 / 0.0) == "null");
    JsonWriter w;
    w.begin_object();
    w.field("pi", 3.141592653589793);
    w.field("name", std::string("a\"b\n"));
    w.key("list");
    w.value(std::vector<double>{1.0, 2.5});
    w.end_object();
    const auto doc = nlohmann::json::parse(w.str());
    CHECK(doc["pi"].get<double>() == 3.141592653589793);
    CHECK(doc["name"] == "a\"b\n");
    CHECK(doc["list"].size() == 2);
}

TEST_CASE("configuration parses and builds the OU problem") {
    const auto cfg = parse_config(kOuConfig);
    CHECK(cfg.schema_version == kConfigSchemaVersion);
    const auto ou = cfg.ou_params();
    REQUIRE(ou.has_value());
    CHECK(ou->kappa == 1.0);
    CHECK(cfg.build_grid().size() > 1000);
}

TEST_CASE("configuration errors name the offending field") {
    // Each case patches one field of an otherwise valid document.
    auto patched = [](const char* patch) {
        auto doc = nlohmann::json::parse(kOuConfig);
        doc.merge_patch(nlohmann::json::parse(patch));
        return doc.dump();
    };
    auto expect = [](const std::string& text, const std::string& field) {
        try {
            parse_config(text);
            FAIL("no error for " << field);
        } catch (const InputError& e) {
            const std::string msg = e.what();
            INFO(msg);
            CHECK(msg.find(field) != std::string::npos);
        }
    };
    expect(patched(R"({"schema_version": 2})"), "schema_version");
    expect(patched(R"({"diffusion": {"sigma": -1}})"), "diffusion.sigma");
    expect(patched(R"({"diffusion": {"kind": "cir"}})"), "diffusion.kind");
    expect(patched(R"({"reward": {"eta": {"value": "x"}}})"), "reward.eta.value");
    expect(patched(R"({"unknown_block": 1})"), "unknown_block");
    expect(patched(R"({"sim": {"dt": 0}})"), "sim.dt");
    expect(R"({"reward": {}})", "schema_version");
    expect("{not json", "JSON");
    CHECK_THROWS_AS(parse_config(patched(R"({"reward": {"kappa": 0.1}})")), ModelError);
}

TEST_CASE("value lists parse and reject malformed entries") {
    CHECK(parse_value_list("0.5, 1,2e-1") == std::vector<double>{0.5, 1.0, 0.2});
    CHECK_THROWS_AS(parse_value_list("1,,2"), InputError);
    CHECK_THROWS_AS(parse_value_list("1,abc"), InputError);
}

TEST_CASE("solve writes the solution and value function") {
    const auto dir = scratch("solve");
    const auto config = write_config(dir, kOuConfig);
    CHECK(run({"solve", "--config", config, "--out", (dir / "out").string()}) == kExitOk);
    const auto doc = nlohmann::json::parse(slurp(dir / "out" / "solution.json"));
    CHECK(doc["case"] == "A");
    CHECK(doc["regime"] == "ReflectAtBand");
    CHECK(std::abs(doc["b_star"].get<double>() - 0.91) < 0.01);
    CHECK(doc["hjb"]["passed"] == true);
    const auto csv = slurp(dir / "out" / "value_function.csv");
    CHECK(csv.rfind("x,v,v_prime", 0) == 0);
    fs::remove_all(dir);
}

TEST_CASE("Case C configuration solves to the no-action regime") {
    const auto dir = scratch("case_c");
    const auto config = write_config(dir, R"({
      "schema_version": 1,
      "diffusion": {"kind": "brownian", "mu": 0.0, "sigma": 1.4142135623730951},
      "reward": {"r": 1.0, "kappa": 1.0, "eta": {"kind": "exp-decay", "scale": 1.0, "rate": 2.0}},
      "grid": {"cells": 1000}
    })");
    CHECK(run({"solve", "--config", config, "--out", dir.string()}) == kExitOk);
    const auto doc = nlohmann::json::parse(slurp(dir / "solution.json"));
    CHECK(doc["regime"] == "NoAction");
    CHECK(doc["b_star"].is_null());
    fs::remove_all(dir);
}

TEST_CASE("exit codes follow the input and numerical error contract") {
    const auto dir = scratch("exit");
    CHECK(run({"solve", "--config", (dir / "missing.json").string()}) == kExitInput);
    const auto bad = write_config(dir, R"({"schema_version": 1, "diffusion": {"kind": "ou", "sigma": 0}})");
    CHECK(run({"solve", "--config", bad, "--out", dir.string()}) == kExitInput);
    const auto good = write_config(dir / "g", kOuConfig);
    CHECK(run({"sweep", "--config", good, "--out", dir.string(), "--param", "kappa", "--values", ""}) ==
          kExitInput);
    CHECK(run({"sweep", "--config", good, "--out", dir.string(), "--param", "mu", "--values", "1"}) == kExitInput);
    CHECK(run({"bogus"}) == kExitInput);
    // A grid too short to hold the band is a numerical failure.
    CHECK(run({"solve", "--config", good, "--out", dir.string(), "--grid-hi", "0.5"}) == kExitNumerical);
    fs::remove_all(dir);
}

TEST_CASE("kappa sweep reports the proven monotonicity") {
    const auto dir = scratch("sweep");
    const auto config = write_config(dir, kOuConfig);
    CHECK(run({"sweep", "--config", config, "--out", dir.string(), "--param", "kappa", "--values",
               "0.6,0.8,1.0,1.5,2.0"}) == kExitOk);
    const auto doc = nlohmann::json::parse(slurp(dir / "sweep.json"));
    bool found = false;
    for (const auto& v : doc["verdicts"])
        if (v["name"] == "b* nondecreasing in kappa") {
            found = true;
            CHECK(v["holds"] == true);
        }
    CHECK(found);
    CHECK(slurp(dir / "sweep.csv").rfind("kappa,b_star", 0) == 0);
    fs::remove_all(dir);
}

TEST_CASE("simulate output is byte-identical for a fixed seed") {
    const auto dir = scratch("sim");
    const auto config = write_config(dir, R"({
      "schema_version": 1,
      "diffusion": {"kind": "ou", "mu": 0.1, "theta": 1.0, "sigma": 0.894427190999915878},
      "reward": {"r": 0.05, "kappa": 1.0, "eta": {"kind": "constant", "value": 0.5}},
      "grid": {"cells": 2000},
      "sim": {"dt": 0.01, "n_paths": 256, "horizon_T": 5.0, "x": [0.0, 0.4]}
    })");
    CHECK(run({"simulate", "--config", config, "--out", (dir / "a").string(), "--seed", "11"}) == kExitOk);
    CHECK(run({"simulate", "--config", config, "--out", (dir / "b").string(), "--seed", "11"}) == kExitOk);
    CHECK(run({"simulate", "--config", config, "--out", (dir / "c").string(), "--seed", "12"}) == kExitOk);
    const auto a = slurp(dir / "a" / "simulation.json");
    CHECK(a == slurp(dir / "b" / "simulation.json"));
    CHECK(a != slurp(dir / "c" / "simulation.json"));
    const auto doc = nlohmann::json::parse(a);
    CHECK(doc["seed"] == 11);
    CHECK(doc["estimates"].size() == 2);
    fs::remove_all(dir);
}
