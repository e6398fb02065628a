// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "ecolora/config.hpp"
#include "ecolora/error.hpp"
#include "ecolora/experiment.hpp"
#include "ecolora/metrics.hpp"

using namespace ecolora;
namespace fs = std::filesystem;

namespace {

RunConfig small_config() {
    RunConfig c;
    c.model.layers = {{16, 8}, {4, 16}};
    c.model.rank = 2;
    c.data.classes = 4;
    c.data.dim = 8;
    c.data.samples = 600;
    c.fl.num_clients = 20;
    c.fl.clients_per_round = 5;
    c.fl.rounds = 6;
    c.compute_seconds = 0.25;
    c.seed = 11;
    c.data.seed = 11;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("ecolora_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("config defaults follow the reference hyperparameters") {
    const RunConfig c;
    CHECK(c.fl.num_clients == 100);
    CHECK(c.fl.clients_per_round == 10);
    CHECK(c.fl.rounds == 40);
    CHECK(c.dirichlet_alpha == 0.5);
    CHECK(c.eco.num_segments == 5);
    CHECK(c.eco.schedule.k_max == 0.95);
    CHECK(c.eco.schedule.k_min_A == 0.6);
    CHECK(c.eco.schedule.k_min_B == 0.5);
    CHECK(c.data.classes == 10);
    CHECK(c.data.dim == 32);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("config validation names the field") {
    auto expect_field = [](RunConfig c, const std::string& field) {
        try {
            c.validate();
            FAIL("expected InvalidConfig for " << field);
        } catch (const InvalidConfig& e) {
            CHECK(std::string(e.what()).find(field) != std::string::npos);
        }
    };
    RunConfig c;
    c.fl.clients_per_round = 101;
    expect_field(c, "fl.clients_per_round");
    c = {};
    c.eco.num_segments = 11;
    expect_field(c, "ecolora.num_segments");
    c = {};
    c.eco.schedule.k_min_B = 1.5;
    expect_field(c, "ecolora.k_min_B");
    c = {};
    c.model.rank = 40;
    expect_field(c, "model.rank");
    c = {};
    c.eco.beta = 0.0;
    expect_field(c, "ecolora.beta");
    c = {};
    c.model.layers = {{10, 16}};
    expect_field(c, "model.layers");
}

TEST_CASE("config JSON round-trip, partial files and infinite beta") {
    RunConfig c = small_config();
    c.eco.beta = std::numeric_limits<double>::infinity();
    c.scenario = scenario_preset("0.2/1");
    const auto j = to_json(c);
    CHECK(j["ecolora"]["beta"] == "inf");
    const auto back = config_from_json(nlohmann::json::parse(j.dump()));
    CHECK(to_json(back) == j);

    const auto partial = config_from_json(nlohmann::json::parse(R"({"fl": {"rounds": 3}, "network": "5/25"})"));
    CHECK(partial.fl.rounds == 3);
    CHECK(partial.fl.num_clients == 100);
    CHECK(partial.scenario.uplink_bps == 5e6);
    CHECK(partial.compute_seconds == 0.0);
    const auto measured = config_from_json(nlohmann::json::parse(R"({"compute_seconds": null})"));
    CHECK_FALSE(measured.compute_seconds.has_value());
    CHECK(to_json(config_from_json(to_json(measured))) == to_json(measured));

    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"fl": {"rounds": "many"}})")), InvalidConfig);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"data": {"task": "poetry"}})")), InvalidConfig);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("sample_clients: distinct, sorted, deterministic, fresh per round") {
    std::set<std::vector<std::uint32_t>> distinct;
    for (int t = 0; t < 50; ++t) {
        const auto s = sample_clients(100, 10, t, 3);
        CHECK(s.size() == 10);
        CHECK(std::is_sorted(s.begin(), s.end()));
        CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
        CHECK(s.back() < 100);
        CHECK(s == sample_clients(100, 10, t, 3));
        distinct.insert(s);
    }
    CHECK(distinct.size() == 50);
    CHECK(sample_clients(5, 5, 0, 1) == std::vector<std::uint32_t>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(sample_clients(3, 4, 0, 0), InvalidArgument);

    // Every client is picked at roughly the same rate.
    std::vector<int> hits(20, 0);
    for (int t = 0; t < 4000; ++t) {
        for (auto id : sample_clients(20, 5, t, 9)) ++hits[id];
    }
    for (int h : hits) CHECK(h == doctest::Approx(1000).epsilon(0.1));
}

TEST_CASE("run_experiment: zero rounds") {
    auto c = small_config();
    c.fl.rounds = 0;
    const auto r = run_experiment(c);
    CHECK(r.reports.empty());
    CHECK(r.summary.rounds == 0);
    CHECK(r.summary.final_loss == r.summary.initial_loss);
    CHECK(r.summary.initial_loss > 0.0);
    CHECK(reports_to_csv(r.reports).find('\n') == reports_to_csv(r.reports).size() - 1);
}

TEST_CASE("run_experiment: deterministic and accounting identities hold") {
    auto c = small_config();
    const auto a = run_experiment(c);
    c.threads = 4;
    const auto b = run_experiment(c);
    CHECK(reports_to_csv(a.reports) == reports_to_csv(b.reports));
    CHECK(summary_to_json(a.summary) == summary_to_json(b.summary));

    std::uint64_t up_dense = 0, up_params = 0, up_bytes = 0;
    for (const auto& r : a.reports) {
        for (const auto& cl : r.clients) {
            up_dense += cl.upload_dense;
            up_params += cl.upload_nonzeros;
            up_bytes += cl.upload_bytes;
            // Encoded size against the dense f16 equivalent plus headers. A Golomb
            // position costs at least one bit, so the bound carries 17 bits per
            // scalar rather than 16.
            const std::size_t headers = kMessageHeaderBytes + 2 * kTensorHeaderBytes;
            CHECK(cl.upload_bytes <= (cl.upload_dense * 17 + 7) / 8 + headers + 2);
        }
    }
    CHECK(a.summary.upload_dense == up_dense);
    CHECK(a.summary.upload_params == up_params);
    CHECK(a.summary.upload_bytes == up_bytes);
    CHECK(a.summary.total_params() == a.summary.upload_params + a.summary.download_params);
    REQUIRE(a.summary.times.size() == 4);
    CHECK(a.summary.times[0].scenario == c.scenario.name);
}

TEST_CASE("fedavg_config switches everything off") {
    const auto b = fedavg_config(RunConfig{});
    CHECK_FALSE(b.eco.segments);
    CHECK_FALSE(b.eco.sparsify);
    CHECK_FALSE(b.eco.encode);
    CHECK(std::isinf(b.eco.beta));
    CHECK_NOTHROW(b.validate());
}

TEST_CASE("metrics: CSV header, JSON summary round-trip and atomic overwrite") {
    const auto dir = scratch("metrics");
    ExperimentResult empty;
    write_metrics(empty, dir);
    std::string header;
    for (std::size_t i = 0; i < csv_columns().size(); ++i) header += (i ? "," : "") + csv_columns()[i];
    CHECK(slurp(dir / "rounds.csv") == header + "\n");

    const auto r = run_experiment(small_config());
    write_metrics(r, dir);
    write_metrics(r, dir);
    CHECK_FALSE(fs::exists(dir / "rounds.csv.tmp"));
    const auto parsed = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary_to_json(summary_from_json(parsed)) == summary_to_json(r.summary));
    CHECK(summary_from_json(parsed).final_loss == r.summary.final_loss);

    CHECK_THROWS_AS(write_metrics(r, "/proc/ecolora_cannot_write_here"), IoError);
}

// Set ECOLORA_REGENERATE_GOLDEN=1 to rewrite the fixture.
TEST_CASE("golden rounds CSV") {
    const fs::path golden = fs::path(ECOLORA_GOLDEN_DIR) / "rounds_small.csv";
    const auto csv = reports_to_csv(run_experiment(small_config()).reports);
    if (std::getenv("ECOLORA_REGENERATE_GOLDEN")) write_file_atomic(golden, csv);
    REQUIRE(fs::exists(golden));
    CHECK(slurp(golden) == csv);
}

TEST_CASE("B grows more unequal than A over training") {
    const auto r = run_experiment(RunConfig{});
    const auto& first = r.reports.front();
    const auto& last = r.reports.back();
    INFO("A ", first.gini_A, " -> ", last.gini_A, ", B ", first.gini_B, " -> ", last.gini_B);
    CHECK(last.gini_B - first.gini_B > last.gini_A - first.gini_A);
}

TEST_CASE("ablation suite structure") {
    auto c = small_config();
    c.fl.rounds = 8;
    const auto rows = ablation_suite(c);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].variant == "Full");
    CHECK(rows[1].variant == "w/o R.R. Segment");
    CHECK(rows[2].variant == "w/o Sparsification");
    CHECK(rows[3].variant == "w/ Fixed Sparsification");
    CHECK(rows[4].variant == "w/o Encoding");
    const auto& full = rows[0].result;
    const auto& noenc = rows[4].result;
    CHECK(noenc.summary.upload_bytes > full.summary.upload_bytes);
    for (std::size_t t = 0; t < full.reports.size(); ++t) CHECK(noenc.reports[t].global_loss == full.reports[t].global_loss);
    const double n_s = static_cast<double>(c.eco.num_segments);
    CHECK(static_cast<double>(rows[1].result.summary.upload_dense) ==
          doctest::Approx(n_s * static_cast<double>(full.summary.upload_dense)).epsilon(0.01));
    const double target = static_cast<double>(full.summary.upload_params);
    CHECK(std::abs(static_cast<double>(rows[3].result.summary.upload_params) - target) <= 0.02 * target);
}

TEST_CASE("command-line interface") {
    const std::string cli = ECOLORA_CLI;
    const auto dir = scratch("cli");
    const auto cfg_path = dir / "cfg.json";
    write_file_atomic(cfg_path, to_json(small_config()).dump());

    const auto out = dir / "run";
    const std::string run = cli + " run --config " + cfg_path.string() + " --out " + out.string() +
                            " --scenario 2/10 --seed 4 > " + (dir / "stdout.txt").string();
    CHECK(std::system(run.c_str()) == 0);
    CHECK(fs::exists(out / "rounds.csv"));
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary["times"][0]["scenario"] == "2/10");

    const std::string noenc = cli + " run --config " + cfg_path.string() + " --out " + (dir / "noenc").string() +
                              " --no-encode --no-segments --no-sparsify > /dev/null";
    CHECK(std::system(noenc.c_str()) == 0);

    CHECK(std::system((cli + " constants --eta 0.3 > /dev/null").c_str()) == 0);
    CHECK(std::system((cli + " codec-bench -k 0.1 -n 1000 > " + (dir / "bench.txt").string()).c_str()) == 0);
    CHECK(slurp(dir / "bench.txt").find("divisor M         7") != std::string::npos);
    const std::string dump = cli + " dump-wire " + (fs::path(ECOLORA_GOLDEN_DIR) / "wire_v1.bin").string() + " > " +
                             (dir / "dump.txt").string();
    CHECK(std::system(dump.c_str()) == 0);
    CHECK(slurp(dir / "dump.txt").find("version") != std::string::npos);

    // Invalid configuration exits non-zero with the field named on stderr.
    const std::string bad = cli + " run --config " + cfg_path.string() + " --out " + (dir / "bad").string() +
                            " --scenario 9/9 2> " + (dir / "err.txt").string();
    CHECK(std::system(bad.c_str()) != 0);
    auto badcfg = small_config();
    badcfg.fl.clients_per_round = 50;
    write_file_atomic(dir / "bad.json", to_json(badcfg).dump());
    const std::string bad2 = cli + " run --config " + (dir / "bad.json").string() + " 2> " + (dir / "err2.txt").string();
    CHECK(std::system(bad2.c_str()) != 0);
    CHECK(slurp(dir / "err2.txt").find("fl.clients_per_round") != std::string::npos);
}
