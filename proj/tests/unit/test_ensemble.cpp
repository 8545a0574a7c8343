#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "arrowhead/ensemble.hpp"
#include "arrowhead/errors.hpp"

using namespace arrowhead;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error_path(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.path;
  }
  return "<no error>";
}

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("arrowhead-test-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_SUITE("ensemble-cli") {
  TEST_CASE("config defaults and resolution") {
    const auto c = parse_config(json{{"kind", "spectrum"}});
    CHECK(c.sizes == std::vector<std::size_t>{100});
    CHECK(c.widths == std::vector<double>{1.0});
    CHECK(c.sigma == 0.03);
    CHECK(c.binning.bins == 40);
    CHECK(c.binning.lo == -0.5);
    CHECK(c.transport.gamma_in_tilde == 0.1);
    CHECK(c.transport.gamma_out == 1.0);
    CHECK(c.resolved["model"]["W"] == 1.0);
    CHECK(c.hash.size() == 16);
  }

  TEST_CASE("schema violations name the JSON path") {
    CHECK(config_error_path(json{{"N", 10}}) == "/kind");
    CHECK(config_error_path(json{{"kind", "nope"}}) == "/kind");
    CHECK(config_error_path(json{{"kind", "spectrum"}, {"colour", 1}}) == "/colour");
    CHECK(config_error_path(json{{"kind", "spectrum"}, {"model", {{"W", -1}}}}) == "/model/W");
    CHECK(config_error_path(json{{"kind", "spectrum"}, {"sizes", {10, "x"}}}) == "/sizes/1");
    CHECK(config_error_path(json{{"kind", "spectrum"}, {"N", 1}}) == "/N");
    CHECK(config_error_path(json{{"kind", "spectrum"}, {"seeds", {{"count", 0}}}}) == "/seeds/count");
    CHECK(config_error_path(json{{"kind", "spectrum"}, {"checks", {{{"quantity", "x"}}}}}) == "/checks/0");
    CHECK(config_error_path(json{{"kind", "spectrum"}, {"transport", {{"gamma_out", -2}}}}) == "/transport/gamma_out");
  }

  TEST_CASE("config hash ignores the output directory only") {
    const auto a = parse_config(json{{"kind", "spectrum"}, {"N", 20}, {"output", "x"}});
    const auto b = parse_config(json{{"kind", "spectrum"}, {"N", 20}, {"output", "y"}});
    const auto c = parse_config(json{{"kind", "spectrum"}, {"N", 21}, {"output", "x"}});
    CHECK(a.hash == b.hash);
    CHECK(a.hash != c.hash);
  }

  TEST_CASE("ensemble average is order independent") {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> d(1.0, 3.0);
    std::vector<double> v(1001);
    for (auto& x : v) x = d(gen);
    const auto m = ensemble_average(v);
    for (int k = 0; k < 5; ++k) {
      std::shuffle(v.begin(), v.end(), gen);
      const auto p = ensemble_average(v);
      CHECK(p.mean == m.mean);
      CHECK(p.stderr_ == m.stderr_);
    }
    const std::vector<double> c(10, 4.25);
    CHECK(ensemble_average(c).stderr_ == 0.0);
    CHECK_THROWS_AS(ensemble_average(std::vector<double>{}), EmptyEnsembleError);
  }

  TEST_CASE("parallel map keeps index order and isolates failures") {
    const auto fn = [](std::size_t i) -> double {
      if (i == 7) throw std::runtime_error("boom");
      return static_cast<double>(i * i);
    };
    const auto a = parallel_map<double>(20, 1, fn);
    const auto b = parallel_map<double>(20, 4, fn);
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(a[i].value == b[i].value);
      if (i != 7) CHECK(*b[i].value == static_cast<double>(i * i));
    }
    CHECK_FALSE(b[7].value);
    CHECK(b[7].error == "boom");
  }

  TEST_CASE("worker count from the environment") {
    setenv("ARROWHEAD_LAB_WORKERS", "3", 1);
    CHECK(worker_count() == 3);
    setenv("ARROWHEAD_LAB_WORKERS", "zero", 1);
    CHECK_THROWS_AS(worker_count(), ConfigError);
    unsetenv("ARROWHEAD_LAB_WORKERS");
    CHECK(worker_count() >= 1);
  }

  TEST_CASE("checks") {
    EnsembleReport r;
    r.add("x", 0.98);
    evaluate_checks({{"near one", "x", {}, {}, 1.0, 0.0, 0.05}, {"below", "x", {}, 0.5, {}, 0.0, 0.0},
                     {"missing", "y", 0.0, {}, {}, 0.0, 0.0}},
                    r);
    REQUIRE(r.checks.size() == 3);
    CHECK(r.checks[0].passed);
    CHECK_FALSE(r.checks[1].passed);
    CHECK_FALSE(r.checks[2].passed);
    CHECK_FALSE(r.passed());
  }

  TEST_CASE("runs are reproducible across worker counts") {
    const auto cfg = parse_config(json{{"kind", "spectrum"}, {"N", 30}, {"g_values", {0.5, 2.0}}, {"seeds", {{"count", 6}}},
                                       {"checks", {{{"quantity", "interlacing_certified@N=30,g=0.5,W=1"}, {"min", 1.0}}}}});
    const auto a = run_experiment(cfg, 1);
    const auto b = run_experiment(cfg, 3);
    CHECK(a.realizations == 12);
    CHECK(a.failures == 0);
    REQUIRE(a.quantities.size() == b.quantities.size());
    for (std::size_t i = 0; i < a.quantities.size(); ++i) {
      CHECK(a.quantities[i].name == b.quantities[i].name);
      CHECK(a.quantities[i].mean == b.quantities[i].mean);
    }
    CHECK(a.passed());
    const auto d1 = scratch_dir("run1"), d2 = scratch_dir("run2");
    const auto files = emit_plot_data(a, d1.string());
    emit_plot_data(b, d2.string());
    CHECK(files.size() == 2);
    const auto csv1 = slurp(d1 / "spectrum.csv");
    CHECK(csv1 == slurp(d2 / "spectrum.csv"));
    CHECK(csv1.rfind("# config_hash: " + cfg.hash + "\n", 0) == 0);
    auto m1 = json::parse(slurp(d1 / "manifest.json"));
    auto m2 = json::parse(slurp(d2 / "manifest.json"));
    CHECK(m1["config"] == cfg.resolved);
    m1.erase("timestamp");
    m2.erase("timestamp");
    CHECK(m1 == m2);
    // the aggregator rejects artifacts from another config
    CHECK_NOTHROW(read_artifact((d1 / "spectrum.csv").string(), cfg.hash));
    CHECK_THROWS_AS(read_artifact((d1 / "spectrum.csv").string(), "0000000000000000"), ConfigError);
    CHECK_NOTHROW(read_artifact((d1 / "manifest.json").string(), cfg.hash));
    fs::remove_all(d1);
    fs::remove_all(d2);
  }

  TEST_CASE("failed writes leave nothing behind") {
    EnsembleReport r;
    r.config_hash = "abc";
    r.artifacts.push_back({"ok.csv", "", "", "x\n1\n"});
    r.artifacts.push_back({"sub/missing/dir.csv", "", "", "x\n"});
    const auto d = scratch_dir("rollback");
    CHECK_THROWS(emit_plot_data(r, d.string()));
    CHECK(fs::is_empty(d));
    fs::remove_all(d);
  }

  TEST_CASE("every experiment kind runs on a tiny config") {
    const std::vector<json> configs = {
        {{"kind", "shifts"}, {"N", 40}, {"seeds", {{"count", 3}}}},
        {{"kind", "spacings"}, {"N", 30}, {"alpha_values", {0.0, 1000.0}}, {"seeds", {{"count", 20}}}},
        {{"kind", "ipr"}, {"N", 40}, {"seeds", {{"count", 3}}}},
        {{"kind", "fractal"}, {"sizes", {40, 80, 160}}, {"seeds", {{"count", 2}}}},
        {{"kind", "spectral-function"}, {"N", 40}, {"seeds", {{"count", 3}}}, {"binning", {{"bins", 10}}}},
        {{"kind", "covariance"}, {"N", 40}, {"seeds", {{"count", 5}}}, {"binning", {{"bins", 6}}}},
        {{"kind", "photon-weights"}, {"N", 40}, {"seeds", {{"count", 3}}}},
        {{"kind", "escape"}, {"N", 200}, {"escape", {{"window", 0.02}, {"count", 20}, {"large_n", false}}}},
        {{"kind", "escape-sweep"}, {"N", 100}, {"g_values", {0.5, 2.0}}, {"seeds", {{"count", 4}}}},
        {{"kind", "transport"}, {"N", 20}, {"seeds", {{"count", 2}}}},
        {{"kind", "transport-sweep"}, {"sizes", {20, 40}}, {"seeds", {{"count", 3}}}},
    };
    for (const auto& j : configs) {
      CAPTURE(j.dump());
      const auto rep = run_experiment(parse_config(j), 2);
      CHECK(rep.failures == 0);
      CHECK_FALSE(rep.quantities.empty());
      CHECK_FALSE(rep.artifacts.empty());
      for (const auto& q : rep.quantities) CHECK(q.name.size() > 0);
    }
  }
}
