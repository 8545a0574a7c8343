#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrowhead/disorder.hpp"
#include "arrowhead/numerics.hpp"
#include "arrowhead/spectral_stats.hpp"

namespace arrowhead {

// ---- configuration ----

struct ModelSpec {
  std::string type = "box";  // box | semicircle
  double width = 1.0;
  DisorderModel build() const;
  DisorderModel build(double width_override) const;
};

struct SeedSpec {
  std::uint64_t base = 1;
  std::size_t count = 1;
};

struct TransportSpec {
  double gamma_in_tilde = 0.1;  // gamma_in = gamma_in_tilde / N^2
  double gamma_out = 1.0;
  std::size_t in_site = 0;
  std::optional<std::size_t> out_site;  // default N-1
};

struct EscapeSpec {
  double energy = 0.0;   // target site energy
  double window = 0.01;  // sites with |w_j - energy| < window are averaged
  double t_min = 0.05;
  double gt_max = 60.0;  // grid ends at gt_max / g
  std::size_t count = 80;
  bool large_n = true;   // also evaluate the large-N curve
};

// Acceptance-tagged check on a report quantity: value within [min, max],
// or |value - target| <= abs_tol + rel_tol |target|.
struct CheckSpec {
  std::string name;
  std::string quantity;
  std::optional<double> min, max, target;
  double rel_tol = 0.0;
  double abs_tol = 0.0;
};

struct ExperimentConfig {
  std::string kind;
  ModelSpec model;
  std::vector<std::size_t> sizes{100};
  std::vector<double> g_values{1.0};
  std::vector<double> widths;  // sweep over W; defaults to {model.width}
  SeedSpec seeds;
  BinSpec binning;             // lo/hi default to the support
  double sigma = 0.03;
  std::vector<double> q_values{2.0};
  std::vector<double> alpha_values{0.0};
  std::string grid = "random";  // random | equally_spaced
  TransportSpec transport;
  EscapeSpec escape;
  std::vector<CheckSpec> checks;
  std::string output = "arrowhead-out";

  nlohmann::json resolved;  // every field with defaults filled in
  std::string hash;         // FNV-1a of the resolved config without "output"
};

// Schema validation; throws ConfigError naming the offending JSON path.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
std::string config_hash(const nlohmann::json& resolved);

struct ExperimentKind {
  std::string name;
  std::string description;
};
const std::vector<ExperimentKind>& experiment_kinds();

// ---- parallel execution ----

// ARROWHEAD_LAB_WORKERS, else hardware concurrency (at least 1).
std::size_t worker_count();

template <class R>
struct Realization {
  std::optional<R> value;
  std::string error;  // what() of a failed realization
};

// fn(i) for i in [0, count) on `workers` threads pulling indices from a shared
// counter; results land at their own index, so the output does not depend on
// scheduling. A throwing realization is recorded and the rest continue.
template <class R, class F>
std::vector<Realization<R>> parallel_map(std::size_t count, std::size_t workers, F&& fn) {
  std::vector<Realization<R>> out(count);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        out[i].value = fn(i);
      } catch (const std::exception& e) {
        out[i].error = e.what();
      } catch (...) {
        out[i].error = "unknown exception";
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    work();
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  return out;
}

// Mean and standard error over realizations. Values are sorted before the
// pairwise sum, so any permutation of the input gives identical bits.
num::MeanStderr ensemble_average(std::span<const double> values);

// ---- reports ----

struct Quantity {
  std::string name;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
  std::string units;
};

struct CheckResult {
  std::string name;
  std::string quantity;
  double value = 0.0;
  bool passed = false;
  std::string detail;
};

struct Artifact {
  std::string file;  // relative file name
  std::string description;
  std::string units;
  std::string content;  // without the hash header
};

struct EnsembleReport {
  std::string kind;
  std::string config_hash;
  nlohmann::json config;
  std::vector<Quantity> quantities;
  std::vector<Artifact> artifacts;
  std::size_t realizations = 0;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;  // first few, "index: what"
  double wall_time = 0.0;
  std::optional<double> sigma;  // Lorentzian smoothing, when used
  std::vector<CheckResult> checks;

  void add(std::string name, double mean, double stderr_ = 0.0, std::size_t count = 1, std::string units = "");
  const Quantity* find(const std::string& name) const;
  bool passed() const;
  nlohmann::json manifest(const std::string& timestamp) const;
};

void evaluate_checks(const std::vector<CheckSpec>& checks, EnsembleReport& report);

// Writes `content` to path.tmp and renames it over `path`.
void write_atomic(const std::string& path, const std::string& content);

// One file per artifact (CSV gets a "# config_hash: ..." first line) plus
// manifest.json. Everything is staged as temporaries first; on any IO error
// the temporaries are removed and nothing is renamed into place.
std::vector<std::string> emit_plot_data(const EnsembleReport& report, const std::string& dir);

// Reads an artifact back and rejects it unless its embedded hash matches.
std::string read_artifact(const std::string& path, const std::string& expected_hash);

// ---- experiments ----

EnsembleReport run_experiment(const ExperimentConfig& cfg, std::size_t workers);

}  // namespace arrowhead
