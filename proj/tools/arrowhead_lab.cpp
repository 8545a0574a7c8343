#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "arrowhead/ensemble.hpp"
#include "arrowhead/errors.hpp"

namespace {

// exit codes: 0 ok, 1 a check failed, 2 bad config, 3 runtime error
constexpr int kChecksFailed = 1;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

void print_report(const arrowhead::EnsembleReport& rep, const std::vector<std::string>& files) {
  std::cout << "kind " << rep.kind << "  config_hash " << rep.config_hash << "  realizations " << rep.realizations
            << "  failures " << rep.failures << "  wall_time " << std::setprecision(3) << rep.wall_time << " s\n";
  for (const auto& m : rep.failure_messages) std::cout << "  failure " << m << '\n';
  std::cout << std::setprecision(10);
  for (const auto& q : rep.quantities) {
    std::cout << "  " << q.name << " = " << q.mean;
    if (std::isfinite(q.stderr_) && q.stderr_ > 0.0) std::cout << " +- " << q.stderr_;
    if (!q.units.empty()) std::cout << " [" << q.units << ']';
    std::cout << '\n';
  }
  for (const auto& c : rep.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.quantity << " = " << c.value << "; " << c.detail
              << ")\n";
  for (const auto& f : files) std::cout << "wrote " << f << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"arrowhead-lab: disorder-ensemble experiments for the single-excitation cavity model"};
  app.require_subcommand(1);

  std::string config_path, output;
  auto* run = app.add_subcommand("run", "run an experiment and write CSV/JSON artifacts");
  run->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--output,-o", output, "output directory (overrides the config)");

  auto* validate = app.add_subcommand("validate", "check a config against the schema and print the resolved form");
  validate->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* list = app.add_subcommand("list-experiments", "list the experiment kinds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const auto& k : arrowhead::experiment_kinds())
        std::cout << std::left << std::setw(20) << k.name << k.description << '\n';
      return 0;
    }
    const auto cfg = arrowhead::load_config(config_path);
    if (validate->parsed()) {
      std::cout << cfg.resolved.dump(2) << "\nconfig_hash " << cfg.hash << '\n';
      return 0;
    }
    const auto workers = arrowhead::worker_count();
    const auto rep = arrowhead::run_experiment(cfg, workers);
    const auto files = arrowhead::emit_plot_data(rep, output.empty() ? cfg.output : output);
    print_report(rep, files);
    return rep.passed() ? 0 : kChecksFailed;
  } catch (const arrowhead::ConfigError& e) {
    std::cerr << "config error " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
