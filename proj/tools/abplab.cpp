// abplab: run scenarios, refinement studies and print sharp constants.
//
//   abplab run <config> [--out DIR] [--seed N] [--refine L]
//   abplab study <config> --levels a,b,c [--reference D] [--out DIR]
//   abplab constants --n N --m M [--theta T]
//
// Exit status: 0 when every enabled verdict passes, 1 when one fails,
// 2 on configuration or precondition errors.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "abplab/scenario/run.hpp"

namespace {

void print_summary(const abplab::RunReport& r) {
  std::cout << r.scenario.name << ": deficit " << r.inequality.deficit << " (lhs " << r.inequality.lhs << ", rhs "
            << r.inequality.rhs << "), epsilon_h " << r.epsilon_h << '\n';
  for (const auto& c : r.checks) {
    std::cout << "  " << c.status << "  " << c.name;
    if (c.status == "skipped") std::cout << " (" << c.reason << ')';
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical checks of the sharp log-Sobolev inequality for submanifolds with |H| = 1"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> refine;
  auto* run = app.add_subcommand("run", "run one scenario");
  run->add_option("config", config, "scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "directory for report.json, CSVs and plot.gp");
  run->add_option("--seed", seed, "override transport.seed");
  run->add_option("--refine", refine, "override the refinement level");

  std::vector<int> levels;
  double reference = 0.0;
  auto* study = app.add_subcommand("study", "refinement study");
  study->add_option("config", config, "scenario file")->required()->check(CLI::ExistingFile);
  study->add_option("--levels", levels, "refinement levels")->required()->delimiter(',');
  study->add_option("--reference", reference, "exact deficit the errors are measured against");
  study->add_option("--out", out_dir, "output directory");
  study->add_option("--seed", seed, "override transport.seed");

  int n = 0, m = 0;
  double theta = 1.0;
  auto* constants = app.add_subcommand("constants", "print the sharp constants as JSON");
  constants->add_option("--n", n, "intrinsic dimension")->required();
  constants->add_option("--m", m, "codimension")->required();
  constants->add_option("--theta", theta, "asymptotic volume ratio");

  CLI11_PARSE(app, argc, argv);

  try {
    if (constants->parsed()) {
      std::cout << abplab::to_json(abplab::log_sobolev_constant(n, m, theta)).dump(2) << '\n';
      return 0;
    }
    abplab::Scenario s = abplab::load_scenario(config);
    if (seed) s.seed = *seed;
    abplab::RunReport report;
    if (run->parsed()) {
      if (refine) s = abplab::with_level(s, *refine);
      report = abplab::run_scenario(s);
    } else {
      abplab::refinement_study(s, levels, reference, &report);
      for (const auto& row : report.convergence) {
        std::cout << "level " << row.level << "  samples " << row.samples << "  deficit " << row.deficit
                  << "  error " << row.deficit_error << "  order " << row.deficit_order << "  min slack "
                  << row.min_slack << "  slack order " << row.slack_order << '\n';
      }
    }
    print_summary(report);
    if (!out_dir.empty()) {
      for (const auto& path : abplab::emit(report, out_dir)) std::cout << "wrote " << path << '\n';
    }
    return report.all_pass() ? 0 : 1;
  } catch (const abplab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
