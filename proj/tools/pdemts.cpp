// Command-line front end: ingest, extract, train, evaluate, compare.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "pdemts/evalcli.hpp"

namespace {

using pdemts::RunConfig;

struct RunArgs {
  std::string config, out;
  std::uint64_t seed = 0;
  std::vector<std::string> sets;
};

RunConfig build_config(const RunArgs& a) {
  RunConfig c = a.config.empty() ? RunConfig{} : RunConfig::load(a.config);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw pdemts::ConfigError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

void add_run_options(CLI::App* cmd, RunArgs& a, bool seeded) {
  cmd->add_option("--config", a.config, "key = value run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--out", a.out, "report directory")->required();
  cmd->add_option("--set", a.sets, "override a config key (key=value), repeatable");
  if (seeded) cmd->add_option("--seed", a.seed, "random seed")->required();
}

int run_phase(const RunArgs& a, const std::string& phase) {
  RunConfig c = build_config(a);
  c.phase = phase;
  c.seed = a.seed;
  const auto report = pdemts::run_experiment(c, a.out);
  std::ifstream table(std::filesystem::path(a.out) / "table.txt");
  std::cout << table.rdbuf();
  std::cout << "report: " << report.dir << " (" << report.seconds << " s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivariate time-series PDE extraction and physics-informed prediction"};
  app.require_subcommand(1);

  RunArgs ingest_args, extract_args, train_args;
  auto* ingest = app.add_subcommand("ingest", "load, repair, screen and normalize a dataset");
  add_run_options(ingest, ingest_args, false);
  auto* extract = app.add_subcommand("extract", "PDE extraction phase");
  add_run_options(extract, extract_args, true);
  auto* trainc = app.add_subcommand("train", "prediction phase");
  add_run_options(trainc, train_args, true);

  std::string run_dir, eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "recompute a report's metrics from its predictions");
  evaluate->add_option("run", run_dir, "report directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", eval_out, "write the recomputed metrics CSV here");

  std::vector<std::string> compare_dirs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "side-by-side metrics of reports on one split");
  compare->add_option("runs", compare_dirs, "report directories")->required();
  compare->add_option("--out", compare_out, "summary CSV (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      pdemts::run_ingest(build_config(ingest_args), ingest_args.out);
      std::ifstream m(std::filesystem::path(ingest_args.out) / "manifest.txt");
      std::cout << m.rdbuf();
      return 0;
    }
    if (*extract) return run_phase(extract_args, "extract");
    if (*trainc) return run_phase(train_args, "predict");
    if (*evaluate) {
      std::vector<pdemts::MetricsRow> rows;
      const double worst = pdemts::verify_report(run_dir, &rows);
      if (!eval_out.empty()) {
        std::ofstream f(eval_out);
        pdemts::write_metrics_csv(f, rows);
      } else {
        pdemts::write_metrics_table(std::cout, rows);
      }
      std::cout << "max deviation from metrics.csv: " << worst << '\n';
      return worst <= 1e-12 ? 0 : 1;
    }
    if (*compare) {
      if (compare_out.empty()) {
        pdemts::compare_runs(compare_dirs, std::cout);
      } else {
        std::ofstream f(compare_out);
        pdemts::compare_runs(compare_dirs, f);
      }
      return 0;
    }
  } catch (const pdemts::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
