// Command-line front end. Exit codes: 0 success, 1 config error, 2 partial
// cell failures, 3 fatal.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srcs/harness.hpp"
#include "srcs/kernels.hpp"
#include "srcs/oracle.hpp"

using namespace srcs;

namespace {

harness::ExperimentConfig load(const std::string& path, const std::vector<std::string>& sets) {
  harness::ExperimentConfig c = path.empty() ? harness::default_config() : harness::load_config(path);
  for (const auto& s : sets) harness::apply_override(c, s);
  c.validate();
  return c;
}

harness::SweepPoint point_for(const harness::ExperimentConfig& c, double snr) {
  return {snr, c.bwp.empty() ? c.array.h_p : c.bwp.front(), c.antennas.empty() ? c.array.n_rx : c.antennas.front()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Super-resolution compressive sensing toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON experiment config");
    sub->add_option("--set", sets, "Override a config key: dotted.path=value")->take_all();
  };

  auto* run = app.add_subcommand("run", "Run the Monte Carlo experiment");
  add_config(run);

  auto* single = app.add_subcommand("single", "Run one trial and print its result row");
  add_config(single);
  std::string alg_name = "proposed";
  double snr = 10.0;
  int trial = 0;
  single->add_option("--algorithm", alg_name, "proposed | proposed-bgg | proposed-gd | omp-ongrid");
  single->add_option("--snr", snr, "SNR [dB]");
  single->add_option("--trial", trial, "Trial index");

  auto* sparsity = app.add_subcommand("sparsity", "First-pass |x| profile, tanh vs bgg prior");
  add_config(sparsity);
  std::string sparsity_out;
  sparsity->add_option("--snr", snr, "SNR [dB]");
  sparsity->add_option("--trial", trial, "Trial index");
  sparsity->add_option("-o,--out", sparsity_out, "Output table (default stdout)");

  auto* oracle_cmd = app.add_subcommand("oracle", "Run the oracle suite");
  std::uint64_t oracle_seed = 7;
  int instances = 50;
  oracle_cmd->add_option("--seed", oracle_seed, "Seed");
  oracle_cmd->add_option("--instances", instances, "Instances per check");

  auto* print = app.add_subcommand("print-config", "Print the effective config (defaults plus overrides)");
  add_config(print);
  bool schema = false;
  print->add_flag("--schema", schema, "Print the key reference instead");

  auto* plot = app.add_subcommand("plot", "Aggregate a results CSV into plot tables");
  std::string csv_in, plot_dir = "plots";
  std::vector<std::string> kinds{"nmse_vs_snr", "rmse_vs_snr", "convergence", "runtime"};
  plot->add_option("--csv", csv_in, "Results CSV")->required();
  plot->add_option("-o,--out", plot_dir, "Output directory");
  plot->add_option("--kind", kinds, "Figure kinds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*print) {
      if (schema) {
        std::cout << harness::config_schema();
      } else {
        std::cout << harness::config_to_json(load(config_path, sets));
      }
      return 0;
    }
    if (*run) {
      const auto c = load(config_path, sets);
      for (const auto& w : harness::framework_config(c, harness::Algorithm::proposed, point_for(c, c.snr_db.front()), 1).warnings())
        std::cerr << "warning: " << w << '\n';
      std::cerr << "simd: " << kernels::isa_name(kernels::active_isa()) << '\n';
      const auto s = harness::run_experiment(c);
      std::cerr << s.rows << " cells, " << s.failures << " failed; wrote " << c.csv_path << " and " << c.summary_path
                << '\n';
      return s.failures > 0 ? 2 : 0;
    }
    if (*single) {
      const auto c = load(config_path, sets);
      const auto row = harness::run_cell(c, harness::algorithm_from_string(alg_name), point_for(c, snr), trial);
      harness::write_csv(std::cout, {row});
      return row.status == "ok" ? 0 : 2;
    }
    if (*sparsity) {
      const auto c = load(config_path, sets);
      const auto prof = harness::sparsity_profile(c, point_for(c, snr), trial);
      if (sparsity_out.empty()) {
        harness::write_sparsity_table(std::cout, prof);
      } else {
        std::ofstream os(sparsity_out);
        harness::write_sparsity_table(os, prof);
      }
      return 0;
    }
    if (*oracle_cmd) {
      const auto reports = oracle::run_oracle_suite(oracle_seed, instances);
      std::size_t failed = 0;
      for (const auto& r : reports) {
        failed += !r.pass;
        std::printf("%s %-28s %-14s rel_err=%.3e\n", r.pass ? "PASS" : "FAIL", r.test.c_str(), r.instance.c_str(),
                    r.rel_error);
      }
      std::printf("%zu/%zu passed\n", reports.size() - failed, reports.size());
      return failed ? 2 : 0;
    }
    if (*plot) {
      std::vector<harness::FigureSpec> specs;
      for (const auto& k : kinds) specs.push_back({k, ""});
      for (const auto& p : harness::emit_plot_data(csv_in, specs, plot_dir)) std::cout << p << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
