#pragma once

// Monte Carlo experiment runner. Every cell is reproducible from the config
// and its derived seed; CSV rows are written in config order regardless of
// the worker count.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "srcs/channel.hpp"
#include "srcs/framework.hpp"

namespace srcs::harness {

constexpr int kCsvSchemaVersion = 1;

enum class Algorithm { proposed, proposed_bgg, proposed_gd, omp_ongrid };
const char* to_string(Algorithm a);
/// Throws ConfigError for unknown names.
Algorithm algorithm_from_string(const std::string& name);

/// Desk-scale calibration; library defaults differ where noted.
struct FrameworkSettings {
  int outer_iterations = 10;
  /// Library default 30.
  int sse_sweeps = 15;
  int srgu_rounds = 50;
  double tol_outer = 1e-3;
  bool early_stop = true;
  bool warm_start = false;
  /// Library default 1.5.
  double sigma_inflation = 100.0;
  ArmijoParams armijo;
  /// Library default threshold 0.5; the desk scenario selects by energy only.
  SupportPolicy support{0.0, 0.01, 0};
  double sse_early_stop_tol = 1e-6;
  /// Library default active_branch.
  RhoInit rho_init = RhoInit::prior_mean;
  /// Empty: zeta derived from the SNR of each cell.
  std::optional<double> zeta;
  /// Empty: lambda = expected paths / grid size.
  std::optional<double> lambda;
  GammaBranches gamma;
  double noise_shape = 1e-6;
  double noise_rate = 1e-6;
};

struct OmpSettings {
  /// 0 selects 2 K.
  Index k_max = 0;
  double stop = 1e-3;
};

struct ExperimentConfig {
  std::string scenario_id = "desk";
  OfdmArrayConfig array;
  /// "ones" or "random" (seeded from the base seed).
  std::string pilot = "ones";
  ScenarioConfig paths;
  std::vector<double> snr_db{0, 5, 10, 15, 20};
  /// BWP counts h_p; empty keeps array.h_p.
  std::vector<Index> bwp;
  /// Antenna counts N_r; empty keeps array.n_rx.
  std::vector<Index> antennas;
  std::vector<Algorithm> algorithms{Algorithm::proposed, Algorithm::proposed_bgg, Algorithm::proposed_gd,
                                    Algorithm::omp_ongrid};
  std::uint64_t base_seed = 1;
  int trials = 50;
  FrameworkSettings framework;
  /// Library default radius 2.
  CoarseInitConfig init{8, 0, 1, 4, 4, 0, 16, 16};
  OmpSettings omp;
  int workers = 1;
  std::string csv_path = "results.csv";
  std::string summary_path = "summary.csv";
  /// Directory for per-cell line-delimited traces; empty disables.
  std::string trace_dir;

  /// Throws ConfigError.
  void validate() const;
};

ExperimentConfig default_config();
/// Full JSON rendering including every default.
std::string config_to_json(const ExperimentConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Applies "a.b.c=value" with value parsed as JSON (bare strings accepted).
void apply_override(ExperimentConfig& c, const std::string& assignment);
/// Human-readable key reference.
std::string config_schema();

struct SweepPoint {
  double snr_db = 0.0;
  Index h_p = 0;
  Index n_rx = 0;
  std::string key() const;
};
std::vector<SweepPoint> sweep_points(const ExperimentConfig& c);

/// hash(base, algorithm id, sweep point, trial); independent of config ordering.
std::uint64_t cell_seed(std::uint64_t base, Algorithm alg, const SweepPoint& p, int trial);
/// Scene (paths and noise) seed, shared by every algorithm so comparisons are paired.
std::uint64_t scene_seed(std::uint64_t base, const SweepPoint& p, int trial);

struct ResultRow {
  std::string scenario_id;
  Algorithm algorithm = Algorithm::proposed;
  SweepPoint point;
  int trial = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double nmse_db = 0.0;
  double rmse_db = 0.0;
  double runtime_s = 0.0;
  int outer_iters = 0;
  Index support_size = 0;
  Index grid_size = 0;
  /// NMSE after each outer iteration (proposed variants only).
  std::vector<double> nmse_trace;
};

struct Scene {
  OfdmArrayConfig array;
  PathSet paths;
  ChannelSample sample;
  GridParams grid0;
};
Scene build_scene(const ExperimentConfig& c, const SweepPoint& p, int trial);
FrameworkConfig framework_config(const ExperimentConfig& c, Algorithm alg, const SweepPoint& p, Index grid_size);

/// One cell; failures are captured in `status`.
ResultRow run_cell(const ExperimentConfig& c, Algorithm alg, const SweepPoint& p, int trial);

struct ExperimentSummary {
  std::size_t rows = 0;
  std::size_t failures = 0;
};

/// All cells, CSV + summary files. Returns counts; throws only on fatal I/O.
ExperimentSummary run_experiment(const ExperimentConfig& c, std::vector<ResultRow>* rows_out = nullptr);

void write_csv(std::ostream& os, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_csv(const std::string& path);
/// Per (algorithm, sweep point): n, failures, median and quartiles of NMSE/RMSE/runtime.
void write_summary(std::ostream& os, const std::vector<ResultRow>& rows);
/// FNV-1a hash of a CSV file with the named columns dropped.
std::uint64_t csv_hash(const std::string& path, const std::vector<std::string>& excluded_columns = {"runtime_s"});

double median(std::vector<double> v);
double quantile(std::vector<double> v, double q);

/// Figure kinds: "nmse_vs_snr", "rmse_vs_snr", "convergence", "runtime".
struct FigureSpec {
  std::string kind = "nmse_vs_snr";
  std::string name;
};
/// Writes one whitespace-separated table per spec into out_dir; returns paths.
/// Throws ConfigError if the CSV lacks a needed column.
std::vector<std::string> emit_plot_data(const std::string& csv_path, const std::vector<FigureSpec>& specs,
                                        const std::string& out_dir);

/// |x_hat_n| after the first SSE pass on the oversampled init grid, tanh and bgg.
struct SparsityProfile {
  RVector tanh_magnitude;
  RVector bgg_magnitude;
  /// Counts of |x_n|^2 >= 0.01 max.
  Index tanh_count = 0;
  Index bgg_count = 0;
};
SparsityProfile sparsity_profile(const ExperimentConfig& c, const SweepPoint& p, int trial);
void write_sparsity_table(std::ostream& os, const SparsityProfile& s);
Index count_significant(const CVector& x, double ratio = 0.01);

}  // namespace srcs::harness
