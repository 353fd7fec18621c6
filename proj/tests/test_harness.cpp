#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "srcs/baseline.hpp"
#include "srcs/harness.hpp"
#include "test_util.hpp"

using namespace srcs;
using namespace srcs::harness;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("srcs_harness_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Small enough to run a handful of cells in well under a second.
ExperimentConfig tiny_config(const std::filesystem::path& dir) {
  ExperimentConfig c = default_config();
  c.array.n_rx = 8;
  c.array.m_sub = 8;
  c.array.h_p = 2;
  c.paths.k_paths = 2;
  c.paths.delay_span_bins = 4.0;
  c.snr_db = {10, 20};
  c.algorithms = {Algorithm::proposed, Algorithm::omp_ongrid};
  c.trials = 2;
  c.framework.outer_iterations = 2;
  c.csv_path = (dir / "results.csv").string();
  c.summary_path = (dir / "summary.csv").string();
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ResultRow sample_row(Algorithm alg, double snr, int trial, double nmse) {
  ResultRow r;
  r.scenario_id = "desk";
  r.algorithm = alg;
  r.point = {snr, 4, 32};
  r.trial = trial;
  r.seed = 1234567890123ull + static_cast<std::uint64_t>(trial);
  r.nmse_db = nmse;
  r.rmse_db = nmse - 3.0;
  r.runtime_s = 0.25;
  r.outer_iters = 3;
  r.support_size = 5;
  r.grid_size = 40;
  r.nmse_trace = {nmse + 2.0, nmse + 1.0, nmse};
  return r;
}

}  // namespace

TEST_CASE("config survives a JSON round trip") {
  ExperimentConfig c = default_config();
  c.scenario_id = "round,trip";
  c.snr_db = {-5, 7.5};
  c.bwp = {2, 8};
  c.algorithms = {Algorithm::proposed_gd};
  c.framework.zeta = 0.05;
  c.base_seed = 99;
  const ExperimentConfig d = config_from_json(config_to_json(c));
  CHECK(config_to_json(d) == config_to_json(c));
  CHECK(d.scenario_id == "round,trip");
  CHECK(d.bwp == std::vector<Index>{2, 8});
  REQUIRE(d.framework.zeta.has_value());
  CHECK(*d.framework.zeta == 0.05);
  CHECK(!d.framework.lambda.has_value());
}

TEST_CASE("config parsing keeps defaults and rejects unknown keys") {
  const ExperimentConfig d = config_from_json("{}");
  CHECK(config_to_json(d) == config_to_json(default_config()));
  CHECK_THROWS_AS(config_from_json(R"({"framework":{"outer_iteratons":3}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"bogus":1})"), ConfigError);
  CHECK_THROWS_AS(config_from_json("not json"), ConfigError);
  CHECK_FALSE(config_schema().empty());
}

TEST_CASE("dotted overrides set nested values") {
  ExperimentConfig c = default_config();
  apply_override(c, "framework.outer_iterations=4");
  CHECK(c.framework.outer_iterations == 4);
  apply_override(c, "sweep.snr_db=[1,2,3]");
  CHECK(c.snr_db == std::vector<double>{1, 2, 3});
  apply_override(c, "scenario.id=bare");
  CHECK(c.scenario_id == "bare");
  apply_override(c, "framework.rho_init=active_branch");
  CHECK(c.framework.rho_init == RhoInit::active_branch);
  CHECK_THROWS_AS(apply_override(c, "framework.rho_init=zero"), ConfigError);
  apply_override(c, "framework.zeta=0.2");
  REQUIRE(c.framework.zeta.has_value());
  CHECK(*c.framework.zeta == 0.2);
  CHECK_THROWS_AS(apply_override(c, "framework.nope=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "framework=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "no_equals"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "seeds.trials=0"), ConfigError);
}

TEST_CASE("algorithm names") {
  for (Algorithm a : {Algorithm::proposed, Algorithm::proposed_bgg, Algorithm::proposed_gd, Algorithm::omp_ongrid})
    CHECK(algorithm_from_string(to_string(a)) == a);
  CHECK(std::string(to_string(Algorithm::proposed_bgg)) == "proposed-bgg");
  CHECK_THROWS_AS(algorithm_from_string("lasso"), ConfigError);
}

TEST_CASE("sweep points expand antennas and bandwidth parts") {
  ExperimentConfig c = default_config();
  c.snr_db = {0, 10};
  CHECK(sweep_points(c).size() == 2u);
  c.bwp = {2, 4, 8};
  c.antennas = {16, 32};
  const auto pts = sweep_points(c);
  CHECK(pts.size() == 12u);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) CHECK(pts[i].key() != pts[j].key());
}

TEST_CASE("seeds are stable and scene seeds are shared across algorithms") {
  const SweepPoint p{10.0, 4, 32};
  const SweepPoint q{15.0, 4, 32};
  CHECK(cell_seed(1, Algorithm::proposed, p, 3) == cell_seed(1, Algorithm::proposed, p, 3));
  CHECK(cell_seed(1, Algorithm::proposed, p, 3) != cell_seed(1, Algorithm::proposed_bgg, p, 3));
  CHECK(cell_seed(1, Algorithm::proposed, p, 3) != cell_seed(1, Algorithm::proposed, p, 4));
  CHECK(cell_seed(1, Algorithm::proposed, p, 3) != cell_seed(2, Algorithm::proposed, p, 3));
  CHECK(scene_seed(1, p, 3) != scene_seed(1, q, 3));
  CHECK(scene_seed(1, p, 3) != scene_seed(1, p, 4));

  const auto dir = scratch_dir("paired");
  const ExperimentConfig c = tiny_config(dir);
  const SweepPoint pt = sweep_points(c).front();
  const Scene a = build_scene(c, pt, 1);
  const Scene b = build_scene(c, pt, 1);
  CHECK(a.sample.obs.y == b.sample.obs.y);
  CHECK(a.paths.grid().values() == b.paths.grid().values());
  std::filesystem::remove_all(dir);
}

TEST_CASE("CSV round trip preserves every field") {
  std::vector<ResultRow> rows{sample_row(Algorithm::proposed, 10.0, 0, -17.25),
                              sample_row(Algorithm::omp_ongrid, 20.0, 1, -3.5)};
  rows[1].scenario_id = "has,comma \"quoted\"";
  rows[1].status = "error: bad, thing";
  rows[1].nmse_trace.clear();
  const auto dir = scratch_dir("csv");
  const std::string path = (dir / "rows.csv").string();
  {
    std::ofstream os(path, std::ios::binary);
    write_csv(os, rows);
  }
  CHECK(slurp(path).find("\r\n") != std::string::npos);
  const std::vector<ResultRow> back = read_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].scenario_id == rows[i].scenario_id);
    CHECK(back[i].algorithm == rows[i].algorithm);
    CHECK(back[i].point.snr_db == rows[i].point.snr_db);
    CHECK(back[i].point.h_p == rows[i].point.h_p);
    CHECK(back[i].point.n_rx == rows[i].point.n_rx);
    CHECK(back[i].trial == rows[i].trial);
    CHECK(back[i].seed == rows[i].seed);
    CHECK(back[i].status == rows[i].status);
    CHECK(back[i].nmse_db == rows[i].nmse_db);
    CHECK(back[i].rmse_db == rows[i].rmse_db);
    CHECK(back[i].outer_iters == rows[i].outer_iters);
    CHECK(back[i].support_size == rows[i].support_size);
    CHECK(back[i].grid_size == rows[i].grid_size);
    CHECK(back[i].nmse_trace == rows[i].nmse_trace);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("CSV hash ignores excluded columns only") {
  const auto dir = scratch_dir("hash");
  std::vector<ResultRow> rows{sample_row(Algorithm::proposed, 10.0, 0, -17.25)};
  const std::string p1 = (dir / "a.csv").string(), p2 = (dir / "b.csv").string(), p3 = (dir / "c.csv").string();
  {
    std::ofstream os(p1, std::ios::binary);
    write_csv(os, rows);
  }
  rows[0].runtime_s = 9.0;
  {
    std::ofstream os(p2, std::ios::binary);
    write_csv(os, rows);
  }
  rows[0].nmse_db = -17.5;
  {
    std::ofstream os(p3, std::ios::binary);
    write_csv(os, rows);
  }
  CHECK(csv_hash(p1) == csv_hash(p2));
  CHECK(csv_hash(p1, {}) != csv_hash(p2, {}));
  CHECK(csv_hash(p1) != csv_hash(p3));
  std::filesystem::remove_all(dir);
}

TEST_CASE("repeated experiments produce identical CSV content") {
  const auto dir = scratch_dir("repeat");
  ExperimentConfig c = tiny_config(dir);
  std::vector<ResultRow> rows;
  const ExperimentSummary s1 = run_experiment(c, &rows);
  CHECK(s1.rows == 8u);
  CHECK(s1.failures == 0u);
  for (const ResultRow& r : rows) {
    INFO(r.status);
    CHECK(r.status == "ok");
    CHECK(std::isfinite(r.nmse_db));
  }
  const std::uint64_t h1 = csv_hash(c.csv_path);
  c.csv_path = (dir / "again.csv").string();
  c.workers = 2;
  (void)run_experiment(c);
  CHECK(csv_hash(c.csv_path) == h1);
  CHECK(slurp(c.summary_path).rfind("algorithm,snr_db,", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("summary groups by algorithm and sweep point") {
  std::vector<ResultRow> rows;
  for (int t = 0; t < 4; ++t) rows.push_back(sample_row(Algorithm::proposed, 10.0, t, -10.0 - t));
  rows.push_back(sample_row(Algorithm::proposed, 10.0, 4, 0.0));
  rows.back().status = "error: diverged";
  rows.push_back(sample_row(Algorithm::omp_ongrid, 10.0, 0, -2.0));
  std::ostringstream os;
  write_summary(os, rows);
  std::istringstream is(os.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3u);
  CHECK(lines[1].rfind("omp-ongrid,10,4,32,1,0,-2,", 0) == 0);
  CHECK(lines[2].rfind("proposed,10,4,32,5,1,-11.5,", 0) == 0);
}

TEST_CASE("median and quantiles interpolate and skip NaN") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
  CHECK(median({1.0, std::nan(""), 3.0}) == 2.0);
  CHECK(std::isnan(median({})));
}

TEST_CASE("plot tables carry one row per x value") {
  const auto dir = scratch_dir("plot");
  std::vector<ResultRow> rows;
  for (double snr : {0.0, 10.0})
    for (int t = 0; t < 3; ++t) {
      rows.push_back(sample_row(Algorithm::proposed, snr, t, -snr - t));
      rows.push_back(sample_row(Algorithm::proposed_gd, snr, t, -snr / 2.0));
    }
  const std::string csv = (dir / "rows.csv").string();
  {
    std::ofstream os(csv, std::ios::binary);
    write_csv(os, rows);
  }
  const auto paths = emit_plot_data(csv, {{"nmse_vs_snr", ""}, {"runtime", "rt"}, {"convergence", ""}},
                                    (dir / "plots").string());
  REQUIRE(paths.size() == 3u);
  CHECK(std::filesystem::path(paths[0]).filename() == "nmse_vs_snr.dat");
  CHECK(std::filesystem::path(paths[1]).filename() == "rt.dat");

  std::istringstream nmse(slurp(paths[0]));
  std::string header, row0, row1;
  std::getline(nmse, header);
  std::getline(nmse, row0);
  std::getline(nmse, row1);
  CHECK(header == "# snr_db proposed proposed_q25 proposed_q75 proposed-gd proposed-gd_q25 proposed-gd_q75");
  CHECK(row0.rfind("0 -1 -1.5 -0.5 ", 0) == 0);
  CHECK(row1.rfind("10 -11 ", 0) == 0);
  CHECK(slurp(paths[1]).rfind("# snr_db(runtime_s)", 0) == 0);
  const std::string conv = slurp(paths[2]);
  CHECK(conv.rfind("# outer_iteration proposed_snr0 ", 0) == 0);
  CHECK(conv.find("\n3 ") != std::string::npos);

  const std::string bad = (dir / "bad.csv").string();
  {
    std::ofstream os(bad);
    os << "algorithm,snr_db\nproposed,10\n";
  }
  CHECK_THROWS_AS(emit_plot_data(bad, {{"nmse_vs_snr", ""}}, (dir / "plots").string()), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("significant-coefficient count uses a relative energy floor") {
  CVector x(5);
  x << 1.0, 0.2, 0.05, 0.0, cplx(0.0, -0.11);
  CHECK(count_significant(x) == 3);
  CHECK(count_significant(x, 0.0) == 5);
  CHECK(count_significant(CVector::Zero(4)) == 0);
}

TEST_CASE("sparsity profile reports both priors on the same grid") {
  const auto dir = scratch_dir("sparsity");
  const ExperimentConfig c = tiny_config(dir);
  const SweepPoint p = sweep_points(c).back();
  const SparsityProfile s = sparsity_profile(c, p, 0);
  CHECK(s.tanh_magnitude.size() == s.bgg_magnitude.size());
  CHECK(s.tanh_magnitude.size() > 0);
  CHECK(s.tanh_count >= 1);
  CHECK(s.bgg_count >= 1);
  std::ostringstream os;
  write_sparsity_table(os, s);
  CHECK_FALSE(os.str().empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("OMP picks the exact atom of a noiseless single component") {
  FourierDictionary dict(32);
  const GridParams grid = uniform_grid(64, 0.0, 1.0);
  Rng rng(91);
  for (int t = 0; t < 10; ++t) {
    const Index n = static_cast<Index>(rng.uniform(0.0, 63.99));
    CVector x = CVector::Zero(64);
    x[n] = rng.unit_phase();
    const Observation obs = synthesize_observation(dict, grid, x, NoiseSpec::none(), 1);
    const OmpResult r = omp_ongrid_baseline(obs, dict, grid, 4, 1e-6);
    REQUIRE(!r.support.empty());
    CHECK(r.support.front() == n);
    CHECK(r.support.size() == 1u);
    CHECK((r.x_hat - x).norm() <= 1e-10);
    CHECK(r.residual_ratio <= 1e-10);
  }
}

TEST_CASE("OMP on an orthogonal dictionary equals hard thresholding") {
  FourierDictionary dict(16);
  const GridParams grid = uniform_grid(16, 0.0, 1.0);
  Rng rng(92);
  const CVector x = test::random_cvector(16, rng);
  const Observation obs = synthesize_observation(dict, grid, x, NoiseSpec::none(), 1);
  const OmpResult r = omp_ongrid_baseline(obs, dict, grid, 5, 0.0);
  REQUIRE(r.support.size() == 5u);
  std::vector<Index> order(16);
  for (Index i = 0; i < 16; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return std::abs(x[a]) > std::abs(x[b]); });
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(r.support[k] == order[k]);
    CHECK(std::abs(r.x_hat[order[k]] - x[order[k]]) <= 1e-10);
  }
}

TEST_CASE("OMP recovers a well-separated on-grid support at 20 dB") {
  FourierDictionary dict(32);
  const GridParams grid = uniform_grid(64, 0.0, 1.0);
  const std::vector<Index> support{5, 27, 48};
  int exact = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    CVector x = CVector::Zero(64);
    for (Index n : support) x[n] = rng.unit_phase();
    const Observation obs = synthesize_observation(dict, grid, x, NoiseSpec::with_precision(100.0 / 3.0),
                                                   static_cast<std::uint64_t>(seed));
    const OmpResult r = omp_ongrid_baseline(obs, dict, grid, 3, 0.0);
    std::vector<Index> got = r.support;
    std::sort(got.begin(), got.end());
    exact += got == support;
  }
  CHECK(exact >= 90);
}
