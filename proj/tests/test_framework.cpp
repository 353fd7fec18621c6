#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "srcs/framework.hpp"
#include "test_util.hpp"

using namespace srcs;

namespace {

struct Scene {
  FourierDictionary dict{32};
  GridParams grid = uniform_grid(64, 0.0, 1.0);
  std::vector<double> truth;
  CVector gains;
  Observation obs;
};

// Off-grid K=3 scene with unit-modulus gains.
Scene off_grid_scene(std::uint64_t seed, double kappa) {
  Scene s;
  Rng rng(seed);
  s.truth = {0.1 + rng.uniform(0.0, 0.05), 0.45 + rng.uniform(0.0, 0.05), 0.8 + rng.uniform(0.0, 0.05)};
  s.gains = CVector(3);
  for (Index k = 0; k < 3; ++k) s.gains[k] = rng.unit_phase();
  s.obs = synthesize_observation(s.dict, GridParams::from_points(s.truth), s.gains,
                                 NoiseSpec::with_precision(kappa), seed + 100);
  return s;
}

FrameworkConfig base_config() {
  FrameworkConfig cfg;
  cfg.prior = BgtPrior::with_expected_support(3, 64);
  cfg.outer_iterations = 5;
  return cfg;
}

}  // namespace

TEST_CASE("framework config validation and warnings") {
  FrameworkConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.warnings().empty());
  cfg.srgu.max_rounds = 5;
  CHECK_FALSE(cfg.warnings().empty());
  cfg.outer_iterations = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FrameworkConfig{};
  cfg.sse.max_sweeps = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FrameworkConfig{};
  cfg.prior.zeta = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("one outer iteration equals SSE followed by SR-GU") {
  const Scene s = off_grid_scene(3, 1e3);
  FrameworkConfig cfg = base_config();
  cfg.outer_iterations = 1;
  const FrameworkResult r = run_alternating_map(s.obs, s.dict, s.grid, cfg);
  const SseOutput sse = run_sse(s.obs, s.dict, s.grid, cfg.prior, cfg.sse);
  const RefinementState ref = run_srgu(sse, s.dict, s.grid, s.obs, cfg.srgu);
  CHECK(r.support == ref.support);
  CHECK((r.theta_s - ref.theta_s).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((r.x_s - ref.x_s).norm() <= 1e-12 * ref.x_s.norm());
  CHECK((r.first_pass_x - sse.x_hat).norm() <= 1e-12 * sse.x_hat.norm());
  CHECK(r.outer_iterations == 1);
}

TEST_CASE("write-back touches only active grid rows") {
  const Scene s = off_grid_scene(4, 1e3);
  FrameworkConfig cfg = base_config();
  cfg.outer_iterations = 1;
  const FrameworkResult r = run_alternating_map(s.obs, s.dict, s.grid, cfg);
  for (Index n = 0; n < s.grid.size(); ++n) {
    const auto it = std::find(r.support.begin(), r.support.end(), n);
    if (it == r.support.end()) {
      CHECK(r.grid(n, 0) == s.grid(n, 0));
    } else {
      CHECK(r.grid(n, 0) == r.theta_s(it - r.support.begin(), 0));
    }
  }
}

TEST_CASE("off-grid scene converges onto the true frequencies") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Scene s = off_grid_scene(seed, 1e4);
    FrameworkConfig cfg = base_config();
    cfg.outer_iterations = 10;
    const FrameworkResult r = run_alternating_map(s.obs, s.dict, s.grid, cfg);
    // Every true frequency has a strong estimate within 1% of a DFT cell, and
    // every strong estimate sits on a true frequency.
    for (double t : s.truth) {
      double best = 1.0;
      for (Index k = 0; k < r.theta_s.rows(); ++k)
        if (std::abs(r.x_s[k]) > 0.5) best = std::min(best, std::abs(r.theta_s(k, 0) - t));
      CHECK(best < 0.01 / 32.0);
    }
    for (Index k = 0; k < r.theta_s.rows(); ++k) {
      if (std::abs(r.x_s[k]) <= 0.1) continue;
      double best = 1.0;
      for (double t : s.truth) best = std::min(best, std::abs(r.theta_s(k, 0) - t));
      CHECK(best < 0.01 / 32.0);
    }
  }
}

TEST_CASE("scorer is invoked once per outer iteration and the run is deterministic") {
  const Scene s = off_grid_scene(5, 1e3);
  FrameworkConfig cfg = base_config();
  cfg.early_stop = false;
  int calls = 0;
  const Scorer scorer = [&](const GridMatrix&, const CVector& x) {
    ++calls;
    return x.norm();
  };
  const FrameworkResult a = run_alternating_map(s.obs, s.dict, s.grid, cfg, scorer);
  CHECK(calls == cfg.outer_iterations);
  CHECK(a.trace.size() == static_cast<std::size_t>(cfg.outer_iterations));
  for (const OuterRecord& rec : a.trace) CHECK(rec.score.has_value());
  const FrameworkResult b = run_alternating_map(s.obs, s.dict, s.grid, cfg);
  CHECK(a.theta_s == b.theta_s);
  CHECK(a.x_hat == b.x_hat);
}

TEST_CASE("early stop fires once the support and grid settle") {
  const Scene s = off_grid_scene(1, 1e4);
  FrameworkConfig cfg = base_config();
  cfg.outer_iterations = 10;
  const FrameworkResult r = run_alternating_map(s.obs, s.dict, s.grid, cfg);
  CHECK(r.outer_iterations < 10);
  CHECK(r.trace.back().max_move < cfg.tol_outer);
}

TEST_CASE("SR-GU objective is non-increasing inside every outer iteration") {
  const Scene s = off_grid_scene(7, 100.0);
  FrameworkConfig cfg = base_config();
  cfg.early_stop = false;
  const FrameworkResult r = run_alternating_map(s.obs, s.dict, s.grid, cfg);
  REQUIRE(r.srgu_traces.size() == static_cast<std::size_t>(cfg.outer_iterations));
  for (const auto& trace : r.srgu_traces)
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i].objective <= trace[i - 1].objective);
}

TEST_CASE("warm start runs and agrees on the support") {
  const Scene s = off_grid_scene(8, 1e4);
  FrameworkConfig cfg = base_config();
  const FrameworkResult cold = run_alternating_map(s.obs, s.dict, s.grid, cfg);
  cfg.warm_start = true;
  const FrameworkResult warm = run_alternating_map(s.obs, s.dict, s.grid, cfg);
  CHECK(warm.support.size() == cold.support.size());
}

TEST_CASE("trace file holds one JSON object per line") {
  const Scene s = off_grid_scene(9, 1e3);
  FrameworkConfig cfg = base_config();
  cfg.outer_iterations = 2;
  cfg.early_stop = false;
  const auto path = std::filesystem::temp_directory_path() / "srcs_framework_trace.jsonl";
  cfg.trace_path = path.string();
  (void)run_alternating_map(s.obs, s.dict, s.grid, cfg);
  std::ifstream in(path);
  std::string line;
  int outer = 0, lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(line.front() == '{');
    CHECK(line.back() == '}');
    if (line.find("\"type\":\"outer\"") != std::string::npos) ++outer;
  }
  CHECK(lines > 2);
  CHECK(outer == 2);
  std::filesystem::remove(path);
}

TEST_CASE("complexity report scaling laws") {
  FrameworkConfig cfg;
  const ComplexityReport a = complexity_report(cfg, 100, 50, 4);
  const ComplexityReport b = complexity_report(cfg, 200, 50, 4);
  const ComplexityReport c = complexity_report(cfg, 100, 50, 8);
  CHECK(b.sse_term == doctest::Approx(8.0 * a.sse_term));
  CHECK(c.srgu_term == doctest::Approx(4.0 * a.srgu_term));
  CHECK(a.total == doctest::Approx(cfg.outer_iterations * (a.sse_term + a.srgu_term)));
}

TEST_CASE("log-log slope of a power law") {
  const std::vector<double> x{64, 128, 256, 512};
  std::vector<double> y;
  for (double v : x) y.push_back(3e-9 * v * v * v);
  CHECK(loglog_slope(x, y) == doctest::Approx(3.0));
}
