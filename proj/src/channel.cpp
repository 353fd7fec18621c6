#include "srcs/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "srcs/rng.hpp"

namespace srcs {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kAngleMargin = 0.02;

double wrap(double v, double period) {
  double w = std::fmod(v, period);
  if (w < 0.0) w += period;
  return w >= period ? 0.0 : w;
}
}  // namespace

double OfdmArrayConfig::max_angle() { return 0.5 * M_PI - kAngleMargin; }

void OfdmArrayConfig::validate() const {
  if (n_rx < 1 || m_sub < 1 || h_p < 1) throw ConfigError("OfdmArrayConfig: n_rx, m_sub and h_p must be >= 1");
  if (!(f0 > 0.0)) throw ConfigError("OfdmArrayConfig: f0 must be > 0");
  if (observed_bwp < 0 || observed_bwp >= h_p) throw ConfigError("OfdmArrayConfig: observed_bwp out of range");
  if (pilot.size() != 0) {
    if (pilot.size() != m_sub) throw ConfigError("OfdmArrayConfig: pilot length must equal m_sub");
    for (Index m = 0; m < m_sub; ++m)
      if (std::abs(std::abs(pilot[m]) - 1.0) > 1e-9) throw ConfigError("OfdmArrayConfig: pilot entries must be unit-modulus");
  }
}

CVector OfdmArrayConfig::pilot_or_ones() const {
  return pilot.size() == 0 ? CVector(CVector::Ones(m_sub)) : pilot;
}

CVector random_pilot(Index m_sub, std::uint64_t seed) {
  Rng rng(seed);
  CVector p(m_sub);
  for (Index m = 0; m < m_sub; ++m) p[m] = rng.unit_phase();
  return p;
}

void PathSet::validate(double f0) const {
  for (Index k = 0; k < size(); ++k) {
    const Path& p = paths[static_cast<std::size_t>(k)];
    if (!(std::abs(p.theta) < 0.5 * M_PI)) throw RangeError(k, 0, p.theta, -0.5 * M_PI, 0.5 * M_PI);
    if (!(p.tau >= 0.0 && p.tau < 1.0 / f0)) throw RangeError(k, 1, p.tau, 0.0, 1.0 / f0);
  }
}

GridParams PathSet::grid() const {
  GridMatrix g(size(), 2);
  for (Index k = 0; k < size(); ++k) {
    g(k, 0) = paths[static_cast<std::size_t>(k)].theta;
    g(k, 1) = paths[static_cast<std::size_t>(k)].tau;
  }
  return GridParams(std::move(g));
}

CVector PathSet::gains() const {
  CVector x(size());
  for (Index k = 0; k < size(); ++k) x[k] = paths[static_cast<std::size_t>(k)].gain;
  return x;
}

CVector ula_steering(double theta, Index n_rx) {
  if (!(std::abs(theta) < 0.5 * M_PI)) throw RangeError(0, 0, theta, -0.5 * M_PI, 0.5 * M_PI);
  CVector a(n_rx);
  const double s = std::sin(theta);
  for (Index m = 0; m < n_rx; ++m) a[m] = std::polar(1.0, -M_PI * static_cast<double>(m) * s);
  return a;
}

CVector delay_response(double tau, Index h_p, Index m_sub, double f0) {
  const Index n = h_p * m_sub;
  CVector b(n);
  for (Index k = 0; k < n; ++k) b[k] = std::polar(1.0, -kTwoPi * static_cast<double>(k) * f0 * tau);
  return b;
}

ChannelDictionary::ChannelDictionary(OfdmArrayConfig config) : config_(std::move(config)) {
  config_.validate();
  pilot_ = config_.pilot_or_ones();
}

ParamRange ChannelDictionary::valid_range(Index d) const {
  if (d == 0) return {-OfdmArrayConfig::max_angle(), OfdmArrayConfig::max_angle()};
  return {0.0, 1.0 / config_.f0};
}

double ChannelDictionary::resolution(Index d) const {
  return d == 0 ? config_.sine_resolution() : config_.delay_resolution();
}

void ChannelDictionary::column(std::span<const double> theta, std::span<cplx> out) const {
  require_dims(static_cast<Index>(out.size()) == rows(), "ChannelDictionary::column: output size");
  const double s = std::sin(theta[0]);
  const Index m_sub = config_.m_sub;
  const double n0 = static_cast<double>(config_.observed_bwp * m_sub);
  for (Index i = 0; i < config_.n_rx; ++i) {
    const double pa = -M_PI * static_cast<double>(i) * s;
    for (Index m = 0; m < m_sub; ++m) {
      const double pd = -kTwoPi * (n0 + static_cast<double>(m)) * config_.f0 * theta[1];
      out[static_cast<std::size_t>(i * m_sub + m)] = pilot_[m] * std::polar(1.0, pa + pd);
    }
  }
}

void ChannelDictionary::column_jacobian(std::span<const double> theta, CMatrix& jac) const {
  jac.resize(rows(), 2);
  const double s = std::sin(theta[0]);
  const double c = std::cos(theta[0]);
  const Index m_sub = config_.m_sub;
  const double n0 = static_cast<double>(config_.observed_bwp * m_sub);
  const cplx j(0.0, 1.0);
  for (Index i = 0; i < config_.n_rx; ++i) {
    const double pa = -M_PI * static_cast<double>(i) * s;
    for (Index m = 0; m < m_sub; ++m) {
      const double n = n0 + static_cast<double>(m);
      const double pd = -kTwoPi * n * config_.f0 * theta[1];
      const cplx v = pilot_[m] * std::polar(1.0, pa + pd);
      jac(i * m_sub + m, 0) = -j * M_PI * static_cast<double>(i) * c * v;
      jac(i * m_sub + m, 1) = -j * kTwoPi * n * config_.f0 * v;
    }
  }
}

namespace {
CMatrix full_band(const GridMatrix& params, const CVector& gains, const OfdmArrayConfig& config) {
  CMatrix h = CMatrix::Zero(config.full_subcarriers(), config.n_rx);
  for (Index k = 0; k < params.rows(); ++k) {
    const CVector a = ula_steering(params(k, 0), config.n_rx);
    const CVector b = delay_response(params(k, 1), config.h_p, config.m_sub, config.f0);
    h.noalias() += gains[k] * b * a.transpose();
  }
  return h;
}
}  // namespace

ChannelSample generate_channel(const OfdmArrayConfig& config, const PathSet& paths, std::optional<double> snr_db,
                               std::uint64_t seed) {
  config.validate();
  paths.validate(config.f0);
  ChannelSample out;
  const GridParams truth = paths.grid();
  const CVector gains = paths.gains();
  out.h_full = full_band(truth.values(), gains, config);

  const CVector beta = config.pilot_or_ones();
  const Index m_sub = config.m_sub;
  CVector y(config.rows());
  for (Index i = 0; i < config.n_rx; ++i)
    for (Index m = 0; m < m_sub; ++m)
      y[i * m_sub + m] = beta[m] * out.h_full(config.observed_bwp * m_sub + m, i);

  std::optional<double> precision;
  if (snr_db) {
    const double energy = y.squaredNorm();
    out.noise_variance = energy / (static_cast<double>(config.rows()) * std::pow(10.0, *snr_db / 10.0));
    if (out.noise_variance > 0.0) {
      Rng rng(seed);
      for (Index r = 0; r < y.size(); ++r) y[r] += rng.complex_normal(out.noise_variance);
      precision = 1.0 / out.noise_variance;
    }
  }
  out.obs.y = std::move(y);
  out.obs.truth = GroundTruth{truth, gains, precision};
  return out;
}

void ScenarioConfig::validate(const OfdmArrayConfig& array) const {
  (void)array;
  if (k_paths < 1) throw ConfigError("scenario: k_paths must be >= 1");
  if (!(angle_spread_deg > 0.0 && angle_spread_deg * M_PI / 360.0 <= OfdmArrayConfig::max_angle()))
    throw ConfigError("scenario: angle_spread_deg out of range");
  if (!(delay_gap_bins > 0.0)) throw ConfigError("scenario: delay_gap_bins must be > 0");
  if (!(delay_span_bins > delay_gap_bins)) throw ConfigError("scenario: delay_span_bins must exceed the gap");
  if (!(delay_span_bins * array.delay_resolution() < 1.0 / array.f0))
    throw ConfigError("scenario: delay span exceeds the unambiguous range 1/f0");
  if (!(gain_min > 0.0 && gain_min <= 1.0)) throw ConfigError("scenario: gain_min must lie in (0, 1]");
}

PathSet draw_paths(const OfdmArrayConfig& array, const ScenarioConfig& scenario, std::uint64_t seed) {
  scenario.validate(array);
  Rng rng(seed);
  const double half = 0.5 * scenario.angle_spread_deg * M_PI / 180.0;
  const double span = scenario.delay_span_bins * array.delay_resolution();
  const double gap = scenario.delay_gap_bins * array.delay_resolution();

  std::vector<double> delays;
  if (scenario.k_paths == 1) {
    delays.push_back(rng.uniform(0.0, span));
  } else {
    const double t0 = rng.uniform(0.0, span - gap);
    delays = {t0, t0 + gap};
  }
  int tries = 0;
  while (static_cast<Index>(delays.size()) < scenario.k_paths) {
    if (++tries > 100000) throw ConfigError("scenario: cannot place delays with the requested gap and span");
    const double t = rng.uniform(0.0, span);
    bool ok = true;
    for (double d : delays) ok = ok && std::abs(t - d) >= gap;
    if (ok) delays.push_back(t);
  }

  PathSet ps;
  for (Index k = 0; k < scenario.k_paths; ++k) {
    Path p;
    p.theta = rng.uniform(-half, half);
    p.tau = delays[static_cast<std::size_t>(k)];
    const double mag = rng.uniform(scenario.gain_min, 1.0);
    p.gain = mag * rng.unit_phase();
    ps.paths.push_back(p);
  }
  return ps;
}

GridParams coarse_grid_init(const Observation& obs, const OfdmArrayConfig& config, const CoarseInitConfig& init) {
  config.validate();
  require_dims(obs.y.size() == config.rows(), "coarse_grid_init: observation length != N_r M");
  if (init.radius < 0 || init.oversample < 1 || init.fft_pad < 1)
    throw ConfigError("coarse_grid_init: radius >= 0, oversample >= 1, fft_pad >= 1 required");
  const double umax = std::sin(OfdmArrayConfig::max_angle());
  const double period_tau = 1.0 / config.f0;

  if (obs.y.squaredNorm() == 0.0) {
    const Index na = std::max<Index>(init.fallback_angles, 1);
    const Index nd = std::max<Index>(init.fallback_delays, 1);
    GridMatrix g(na * nd, 2);
    for (Index i = 0; i < na; ++i)
      for (Index j = 0; j < nd; ++j) {
        const double u = -umax + (2.0 * umax) * (static_cast<double>(i) + 0.5) / static_cast<double>(na);
        g(i * nd + j, 0) = std::asin(u);
        g(i * nd + j, 1) = period_tau * static_cast<double>(j) / static_cast<double>(nd);
      }
    return GridParams(std::move(g));
  }

  const Index n_rx = config.n_rx;
  const Index m_sub = config.m_sub;
  const CVector beta = config.pilot_or_ones();
  CMatrix ycl(m_sub, n_rx);
  for (Index i = 0; i < n_rx; ++i)
    for (Index m = 0; m < m_sub; ++m) ycl(m, i) = std::conj(beta[m]) * obs.y[i * m_sub + m];

  const Index nu = init.fft_pad * n_rx;
  const Index nt = init.fft_pad * m_sub;
  // Matched filters: angle (sin-space, period 2) and delay (period 1/f0).
  CMatrix fa(n_rx, nu);
  for (Index k = 0; k < nu; ++k) {
    const double u = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(nu);
    for (Index i = 0; i < n_rx; ++i) fa(i, k) = std::polar(1.0, M_PI * static_cast<double>(i) * u);
  }
  CMatrix fd(nt, m_sub);
  const double n0 = static_cast<double>(config.observed_bwp * m_sub);
  for (Index t = 0; t < nt; ++t) {
    const double tau = period_tau * static_cast<double>(t) / static_cast<double>(nt);
    for (Index m = 0; m < m_sub; ++m)
      fd(t, m) = std::polar(1.0, kTwoPi * (n0 + static_cast<double>(m)) * config.f0 * tau);
  }
  const RMatrix power = (fd * ycl * fa).cwiseAbs2();  // nt x nu

  struct Peak {
    double p;
    Index t, k;
  };
  std::vector<Peak> peaks;
  for (Index t = 0; t < nt; ++t)
    for (Index k = 0; k < nu; ++k) {
      const double p = power(t, k);
      bool is_max = p > 0.0;
      for (int dt = -1; dt <= 1 && is_max; ++dt)
        for (int dk = -1; dk <= 1 && is_max; ++dk) {
          if (dt == 0 && dk == 0) continue;
          const double q = power((t + dt + nt) % nt, (k + dk + nu) % nu);
          // Ties resolve toward the lower flat index so plateaus yield one peak.
          if (q > p || (q == p && (dt < 0 || (dt == 0 && dk < 0)))) is_max = false;
        }
      if (is_max) peaks.push_back({p, t, k});
    }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return a.p != b.p ? a.p > b.p : std::tie(a.t, a.k) < std::tie(b.t, b.k);
  });
  const Index want = init.peaks > 0 ? init.peaks : 2 * std::max<Index>(init.k_expected, 1);
  if (static_cast<Index>(peaks.size()) > want) peaks.resize(static_cast<std::size_t>(want));

  const double du = config.sine_resolution() / init.oversample;
  const double dtau = config.delay_resolution() / init.oversample;
  std::vector<std::pair<double, double>> pts;  // (u, tau)
  for (const Peak& pk : peaks) {
    const double u0 = -1.0 + 2.0 * static_cast<double>(pk.k) / static_cast<double>(nu);
    const double t0 = period_tau * static_cast<double>(pk.t) / static_cast<double>(nt);
    for (int i = -init.radius; i <= init.radius; ++i)
      for (int j = -init.radius; j <= init.radius; ++j) {
        double u = wrap(u0 + i * du + 1.0, 2.0) - 1.0;
        u = std::clamp(u, -umax, umax);
        const double tau = wrap(t0 + j * dtau, period_tau);
        bool dup = false;
        for (const auto& [pu, pt] : pts) {
          double dt = std::abs(pt - tau);
          dt = std::min(dt, period_tau - dt);
          if (std::abs(pu - u) < 0.5 * du && dt < 0.5 * dtau) {
            dup = true;
            break;
          }
        }
        if (!dup) pts.emplace_back(u, tau);
        if (init.max_points > 0 && static_cast<Index>(pts.size()) >= init.max_points) break;
      }
    if (init.max_points > 0 && static_cast<Index>(pts.size()) >= init.max_points) break;
  }

  GridMatrix g(static_cast<Index>(pts.size()), 2);
  for (Index n = 0; n < g.rows(); ++n) {
    g(n, 0) = std::asin(pts[static_cast<std::size_t>(n)].first);
    g(n, 1) = pts[static_cast<std::size_t>(n)].second;
  }
  return GridParams(std::move(g));
}

CMatrix extrapolate_channel(const GridMatrix& theta_s, const CVector& x_s, const OfdmArrayConfig& config) {
  require_dims(theta_s.rows() == x_s.size(), "extrapolate_channel: parameter/gain count mismatch");
  require_dims(theta_s.rows() == 0 || theta_s.cols() == 2, "extrapolate_channel: rows must be (theta, tau)");
  return full_band(theta_s, x_s, config);
}

double nmse_db(const CMatrix& h_hat, const CMatrix& h) {
  require_dims(h_hat.rows() == h.rows() && h_hat.cols() == h.cols(), "nmse_db: shape mismatch");
  const double den = h.squaredNorm();
  if (!(den > 0.0)) throw ConfigError("nmse_db: reference channel is zero");
  const double num = (h_hat - h).squaredNorm();
  if (num == 0.0) return kDbFloor;
  return std::max(kDbFloor, 10.0 * std::log10(num / den));
}

double rmse_db(const GridMatrix& est, const GridMatrix& truth, std::optional<double> c_theta,
               std::optional<double> c_tau, double fallback_theta, double fallback_tau) {
  if (est.rows() == 0) throw ConfigError("rmse_db: empty estimate set");
  require_dims(truth.rows() >= 1 && est.cols() == 2 && truth.cols() == 2, "rmse_db: rows must be (theta, tau)");
  auto range_of = [&](Index d, std::optional<double> given, double fallback) {
    if (given) return *given;
    const double r = truth.col(d).maxCoeff() - truth.col(d).minCoeff();
    if (r > 1e-15) return r;
    return fallback > 0.0 ? fallback : 1.0;
  };
  const double ct = range_of(0, c_theta, fallback_theta);
  const double cd = range_of(1, c_tau, fallback_tau);
  auto dist = [&](Index e, Index t) {
    const double a = (est(e, 0) - truth(t, 0)) / ct;
    const double b = (est(e, 1) - truth(t, 1)) / cd;
    return a * a + b * b;
  };

  struct Pair {
    double d;
    Index e, t;
  };
  std::vector<Pair> pairs;
  for (Index e = 0; e < est.rows(); ++e)
    for (Index t = 0; t < truth.rows(); ++t) pairs.push_back({dist(e, t), e, t});
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return a.d != b.d ? a.d < b.d : std::tie(a.e, a.t) < std::tie(b.e, b.t);
  });
  std::vector<double> err(static_cast<std::size_t>(est.rows()), -1.0);
  std::vector<bool> used(static_cast<std::size_t>(truth.rows()), false);
  for (const Pair& p : pairs) {
    if (err[static_cast<std::size_t>(p.e)] >= 0.0 || used[static_cast<std::size_t>(p.t)]) continue;
    err[static_cast<std::size_t>(p.e)] = p.d;
    used[static_cast<std::size_t>(p.t)] = true;
  }
  // Surplus estimates (K_est > K) fall back to their nearest true path.
  for (Index e = 0; e < est.rows(); ++e) {
    if (err[static_cast<std::size_t>(e)] >= 0.0) continue;
    double best = dist(e, 0);
    for (Index t = 1; t < truth.rows(); ++t) best = std::min(best, dist(e, t));
    err[static_cast<std::size_t>(e)] = best;
  }
  const double mean = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(est.rows());
  if (mean == 0.0) return kDbFloor;
  return std::max(kDbFloor, 10.0 * std::log10(mean));
}

}  // namespace srcs
