#include "srcs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "srcs/channel.hpp"
#include "srcs/framework.hpp"
#include "srcs/rng.hpp"
#include "srcs/srgu.hpp"
#include "srcs/vbi.hpp"

namespace srcs::oracle {

double relative_error(const RVector& a, const RVector& b) {
  return (a - b).norm() / std::max(b.norm(), kRelFloor);
}
double relative_error(const CVector& a, const CVector& b) {
  return (a - b).norm() / std::max(b.norm(), kRelFloor);
}

RVector fd_gradient(const std::function<double(const RVector&)>& f, const RVector& point, const RVector& scale,
                    double step) {
  RVector g(point.size());
  RVector p = point;
  for (Index i = 0; i < point.size(); ++i) {
    const double h = step * (scale.size() == point.size() ? scale[i] : 1.0);
    p[i] = point[i] + h;
    const double fp = f(p);
    p[i] = point[i] - h;
    const double fm = f(p);
    p[i] = point[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

CVector dense_quadratic_map(const CMatrix& a, const CVector& y, double kappa, const CMatrix& prior_precision,
                            const CVector& u) {
  const Index n = a.cols();
  require_dims(prior_precision.rows() == n && prior_precision.cols() == n && u.size() == n && y.size() == a.rows(),
               "dense_quadratic_map: dimension mismatch");
  CMatrix h = CMatrix::Zero(n, n);
  // Plain triple loop for A^H A keeps this independent of the Gram kernels.
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      cplx s = 0.0;
      for (Index m = 0; m < a.rows(); ++m) s += std::conj(a(m, i)) * a(m, j);
      h(i, j) = kappa * s + prior_precision(i, j);
    }
  CVector rhs = prior_precision * u;
  for (Index i = 0; i < n; ++i) {
    cplx s = 0.0;
    for (Index m = 0; m < a.rows(); ++m) s += std::conj(a(m, i)) * y[m];
    rhs[i] += kappa * s;
  }
  const double herm = (h - h.adjoint()).norm();
  if (herm > 1e-10 * std::max(h.norm(), 1.0)) throw NumericalError("dense_quadratic_map: system is not Hermitian");
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(h, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw NumericalError("dense_quadratic_map: system is not positive definite");
  return Eigen::FullPivLU<CMatrix>(h).solve(rhs);
}

namespace {

struct Fit {
  double value;
  CVector gains;
};

Fit ls_fit(const CMatrix& a, const CVector& y) {
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(a);
  CVector x = cod.solve(y);
  return {(y - a * x).squaredNorm(), x};
}

CMatrix columns_at(const ParametricDictionary& dict, std::initializer_list<double> pts) {
  CMatrix a(dict.rows(), static_cast<Index>(pts.size()));
  Index k = 0;
  for (double p : pts) {
    CVector c(dict.rows());
    dict.column(std::span<const double>(&p, 1), std::span<cplx>(c.data(), static_cast<std::size_t>(c.size())));
    a.col(k++) = c;
  }
  return a;
}

std::vector<CVector> column_table(const ParametricDictionary& dict, double lo, double step, Index count) {
  std::vector<CVector> cols(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const double p = lo + step * static_cast<double>(i);
    cols[static_cast<std::size_t>(i)] = columns_at(dict, {p}).col(0);
  }
  return cols;
}

// Pair objective from two columns using the closed-form 2x2 normal equations.
double pair_value(const CVector& a1, const CVector& a2, const CVector& y, double y2) {
  const cplx g11 = a1.squaredNorm(), g22 = a2.squaredNorm(), g12 = a1.dot(a2);
  const cplx b1 = a1.dot(y), b2 = a2.dot(y);
  const double det = (g11 * g22 - std::norm(g12)).real();
  if (!(det > 1e-12 * g11.real() * g22.real())) return y2;
  // x = G^-1 b, value = y2 - b^H G^-1 b
  const cplx x1 = (g22 * b1 - g12 * b2) / det;
  const cplx x2 = (g11 * b2 - std::conj(g12) * b1) / det;
  return y2 - (std::conj(b1) * x1 + std::conj(b2) * x2).real();
}

}  // namespace

MleResult exhaustive_small_mle(const ParametricDictionary& dict, const CVector& y, int k, double fine_fraction) {
  if (dict.param_dim() != 1) throw ConfigError("exhaustive_small_mle: dictionary must be 1-D");
  if (k < 1 || k > 2) throw ConfigError("exhaustive_small_mle: K must be 1 or 2");
  const ParamRange range = dict.valid_range(0);
  const double width = range.width();
  const double y2 = y.squaredNorm();
  MleResult out;

  if (k == 1) {
    const Index count = static_cast<Index>(std::floor(1.0 / fine_fraction + 1e-9)) + 1;
    const double step = fine_fraction * width;
    double best = y2;
    double best_p = range.lo;
    for (Index i = 0; i < count; ++i) {
      const double p = range.lo + step * static_cast<double>(i);
      const CVector a = columns_at(dict, {p}).col(0);
      const double v = y2 - std::norm(a.dot(y)) / a.squaredNorm();
      if (v < best) {
        best = v;
        best_p = p;
      }
    }
    const Fit fit = ls_fit(columns_at(dict, {best_p}), y);
    out.points = {best_p};
    out.gains = fit.gains;
    out.objective = fit.value;
    return out;
  }

  struct Cand {
    double v, p1, p2;
  };
  // Level 0: every pair on the 1e-2 lattice.
  double step = 1e-2 * width;
  Index count = 101;
  std::vector<CVector> cols = column_table(dict, range.lo, step, count);
  std::vector<Cand> cands;
  for (Index i = 0; i < count; ++i)
    for (Index j = i + 1; j < count; ++j)
      cands.push_back({pair_value(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)], y, y2),
                       range.lo + step * static_cast<double>(i), range.lo + step * static_cast<double>(j)});
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.v < b.v; });
  cands.resize(std::min<std::size_t>(cands.size(), 8));

  for (double next : {1e-3, fine_fraction}) {
    const double window = 2.0 * step;
    step = next * width;
    std::vector<Cand> refined;
    for (const Cand& c : cands) {
      const Index half = static_cast<Index>(std::round(window / step));
      const double lo1 = std::max(range.lo, c.p1 - window), lo2 = std::max(range.lo, c.p2 - window);
      const std::vector<CVector> c1 = column_table(dict, lo1, step, 2 * half + 1);
      const std::vector<CVector> c2 = column_table(dict, lo2, step, 2 * half + 1);
      Cand best{y2, c.p1, c.p2};
      for (Index i = 0; i <= 2 * half; ++i) {
        const double p1 = lo1 + step * static_cast<double>(i);
        if (p1 > range.hi) break;
        for (Index j = 0; j <= 2 * half; ++j) {
          const double p2 = lo2 + step * static_cast<double>(j);
          if (p2 > range.hi || p2 <= p1) continue;
          const double v = pair_value(c1[static_cast<std::size_t>(i)], c2[static_cast<std::size_t>(j)], y, y2);
          if (v < best.v) best = {v, p1, p2};
        }
      }
      refined.push_back(best);
    }
    std::sort(refined.begin(), refined.end(), [](const Cand& a, const Cand& b) { return a.v < b.v; });
    refined.resize(std::min<std::size_t>(refined.size(), next == fine_fraction ? 1 : 4));
    cands = std::move(refined);
  }
  const Fit fit = ls_fit(columns_at(dict, {cands[0].p1, cands[0].p2}), y);
  out.points = {cands[0].p1, cands[0].p2};
  out.gains = fit.gains;
  out.objective = fit.value;
  return out;
}

namespace {

std::string describe(const char* kind, int i) {
  std::ostringstream os;
  os << kind << " #" << i;
  return os.str();
}

OracleReport make(const std::string& test, const std::string& inst, double analytic_norm, double oracle_norm,
                  double rel, double tol) {
  return {test, inst, analytic_norm, oracle_norm, rel, rel <= tol};
}

void gradient_checks(const ParametricDictionary& dict, const char* name, Rng& rng, int instances,
                     std::vector<OracleReport>& out) {
  const Index dims = dict.param_dim();
  for (int t = 0; t < instances; ++t) {
    const Index s = 1 + static_cast<Index>(rng.uniform() * 4.0);
    GridMatrix theta(s, dims);
    RVector scale(s * dims);
    for (Index k = 0; k < s; ++k)
      for (Index d = 0; d < dims; ++d) {
        const ParamRange r = dict.valid_range(d);
        theta(k, d) = rng.uniform(r.lo + 0.05 * r.width(), r.hi - 0.05 * r.width());
        scale[k * dims + d] = dict.resolution(d);
      }
    CVector x(s), y(dict.rows());
    for (Index k = 0; k < s; ++k) x[k] = rng.complex_normal(1.0);
    for (Index m = 0; m < y.size(); ++m) y[m] = rng.complex_normal(1.0);
    const RVector g = grid_gradient(dict, theta, x, y);
    auto f = [&](const RVector& v) {
      GridMatrix p(s, dims);
      for (Index i = 0; i < v.size(); ++i) p(i / dims, i % dims) = v[i];
      // Independent residual: explicit column sum.
      CVector r = y;
      for (Index k = 0; k < s; ++k) r -= x[k] * dict.column(std::span<const double>(p.row(k).data(), static_cast<std::size_t>(dims)));
      return r.squaredNorm();
    };
    RVector v(s * dims);
    for (Index i = 0; i < v.size(); ++i) v[i] = theta(i / dims, i % dims);
    const RVector fd = fd_gradient(f, v, scale);
    out.push_back(make(std::string("gradient/") + name, describe("instance", t), g.norm(), fd.norm(),
                       relative_error(g, fd), 1e-5));
  }
}

}  // namespace

std::vector<OracleReport> run_oracle_suite(std::uint64_t seed, int instances) {
  std::vector<OracleReport> out;
  Rng rng(seed);

  const FourierDictionary fourier(32);
  OfdmArrayConfig ofdm;
  ofdm.n_rx = 8;
  ofdm.m_sub = 8;
  ofdm.h_p = 4;
  const ChannelDictionary channel(ofdm);
  gradient_checks(fourier, "fourier", rng, instances, out);
  gradient_checks(channel, "angle-delay", rng, instances, out);

  for (int t = 0; t < instances; ++t) {
    const Index m = 8, n = 12;
    CMatrix a(m, n);
    CVector y(m);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.complex_normal(1.0);
    for (Index i = 0; i < m; ++i) y[i] = rng.complex_normal(1.0);
    RVector c(n);
    for (Index i = 0; i < n; ++i) c[i] = std::exp(rng.uniform(-3.0, 3.0));
    const double kappa = std::exp(rng.uniform(-2.0, 4.0));
    const QxPosterior q = update_qx(a, y, kappa, c);
    const CVector ref = dense_quadratic_map(a, y, kappa, c.cast<cplx>().asDiagonal().toDenseMatrix(), CVector::Zero(n));
    out.push_back(make("quadratic/update_qx", describe("instance", t), q.mu.norm(), ref.norm(),
                       relative_error(q.mu, ref), 1e-9));
  }
  for (int t = 0; t < instances; ++t) {
    const Index m = 16, s = 4;
    CMatrix a(m, s);
    CVector y(m), u(s);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.complex_normal(1.0);
    for (Index i = 0; i < m; ++i) y[i] = rng.complex_normal(1.0);
    for (Index i = 0; i < s; ++i) u[i] = rng.complex_normal(1.0);
    RVector sig(s);
    for (Index i = 0; i < s; ++i) sig[i] = std::exp(rng.uniform(-4.0, 2.0));
    const double kappa = std::exp(rng.uniform(-2.0, 4.0));
    const CVector x = lmmse_gain_update(a, y, kappa, u, sig);
    const CVector ref =
        dense_quadratic_map(a, y, kappa, sig.cwiseInverse().cast<cplx>().asDiagonal().toDenseMatrix(), u);
    out.push_back(make("quadratic/lmmse_gain_update", describe("instance", t), x.norm(), ref.norm(),
                       relative_error(x, ref), 1e-9));
  }

  // K = 1 noiseless: the full pipeline against exhaustive search.
  const int mle_cases = std::max(1, instances / 10);
  for (int t = 0; t < mle_cases; ++t) {
    const double f = rng.uniform(0.1, 0.9);
    const GridParams truth = GridParams::from_points(std::vector<double>{f});
    CVector x(1);
    x[0] = std::polar(1.0, rng.uniform(-M_PI, M_PI));
    const Observation obs = synthesize_observation(fourier, truth, x, NoiseSpec::none(), 0);
    const MleResult mle = exhaustive_small_mle(fourier, obs.y, 1);
    FrameworkConfig cfg;
    cfg.outer_iterations = 3;
    cfg.prior = cfg.prior.with_expected_support(1, 32);
    const FrameworkResult res = run_alternating_map(obs, fourier, uniform_grid(32, 0.0, 1.0), cfg);
    Index strongest = 0;
    for (Index k = 1; k < res.x_s.size(); ++k)
      if (std::abs(res.x_s[k]) > std::abs(res.x_s[strongest])) strongest = k;
    const double est = res.theta_s.rows() > 0 ? res.theta_s(strongest, 0) : -1.0;
    const double best = std::abs(est - mle.points[0]);
    out.push_back({"mle/k1-noiseless", describe("instance", t), est, mle.points[0], best, best <= 2e-4});
  }
  return out;
}

}  // namespace srcs::oracle
