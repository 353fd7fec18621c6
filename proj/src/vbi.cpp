#include "srcs/vbi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

#include "srcs/kernels.hpp"

namespace srcs {

const char* to_string(PriorVariant v) { return v == PriorVariant::tanh ? "tanh" : "bgg"; }

RVector VariationalState::log_rho_mean() const {
  RVector out(rho_shape.size());
  for (Index n = 0; n < out.size(); ++n) out[n] = boost::math::digamma(rho_shape[n]) - std::log(rho_rate[n]);
  return out;
}

QxSystem QxSystem::build(const CMatrix& a, const CVector& y) {
  require_dims(a.rows() == y.size(), "QxSystem: rows of A != length of y");
  QxSystem sys;
  sys.gram = kernels::gram(a);
  sys.adj_y = kernels::adjoint_matvec(a, y);
  sys.col_sqnorm = sys.gram.diagonal().real();
  sys.y_sqnorm = kernels::sqnorm(kernels::as_span(y));
  return sys;
}

QxPosterior update_qx(const QxSystem& sys, double kappa_mean, const RVector& c, bool keep_full) {
  const Index n = sys.gram.rows();
  require_dims(c.size() == n, "update_qx: c length != number of columns");
  if (!(kappa_mean > 0.0) || !std::isfinite(kappa_mean)) throw NumericalError("update_qx: <kappa> must be finite and > 0");
  if ((c.array() < 0.0).any() || !c.allFinite()) throw NumericalError("update_qx: c must be finite and >= 0");

  CMatrix precision = kappa_mean * sys.gram;
  precision.diagonal().real() += c;
  const RVector pdiag = precision.diagonal().real();

  Eigen::LLT<CMatrix> llt(precision);
  const auto& factor = llt.matrixLLT();
  double worst = std::numeric_limits<double>::infinity();
  if (llt.info() == Eigen::Success) {
    for (Index i = 0; i < n; ++i) worst = std::min(worst, std::norm(factor(i, i)) / pdiag[i]);
  }
  if (llt.info() != Eigen::Success || !(worst > 1e-13)) {
    std::ostringstream os;
    os << "update_qx: precision matrix is singular or indefinite (N=" << n
       << ", min relative pivot=" << (llt.info() == Eigen::Success ? worst : 0.0)
       << ", min c=" << c.minCoeff() << ", max diag=" << pdiag.maxCoeff() << ")";
    throw NumericalError(os.str());
  }

  QxPosterior out;
  out.mu = llt.solve(CVector(kappa_mean * sys.adj_y));
  // Sigma = L^-H L^-1, so Sigma_nn is the squared norm of column n of L^-1.
  // L^-1 is lower triangular: block column j only needs the trailing system.
  CMatrix linv = CMatrix::Zero(n, n);
  constexpr Index kBlock = 32;
  for (Index j0 = 0; j0 < n; j0 += kBlock) {
    const Index nb = std::min(kBlock, n - j0);
    auto x = linv.block(j0, j0, n - j0, nb);
    x.topRows(nb).setIdentity();
    factor.bottomRightCorner(n - j0, n - j0).triangularView<Eigen::Lower>().solveInPlace(x);
  }
  out.sigma_diag = linv.colwise().squaredNorm().transpose();
  if (keep_full) out.sigma_full = linv.adjoint() * linv;
  return out;
}

QxPosterior update_qx(const CMatrix& a, const CVector& y, double kappa_mean, const RVector& c, bool keep_full) {
  return update_qx(QxSystem::build(a, y), kappa_mean, c, keep_full);
}

GammaParams update_qrho(const RVector& s_prob, const GammaBranches& g, const CVector& mu, const RVector& sigma_diag) {
  const Index n = mu.size();
  require_dims(s_prob.size() == n && sigma_diag.size() == n, "update_qrho: length mismatch");
  GammaParams out{RVector(n), RVector(n)};
  for (Index i = 0; i < n; ++i) {
    const double s = s_prob[i];
    out.shape[i] = s * g.active_shape + (1.0 - s) * g.inactive_shape + 1.0;
    out.rate[i] = s * g.active_rate + (1.0 - s) * g.inactive_rate + std::norm(mu[i]) + sigma_diag[i];
  }
  return out;
}

RVector update_qs(const RVector& lambda, const GammaBranches& g, const RVector& rho_mean, const RVector& log_rho_mean) {
  const Index n = lambda.size();
  require_dims(rho_mean.size() == n && log_rho_mean.size() == n, "update_qs: length mismatch");
  const double norm_active = g.active_shape * std::log(g.active_rate) - std::lgamma(g.active_shape);
  const double norm_inactive = g.inactive_shape * std::log(g.inactive_rate) - std::lgamma(g.inactive_shape);
  RVector out(n);
  for (Index i = 0; i < n; ++i) {
    const double log_c = norm_active + (g.active_shape - 1.0) * log_rho_mean[i] - g.active_rate * rho_mean[i];
    const double log_cbar = norm_inactive + (g.inactive_shape - 1.0) * log_rho_mean[i] - g.inactive_rate * rho_mean[i];
    const double l1 = std::log(lambda[i]) + log_c;
    const double l0 = std::log1p(-lambda[i]) + log_cbar;
    const double m = std::max(l1, l0);
    const double e1 = std::exp(l1 - m);
    const double e0 = std::exp(l0 - m);
    out[i] = e1 / (e1 + e0);
  }
  return out;
}

KappaParams update_qkappa(double c, double d, const CVector& y, const CMatrix& a, const CVector& mu,
                          const RVector& sigma_diag, const RVector& col_sqnorm) {
  require_dims(a.rows() == y.size() && a.cols() == mu.size(), "update_qkappa: shape mismatch");
  require_dims(sigma_diag.size() == mu.size() && col_sqnorm.size() == mu.size(), "update_qkappa: length mismatch");
  KappaParams out;
  out.shape = c + static_cast<double>(y.size());
  out.rate = d + kernels::residual_energy(a, mu, y) + sigma_diag.dot(col_sqnorm);
  return out;
}

KappaParams update_qkappa(double c, double d, const CVector& y, const CMatrix& a, const CVector& mu,
                          const RVector& sigma_diag) {
  return update_qkappa(c, d, y, a, mu, sigma_diag, kernels::column_sqnorms(a));
}

double full_trace_term(const CMatrix& gram, const CMatrix& sigma) {
  // tr(A Sigma A^H) = tr(Sigma A^H A) = sum_ij Sigma_ij G_ji
  return (sigma.array() * gram.transpose().array()).sum().real();
}

const char* to_string(RhoInit r) { return r == RhoInit::active_branch ? "active_branch" : "prior_mean"; }

RhoInit rho_init_from_string(const std::string& name) {
  if (name == "active_branch") return RhoInit::active_branch;
  if (name == "prior_mean") return RhoInit::prior_mean;
  throw ConfigError("unknown rho_init '" + name + "'");
}

VariationalState initial_state(const BgtPrior& prior, Index n, Index rows, double y_sqnorm, RhoInit rho_init) {
  const auto& g = prior.gamma;
  VariationalState st;
  st.mu = CVector::Zero(n);
  st.sigma_diag = RVector::Zero(n);
  st.s_prob = prior.lambda_vector(n);
  st.rho_shape.resize(n);
  st.rho_rate.resize(n);
  if (rho_init == RhoInit::active_branch) {
    st.rho_shape.setConstant(g.active_shape);
    st.rho_rate.setConstant(g.active_rate);
  } else {
    // Point mass at the mixture mean, carried as shape = mean, rate = 1.
    for (Index i = 0; i < n; ++i) {
      const double l = st.s_prob[i];
      st.rho_shape[i] = l * g.active_shape / g.active_rate + (1.0 - l) * g.inactive_shape / g.inactive_rate;
    }
    st.rho_rate.setOnes();
  }
  st.kappa_shape = prior.noise_shape;
  st.kappa_rate = prior.noise_rate;
  if (prior.noise_shape < 1e-2 && y_sqnorm > 0.0) {
    // Weak noise prior: moment heuristic <kappa> = M / ||y||^2.
    st.kappa_shape = static_cast<double>(rows);
    st.kappa_rate = y_sqnorm;
  }
  return st;
}

SseOutput run_sse(const CMatrix& a, const CVector& y, const QxSystem& sys, const BgtPrior& prior,
                  const SseConfig& config, const VariationalState* warm) {
  if (config.max_sweeps < 1) throw ConfigError("run_sse: max_sweeps must be >= 1");
  const Index n = a.cols();
  require_dims(sys.gram.rows() == n && y.size() == a.rows(), "run_sse: system does not match A/y");

  VariationalState st = (warm != nullptr) ? *warm : initial_state(prior, n, a.rows(), sys.y_sqnorm, config.rho_init);
  require_dims(st.size() == n, "run_sse: warm state size mismatch");
  const RVector lambda = prior.lambda_vector(n);
  const bool keep_full = config.trace_gap_diagnostics && n <= config.full_sigma_limit;

  SseOutput out;
  CVector u_hat = st.mu;
  for (int k = 1; k <= config.max_sweeps; ++k) {
    const RVector rho_mean = st.rho_mean();
    const RVector c = (config.variant == PriorVariant::tanh) ? sla_precision_vector(rho_mean, u_hat, prior.zeta)
                                                             : rho_mean;
    QxPosterior qx = update_qx(sys, st.kappa_mean(), c, keep_full);
    const double change = (qx.mu - u_hat).norm();
    const double scale = qx.mu.norm();
    st.mu = std::move(qx.mu);
    st.sigma_diag = std::move(qx.sigma_diag);
    st.sigma_full = std::move(qx.sigma_full);
    u_hat = st.mu;

    GammaParams rho = update_qrho(st.s_prob, prior.gamma, st.mu, st.sigma_diag);
    st.rho_shape = std::move(rho.shape);
    st.rho_rate = std::move(rho.rate);
    st.s_prob = update_qs(lambda, prior.gamma, st.rho_mean(), st.log_rho_mean());
    const KappaParams kp = update_qkappa(prior.noise_shape, prior.noise_rate, y, a, st.mu, st.sigma_diag, sys.col_sqnorm);
    st.kappa_shape = kp.shape;
    st.kappa_rate = kp.rate;

    SseTraceRecord rec;
    rec.sweep = k;
    const double res = kernels::residual_energy(a, st.mu, y);
    rec.residual_db = 10.0 * std::log10(std::max(res, 1e-300) / std::max(sys.y_sqnorm, 1e-300));
    rec.support_size = static_cast<Index>(extract_support(st, config.support, a.rows()).size());
    rec.kappa_mean = st.kappa_mean();
    if (st.sigma_full) {
      rec.trace_gap = full_trace_term(sys.gram, *st.sigma_full) - st.sigma_diag.dot(sys.col_sqnorm);
    }
    out.trace.push_back(rec);
    out.sweeps = k;
    if (config.early_stop_tol > 0.0 && scale > 0.0 && change / scale < config.early_stop_tol) break;
  }

  out.x_hat = st.mu;
  out.kappa_hat = st.kappa_mean();
  out.support = extract_support(st, config.support, a.rows());
  const Index s = static_cast<Index>(out.support.size());
  out.posterior_mean_s.resize(s);
  out.posterior_var_s.resize(s);
  for (Index k = 0; k < s; ++k) {
    out.posterior_mean_s[k] = st.mu[out.support[static_cast<std::size_t>(k)]];
    out.posterior_var_s[k] = st.sigma_diag[out.support[static_cast<std::size_t>(k)]];
  }
  out.state = std::move(st);
  return out;
}

SseOutput run_sse(const Observation& obs, const ParametricDictionary& dict, const GridParams& grid,
                  const BgtPrior& prior, const SseConfig& config) {
  require_dims(obs.y.size() == dict.rows(), "run_sse: observation length != dictionary rows");
  const CMatrix a = assemble_matrix(dict, grid);
  const QxSystem sys = QxSystem::build(a, obs.y);
  return run_sse(a, obs.y, sys, prior, config);
}

std::vector<Index> extract_support(const VariationalState& state, const SupportPolicy& policy, Index rows) {
  const Index n = state.mu.size();
  RVector energy(n);
  for (Index i = 0; i < n; ++i) energy[i] = std::norm(state.mu[i]);
  const double peak = n > 0 ? energy.maxCoeff() : 0.0;
  if (!(peak > 0.0)) return {};

  std::vector<Index> picked;
  for (Index i = 0; i < n; ++i) {
    if (state.s_prob[i] > policy.probability_threshold && energy[i] >= policy.energy_ratio * peak) picked.push_back(i);
  }
  if (picked.empty()) {
    Index best = 0;
    energy.maxCoeff(&best);
    return {best};
  }
  const Index cap = policy.max_support > 0 ? policy.max_support : std::max<Index>(1, rows / 4);
  if (static_cast<Index>(picked.size()) > cap) {
    std::stable_sort(picked.begin(), picked.end(), [&](Index l, Index r) { return energy[l] > energy[r]; });
    picked.resize(static_cast<std::size_t>(cap));
    std::sort(picked.begin(), picked.end());
  }
  return picked;
}

}  // namespace srcs
