#include "srcs/srgu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "srcs/kernels.hpp"

namespace srcs {

const char* to_string(DirectionMethod m) { return m == DirectionMethod::bfgs ? "bfgs" : "gradient_descent"; }

namespace {

CMatrix assemble_rows(const ParametricDictionary& dict, const GridMatrix& theta_s) {
  const Index s = theta_s.rows();
  CMatrix a(dict.rows(), s);
  for (Index k = 0; k < s; ++k) {
    std::span<const double> p(theta_s.data() + k * theta_s.cols(), static_cast<std::size_t>(theta_s.cols()));
    dict.check_point(p, k);
    dict.column(p, std::span<cplx>(a.col(k).data(), static_cast<std::size_t>(a.rows())));
  }
  return a;
}

CVector solve_normal(CMatrix lhs, const CVector& rhs, LmmseDiagnostics* diag) {
  const Index s = lhs.rows();
  const RVector d = lhs.diagonal().real();
  Eigen::LLT<CMatrix> llt(lhs);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const auto& f = llt.matrixLLT();
    for (Index i = 0; i < s && ok; ++i) ok = std::norm(f(i, i)) / d[i] > 1e-12;
  }
  if (ok) return llt.solve(rhs);
  const double jitter = 1e-10 * d.sum() / static_cast<double>(s);
  lhs.diagonal().array() += jitter;
  llt.compute(lhs);
  if (llt.info() != Eigen::Success) throw NumericalError("lmmse_gain_update: normal matrix not positive definite");
  if (diag != nullptr) {
    diag->ridge_fallback = true;
    diag->jitter = jitter;
  }
  return llt.solve(rhs);
}

}  // namespace

CVector lmmse_gain_update(const CMatrix& a_s, const CVector& y, double kappa, const CVector& u_s,
                          const RVector& sigma_s, LmmseDiagnostics* diag) {
  require_dims(a_s.rows() == y.size() && a_s.cols() == u_s.size() && sigma_s.size() == u_s.size(),
               "lmmse_gain_update: shape mismatch");
  if (!(kappa > 0.0)) throw NumericalError("lmmse_gain_update: kappa must be > 0");
  if ((sigma_s.array() <= 0.0).any()) throw NumericalError("lmmse_gain_update: prior variances must be > 0");
  CMatrix lhs = kernels::gram(a_s);
  CVector rhs = kernels::adjoint_matvec(a_s, y);
  for (Index k = 0; k < u_s.size(); ++k) {
    const double w = 1.0 / (kappa * sigma_s[k]);
    lhs(k, k) += w;
    rhs[k] += w * u_s[k];
  }
  return solve_normal(std::move(lhs), rhs, diag);
}

CVector lmmse_gain_update(const CMatrix& a_s, const CVector& y, double kappa, const CVector& u_s,
                          const CMatrix& sigma_s, LmmseDiagnostics* diag) {
  require_dims(a_s.rows() == y.size() && a_s.cols() == u_s.size() && sigma_s.rows() == u_s.size() &&
                   sigma_s.cols() == u_s.size(),
               "lmmse_gain_update: shape mismatch");
  if (!(kappa > 0.0)) throw NumericalError("lmmse_gain_update: kappa must be > 0");
  Eigen::LLT<CMatrix> sllt(sigma_s);
  if (sllt.info() != Eigen::Success) throw NumericalError("lmmse_gain_update: prior covariance not positive definite");
  const CMatrix sigma_inv = sllt.solve(CMatrix::Identity(u_s.size(), u_s.size()));
  CMatrix lhs = kernels::gram(a_s) + sigma_inv / kappa;
  lhs = 0.5 * (lhs + lhs.adjoint()).eval();
  CVector rhs = kernels::adjoint_matvec(a_s, y) + sigma_inv * u_s / kappa;
  return solve_normal(std::move(lhs), rhs, diag);
}

double grid_objective(const ParametricDictionary& dict, const GridMatrix& theta_s, const CVector& x_s,
                      const CVector& y) {
  require_dims(theta_s.rows() == x_s.size() && theta_s.cols() == dict.param_dim(), "grid_objective: shape mismatch");
  require_dims(y.size() == dict.rows(), "grid_objective: y length mismatch");
  return kernels::residual_energy(assemble_rows(dict, theta_s), x_s, y);
}

RVector grid_gradient(const ParametricDictionary& dict, const GridMatrix& theta_s, const CVector& x_s,
                      const CVector& y) {
  require_dims(theta_s.rows() == x_s.size() && theta_s.cols() == dict.param_dim(), "grid_gradient: shape mismatch");
  const Index s = theta_s.rows();
  const Index dims = theta_s.cols();
  const CMatrix a = assemble_rows(dict, theta_s);
  const CVector r = y - kernels::matvec(a, x_s);
  RVector g(s * dims);
  CMatrix jac(dict.rows(), dims);
  for (Index k = 0; k < s; ++k) {
    dict.column_jacobian(std::span<const double>(theta_s.data() + k * dims, static_cast<std::size_t>(dims)), jac);
    for (Index d = 0; d < dims; ++d) {
      const cplx jr = kernels::cdot(kernels::column_span(jac, d), kernels::as_span(r));
      g[k * dims + d] = -2.0 * (std::conj(x_s[k]) * jr).real();
    }
  }
  return g;
}

BfgsState::BfgsState(Index dim, int max_failures_)
    : inv_hessian(RMatrix::Identity(dim, dim)), max_failures(max_failures_) {}

void BfgsState::reset() {
  inv_hessian.setIdentity();
  has_history = false;
  consecutive_failures = 0;
}

DirectionResult bfgs_direction(BfgsState& state, const RVector& point, const RVector& grad,
                               const std::vector<bool>* frozen) {
  const Index n = grad.size();
  require_dims(point.size() == n, "bfgs_direction: point/gradient length mismatch");
  if (state.inv_hessian.rows() != n) state = BfgsState(n, state.max_failures);
  if (!grad.allFinite()) throw NumericalError("bfgs_direction: non-finite gradient");

  DirectionResult out;
  if (!state.has_history) {
    out.direction = -grad;
  } else {
    RVector s = point - state.prev_point;
    RVector g = grad - state.prev_grad;
    if (frozen != nullptr) {
      for (Index i = 0; i < n; ++i) {
        if ((*frozen)[static_cast<std::size_t>(i)]) s[i] = g[i] = 0.0;
      }
    }
    const double sg = s.dot(g);
    const bool degenerate = !(std::abs(sg) >= 1e-12 * s.norm() * g.norm()) || s.norm() == 0.0;
    if (!degenerate && sg > 0.0) {
      const double r = 1.0 / sg;
      const RMatrix left = RMatrix::Identity(n, n) - r * s * g.transpose();
      state.inv_hessian = left * state.inv_hessian * left.transpose() + r * s * s.transpose();
      state.inv_hessian = 0.5 * (state.inv_hessian + state.inv_hessian.transpose()).eval();
      state.consecutive_failures = 0;
      out.direction = -state.inv_hessian * grad;
    } else {
      out.direction = -grad;
      out.fallback = true;
      if (++state.consecutive_failures >= state.max_failures) {
        state.inv_hessian.setIdentity();
        state.consecutive_failures = 0;
      }
    }
  }
  state.prev_point = point;
  state.prev_grad = grad;
  state.has_history = true;
  return out;
}

LineSearchResult armijo_search(const ProjectedObjective& f, const RVector& point, double value,
                               const RVector& grad, const RVector& direction, const ArmijoParams& params,
                               const BoxProjection& project) {
  require_dims(point.size() == grad.size() && point.size() == direction.size(), "armijo_search: length mismatch");
  const double slope = direction.dot(grad);
  LineSearchResult out;
  double eps = params.eps0;
  for (int t = 0; t <= params.max_backtracks; ++t, eps *= params.gamma) {
    RVector trial = point + eps * direction;
    RVector raw = trial;
    if (project) project(trial);
    ProjectedValue pv = f(trial);
    if (std::isfinite(pv.value) && pv.value <= value + params.c * eps * slope) {
      out.step = eps;
      out.value = pv.value;
      out.gains = std::move(pv.gains);
      out.backtracks = t;
      out.clamped.resize(static_cast<std::size_t>(trial.size()));
      for (Index i = 0; i < trial.size(); ++i) out.clamped[static_cast<std::size_t>(i)] = trial[i] != raw[i];
      out.point = std::move(trial);
      return out;
    }
  }
  out.stalled = true;
  out.point = point;
  out.value = value;
  out.backtracks = params.max_backtracks;
  out.clamped.assign(static_cast<std::size_t>(point.size()), false);
  return out;
}

ProjectedObjective make_projected_objective(const ParametricDictionary& dict, const CVector& y, double kappa,
                                            const CVector& u_s, const RVector& sigma_s, double value_scale,
                                            double x_max) {
  const Index dims = dict.param_dim();
  RVector scale(dims);
  for (Index d = 0; d < dims; ++d) scale[d] = dict.resolution(d);
  return [&dict, y, kappa, u_s, sigma_s, value_scale, x_max, scale, dims](const RVector& z) {
    const Index s = z.size() / dims;
    GridMatrix theta(s, dims);
    for (Index k = 0; k < s; ++k)
      for (Index d = 0; d < dims; ++d) theta(k, d) = z[k * dims + d] * scale[d];
    const CMatrix a = assemble_rows(dict, theta);
    CVector x = lmmse_gain_update(a, y, kappa, u_s, sigma_s);
    for (Index k = 0; k < x.size(); ++k) {
      const double mag = std::abs(x[k]);
      if (mag > x_max) x[k] *= x_max / mag;
    }
    return ProjectedValue{kernels::residual_energy(a, x, y) / value_scale, std::move(x)};
  };
}

namespace {

void merge_close(RefinementState& st, const ParametricDictionary& dict, double fraction) {
  const Index dims = st.theta_s.cols();
  std::vector<bool> dead(st.support.size(), false);
  for (std::size_t i = 0; i < st.support.size(); ++i) {
    if (dead[i]) continue;
    for (std::size_t j = i + 1; j < st.support.size(); ++j) {
      if (dead[j]) continue;
      bool close = true;
      for (Index d = 0; d < dims && close; ++d) {
        close = std::abs(st.theta_s(static_cast<Index>(i), d) - st.theta_s(static_cast<Index>(j), d)) <
                fraction * dict.resolution(d);
      }
      if (close) {
        st.x_s[static_cast<Index>(i)] += st.x_s[static_cast<Index>(j)];
        dead[j] = true;
      }
    }
  }
  std::vector<Index> keep;
  for (std::size_t i = 0; i < dead.size(); ++i)
    if (!dead[i]) keep.push_back(static_cast<Index>(i));
  if (keep.size() == st.support.size()) return;
  std::vector<Index> support;
  GridMatrix theta(static_cast<Index>(keep.size()), dims);
  CVector x(static_cast<Index>(keep.size())), u(static_cast<Index>(keep.size()));
  RVector sig(static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Index i = keep[k];
    support.push_back(st.support[static_cast<std::size_t>(i)]);
    theta.row(static_cast<Index>(k)) = st.theta_s.row(i);
    x[static_cast<Index>(k)] = st.x_s[i];
    u[static_cast<Index>(k)] = st.u_s[i];
    sig[static_cast<Index>(k)] = st.sigma_s[i];
  }
  st.support = std::move(support);
  st.theta_s = std::move(theta);
  st.x_s = std::move(x);
  st.u_s = std::move(u);
  st.sigma_s = std::move(sig);
}

}  // namespace

RefinementState run_srgu(const SseOutput& sse, const ParametricDictionary& dict, const GridParams& grid,
                         const Observation& obs, const SrguConfig& config) {
  if (sse.support.empty()) throw ConfigError("run_srgu: empty support");
  if (config.max_rounds < 1) throw ConfigError("run_srgu: max_rounds must be >= 1");
  require_dims(obs.y.size() == dict.rows(), "run_srgu: observation length != dictionary rows");

  const Index dims = dict.param_dim();
  const Index s = static_cast<Index>(sse.support.size());
  RefinementState st;
  st.support = sse.support;
  st.theta_s = grid.subset(sse.support).values();
  st.u_s = sse.posterior_mean_s;
  st.sigma_s = (sse.posterior_var_s * config.sigma_inflation).cwiseMax(1e-300);
  st.kappa_hat = sse.kappa_hat;
  st.bfgs = BfgsState(s * dims, config.max_secant_failures);

  RVector scale(dims);
  for (Index d = 0; d < dims; ++d) scale[d] = dict.resolution(d);
  const double value_scale = std::max(obs.y.squaredNorm(), 1e-300);
  const ProjectedObjective f =
      make_projected_objective(dict, obs.y, st.kappa_hat, st.u_s, st.sigma_s, value_scale, config.x_max);
  const BoxProjection project = [&](RVector& z) {
    for (Index k = 0; k < s; ++k)
      for (Index d = 0; d < dims; ++d) {
        const ParamRange r = dict.valid_range(d);
        z[k * dims + d] = r.clamp(z[k * dims + d] * scale[d]) / scale[d];
      }
  };

  RVector z(s * dims);
  for (Index k = 0; k < s; ++k)
    for (Index d = 0; d < dims; ++d) z[k * dims + d] = st.theta_s(k, d) / scale[d];
  ProjectedValue cur = f(z);
  st.initial_objective = cur.value * value_scale;

  auto unscale = [&](const RVector& zz) {
    GridMatrix theta(s, dims);
    for (Index k = 0; k < s; ++k)
      for (Index d = 0; d < dims; ++d) theta(k, d) = zz[k * dims + d] * scale[d];
    return theta;
  };

  std::vector<bool> frozen(static_cast<std::size_t>(s * dims), false);
  for (int round = 1; round <= config.max_rounds; ++round) {
    RVector g = grid_gradient(dict, unscale(z), cur.gains, obs.y) / value_scale;
    g.array() *= scale.replicate(s, 1).array();
    if (!(g.norm() > 0.0)) break;

    DirectionResult dir;
    const bool fresh = !st.bfgs.has_history;
    if (config.method == DirectionMethod::bfgs) {
      dir = bfgs_direction(st.bfgs, z, g, &frozen);
      if (!(dir.direction.dot(g) < 0.0)) {
        dir.direction = -g;
        dir.fallback = true;
        st.bfgs.reset();
      }
    } else {
      dir.direction = -g;
    }

    LineSearchResult ls = armijo_search(f, z, cur.value, g, dir.direction, config.armijo, project);
    st.trace.push_back({round, (ls.stalled ? cur.value : ls.value) * value_scale, ls.step, dir.fallback, ls.stalled});
    st.rounds = round;
    if (ls.stalled) {
      ++st.stalls;
      const bool was_gradient = config.method == DirectionMethod::gradient_descent || dir.fallback || fresh;
      st.bfgs.reset();
      if (was_gradient) break;
      continue;
    }
    z = std::move(ls.point);
    cur.value = ls.value;
    cur.gains = std::move(ls.gains);
    frozen = std::move(ls.clamped);
  }

  st.theta_s = unscale(z);
  st.x_s = cur.gains;
  st.final_objective = cur.value * value_scale;
  if (config.merge_close_points) merge_close(st, dict, config.merge_fraction);
  return st;
}

}  // namespace srcs
