#pragma once

// Massive MIMO-OFDM channel extrapolation: a ULA receiver observes one pilot
// bandwidth part (BWP) of h_p and the full band is predicted from the
// recovered angle-delay paths.

#include <cstdint>
#include <optional>
#include <vector>

#include "srcs/common.hpp"
#include "srcs/model.hpp"

namespace srcs {

struct OfdmArrayConfig {
  Index n_rx = 32;
  Index m_sub = 32;
  Index h_p = 4;
  double f0 = 120e3;
  Index observed_bwp = 0;
  /// Unit-modulus pilot of length m_sub; empty means all ones.
  CVector pilot;

  void validate() const;
  CVector pilot_or_ones() const;
  Index rows() const { return n_rx * m_sub; }
  Index full_subcarriers() const { return h_p * m_sub; }
  /// Delay DFT resolution of one BWP, 1 / (M f0).
  double delay_resolution() const { return 1.0 / (static_cast<double>(m_sub) * f0); }
  /// Angle DFT resolution in sin(theta), 2 / N_r.
  double sine_resolution() const { return 2.0 / static_cast<double>(n_rx); }
  /// Largest |theta| accepted by the dictionary.
  static double max_angle();
};

/// Pilot with i.i.d. uniform phases.
CVector random_pilot(Index m_sub, std::uint64_t seed);

struct Path {
  cplx gain;
  double theta = 0.0;  // radians
  double tau = 0.0;    // seconds
};

struct PathSet {
  std::vector<Path> paths;

  Index size() const { return static_cast<Index>(paths.size()); }
  /// Throws RangeError (column = path index) for delays outside [0, 1/f0) or
  /// angles outside (-pi/2, pi/2).
  void validate(double f0) const;
  /// K x 2 rows of (theta, tau).
  GridParams grid() const;
  CVector gains() const;
};

/// Entry m = exp(-j pi m sin(theta)); throws RangeError for |theta| >= pi/2.
CVector ula_steering(double theta, Index n_rx);
/// Entry n = exp(-j 2 pi n f0 tau), n = 0 .. h_p M - 1.
CVector delay_response(double tau, Index h_p, Index m_sub, double f0);

/// Angle-delay dictionary with column kron(a_R(theta), diag(beta) W b(tau)),
/// W selecting the observed BWP. Grid rows are (theta [rad], tau [s]).
class ChannelDictionary final : public ParametricDictionary {
 public:
  explicit ChannelDictionary(OfdmArrayConfig config);

  Index rows() const override { return config_.rows(); }
  Index param_dim() const override { return 2; }
  ParamRange valid_range(Index d) const override;
  double resolution(Index d) const override;

  using ParametricDictionary::column;
  using ParametricDictionary::column_jacobian;
  void column(std::span<const double> theta, std::span<cplx> out) const override;
  void column_jacobian(std::span<const double> theta, CMatrix& jac) const override;

  const OfdmArrayConfig& config() const { return config_; }

 private:
  OfdmArrayConfig config_;
  CVector pilot_;
};

struct ChannelSample {
  /// (h_p M) x N_r full-band channel.
  CMatrix h_full;
  Observation obs;
  /// Per-entry complex noise variance; 0 when noiseless.
  double noise_variance = 0.0;
};

/// Y = diag(beta) W H + N, y = vec(Y). sigma_e^2 = ||diag(beta) W H||^2 / (M N_r snr);
/// noiseless when snr_db is empty.
ChannelSample generate_channel(const OfdmArrayConfig& config, const PathSet& paths, std::optional<double> snr_db,
                               std::uint64_t seed);

/// Random path geometry for one trial.
struct ScenarioConfig {
  Index k_paths = 8;
  /// Angles uniform in [-spread/2, spread/2] degrees.
  double angle_spread_deg = 120.0;
  /// Minimum delay separation, in units of the delay DFT resolution. The first
  /// two paths are placed exactly this far apart.
  double delay_gap_bins = 0.36;
  /// Delays lie in [0, delay_span_bins) resolution bins.
  double delay_span_bins = 8.0;
  /// |gain| uniform in [gain_min, 1], phase uniform.
  double gain_min = 0.5;

  void validate(const OfdmArrayConfig& array) const;
};

PathSet draw_paths(const OfdmArrayConfig& array, const ScenarioConfig& scenario, std::uint64_t seed);

struct CoarseInitConfig {
  /// Expected path count; peaks = 2 k_expected when peaks == 0.
  Index k_expected = 8;
  Index peaks = 0;
  int radius = 2;
  int oversample = 4;
  /// Zero-padding factor of the periodogram along both axes.
  int fft_pad = 4;
  /// 0 means no cap.
  Index max_points = 0;
  /// Fallback grid size (angles x delays) for an all-zero observation.
  Index fallback_angles = 16;
  Index fallback_delays = 16;
};

/// Periodogram peak picking followed by a local dense grid around each peak.
GridParams coarse_grid_init(const Observation& obs, const OfdmArrayConfig& config, const CoarseInitConfig& init);

/// Full-band channel from refined paths; theta_s rows are (theta, tau).
CMatrix extrapolate_channel(const GridMatrix& theta_s, const CVector& x_s, const OfdmArrayConfig& config);

/// 10 log10(||H_hat - H||^2 / ||H||^2), floored at -300 dB. Throws ConfigError when H == 0.
double nmse_db(const CMatrix& h_hat, const CMatrix& h);

constexpr double kDbFloor = -300.0;

/// Normalized parameter RMSE in dB with greedy nearest matching. C_theta and
/// C_tau default to the true dynamic ranges (or `fallback_*` when degenerate).
double rmse_db(const GridMatrix& est, const GridMatrix& truth, std::optional<double> c_theta = std::nullopt,
               std::optional<double> c_tau = std::nullopt, double fallback_theta = 0.0, double fallback_tau = 0.0);

}  // namespace srcs
