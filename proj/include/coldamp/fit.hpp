#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "coldamp/loop.hpp"
#include "coldamp/lsq.hpp"
#include "coldamp/simkit.hpp"
#include "coldamp/spectra.hpp"

namespace coldamp {

/// G = scale e^{i(phi - Omega tau)} / (omega_r^2 - Omega^2 + i omega_r Omega / q).
/// The scale is real and positive; phi carries the overall phase.
struct ResonatorModel {
  double omega_r = 0.0;
  double q = 1.0;
  double phi = 0.0;
  double tau = 0.0;
  double scale = 1.0;

  cplx response(double omega) const;
  void validate() const;
};

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  double chi2_per_dof = 0.0;
  int dof = 0;
  int n_points = 0;
  int iterations = 0;

  double value(const std::string& name) const;
  double sigma(const std::string& name) const;
  std::size_t index(const std::string& name) const;
};

// Parameter order used by the resonator fits.
inline const std::vector<std::string> kResonatorNames{"scale", "phi", "tau", "omega_r", "q"};

Eigen::VectorXd resonator_to_vector(const ResonatorModel& m);
ResonatorModel resonator_from_vector(const Eigen::VectorXd& v);
ResonatorModel resonator_from_fit(const FitResult& fr);

/// Response and analytic derivatives: d/dbeta in kResonatorNames order, and d/dOmega.
void resonator_derivatives(double omega, const Eigen::VectorXd& beta, cplx& g, Eigen::VectorXcd& dbeta, cplx& domega);

/// Stacked (Re, Im) residuals weighted by 1/sigma_g, with the analytic Jacobian.
ResidualFn resonator_residuals(const TFMeasurement& m);

/// Starting point from the peak, half-power width and phase slope, refined by a coarse profile search.
ResonatorModel initial_resonator_guess(const TFMeasurement& m);

struct ResonatorFitOptions {
  std::vector<double> sigma_omega;  // abscissa std per point (rad/s); empty means exact frequencies
  LsqOptions lsq;
};

/// Orthogonal distance regression of the resonator model.
FitResult fit_resonator(const TFMeasurement& m, const ResonatorModel& init, const ResonatorFitOptions& opt = {});
/// Plain weighted least squares (exact abscissae) through the independent LM solver.
FitResult fit_resonator_wls(const TFMeasurement& m, const ResonatorModel& init, const LsqOptions& opt = {});

enum class ForceShape { Structural, White };

/// ln S_imp coefficients share the ImprecisionModel convention.
struct SpectrumModelParams {
  double force_scale = 1.0;
  std::vector<double> imp_log_coeffs;
};

/// Everything the spectrum model holds fixed.
struct SpectrumFitContext {
  OscillatorParams oscillator;
  double omega_r = 0.0;  // from the transfer-function fit
  double q = 1.0;
  /// Force PSD shape, N^2/Hz, multiplied by force_scale.
  std::function<double(double)> force_shape;
  double band_lo = 0.0;
  double band_hi = 0.0;
  double omega_ref = 0.0;  // imprecision polynomial reference

  cplx chi_eff(double omega) const;
};

/// Force PSD shape from the budget sources (structural thermal + back-action + actuator),
/// or a white force pinned to the same value at Omega_ref.
std::function<double(double)> make_force_shape(const OscillatorParams& p, const BackActionParams& ba,
                                               const BudgetSources& src, ForceShape shape, double omega_ref);

/// Model observed PSD for the parameter vector [force_scale, c0, c1, ...].
double spectrum_model(double omega, const SpectrumFitContext& ctx, const Eigen::VectorXd& beta);

FitResult fit_spectrum(const SpectrumMeasurement& s, const SpectrumFitContext& ctx, const SpectrumModelParams& init,
                       const LsqOptions& opt = {});

struct UncertaintyBudget {
  double calibration_rel = 0.02;      // amplitude calibration
  double spectrum_model_rel = 0.05;   // spread between spectra
  double occupancy_grid_points_per_linewidth = 50.0;
};

/// n_eff from the reconstructed physical spectrum, with first-order uncertainty propagation.
/// The susceptibility sensitivity includes refitting the spectrum at perturbed (omega_r, q).
OccupancyReport occupancy_with_uncertainty(const FitResult& fr_tf, const FitResult& fr_sp,
                                           const SpectrumMeasurement& s, const SpectrumFitContext& ctx,
                                           const OscillatorParams& p, const BackActionParams& ba,
                                           const BudgetSources& src, const UncertaintyBudget& ub);

/// Occupancy implied by fitted parameters (no uncertainty), with per-source split.
OccupancyReport occupancy_from_fit(double omega_r, double q, const Eigen::VectorXd& sp_beta,
                                   const SpectrumFitContext& ctx, const OscillatorParams& p,
                                   const BackActionParams& ba, const BudgetSources& src,
                                   double points_per_linewidth = 50.0);

/// Throws FitError when the covariance has eigenvalues below -1e-12 trace or is asymmetric.
void check_covariance(const Eigen::MatrixXd& c);

}  // namespace coldamp
