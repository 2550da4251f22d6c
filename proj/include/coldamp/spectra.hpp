#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coldamp/loop.hpp"
#include "coldamp/physics.hpp"

namespace coldamp {

/// ln S_imp = c0 + c1 u + c2 u^2 + c3 u^3 with u = ln(omega / omega_ref).
struct ImprecisionModel {
  double omega_ref = 0.0;
  std::vector<double> coeffs;
  bool enabled = true;  // false: no imprecision noise at all

  static ImprecisionModel flat(double s_imp, double omega_ref);
  double psd(double omega) const;
  void validate() const;
};

struct NoiseBudget {
  std::vector<double> grid;         // rad/s
  std::vector<double> thermal;      // N^2/Hz
  std::vector<double> backaction;   // N^2/Hz
  std::vector<double> actuator;     // N^2/Hz
  std::vector<double> imprecision;  // m^2/Hz

  void validate() const;
  double force_total(std::size_t i) const { return thermal[i] + backaction[i] + actuator[i]; }
};

struct BudgetSources {
  bool backaction = true;  // false: no radiation-pressure noise
  bool actuator = true;
  bool freeze_thermal = false;  // evaluate n_th at freeze_omega instead of each grid point
  double freeze_omega = 0.0;
};

NoiseBudget build_noise_budget(const std::vector<double>& grid, const OscillatorParams& p,
                               const BackActionParams& ba, const ImprecisionModel& imp,
                               const BudgetSources& src = {});

struct OccupancyReport {
  double n_eff = 0.0;
  double sigma_n = 0.0;
  double band_lo = 0.0;  // rad/s
  double band_hi = 0.0;
  double temperature_eff = 0.0;
  std::vector<std::pair<std::string, double>> decomposition;
};

/// (4e-18 N/rtHz)^2 (2 pi 10 / omega)^2, N^2/Hz.
double actuator_force_psd(double omega);
/// S_F^fb / (4 hbar m Gamma0 Omega_eff) with Gamma0 = Gamma0[Omega_eff].
double actuator_occupancy(const OscillatorParams& p, const LoopConfig& cfg);

Psd observed_psd(const std::vector<double>& grid, const OscillatorParams& p, const LoopConfig& cfg,
                 const NoiseBudget& nb);
Psd physical_psd(const std::vector<double>& grid, const OscillatorParams& p, const LoopConfig& cfg,
                 const NoiseBudget& nb);

/// Physical displacement PSD split by source, evaluated on nb.grid.
struct PhysicalComponents {
  std::vector<double> thermal, backaction, actuator, imprecision;
};
PhysicalComponents physical_psd_components(const OscillatorParams& p, const LoopConfig& cfg,
                                           const NoiseBudget& nb);

/// n_eff + 1/2 = int S_x / (2 x_zp^2) dOmega / 2pi over the band, x_zp at Omega_eff.
OccupancyReport occupancy(const Psd& sx, const OscillatorParams& p, const LoopConfig& cfg, double band_lo,
                          double band_hi);

/// Occupancy with per-source decomposition; parts (including the -1/2 vacuum offset) sum to n_eff.
OccupancyReport occupancy_decomposed(const OscillatorParams& p, const LoopConfig& cfg, const NoiseBudget& nb,
                                     double band_lo, double band_hi);

double effective_temperature(double n_eff, double omega_eff);

/// White-noise closed form for n_eff, n_th frozen at Omega_eff.
/// n_other adds flat occupations (back-action, actuator) to n_tot.
double occupancy_white_approx(const OscillatorParams& p, const LoopConfig& cfg, double n_imp,
                              double n_other = 0.0);
/// Gamma_eff minimising occupancy_white_approx.
double optimal_linewidth(const OscillatorParams& p, const LoopConfig& cfg, double n_imp, double n_other = 0.0);
/// Feedback back-action of the spring term, Q0^2 (Omega_fb/Omega0)^4 n_imp.
double n_feedback_spring(const OscillatorParams& p, const LoopConfig& cfg, double n_imp);

/// (n_th[Omega_eff] + n_ba + n_fb[Omega_eff]) Gamma0[Omega_eff], n_fb from the budget's actuator noise.
double decoherence_rate(const OscillatorParams& p, const LoopConfig& cfg, const NoiseBudget& nb);

}  // namespace coldamp
