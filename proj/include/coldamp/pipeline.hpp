#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coldamp/config.hpp"
#include "coldamp/fit.hpp"

namespace coldamp {

struct BudgetSummary {
  double omega_eff = 0.0;
  double gamma_fb = 0.0;
  double gamma_eff = 0.0;
  double q_eff = 0.0;
  double delay = 0.0;
  double n_th_omega0 = 0.0;
  double n_th_eff = 0.0;
  double n_ba = 0.0;
  double n_imp = 0.0;
  double n_fb = 0.0;     // spring feedback back-action
  double n_fb_ex = 0.0;  // actuator force noise at Omega_eff
  double n_fb_ex_steady = 0.0;  // its contribution to n_eff
  double decoherence_rate = 0.0;
  double n_eff_white = 0.0;
  double gamma_opt = 0.0;
  OccupancyReport occupancy;
  StabilityReport stability;
  std::vector<std::string> warnings;
};

struct BudgetOutput {
  NoiseBudget budget;
  std::vector<double> thermal_x, backaction_x, actuator_x, imprecision_obs_x, imprecision_fb_x;
  Psd observed, physical;
  BudgetSummary summary;
};

/// Per-source displacement PSDs on a log grid plus the scalar summary.
/// grid_hz overrides the configured grid range.
BudgetOutput run_budget(const ExperimentConfig& cfg, std::optional<std::pair<double, double>> grid_hz = {},
                        double target_q = -1.0);

/// Model occupancy over the configured band on a resonance-adapted grid.
OccupancyReport model_occupancy(const ExperimentConfig& cfg, const LoopConfig& loop, double band_lo, double band_hi);

StabilityReport loop_stability(const ExperimentConfig& cfg, const LoopConfig& loop);

/// True measured response: tf_gain m chi_eff e^{i(phi - Omega t)}.
std::function<cplx(double)> tf_truth(const ExperimentConfig& cfg, const LoopConfig& loop);

struct SimulationOutput {
  TFMeasurement tf;
  SpectrumMeasurement psd;
};

SimulationOutput run_simulate(const ExperimentConfig& cfg, const LoopConfig& loop, std::uint64_t seed);

struct FitOutput {
  FitResult tf;
  FitResult spectrum;
  OccupancyReport occupancy;
  SpectrumFitContext context;
  Psd physical;  // reconstructed on the measured PSD grid
};

FitResult run_fit_tf(const ExperimentConfig& cfg, const TFMeasurement& tf);
SpectrumFitContext spectrum_context(const ExperimentConfig& cfg, const FitResult& tf_fit);
SpectrumModelParams spectrum_init(const ExperimentConfig& cfg);
FitResult run_fit_spectrum(const ExperimentConfig& cfg, const FitResult& tf_fit, const SpectrumMeasurement& psd);
FitOutput run_fit(const ExperimentConfig& cfg, const TFMeasurement& tf, const SpectrumMeasurement& psd,
                  std::optional<std::pair<double, double>> band = {});

struct SweepRow {
  std::size_t index = 0;
  double target_q = 0.0;
  double gamma_fb = 0.0;
  double model_q = 0.0;
  double model_gamma_eff = 0.0;
  double model_n_eff = 0.0;
  double fitted_q = 0.0;
  double sigma_q = 0.0;
  double fitted_gamma = 0.0;  // omega_r / q
  double n_eff = 0.0;
  double sigma_n = 0.0;
  bool ok = false;
  std::string error;
};

/// Simulate and fit every setting; failures are recorded per row. Rows come back in input order.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::vector<double>& target_q, std::uint64_t seed,
                                unsigned threads = 0);

}  // namespace coldamp
