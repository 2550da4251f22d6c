#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coldamp/loop.hpp"
#include "coldamp/physics.hpp"
#include "coldamp/simkit.hpp"
#include "coldamp/spectra.hpp"

namespace coldamp {

struct LoopSettings {
  double trap_hz = 148.0;
  double damping_hz = -1.0;  // Gamma_fb / 2pi; negative when target_q is used
  double target_q = 1.0;     // <= 0 when damping_hz is used
  double delay_s = -1.0;     // negative: back-solved from delay_q
  double delay_q = 50.0;     // quality factor produced by the delay alone
  double band_lo_hz = 100.0;
  double band_hi_hz = 200.0;
  int rolloff_order = 2;
  std::vector<double> notch_hz{500.0, 1000.0, 1500.0};
  std::vector<double> notch_depth{0.01, 0.01, 0.01};
  std::vector<double> notch_width_hz{4.0, 4.0, 4.0};
};

struct MeasurementSettings {
  int tf_points = 100;
  double tf_lo_hz = 100.0;
  double tf_hi_hz = 200.0;
  std::vector<double> coherence_knots_hz;  // empty: constant profile
  std::vector<double> coherence{0.9};
  int tf_n_avg = 64;
  double tf_phase_rad = 0.3;
  double tf_delay_s = 1e-3;
  double tf_gain = 1.0;
  double tf_sigma_freq_hz = 0.0;
  double segment_duration_s = 1.0;
  double psd_lo_hz = 100.0;
  double psd_hi_hz = 200.0;
  double psd_bin_hz = 0.25;
  int psd_n_avg = 300;
  std::uint64_t seed = 1;
};

struct UncertaintySettings {
  double calibration_rel = 0.02;
  double spectrum_model_rel = 0.05;
  double calibration_scale = 1.0;  // applied to simulated displacement data
};

struct GridSettings {
  double lo_hz = 100.0;
  double hi_hz = 200.0;
  int points = 2001;
};

struct FitSettings {
  int imp_order = 1;  // polynomial order of ln S_imp
  std::string force_shape = "structural";
};

/// Fully resolved experiment description. Frequencies in the *_hz settings are converted
/// to angular units only when the physics records are built.
struct ExperimentConfig {
  OscillatorParams oscillator;
  BackActionParams backaction;
  bool backaction_enabled = true;
  bool actuator_enabled = true;
  LoopSettings loop;
  double imp_asd = 2e-20;  // m/rtHz; 0 disables imprecision
  double imp_ref_hz = 148.0;
  std::vector<double> imp_log_coeffs;  // c1..c3
  double band_lo_hz = 100.0;
  double band_hi_hz = 200.0;
  MeasurementSettings measurement;
  UncertaintySettings uncertainty;
  GridSettings grid;
  FitSettings fit;
  std::vector<double> sweep_target_q{50.0, 20.0, 8.0, 3.0, 1.0};

  /// Parameters back-solved from n_imp = 3.5e-13, n_th(Omega0) = 9e12, n_ba = 1e12 and a
  /// delay-limited Q of 50 at a 148 Hz trap.
  static ExperimentConfig defaults();

  BudgetSources sources() const;
  ImprecisionModel imprecision() const;
  /// Loop for the configured damping, or for an explicit target Q when target_q > 0.
  LoopConfig loop_config(double target_q_override = -1.0) const;
  CoherenceProfile coherence_profile() const;
  void validate() const;

  /// Canonical text form of every setting except the seed.
  std::string canonical() const;
  /// FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;
};

/// Overlay key/value settings from INI-style text onto the built-in defaults.
/// Errors carry "source:line: section.key: message".
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

}  // namespace coldamp
