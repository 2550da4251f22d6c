#pragma once

#include <vector>

#include "coldamp/physics.hpp"

namespace coldamp {

// omega_fb = gamma_fb = 0 opens the loop.
struct TrapDampFilter {
  double omega_fb = 0.0;  // rad/s
  double gamma_fb = 0.0;  // rad/s
  double mass = 0.0;      // kg

  void validate() const;
};

// Unity gain inside [band_lo, band_hi], power-law fall-off of the given order outside.
struct BandEnvelope {
  double band_lo = 0.0;
  double band_hi = 0.0;
  int rolloff_order = 2;

  void validate() const;
};

struct NotchSection {
  double center = 0.0;  // rad/s
  double depth = 1.0;   // |H| at center
  double width = 0.0;   // rad/s

  void validate() const;
};

struct LoopConfig {
  TrapDampFilter filter;
  BandEnvelope envelope;
  std::vector<NotchSection> notches;
  double delay = 0.0;  // s

  void validate() const;
};

struct StabilityReport {
  double gain_margin = 0.0;     // 1/|L| at phase crossover; +inf if none
  double gain_margin_db = 0.0;
  double phase_margin = 0.0;    // degrees from -1, minimum over unity crossings; negative when unstable
  std::vector<double> unity_gain_frequencies;
  std::vector<double> phase_crossover_frequencies;
  bool unstable = false;
};

double envelope_gain(double omega, const BandEnvelope& env);
cplx notch_response(double omega, const NotchSection& n);

/// Feedback stiffness m(Omega_fb^2 + i Omega Gamma_fb) shaped by envelope and notches.
ComplexResponse chi_fb_inv(double omega, const LoopConfig& cfg);
ComplexResponse apply_delay(const ComplexResponse& r, double tau);

/// First-order delay expansion; requires Omega_fb tau < 0.2.
TrapDampFilter delay_small_expansion(const LoopConfig& cfg);

/// (chi0^{-1} + chi_fb^{-1} e^{i Omega tau})^{-1}, m/N.
ComplexResponse chi_eff(double omega, const OscillatorParams& p, const LoopConfig& cfg);

/// Open-loop gain chi0 chi_fb^{-1} e^{i Omega tau}.
cplx open_loop_gain(double omega, const OscillatorParams& p, const LoopConfig& cfg);

StabilityReport stability_margins(const OscillatorParams& p, const LoopConfig& cfg,
                                  const std::vector<double>& grid);

/// True when the closed loop has a growing mode (phase-winding count against the open loop).
bool closed_loop_encircles(const OscillatorParams& p, const LoopConfig& cfg, const std::vector<double>& grid);

double omega_eff(const OscillatorParams& p, const LoopConfig& cfg);
/// Im(chi0^{-1} + chi_fb^{-1} e^{i Omega tau}) / (m Omega) at Omega_eff;
/// Gamma0[Omega_eff] + Gamma_fb + tau Omega_fb^2 for a bare trap with a short delay.
double gamma_eff(const OscillatorParams& p, const LoopConfig& cfg);
double q_eff(const OscillatorParams& p, const LoopConfig& cfg);

/// Delay that alone damps the trap to the requested quality factor (first-order expansion, no notches).
double delay_for_q(const OscillatorParams& p, double omega_fb, double target_q);
/// Delay giving the requested Q with Gamma_fb = 0, including lag from notches and envelope.
double delay_for_loop_q(const OscillatorParams& p, const LoopConfig& cfg, double target_q);
/// Gamma_fb giving the requested effective Q once delay and structural damping are accounted for.
double gamma_fb_for_q(const OscillatorParams& p, const LoopConfig& cfg, double target_q);

}  // namespace coldamp
