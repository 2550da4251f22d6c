#include "coldamp/physics.hpp"

#include <cmath>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"

namespace coldamp {

namespace {

void require_positive_frequency(double omega, const char* what) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw DomainError(std::string(what) + ": frequency must be positive and finite");
  }
}

}  // namespace

void OscillatorParams::validate() const {
  if (!(mass > 0.0)) throw DomainError("oscillator: mass must be > 0");
  if (!(omega0 > 0.0)) throw DomainError("oscillator: omega0 must be > 0");
  if (!(q0 > 0.0)) throw DomainError("oscillator: q0 must be > 0");
  if (!(temperature >= 0.0)) throw DomainError("oscillator: temperature must be >= 0");
}

void BackActionParams::validate() const {
  if (!(cavity_power > 0.0)) throw DomainError("backaction: cavity power must be > 0");
  if (!(finesse > 0.0)) throw DomainError("backaction: finesse must be > 0");
  if (!(wavelength > 0.0)) throw DomainError("backaction: wavelength must be > 0");
  if (!(antisqueeze_db >= 0.0)) throw DomainError("backaction: antisqueeze_db must be >= 0");
}

std::string to_string(PsdUnit u) {
  switch (u) {
    case PsdUnit::DisplacementM2PerHz: return "m^2/Hz";
    case PsdUnit::ForceN2PerHz: return "N^2/Hz";
  }
  return "?";
}

void Psd::validate() const {
  if (grid.size() != values.size()) throw DomainError("psd: grid and values differ in length");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw DomainError("psd: grid must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("psd: grid must be strictly increasing");
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) throw DomainError("psd: values must be finite and >= 0");
  }
}

double gamma0(double omega, const OscillatorParams& p) {
  require_positive_frequency(omega, "gamma0");
  return (p.omega0 / p.q0) * (p.omega0 / omega);
}

ComplexResponse chi0_inv(double omega, const OscillatorParams& p) {
  require_positive_frequency(omega, "chi0_inv");
  // omega * Gamma0[omega] is frequency independent for structural damping.
  const double re = p.mass * (p.omega0 * p.omega0 - omega * omega);
  const double im = p.mass * p.omega0 * p.omega0 / p.q0;
  return {omega, cplx(re, im)};
}

double n_thermal(double omega, const OscillatorParams& p) {
  require_positive_frequency(omega, "n_thermal");
  if (!(p.temperature >= 0.0)) throw DomainError("n_thermal: temperature must be >= 0");
  return constants::k_boltzmann * p.temperature / (constants::hbar * omega);
}

double thermal_force_psd(double omega, const OscillatorParams& p) {
  const double im = chi0_inv(omega, p).value.imag();
  return 4.0 * constants::hbar * (n_thermal(omega, p) + 0.5) * im;
}

double backaction_force_psd(const BackActionParams& b) {
  b.validate();
  const double e2r = std::pow(10.0, b.antisqueeze_db / 10.0);
  return 16.0 * constants::hbar * b.finesse / (b.wavelength * constants::speed_of_light) * b.cavity_power * e2r;
}

double n_backaction_from_psd(double s_ba, const OscillatorParams& p) {
  const double im = p.mass * p.omega0 * p.omega0 / p.q0;
  return s_ba / (4.0 * constants::hbar * im);
}

double n_backaction(const BackActionParams& b, const OscillatorParams& p) {
  return n_backaction_from_psd(backaction_force_psd(b), p);
}

double cavity_power_for_n_backaction(double n_ba, const BackActionParams& b, const OscillatorParams& p) {
  BackActionParams unit = b;
  unit.cavity_power = 1.0;
  return n_ba / n_backaction(unit, p);
}

double x_zp_squared(double omega, const OscillatorParams& p) {
  require_positive_frequency(omega, "x_zp");
  return constants::hbar / (2.0 * p.mass * omega);
}

double zero_point_psd(double omega_ref, const OscillatorParams& p) {
  return 8.0 * x_zp_squared(omega_ref, p) / gamma0(omega_ref, p);
}

double n_imprecision(double s_imp, double omega_ref, const OscillatorParams& p) {
  return s_imp / (2.0 * zero_point_psd(omega_ref, p));
}

}  // namespace coldamp
