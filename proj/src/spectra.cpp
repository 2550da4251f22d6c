#include "coldamp/spectra.hpp"

#include <algorithm>
#include <cmath>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"
#include "coldamp/grid.hpp"

namespace coldamp {

namespace {

const std::vector<double>& checked_grid(const std::vector<double>& grid, const NoiseBudget& nb) {
  if (grid.size() != nb.grid.size()) throw GridError("psd: grid does not match the budget grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] != nb.grid[i]) throw GridError("psd: grid does not match the budget grid");
  }
  return grid;
}

double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double t) {
  if (t < x.front() || t > x.back()) throw GridError("interpolation point outside the budget grid");
  auto it = std::lower_bound(x.begin(), x.end(), t);
  const std::size_t j = static_cast<std::size_t>(it - x.begin());
  if (x[j] == t || j == 0) return y[j];
  const double f = (t - x[j - 1]) / (x[j] - x[j - 1]);
  return y[j - 1] + f * (y[j] - y[j - 1]);
}

}  // namespace

ImprecisionModel ImprecisionModel::flat(double s_imp, double omega_ref) {
  if (!(s_imp > 0.0)) throw DomainError("imprecision: PSD must be > 0");
  return {omega_ref, {std::log(s_imp)}};
}

double ImprecisionModel::psd(double omega) const {
  if (!enabled) return 0.0;
  const double u = std::log(omega / omega_ref);
  double acc = 0.0;
  for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * u + coeffs[k];
  return std::exp(acc);
}

void ImprecisionModel::validate() const {
  if (!(omega_ref > 0.0)) throw DomainError("imprecision: reference frequency must be > 0");
  if (coeffs.empty() || coeffs.size() > 4) throw DomainError("imprecision: need 1 to 4 log coefficients");
}

void NoiseBudget::validate() const {
  const std::size_t n = grid.size();
  if (thermal.size() != n || backaction.size() != n || actuator.size() != n || imprecision.size() != n) {
    throw GridError("budget: component lengths differ from grid");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && !(grid[i] > grid[i - 1])) throw GridError("budget: grid must be strictly increasing");
    if (!(thermal[i] >= 0.0 && backaction[i] >= 0.0 && actuator[i] >= 0.0 && imprecision[i] >= 0.0)) {
      throw DomainError("budget: negative component");
    }
  }
}

NoiseBudget build_noise_budget(const std::vector<double>& grid, const OscillatorParams& p,
                               const BackActionParams& ba, const ImprecisionModel& imp,
                               const BudgetSources& src) {
  p.validate();
  imp.validate();
  const double s_ba = src.backaction ? backaction_force_psd(ba) : 0.0;
  NoiseBudget nb;
  nb.grid = grid;
  const std::size_t n = grid.size();
  nb.thermal.resize(n);
  nb.backaction.assign(n, s_ba);
  nb.actuator.resize(n);
  nb.imprecision.resize(n);
  double frozen = 0.0;
  if (src.freeze_thermal) frozen = thermal_force_psd(src.freeze_omega, p);
  for (std::size_t i = 0; i < n; ++i) {
    nb.thermal[i] = src.freeze_thermal ? frozen : thermal_force_psd(grid[i], p);
    nb.actuator[i] = src.actuator ? actuator_force_psd(grid[i]) : 0.0;
    nb.imprecision[i] = imp.psd(grid[i]);
  }
  nb.validate();
  return nb;
}

double actuator_force_psd(double omega) {
  if (!(omega > 0.0)) throw DomainError("actuator_force_psd: frequency must be > 0");
  const double a = 4e-18 * hz_to_rad(10.0) / omega;
  return a * a;
}

double actuator_occupancy(const OscillatorParams& p, const LoopConfig& cfg) {
  const double w = omega_eff(p, cfg);
  return actuator_force_psd(w) / (4.0 * constants::hbar * p.mass * gamma0(w, p) * w);
}

Psd observed_psd(const std::vector<double>& grid, const OscillatorParams& p, const LoopConfig& cfg,
                 const NoiseBudget& nb) {
  checked_grid(grid, nb);
  Psd out{grid, std::vector<double>(grid.size()), PsdUnit::DisplacementM2PerHz};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ce = std::norm(chi_eff(grid[i], p, cfg).value);
    const double k0 = std::norm(chi0_inv(grid[i], p).value);
    out.values[i] = ce * (nb.force_total(i) + k0 * nb.imprecision[i]);
  }
  return out;
}

Psd physical_psd(const std::vector<double>& grid, const OscillatorParams& p, const LoopConfig& cfg,
                 const NoiseBudget& nb) {
  checked_grid(grid, nb);
  Psd out{grid, std::vector<double>(grid.size()), PsdUnit::DisplacementM2PerHz};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ce = std::norm(chi_eff(grid[i], p, cfg).value);
    const double kfb = std::norm(chi_fb_inv(grid[i], cfg).value);
    out.values[i] = ce * (nb.force_total(i) + kfb * nb.imprecision[i]);
  }
  return out;
}

PhysicalComponents physical_psd_components(const OscillatorParams& p, const LoopConfig& cfg,
                                           const NoiseBudget& nb) {
  nb.validate();
  const std::size_t n = nb.grid.size();
  PhysicalComponents c;
  c.thermal.resize(n);
  c.backaction.resize(n);
  c.actuator.resize(n);
  c.imprecision.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = nb.grid[i];
    const double ce = std::norm(chi_eff(w, p, cfg).value);
    c.thermal[i] = ce * nb.thermal[i];
    c.backaction[i] = ce * nb.backaction[i];
    c.actuator[i] = ce * nb.actuator[i];
    c.imprecision[i] = ce * std::norm(chi_fb_inv(w, cfg).value) * nb.imprecision[i];
  }
  return c;
}

double effective_temperature(double n_eff, double w_eff) {
  return constants::hbar * w_eff * (n_eff + 0.5) / constants::k_boltzmann;
}

namespace {

double band_integral(const std::vector<double>& grid, const std::vector<double>& v, double lo, double hi,
                     double xzp2) {
  return trapezoid_band(grid, v, lo, hi) / constants::two_pi / (2.0 * xzp2);
}

}  // namespace

OccupancyReport occupancy(const Psd& sx, const OscillatorParams& p, const LoopConfig& cfg, double band_lo,
                          double band_hi) {
  sx.validate();
  if (sx.grid.empty() || band_lo < sx.grid.front() * (1 - 1e-12) || band_hi > sx.grid.back() * (1 + 1e-12)) {
    throw GridError("occupancy: band outside the PSD grid");
  }
  const double w = omega_eff(p, cfg);
  const double half = band_integral(sx.grid, sx.values, band_lo, band_hi, x_zp_squared(w, p));
  const double n = half - 0.5;
  if (n < 0.0) throw UnphysicalOccupancy("occupancy: n_eff < 0; check the PSD and the integration band");
  OccupancyReport r;
  r.n_eff = n;
  r.band_lo = band_lo;
  r.band_hi = band_hi;
  r.temperature_eff = effective_temperature(n, w);
  r.decomposition = {{"total", half}, {"vacuum_offset", -0.5}};
  return r;
}

OccupancyReport occupancy_decomposed(const OscillatorParams& p, const LoopConfig& cfg, const NoiseBudget& nb,
                                     double band_lo, double band_hi) {
  const auto c = physical_psd_components(p, cfg, nb);
  const double xzp2 = x_zp_squared(omega_eff(p, cfg), p);
  const double th = band_integral(nb.grid, c.thermal, band_lo, band_hi, xzp2);
  const double ba = band_integral(nb.grid, c.backaction, band_lo, band_hi, xzp2);
  const double ac = band_integral(nb.grid, c.actuator, band_lo, band_hi, xzp2);
  const double im = band_integral(nb.grid, c.imprecision, band_lo, band_hi, xzp2);

  const Psd sx = physical_psd(nb.grid, p, cfg, nb);
  OccupancyReport r = occupancy(sx, p, cfg, band_lo, band_hi);
  r.decomposition = {{"thermal", th},
                     {"backaction", ba},
                     {"actuator", ac},
                     {"feedback_imprecision", im},
                     {"vacuum_offset", -0.5}};
  return r;
}

double occupancy_white_approx(const OscillatorParams& p, const LoopConfig& cfg, double n_imp, double n_other) {
  const double w = omega_eff(p, cfg);
  const double g0 = gamma0(w, p);
  const double ge = gamma_eff(p, cfg);
  const double n_tot = n_thermal(w, p) + n_other;
  const double spring = (w / g0) * (w / g0) * n_imp;
  // One-sided spectra: both imprecision terms carry a factor 2 relative to n_imp = S_imp / 2 S_zp.
  return (n_tot + 2.0 * spring + 0.5) * g0 / ge + 2.0 * n_imp * ge / g0 - 0.5;
}

double optimal_linewidth(const OscillatorParams& p, const LoopConfig& cfg, double n_imp, double n_other) {
  if (!(n_imp > 0.0)) throw DomainError("optimal_linewidth: n_imp must be > 0");
  const double w = omega_eff(p, cfg);
  const double g0 = gamma0(w, p);
  const double n_tot = n_thermal(w, p) + n_other;
  const double spring = (w / g0) * (w / g0) * n_imp;
  return g0 * std::sqrt((n_tot + 2.0 * spring + 0.5) / (2.0 * n_imp));
}

double n_feedback_spring(const OscillatorParams& p, const LoopConfig& cfg, double n_imp) {
  const double r = cfg.filter.omega_fb / p.omega0;
  return p.q0 * p.q0 * r * r * r * r * n_imp;
}

double decoherence_rate(const OscillatorParams& p, const LoopConfig& cfg, const NoiseBudget& nb) {
  nb.validate();
  const double w = omega_eff(p, cfg);
  const double n_ba = n_backaction_from_psd(interp_linear(nb.grid, nb.backaction, w), p);
  const double n_th = interp_linear(nb.grid, nb.thermal, w) / (4.0 * constants::hbar * chi0_inv(w, p).value.imag()) - 0.5;
  const double n_fb = interp_linear(nb.grid, nb.actuator, w) / (4.0 * constants::hbar * p.mass * gamma0(w, p) * w);
  return (std::max(n_th, 0.0) + n_ba + n_fb) * gamma0(w, p);
}

}  // namespace coldamp
