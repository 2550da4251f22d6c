#include "coldamp/loop.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"
#include "coldamp/grid.hpp"

namespace coldamp {

namespace {

constexpr double kRadToDeg = 180.0 / constants::pi;

void check_omega(double omega, const char* what) {
  if (!(omega > 0.0) || !std::isfinite(omega)) {
    throw DomainError(std::string(what) + ": frequency must be positive and finite");
  }
}

// Wrap to (-pi, pi].
double wrap(double a) {
  const double pi = constants::pi;
  a = std::fmod(a + pi, 2.0 * pi);
  if (a <= 0.0) a += 2.0 * pi;
  return a - pi;
}

double nearest_branch(double a, double ref) {
  return ref + wrap(a - ref);
}

// Phase change of f between a and b, subdividing wherever a step exceeds 0.2 rad.
double arg_change(const std::function<cplx(double)>& f, double a, double b, cplx fa, cplx fb, int depth) {
  const double d = std::arg(fb / fa);
  if (std::abs(d) < 0.2 || depth == 0) return d;
  const double m = std::sqrt(a * b);
  const cplx fm = f(m);
  return arg_change(f, a, m, fa, fm, depth - 1) + arg_change(f, m, b, fm, fb, depth - 1);
}

double total_arg_change(const std::function<cplx(double)>& f, const std::vector<double>& grid) {
  double total = 0.0;
  cplx prev = f(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const cplx cur = f(grid[i]);
    total += arg_change(f, grid[i - 1], grid[i], prev, cur, 40);
    prev = cur;
  }
  return total;
}

}  // namespace

// Nyquist-style test on the positive frequency axis: the closed-loop stiffness k0 + kfb
// must accumulate the same phase as the open-loop k0 between regions where the loop gain
// is negligible; each closed-loop root that crosses into the growing half-plane removes pi.
bool closed_loop_encircles(const OscillatorParams& p, const LoopConfig& cfg, const std::vector<double>& grid) {
  const double lo = std::min(grid.front(), p.omega0) * 1e-3;
  const double hi = grid.back() * 1e3;
  std::vector<double> g = log_grid(lo, hi, 4000);
  g.insert(g.end(), grid.begin(), grid.end());
  const double w0 = p.omega0, lw = p.omega0 / p.q0;
  for (int k = -200; k <= 200; ++k) {
    const double w = w0 + lw * std::tan(0.4999 * constants::pi * k / 200.0);
    if (w > lo && w < hi) g.push_back(w);
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  const auto k0 = [&](double w) { return chi0_inv(w, p).value; };
  const auto k = [&](double w) { return chi0_inv(w, p).value + apply_delay(chi_fb_inv(w, cfg), cfg.delay).value; };
  return std::abs(total_arg_change(k, g) - total_arg_change(k0, g)) > constants::pi / 2.0;
}

void TrapDampFilter::validate() const {
  if (!(omega_fb >= 0.0)) throw DomainError("loop: trap frequency must be >= 0");
  if (!(gamma_fb >= 0.0)) throw DomainError("loop: damping rate must be >= 0");
  if (!(mass > 0.0)) throw DomainError("loop: mass must be > 0");
}

void BandEnvelope::validate() const {
  if (!(band_lo > 0.0) || !(band_hi > band_lo)) throw DomainError("loop: need 0 < band_lo < band_hi");
  if (rolloff_order < 2) throw DomainError("loop: rolloff_order must be >= 2");
}

void NotchSection::validate() const {
  if (!(center > 0.0)) throw DomainError("notch: center must be > 0");
  if (!(depth > 0.0 && depth <= 1.0)) throw DomainError("notch: depth must lie in (0, 1]");
  if (!(width > 0.0)) throw DomainError("notch: width must be > 0");
}

void LoopConfig::validate() const {
  filter.validate();
  envelope.validate();
  if (!(delay >= 0.0) || !std::isfinite(delay)) throw DomainError("loop: delay must be >= 0");
  for (const auto& n : notches) {
    n.validate();
    if (n.center >= envelope.band_lo && n.center <= envelope.band_hi) {
      throw DomainError("loop: notch center lies inside the active band");
    }
  }
}

double envelope_gain(double omega, const BandEnvelope& env) {
  check_omega(omega, "envelope");
  if (omega < env.band_lo) return std::pow(omega / env.band_lo, env.rolloff_order);
  if (omega > env.band_hi) return std::pow(env.band_hi / omega, env.rolloff_order);
  return 1.0;
}

cplx notch_response(double omega, const NotchSection& n) {
  // Biquad (s^2 + d w s + wn^2) / (s^2 + w s + wn^2) at s = -i omega.
  const cplx s(0.0, -omega);
  const double wn2 = n.center * n.center;
  return (s * s + n.depth * n.width * s + wn2) / (s * s + n.width * s + wn2);
}

ComplexResponse chi_fb_inv(double omega, const LoopConfig& cfg) {
  check_omega(omega, "chi_fb_inv");
  const auto& f = cfg.filter;
  cplx v = f.mass * cplx(f.omega_fb * f.omega_fb, omega * f.gamma_fb);
  v *= envelope_gain(omega, cfg.envelope);
  for (const auto& n : cfg.notches) v *= notch_response(omega, n);
  return {omega, v};
}

ComplexResponse apply_delay(const ComplexResponse& r, double tau) {
  if (!(tau >= 0.0)) throw DomainError("apply_delay: tau must be >= 0");
  if (tau == 0.0) return r;
  return {r.frequency, r.value * std::polar(1.0, r.frequency * tau)};
}

TrapDampFilter delay_small_expansion(const LoopConfig& cfg) {
  const auto& f = cfg.filter;
  const double tau = cfg.delay;
  if (!(tau >= 0.0)) throw DomainError("delay expansion: tau must be >= 0");
  if (f.omega_fb * tau >= 0.2) {
    throw DomainError("delay expansion: Omega_fb*tau >= 0.2, outside the small-delay regime");
  }
  if (tau * f.gamma_fb >= 1.0) throw DomainError("delay expansion: tau*Gamma_fb >= 1");
  TrapDampFilter out = f;
  out.omega_fb = f.omega_fb * std::sqrt(1.0 - tau * f.gamma_fb);
  out.gamma_fb = f.gamma_fb + tau * f.omega_fb * f.omega_fb;
  return out;
}

ComplexResponse chi_eff(double omega, const OscillatorParams& p, const LoopConfig& cfg) {
  const cplx k0 = chi0_inv(omega, p).value;
  const cplx kfb = apply_delay(chi_fb_inv(omega, cfg), cfg.delay).value;
  const cplx k = k0 + kfb;
  const double scale = std::abs(k0) + std::abs(kfb);
  if (!(std::abs(k) > 1e-300) || std::abs(k) < scale * 1e-15) {
    throw SingularResponse("chi_eff: closed-loop stiffness vanishes");
  }
  return {omega, 1.0 / k};
}

cplx open_loop_gain(double omega, const OscillatorParams& p, const LoopConfig& cfg) {
  const cplx k0 = chi0_inv(omega, p).value;
  return apply_delay(chi_fb_inv(omega, cfg), cfg.delay).value / k0;
}

StabilityReport stability_margins(const OscillatorParams& p, const LoopConfig& cfg,
                                  const std::vector<double>& grid) {
  if (grid.size() < 3) throw GridError("stability: grid too short");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw GridError("stability: grid must be strictly increasing");
  }
  if (grid.front() > cfg.envelope.band_lo / 10.0 || grid.back() < 10.0 * cfg.envelope.band_hi) {
    throw GridError("stability: grid must span [band_lo/10, 10*band_hi]");
  }

  auto neg_l = [&](double w) { return -open_loop_gain(w, p, cfg); };
  auto log_mag = [&](double w) { return std::log(std::abs(neg_l(w))); };

  const std::size_t n = grid.size();
  std::vector<double> lm(n), ph(n);
  for (std::size_t i = 0; i < n; ++i) {
    const cplx v = neg_l(grid[i]);
    lm[i] = std::log(std::abs(v));
    const double a = std::arg(v);
    if (i == 0) {
      ph[i] = a;
    } else {
      ph[i] = nearest_branch(a, ph[i - 1]);
      // Where |L| is tiny a missed crossing cannot set a margin, so coarse phase steps are harmless.
      if (std::abs(ph[i] - ph[i - 1]) > constants::pi / 2.0 && std::max(lm[i], lm[i - 1]) > std::log(0.01)) {
        throw GridError("stability: phase changes by more than 90 deg between grid points; refine the grid");
      }
    }
  }

  auto bisect = [](auto&& f, double a, double b, double fa) {
    for (int it = 0; it < 200 && (b - a) > 1e-13 * b; ++it) {
      const double m = 0.5 * (a + b);
      const double fm = f(m);
      if ((fm > 0.0) == (fa > 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    return 0.5 * (a + b);
  };

  StabilityReport rep;
  // Margin is the angular distance of L from -1 at each unity crossing.
  rep.phase_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < n; ++i) {
    if ((lm[i - 1] > 0.0) != (lm[i] > 0.0) || lm[i] == 0.0) {
      const double w = bisect(log_mag, grid[i - 1], grid[i], lm[i - 1]);
      rep.unity_gain_frequencies.push_back(w);
      const double pm = std::abs(std::arg(neg_l(w))) * kRadToDeg;
      rep.phase_margin = std::min(rep.phase_margin, pm);
    }
  }

  rep.gain_margin = std::numeric_limits<double>::infinity();
  const double two_pi = constants::two_pi;
  for (std::size_t i = 1; i < n; ++i) {
    // Crossings of arg(-L) through a multiple of 2 pi.
    const double k0 = std::floor(ph[i - 1] / two_pi);
    const double k1 = std::floor(ph[i] / two_pi);
    double target;
    if (k1 > k0) {
      target = k1 * two_pi;
    } else if (k1 < k0) {
      target = k0 * two_pi;
    } else {
      continue;
    }
    const double ref = ph[i - 1];
    auto f = [&](double w) { return nearest_branch(std::arg(neg_l(w)), ref) - target; };
    const double w = bisect(f, grid[i - 1], grid[i], ph[i - 1] - target);
    rep.phase_crossover_frequencies.push_back(w);
    rep.gain_margin = std::min(rep.gain_margin, 1.0 / std::abs(neg_l(w)));
  }
  rep.gain_margin_db = 20.0 * std::log10(rep.gain_margin);
  if (rep.unity_gain_frequencies.empty()) rep.phase_margin = 180.0;
  rep.unstable = closed_loop_encircles(p, cfg, grid) || rep.gain_margin_db <= 0.0;
  // An unstable loop reports its margin with a negative sign.
  if (rep.unstable) rep.phase_margin = -rep.phase_margin;
  return rep;
}

double omega_eff(const OscillatorParams& p, const LoopConfig& cfg) {
  return std::sqrt(p.omega0 * p.omega0 + cfg.filter.omega_fb * cfg.filter.omega_fb);
}

double gamma_eff(const OscillatorParams& p, const LoopConfig& cfg) {
  // Exact Im of the closed-loop stiffness at Omega_eff; to first order in tau this is
  // Gamma0[Omega_eff] + Gamma_fb + tau Omega_fb^2, and it also picks up notch lag.
  const double w = omega_eff(p, cfg);
  const cplx k = chi0_inv(w, p).value + apply_delay(chi_fb_inv(w, cfg), cfg.delay).value;
  return k.imag() / (p.mass * w);
}

double q_eff(const OscillatorParams& p, const LoopConfig& cfg) {
  return omega_eff(p, cfg) / gamma_eff(p, cfg);
}

double delay_for_q(const OscillatorParams& p, double omega_fb, double target_q) {
  if (!(omega_fb > 0.0) || !(target_q > 0.0)) throw DomainError("delay_for_q: need positive trap and Q");
  const double w = std::sqrt(p.omega0 * p.omega0 + omega_fb * omega_fb);
  return w / (target_q * omega_fb * omega_fb);
}

double delay_for_loop_q(const OscillatorParams& p, const LoopConfig& cfg, double target_q) {
  if (!(target_q > 0.0)) throw DomainError("delay_for_loop_q: target Q must be > 0");
  LoopConfig c = cfg;
  c.filter.gamma_fb = 0.0;
  c.delay = 0.0;
  if (q_eff(p, c) < target_q) throw DomainError("delay_for_loop_q: filter lag alone already gives Q below the target");
  double lo = 0.0, hi = 0.2 / cfg.filter.omega_fb;
  c.delay = hi;
  if (q_eff(p, c) > target_q) throw DomainError("delay_for_loop_q: target Q needs Omega_fb*tau > 0.2");
  for (int it = 0; it < 200; ++it) {
    c.delay = 0.5 * (lo + hi);
    (q_eff(p, c) > target_q ? lo : hi) = c.delay;
  }
  return 0.5 * (lo + hi);
}

double gamma_fb_for_q(const OscillatorParams& p, const LoopConfig& cfg, double target_q) {
  if (!(target_q > 0.0)) throw DomainError("gamma_fb_for_q: target Q must be > 0");
  // gamma_eff is affine in Gamma_fb.
  LoopConfig c = cfg;
  c.filter.gamma_fb = 0.0;
  const double g0 = gamma_eff(p, c);
  c.filter.gamma_fb = 1.0;
  const double slope = gamma_eff(p, c) - g0;
  const double needed = omega_eff(p, cfg) / target_q;
  const double g = (needed - g0) / slope;
  if (g < 0.0) {
    if (g > -1e-6 * needed) return 0.0;
    throw DomainError("gamma_fb_for_q: target Q exceeds the Q reached without damping");
  }
  return g;
}

}  // namespace coldamp
