#include "coldamp/fit.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"
#include "coldamp/grid.hpp"

namespace coldamp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

cplx ResonatorModel::response(double omega) const {
  const cplx d(omega_r * omega_r - omega * omega, omega_r * omega / q);
  return scale * std::polar(1.0, phi - omega * tau) / d;
}

void ResonatorModel::validate() const {
  if (!(omega_r > 0.0)) throw DomainError("resonator: omega_r must be > 0");
  if (!(q > 0.0)) throw DomainError("resonator: q must be > 0");
  if (!(tau >= 0.0)) throw DomainError("resonator: tau must be >= 0");
  if (!(scale > 0.0)) throw DomainError("resonator: scale must be > 0");
}

std::size_t FitResult::index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DomainError("fit result has no parameter '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

double FitResult::value(const std::string& name) const { return params[static_cast<Eigen::Index>(index(name))]; }

double FitResult::sigma(const std::string& name) const {
  const auto i = static_cast<Eigen::Index>(index(name));
  return std::sqrt(std::max(covariance(i, i), 0.0));
}

VectorXd resonator_to_vector(const ResonatorModel& m) {
  VectorXd v(5);
  v << m.scale, m.phi, m.tau, m.omega_r, m.q;
  return v;
}

ResonatorModel resonator_from_vector(const VectorXd& v) {
  ResonatorModel m;
  m.scale = v[0];
  m.phi = v[1];
  m.tau = v[2];
  m.omega_r = v[3];
  m.q = v[4];
  return m;
}

ResonatorModel resonator_from_fit(const FitResult& fr) { return resonator_from_vector(fr.params); }

void resonator_derivatives(double omega, const VectorXd& beta, cplx& g, Eigen::VectorXcd& dbeta, cplx& domega) {
  const double a = beta[0], phi = beta[1], t = beta[2], wr = beta[3], q = beta[4];
  const cplx i(0.0, 1.0);
  const cplx d(wr * wr - omega * omega, wr * omega / q);
  g = a * std::polar(1.0, phi - omega * t) / d;
  dbeta.resize(5);
  dbeta[0] = g / a;
  dbeta[1] = i * g;
  dbeta[2] = -i * omega * g;
  dbeta[3] = -g * (2.0 * wr + i * omega / q) / d;
  dbeta[4] = g * i * wr * omega / (q * q * d);
  domega = -i * t * g - g * (-2.0 * omega + i * wr / q) / d;
}

ResidualFn resonator_residuals(const TFMeasurement& m) {
  return [&m](const VectorXd& beta, VectorXd& r, MatrixXd* J) {
    const auto n = static_cast<Eigen::Index>(m.points.size());
    r.resize(2 * n);
    if (J) J->resize(2 * n, 5);
    cplx g, dw;
    Eigen::VectorXcd db;
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& pt = m.points[static_cast<std::size_t>(k)];
      resonator_derivatives(pt.frequency, beta, g, db, dw);
      const double w = 1.0 / pt.sigma_g;
      r[2 * k] = (g.real() - pt.g_hat.real()) * w;
      r[2 * k + 1] = (g.imag() - pt.g_hat.imag()) * w;
      if (J) {
        J->row(2 * k) = db.real().transpose() * w;
        J->row(2 * k + 1) = db.imag().transpose() * w;
      }
    }
  };
}

namespace {

void require_fit_data(const TFMeasurement& m) {
  m.validate();
  if (m.points.size() < 6) throw FitError("resonator fit: need at least 6 points");
  for (const auto& p : m.points) {
    if (!(p.sigma_g > 0.0)) throw FitError("resonator fit: per-point sigma_g must be > 0");
  }
}

struct SortedTF {
  std::vector<double> w, mag;
  std::vector<cplx> g;
  std::vector<double> sig;
};

SortedTF sorted(const TFMeasurement& m) {
  std::vector<std::size_t> idx(m.points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return m.points[a].frequency < m.points[b].frequency; });
  SortedTF s;
  for (auto i : idx) {
    s.w.push_back(m.points[i].frequency);
    s.g.push_back(m.points[i].g_hat);
    s.mag.push_back(std::abs(m.points[i].g_hat));
    s.sig.push_back(m.points[i].sigma_g);
  }
  return s;
}

// Given omega_r and q, the remaining parameters follow from a linear fit of the unwrapped phase of
// g_hat * D and the mean magnitude. Returns the weighted cost.
double profile(const SortedTF& s, double wr, double q, ResonatorModel& out) {
  const std::size_t n = s.w.size();
  std::vector<double> ph(n), wt(n);
  double log_a = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx d(wr * wr - s.w[i] * s.w[i], wr * s.w[i] / q);
    const cplx h = s.g[i] * d;
    const double a = std::arg(h);
    ph[i] = (i == 0) ? a : ph[i - 1] + std::remainder(a - ph[i - 1], constants::two_pi);
    wt[i] = s.mag[i] * s.mag[i] / (s.sig[i] * s.sig[i]);
    log_a += wt[i] * std::log(std::abs(h));
    wsum += wt[i];
  }
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += wt[i];
    sx += wt[i] * s.w[i];
    sy += wt[i] * ph[i];
    sxx += wt[i] * s.w[i] * s.w[i];
    sxy += wt[i] * s.w[i] * ph[i];
  }
  const double det = sw * sxx - sx * sx;
  const double slope = det > 0 ? (sw * sxy - sx * sy) / det : 0.0;
  const double icpt = (sy - slope * sx) / sw;
  out.omega_r = wr;
  out.q = q;
  out.tau = std::max(0.0, -slope);
  out.phi = std::remainder(icpt, constants::two_pi);
  out.scale = std::exp(log_a / wsum);
  double cost = 0.0;
  for (std::size_t i = 0; i < n; ++i) cost += std::norm(out.response(s.w[i]) - s.g[i]) / (s.sig[i] * s.sig[i]);
  return cost;
}

void check_span(const TFMeasurement& m, double omega_r) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& p : m.points) {
    lo = std::min(lo, p.frequency);
    hi = std::max(hi, p.frequency);
  }
  if (omega_r < lo || omega_r > hi) throw FitError("resonator fit: resonance lies outside the data span");
}

FitResult finish_resonator(const LsqResult& r, std::size_t n_points) {
  FitResult fr;
  fr.names = kResonatorNames;
  fr.params = r.beta;
  fr.covariance = r.covariance;
  fr.chi2 = r.chi2;
  fr.dof = r.dof;
  fr.chi2_per_dof = r.chi2 / r.dof;
  fr.n_points = static_cast<int>(n_points);
  fr.iterations = r.iterations;
  return fr;
}

bool resonator_feasible(const VectorXd& b) { return b[0] > 0.0 && b[3] > 0.0 && b[4] > 0.0; }

}  // namespace

ResonatorModel initial_resonator_guess(const TFMeasurement& m) {
  require_fit_data(m);
  const auto s = sorted(m);
  const std::size_t n = s.w.size();
  const std::size_t ipk = static_cast<std::size_t>(std::max_element(s.mag.begin(), s.mag.end()) - s.mag.begin());
  const double wpk = s.w[ipk];
  const double half = s.mag[ipk] / std::sqrt(2.0);
  double lo = -1.0, hi = -1.0;
  for (std::size_t i = ipk; i-- > 0;) {
    if (s.mag[i] < half) {
      lo = s.w[i] + (s.w[i + 1] - s.w[i]) * (half - s.mag[i]) / (s.mag[i + 1] - s.mag[i]);
      break;
    }
  }
  for (std::size_t i = ipk + 1; i < n; ++i) {
    if (s.mag[i] < half) {
      hi = s.w[i - 1] + (s.w[i] - s.w[i - 1]) * (s.mag[i - 1] - half) / (s.mag[i - 1] - s.mag[i]);
      break;
    }
  }
  double width;
  if (lo > 0 && hi > 0) {
    width = hi - lo;
  } else if (lo > 0) {
    width = 2.0 * (wpk - lo);
  } else if (hi > 0) {
    width = 2.0 * (hi - wpk);
  } else {
    width = wpk;  // no half-power point in the data: heavily damped
  }
  const double q0 = std::clamp(wpk / width, 0.05, 1e6);

  ResonatorModel best, trial;
  double best_cost = std::numeric_limits<double>::infinity();
  const int nw = 41, nq = 41;
  for (int a = 0; a < nw; ++a) {
    const double wr = std::clamp(wpk * (0.6 + a * (1.0 / (nw - 1))), s.w.front(), s.w.back());
    for (int b = 0; b < nq; ++b) {
      const double q = q0 * std::pow(10.0, -1.0 + 2.0 * b / (nq - 1));
      const double c = profile(s, wr, q, trial);
      if (c < best_cost) {
        best_cost = c;
        best = trial;
      }
    }
  }
  // Overdamped responses peak at the lowest frequency, so the local search above can miss;
  // a coarse log grid over the whole span covers that case.
  const int gw = 61, gq = 61;
  for (int a = 0; a < gw; ++a) {
    const double wr = s.w.front() * std::pow(s.w.back() / s.w.front(), a / (gw - 1.0));
    for (int b = 0; b < gq; ++b) {
      const double q = std::pow(10.0, -2.0 + 6.0 * b / (gq - 1));
      const double c = profile(s, wr, q, trial);
      if (c < best_cost) {
        best_cost = c;
        best = trial;
      }
    }
  }
  return best;
}

FitResult fit_resonator(const TFMeasurement& m, const ResonatorModel& init, const ResonatorFitOptions& opt) {
  require_fit_data(m);
  init.validate();
  const std::size_t n = m.points.size();
  if (!opt.sigma_omega.empty() && opt.sigma_omega.size() != n) {
    throw FitError("resonator fit: sigma_omega must have one entry per point");
  }
  OdrModel model;
  model.n_params = 5;
  model.n_components = 2;
  model.eval = [](double x, const VectorXd& beta, VectorXd& f, MatrixXd& jb, VectorXd& jx) {
    cplx g, dw;
    Eigen::VectorXcd db;
    resonator_derivatives(x, beta, g, db, dw);
    f << g.real(), g.imag();
    jb.row(0) = db.real().transpose();
    jb.row(1) = db.imag().transpose();
    jx << dw.real(), dw.imag();
  };
  OdrData data;
  data.x.resize(n);
  data.sigma_x = opt.sigma_omega.empty() ? std::vector<double>(n, 0.0) : opt.sigma_omega;
  data.y.resize(static_cast<Eigen::Index>(n), 2);
  data.sigma_y.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    data.x[i] = m.points[i].frequency;
    data.y(k, 0) = m.points[i].g_hat.real();
    data.y(k, 1) = m.points[i].g_hat.imag();
    data.sigma_y(k, 0) = data.sigma_y(k, 1) = m.points[i].sigma_g;
  }
  LsqOptions lo = opt.lsq;
  if (!lo.feasible) lo.feasible = resonator_feasible;
  const auto r = odr_fit(model, data, resonator_to_vector(init), lo);
  check_span(m, r.beta[3]);
  return finish_resonator(r, n);
}

FitResult fit_resonator_wls(const TFMeasurement& m, const ResonatorModel& init, const LsqOptions& opt) {
  require_fit_data(m);
  init.validate();
  LsqOptions lo = opt;
  if (!lo.feasible) lo.feasible = resonator_feasible;
  const auto r = levenberg_marquardt(resonator_residuals(m), resonator_to_vector(init), lo);
  check_span(m, r.beta[3]);
  return finish_resonator(r, m.points.size());
}

cplx SpectrumFitContext::chi_eff(double omega) const {
  return 1.0 / (oscillator.mass * cplx(omega_r * omega_r - omega * omega, omega_r * omega / q));
}

std::function<double(double)> make_force_shape(const OscillatorParams& p, const BackActionParams& ba,
                                               const BudgetSources& src, ForceShape shape, double omega_ref) {
  const double s_ba = src.backaction ? backaction_force_psd(ba) : 0.0;
  auto structural = [p, s_ba, src](double w) {
    const double th = src.freeze_thermal ? thermal_force_psd(src.freeze_omega, p) : thermal_force_psd(w, p);
    return th + s_ba + (src.actuator ? actuator_force_psd(w) : 0.0);
  };
  if (shape == ForceShape::Structural) return structural;
  const double flat = structural(omega_ref);
  return [flat](double) { return flat; };
}

double spectrum_model(double omega, const SpectrumFitContext& ctx, const VectorXd& beta) {
  const cplx ce = ctx.chi_eff(omega);
  const double k0 = std::norm(chi0_inv(omega, ctx.oscillator).value);
  const double u = std::log(omega / ctx.omega_ref);
  double acc = 0.0;
  for (Eigen::Index k = beta.size() - 1; k >= 1; --k) acc = acc * u + beta[k];
  return std::norm(ce) * (beta[0] * ctx.force_shape(omega) + k0 * std::exp(acc));
}

FitResult fit_spectrum(const SpectrumMeasurement& s, const SpectrumFitContext& ctx, const SpectrumModelParams& init,
                       const LsqOptions& opt) {
  s.validate();
  if (init.imp_log_coeffs.empty() || init.imp_log_coeffs.size() > 4) {
    throw FitError("spectrum fit: imprecision polynomial order must be 0..3");
  }
  if (!(init.force_scale >= 0.0)) throw FitError("spectrum fit: force_scale must be >= 0");
  if (!(ctx.omega_ref > 0.0)) throw FitError("spectrum fit: reference frequency must be > 0");
  std::vector<std::size_t> use;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    if (s.grid[i] >= ctx.band_lo && s.grid[i] <= ctx.band_hi) {
      if (!(s.s_hat[i] > 0.0)) throw FitError("spectrum fit: zero PSD bin inside the fit band");
      use.push_back(i);
    }
  }
  const auto p = static_cast<Eigen::Index>(1 + init.imp_log_coeffs.size());
  if (static_cast<Eigen::Index>(use.size()) <= p) throw FitError("spectrum fit: too few bins inside the band");

  const double nav = static_cast<double>(s.n_avg);
  const double bias = boost::math::digamma(nav) - std::log(nav);
  const double sd = std::sqrt(boost::math::trigamma(nav));
  const double wref = ctx.omega_ref;

  // Per-bin pieces that do not depend on the parameters.
  const auto nb = use.size();
  std::vector<double> ce2(nb), fshape(nb), k0(nb), u(nb), lhat(nb);
  for (std::size_t j = 0; j < nb; ++j) {
    const double w = s.grid[use[j]];
    ce2[j] = std::norm(ctx.chi_eff(w));
    fshape[j] = ctx.force_shape(w);
    k0[j] = std::norm(chi0_inv(w, ctx.oscillator).value);
    u[j] = std::log(w / wref);
    lhat[j] = std::log(s.s_hat[use[j]]);
  }

  ResidualFn fn = [&](const VectorXd& beta, VectorXd& r, MatrixXd* J) {
    r.resize(static_cast<Eigen::Index>(nb));
    if (J) J->resize(static_cast<Eigen::Index>(nb), p);
    for (std::size_t j = 0; j < nb; ++j) {
      double acc = 0.0;
      for (Eigen::Index k = p - 1; k >= 1; --k) acc = acc * u[j] + beta[k];
      const double imp = ce2[j] * k0[j] * std::exp(acc);
      const double frc = ce2[j] * beta[0] * fshape[j];
      const double model = frc + imp;
      const auto row = static_cast<Eigen::Index>(j);
      r[row] = (lhat[j] - std::log(model) - bias) / sd;
      if (J) {
        (*J)(row, 0) = -(ce2[j] * fshape[j] / model) / sd;
        double uk = 1.0;
        for (Eigen::Index k = 1; k < p; ++k) {
          (*J)(row, k) = -(imp * uk / model) / sd;
          uk *= u[j];
        }
      }
    }
  };

  VectorXd beta0(p);
  beta0[0] = init.force_scale;
  for (Eigen::Index k = 1; k < p; ++k) beta0[k] = init.imp_log_coeffs[static_cast<std::size_t>(k - 1)];
  LsqOptions lo = opt;
  if (!lo.feasible) lo.feasible = [](const VectorXd& b) { return b[0] >= 0.0; };
  const auto r = levenberg_marquardt(fn, beta0, lo);

  FitResult fr;
  fr.names = {"force_scale"};
  for (Eigen::Index k = 1; k < p; ++k) fr.names.push_back("imp_c" + std::to_string(k - 1));
  fr.params = r.beta;
  fr.covariance = r.covariance;
  fr.chi2 = r.chi2;
  fr.dof = r.dof;
  fr.chi2_per_dof = r.chi2 / r.dof;
  fr.n_points = static_cast<int>(nb);
  fr.iterations = r.iterations;
  return fr;
}

OccupancyReport occupancy_from_fit(double omega_r, double q, const VectorXd& sp_beta,
                                   const SpectrumFitContext& ctx, const OscillatorParams& p,
                                   const BackActionParams& ba, const BudgetSources& src,
                                   double points_per_linewidth) {
  SpectrumFitContext c = ctx;
  c.omega_r = omega_r;
  c.q = q;
  const auto grid = resonance_grid(ctx.band_lo, ctx.band_hi, omega_r, omega_r / q, 2000, points_per_linewidth);
  const std::size_t n = grid.size();
  const double s_ba = src.backaction ? backaction_force_psd(ba) : 0.0;
  std::vector<double> th(n), bk(n), ac(n), im(n), tot(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = grid[i];
    const cplx ce = c.chi_eff(w);
    const double ce2 = std::norm(ce);
    const cplx kfb = 1.0 / ce - chi0_inv(w, p).value;
    double acc = 0.0;
    for (Eigen::Index k = sp_beta.size() - 1; k >= 1; --k) acc = acc * std::log(w / ctx.omega_ref) + sp_beta[k];
    const double force = sp_beta[0] * c.force_shape(w);
    const double s_th = src.freeze_thermal ? thermal_force_psd(src.freeze_omega, p) : thermal_force_psd(w, p);
    const double s_ac = src.actuator ? actuator_force_psd(w) : 0.0;
    const double parts = s_th + s_ba + s_ac;
    th[i] = parts > 0 ? ce2 * force * s_th / parts : 0.0;
    bk[i] = parts > 0 ? ce2 * force * s_ba / parts : 0.0;
    ac[i] = parts > 0 ? ce2 * force * s_ac / parts : 0.0;
    im[i] = ce2 * std::norm(kfb) * std::exp(acc);
    tot[i] = ce2 * force + im[i];
  }
  const double norm = constants::two_pi * 2.0 * x_zp_squared(omega_r, p);
  auto integ = [&](const std::vector<double>& v) { return trapezoid(grid, v) / norm; };
  const double half = integ(tot);
  OccupancyReport r;
  r.n_eff = half - 0.5;
  if (r.n_eff < 0.0) throw UnphysicalOccupancy("occupancy: reconstructed n_eff < 0");
  r.band_lo = ctx.band_lo;
  r.band_hi = ctx.band_hi;
  r.temperature_eff = effective_temperature(r.n_eff, omega_r);
  const double i_th = integ(th), i_ba = integ(bk), i_ac = integ(ac);
  const double i_im = half - i_th - i_ba - i_ac;
  r.decomposition = {{"thermal", i_th},
                     {"backaction", i_ba},
                     {"actuator", i_ac},
                     {"feedback_imprecision", i_im},
                     {"vacuum_offset", -0.5}};
  return r;
}

void check_covariance(const MatrixXd& c) {
  if (c.rows() != c.cols()) throw FitError("covariance is not square");
  if (!c.allFinite()) throw FitError("covariance has non-finite entries");
  const double tr = c.trace();
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(std::abs(tr), 1e-300)) {
    throw FitError("covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (c + c.transpose()));
  if (es.eigenvalues().minCoeff() < -1e-12 * std::abs(tr)) throw FitError("covariance is not positive semidefinite");
}

OccupancyReport occupancy_with_uncertainty(const FitResult& fr_tf, const FitResult& fr_sp,
                                           const SpectrumMeasurement& s, const SpectrumFitContext& ctx,
                                           const OscillatorParams& p, const BackActionParams& ba,
                                           const BudgetSources& src, const UncertaintyBudget& ub) {
  check_covariance(fr_tf.covariance);
  check_covariance(fr_sp.covariance);
  const double wr = fr_tf.value("omega_r");
  const double q = fr_tf.value("q");
  const VectorXd beta = fr_sp.params;
  const double ppl = ub.occupancy_grid_points_per_linewidth;
  OccupancyReport rep = occupancy_from_fit(wr, q, beta, ctx, p, ba, src, ppl);
  const double n0 = rep.n_eff;

  SpectrumModelParams init;
  init.force_scale = beta[0];
  for (Eigen::Index k = 1; k < beta.size(); ++k) init.imp_log_coeffs.push_back(beta[k]);

  // Susceptibility parameters: total derivative, the spectrum refit follows the perturbed chi_eff.
  const std::size_t iw = fr_tf.index("omega_r"), iq = fr_tf.index("q");
  Eigen::Vector2d g_tf;
  for (int a = 0; a < 2; ++a) {
    double n_pm[2];
    const double x0 = a == 0 ? wr : q;
    const double h = 1e-4 * x0;
    for (int sgn = 0; sgn < 2; ++sgn) {
      SpectrumFitContext c = ctx;
      c.omega_r = wr;
      c.q = q;
      (a == 0 ? c.omega_r : c.q) = x0 + (sgn == 0 ? h : -h);
      const auto refit = fit_spectrum(s, c, init);
      n_pm[sgn] = occupancy_from_fit(c.omega_r, c.q, refit.params, c, p, ba, src, ppl).n_eff;
    }
    g_tf[a] = (n_pm[0] - n_pm[1]) / (2.0 * h);
  }
  Eigen::Matrix2d cov_tf;
  cov_tf << fr_tf.covariance(iw, iw), fr_tf.covariance(iw, iq), fr_tf.covariance(iq, iw), fr_tf.covariance(iq, iq);
  const double var_tf = g_tf.dot(cov_tf * g_tf);

  // Spectrum parameters: partial derivative at fixed chi_eff.
  VectorXd g_sp(beta.size());
  for (Eigen::Index k = 0; k < beta.size(); ++k) {
    const double sd = std::sqrt(std::max(fr_sp.covariance(k, k), 0.0));
    const double h = std::max(1e-6 * std::abs(beta[k]), 1e-3 * sd) + 1e-12;
    VectorXd bp = beta, bm = beta;
    bp[k] += h;
    bm[k] -= h;
    if (bm[0] < 0.0) bm[0] = 0.0;
    const double np = occupancy_from_fit(wr, q, bp, ctx, p, ba, src, ppl).n_eff;
    const double nm = occupancy_from_fit(wr, q, bm, ctx, p, ba, src, ppl).n_eff;
    g_sp[k] = (np - nm) / (bp[k] - bm[k]);
  }
  const double var_sp = g_sp.dot(fr_sp.covariance * g_sp);

  const double cal = 2.0 * ub.calibration_rel * (n0 + 0.5);
  const double model = ub.spectrum_model_rel * n0;
  rep.sigma_n = std::sqrt(var_tf + var_sp + cal * cal + model * model);
  return rep;
}

}  // namespace coldamp
