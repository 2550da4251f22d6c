#include "coldamp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"
#include "coldamp/grid.hpp"

namespace coldamp {

namespace {

std::vector<double> linear_bins(double lo_hz, double hi_hz, double bin_hz) {
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor((hi_hz - lo_hz) / bin_hz * (1 + 1e-12))) + 1;
  g.reserve(n);
  for (std::size_t i = 0; i < n; ++i) g.push_back(hz_to_rad(lo_hz + bin_hz * static_cast<double>(i)));
  return g;
}

double lookup(const OccupancyReport& r, const std::string& key) {
  for (const auto& [k, v] : r.decomposition) {
    if (k == key) return v;
  }
  return 0.0;
}

}  // namespace

OccupancyReport model_occupancy(const ExperimentConfig& cfg, const LoopConfig& loop, double band_lo, double band_hi) {
  const auto& p = cfg.oscillator;
  const auto grid = resonance_grid(band_lo, band_hi, omega_eff(p, loop), gamma_eff(p, loop));
  const auto nb = build_noise_budget(grid, p, cfg.backaction, cfg.imprecision(), cfg.sources());
  return occupancy_decomposed(p, loop, nb, band_lo, band_hi);
}

StabilityReport loop_stability(const ExperimentConfig& cfg, const LoopConfig& loop) {
  const double lo = loop.envelope.band_lo / 20.0, hi = loop.envelope.band_hi * 20.0;
  auto grid = log_grid(lo, hi, 20000);
  for (const auto& n : loop.notches) {
    const double a = std::max(lo, n.center - 10.0 * n.width), b = std::min(hi, n.center + 10.0 * n.width);
    if (b > a) grid = merge_grids(grid, lorentzian_grid(a, b, n.center, n.width * n.depth, 400.0));
  }
  const double we = omega_eff(cfg.oscillator, loop);
  grid = merge_grids(grid, lorentzian_grid(lo, hi, we, gamma_eff(cfg.oscillator, loop), 200.0));
  // The bare resonance flips the open-loop phase within Omega0/Q0.
  const double w0 = cfg.oscillator.omega0;
  if (w0 > lo && w0 < hi) grid = merge_grids(grid, lorentzian_grid(lo, hi, w0, w0 / cfg.oscillator.q0, 200.0));
  return stability_margins(cfg.oscillator, loop, grid);
}

BudgetOutput run_budget(const ExperimentConfig& cfg, std::optional<std::pair<double, double>> grid_hz,
                        double target_q) {
  const auto& p = cfg.oscillator;
  const LoopConfig loop = cfg.loop_config(target_q);
  const double lo_hz = grid_hz ? grid_hz->first : cfg.grid.lo_hz;
  const double hi_hz = grid_hz ? grid_hz->second : cfg.grid.hi_hz;
  if (!(lo_hz > 0.0 && hi_hz > lo_hz)) throw ConfigError("budget grid: need 0 < lo < hi");
  const auto grid = log_grid(hz_to_rad(lo_hz), hz_to_rad(hi_hz), static_cast<std::size_t>(cfg.grid.points));

  BudgetOutput out;
  out.budget = build_noise_budget(grid, p, cfg.backaction, cfg.imprecision(), cfg.sources());
  const auto comps = physical_psd_components(p, loop, out.budget);
  out.thermal_x = comps.thermal;
  out.backaction_x = comps.backaction;
  out.actuator_x = comps.actuator;
  out.imprecision_fb_x = comps.imprecision;
  out.imprecision_obs_x.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const cplx g = chi_eff(grid[i], p, loop).value * chi0_inv(grid[i], p).value;
    out.imprecision_obs_x[i] = std::norm(g) * out.budget.imprecision[i];
  }
  out.observed = observed_psd(grid, p, loop, out.budget);
  out.physical = physical_psd(grid, p, loop, out.budget);

  auto& s = out.summary;
  const double we = omega_eff(p, loop);
  s.omega_eff = we;
  s.gamma_fb = loop.filter.gamma_fb;
  s.gamma_eff = gamma_eff(p, loop);
  s.q_eff = q_eff(p, loop);
  s.delay = loop.delay;
  s.n_th_omega0 = n_thermal(p.omega0, p);
  s.n_th_eff = n_thermal(we, p);
  s.n_ba = cfg.backaction_enabled ? n_backaction(cfg.backaction, p) : 0.0;
  const auto imp = cfg.imprecision();
  s.n_imp = imp.enabled ? n_imprecision(imp.psd(we), we, p) : 0.0;
  s.n_fb = n_feedback_spring(p, loop, s.n_imp);
  s.n_fb_ex = actuator_occupancy(p, loop);

  // Scalar rates need the budget at Omega_eff, which may lie outside the requested grid.
  const auto local = build_noise_budget({we * 0.999, we, we * 1.001}, p, cfg.backaction, imp, cfg.sources());
  s.decoherence_rate = decoherence_rate(p, loop, local);
  const double n_other = s.n_ba + (cfg.actuator_enabled ? s.n_fb_ex : 0.0);
  if (imp.enabled) {
    s.n_eff_white = occupancy_white_approx(p, loop, s.n_imp, n_other);
    s.gamma_opt = optimal_linewidth(p, loop, s.n_imp, n_other);
  }
  const double blo = hz_to_rad(cfg.band_lo_hz), bhi = hz_to_rad(cfg.band_hi_hz);
  try {
    s.occupancy = model_occupancy(cfg, loop, blo, bhi);
    s.n_fb_ex_steady = lookup(s.occupancy, "actuator");
  } catch (const UnphysicalOccupancy& e) {
    s.warnings.emplace_back(e.what());
  }
  s.stability = loop_stability(cfg, loop);
  if (lo_hz < cfg.loop.band_lo_hz || hi_hz > cfg.loop.band_hi_hz) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "envelope extrapolation: grid %.6g-%.6g Hz extends outside the active band %.6g-%.6g Hz; "
                  "the feedback envelope there is a model assumption",
                  lo_hz, hi_hz, cfg.loop.band_lo_hz, cfg.loop.band_hi_hz);
    s.warnings.emplace_back(buf);
  }
  if (s.stability.unstable) s.warnings.emplace_back("loop flagged unstable by the margin test");
  return out;
}

std::function<cplx(double)> tf_truth(const ExperimentConfig& cfg, const LoopConfig& loop) {
  const auto p = cfg.oscillator;
  const auto m = cfg.measurement;
  return [p, m, loop](double w) {
    return m.tf_gain * p.mass * chi_eff(w, p, loop).value * std::polar(1.0, m.tf_phase_rad - w * m.tf_delay_s);
  };
}

SimulationOutput run_simulate(const ExperimentConfig& cfg, const LoopConfig& loop, std::uint64_t seed) {
  const auto& m = cfg.measurement;
  const auto& p = cfg.oscillator;
  SimulationOutput out;
  std::vector<double> f = linear_grid(hz_to_rad(m.tf_lo_hz), hz_to_rad(m.tf_hi_hz), static_cast<std::size_t>(m.tf_points));
  out.tf = synth_tf(tf_truth(cfg, loop), f, cfg.coherence_profile(), m.tf_n_avg, substream_seed(seed, 1),
                    m.segment_duration_s);
  out.tf.seed = seed;

  const auto grid = linear_bins(m.psd_lo_hz, m.psd_hi_hz, m.psd_bin_hz);
  const auto nb = build_noise_budget(grid, p, cfg.backaction, cfg.imprecision(), cfg.sources());
  const Psd truth = observed_psd(grid, p, loop, nb);
  out.psd = synth_spectrum(truth, m.psd_n_avg, substream_seed(seed, 2));
  out.psd.seed = seed;
  const CalibrationError cal{cfg.uncertainty.calibration_scale};
  out.psd = apply_calibration_error(out.psd, cal);
  out.tf = apply_calibration_error(out.tf, cal);
  return out;
}

FitResult run_fit_tf(const ExperimentConfig& cfg, const TFMeasurement& tf) {
  const auto init = initial_resonator_guess(tf);
  ResonatorFitOptions opt;
  if (cfg.measurement.tf_sigma_freq_hz > 0.0) {
    opt.sigma_omega.assign(tf.points.size(), hz_to_rad(cfg.measurement.tf_sigma_freq_hz));
  }
  return fit_resonator(tf, init, opt);
}

SpectrumFitContext spectrum_context(const ExperimentConfig& cfg, const FitResult& tf_fit) {
  SpectrumFitContext ctx;
  ctx.oscillator = cfg.oscillator;
  ctx.omega_r = tf_fit.value("omega_r");
  ctx.q = tf_fit.value("q");
  ctx.band_lo = hz_to_rad(cfg.band_lo_hz);
  ctx.band_hi = hz_to_rad(cfg.band_hi_hz);
  ctx.omega_ref = hz_to_rad(cfg.imp_ref_hz);
  const ForceShape shape = cfg.fit.force_shape == "white" ? ForceShape::White : ForceShape::Structural;
  ctx.force_shape = make_force_shape(cfg.oscillator, cfg.backaction, cfg.sources(), shape, ctx.omega_r);
  return ctx;
}

SpectrumModelParams spectrum_init(const ExperimentConfig& cfg) {
  SpectrumModelParams init;
  init.force_scale = 1.0;
  const double asd = cfg.imp_asd > 0.0 ? cfg.imp_asd : 1e-20;
  init.imp_log_coeffs.push_back(std::log(asd * asd));
  for (int k = 1; k <= cfg.fit.imp_order; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    init.imp_log_coeffs.push_back(i < cfg.imp_log_coeffs.size() ? cfg.imp_log_coeffs[i] : 0.0);
  }
  return init;
}

FitResult run_fit_spectrum(const ExperimentConfig& cfg, const FitResult& tf_fit, const SpectrumMeasurement& psd) {
  return fit_spectrum(psd, spectrum_context(cfg, tf_fit), spectrum_init(cfg));
}

FitOutput run_fit(const ExperimentConfig& cfg, const TFMeasurement& tf, const SpectrumMeasurement& psd,
                  std::optional<std::pair<double, double>> band) {
  ExperimentConfig c = cfg;
  if (band) {
    c.band_lo_hz = band->first;
    c.band_hi_hz = band->second;
  }
  FitOutput out;
  out.tf = run_fit_tf(c, tf);
  out.context = spectrum_context(c, out.tf);
  out.spectrum = fit_spectrum(psd, out.context, spectrum_init(c));
  UncertaintyBudget ub;
  ub.calibration_rel = c.uncertainty.calibration_rel;
  ub.spectrum_model_rel = c.uncertainty.spectrum_model_rel;
  out.occupancy = occupancy_with_uncertainty(out.tf, out.spectrum, psd, out.context, c.oscillator, c.backaction,
                                             c.sources(), ub);
  out.physical.grid = psd.grid;
  out.physical.values.resize(psd.grid.size());
  const auto& b = out.spectrum.params;
  for (std::size_t i = 0; i < psd.grid.size(); ++i) {
    const double w = psd.grid[i];
    const cplx ce = out.context.chi_eff(w);
    const cplx kfb = 1.0 / ce - chi0_inv(w, c.oscillator).value;
    double acc = 0.0;
    for (Eigen::Index k = b.size() - 1; k >= 1; --k) acc = acc * std::log(w / out.context.omega_ref) + b[k];
    out.physical.values[i] = std::norm(ce) * (b[0] * out.context.force_shape(w) + std::norm(kfb) * std::exp(acc));
  }
  return out;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const std::vector<double>& target_q, std::uint64_t seed,
                                unsigned threads) {
  if (target_q.size() < 2) throw ConfigError("sweep: need at least two settings");
  for (double q : target_q) {
    if (!(q > 0.0)) throw ConfigError("sweep: target Q values must be > 0");
  }
  std::vector<SweepRow> rows(target_q.size());
  auto work = [&](std::size_t i) {
    SweepRow& r = rows[i];
    r.index = i;
    r.target_q = target_q[i];
    try {
      const LoopConfig loop = cfg.loop_config(target_q[i]);
      r.gamma_fb = loop.filter.gamma_fb;
      r.model_q = q_eff(cfg.oscillator, loop);
      r.model_gamma_eff = gamma_eff(cfg.oscillator, loop);
      r.model_n_eff = model_occupancy(cfg, loop, hz_to_rad(cfg.band_lo_hz), hz_to_rad(cfg.band_hi_hz)).n_eff;
      const auto sim = run_simulate(cfg, loop, substream_seed(seed, 100 + i));
      const auto fit = run_fit(cfg, sim.tf, sim.psd);
      r.fitted_q = fit.tf.value("q");
      r.sigma_q = fit.tf.sigma("q");
      r.fitted_gamma = fit.tf.value("omega_r") / r.fitted_q;
      r.n_eff = fit.occupancy.n_eff;
      r.sigma_n = fit.occupancy.sigma_n;
      r.ok = true;
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(rows.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < rows.size(); i = next++) work(i);
    });
  }
  for (auto& th : pool) th.join();
  return rows;
}

}  // namespace coldamp
