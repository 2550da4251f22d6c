#include <doctest.h>

#include <cmath>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"
#include "coldamp/io.hpp"
#include "coldamp/pipeline.hpp"
#include "oracles.hpp"

using namespace coldamp;
using oracle::rel;

TEST_CASE("budget summary at the default operating point") {
  const auto cfg = ExperimentConfig::defaults();
  const auto out = run_budget(cfg);
  const auto& s = out.summary;
  CHECK(rel(s.n_imp, 3.5e-13) < 1e-3);
  CHECK(rel(s.n_th_omega0, 9e12) < 1e-3);
  CHECK(rel(s.n_ba, 1e12) < 1e-6);
  CHECK(rel(s.q_eff, 1.0) < 1e-6);
  const double w_fb = 2 * oracle::kPi * 148;
  CHECK(rel(s.omega_eff, std::sqrt(w_fb * w_fb + cfg.oscillator.omega0 * cfg.oscillator.omega0)) < 1e-12);
  CHECK(s.warnings.empty());
  CHECK(!s.stability.unstable);
  // Equipartition-style decomposition sums to the total.
  double sum = 0;
  for (const auto& [name, v] : s.occupancy.decomposition) sum += v;
  CHECK(rel(sum, s.occupancy.n_eff) < 1e-6);
  CHECK(out.observed.values.size() == static_cast<std::size_t>(cfg.grid.points));
  for (std::size_t i = 0; i < out.physical.values.size(); ++i) {
    const double parts = out.thermal_x[i] + out.backaction_x[i] + out.actuator_x[i] + out.imprecision_fb_x[i];
    CHECK(rel(out.physical.values[i], parts) < 1e-9);
  }
}

TEST_CASE("a weakly damped loop keeps only a small phase margin") {
  const auto cfg = ExperimentConfig::defaults();
  double last = 0;
  for (double q : {50.0, 20.0, 8.0, 3.0, 1.0}) {
    const auto st = run_budget(cfg, {}, q).summary.stability;
    CHECK(!st.unstable);
    CHECK(st.phase_margin > last);
    last = st.phase_margin;
    if (q == 50.0) {
      // Of order one degree: the loop gain crosses unity close to the -1 point.
      CHECK(st.phase_margin > 0.5);
      CHECK(st.phase_margin < 3.0);
    }
  }
}

TEST_CASE("grids outside the active band warn about envelope extrapolation") {
  const auto cfg = ExperimentConfig::defaults();
  const auto s = run_budget(cfg, std::make_pair(10.0, 1000.0)).summary;
  bool found = false;
  for (const auto& w : s.warnings) found |= w.find("envelope extrapolation") != std::string::npos;
  CHECK(found);
  CHECK_THROWS_AS(run_budget(cfg, std::make_pair(200.0, 100.0)), ConfigError);
}

TEST_CASE("a noiseless configuration reports the occupancy failure instead of a number") {
  auto cfg = ExperimentConfig::defaults();
  cfg.imp_asd = 0;
  cfg.backaction_enabled = false;
  cfg.actuator_enabled = false;
  cfg.oscillator.temperature = 0;
  const auto s = run_budget(cfg).summary;
  REQUIRE(!s.warnings.empty());
  CHECK(s.warnings[0].rfind("occupancy:", 0) == 0);
  CHECK_THROWS_AS(model_occupancy(cfg, cfg.loop_config(), hz_to_rad(100), hz_to_rad(200)), UnphysicalOccupancy);
}

TEST_CASE("simulation is deterministic in the seed") {
  const auto cfg = ExperimentConfig::defaults();
  const auto loop = cfg.loop_config(8);
  const auto a = run_simulate(cfg, loop, 5);
  const auto b = run_simulate(cfg, loop, 5);
  const auto c = run_simulate(cfg, loop, 6);
  const Provenance prov{cfg.hash(), 5};
  CHECK(tf_csv(a.tf, prov) == tf_csv(b.tf, prov));
  CHECK(psd_csv(a.psd, prov) == psd_csv(b.psd, prov));
  CHECK(a.tf.points[0].g_hat != c.tf.points[0].g_hat);
  CHECK(a.psd.s_hat[0] != c.psd.s_hat[0]);
  CHECK(a.tf.points.size() == static_cast<std::size_t>(cfg.measurement.tf_points));
  CHECK(a.psd.n_avg == cfg.measurement.psd_n_avg);
}

TEST_CASE("fit survives a CSV round trip and recovers the model within its errors") {
  const auto cfg = ExperimentConfig::defaults();
  const auto loop = cfg.loop_config(8);
  const auto sim = run_simulate(cfg, loop, 11);
  const Provenance prov{cfg.hash(), 11};
  const auto tf = parse_tf_csv(tf_csv(sim.tf, prov)).tf;
  const auto psd = parse_psd_csv(psd_csv(sim.psd, prov)).psd;
  const auto direct = run_fit(cfg, sim.tf, sim.psd);
  const auto via = run_fit(cfg, tf, psd);
  CHECK(rel(via.tf.value("q"), direct.tf.value("q")) < 1e-9);
  CHECK(rel(via.occupancy.n_eff, direct.occupancy.n_eff) < 1e-9);

  const double model_q = q_eff(cfg.oscillator, loop);
  const double model_n = model_occupancy(cfg, loop, hz_to_rad(100), hz_to_rad(200)).n_eff;
  CHECK(std::abs(via.tf.value("q") - model_q) < 2 * via.tf.sigma("q"));
  // The delay also pulls the stiffness, so the reference frequency is the modulus of the delayed pole.
  const auto& o = cfg.oscillator;
  const double we = omega_eff(o, loop);
  const auto pole = oracle::delayed_pole(o.omega0, o.q0, loop.filter.omega_fb, loop.filter.gamma_fb, loop.delay,
                                         {we, we / (2 * model_q)});
  CHECK(std::abs(via.tf.value("omega_r") - std::abs(pole)) < 2 * via.tf.sigma("omega_r"));
  CHECK(std::abs(via.occupancy.n_eff - model_n) < 2 * via.occupancy.sigma_n);
}

TEST_CASE("TF fit uncertainty falls as one over root N") {
  auto cfg = ExperimentConfig::defaults();
  const auto loop = cfg.loop_config(8);
  auto sigma_at = [&](int n) {
    cfg.measurement.tf_n_avg = n;
    std::vector<double> s;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) s.push_back(run_fit_tf(cfg, run_simulate(cfg, loop, seed).tf).sigma("q"));
    return oracle::mean(s);
  };
  const double ratio = sigma_at(16) / sigma_at(256);
  CHECK(ratio > 4 * 0.9);
  CHECK(ratio < 4 * 1.1);
}

TEST_CASE("sweep rows are ordered, thread-count independent and track the requested damping") {
  const auto cfg = ExperimentConfig::defaults();
  CHECK_THROWS_AS(run_sweep(cfg, {8.0}, 1), ConfigError);
  CHECK_THROWS_AS(run_sweep(cfg, {8.0, -1.0}, 1), ConfigError);
  const auto one = run_sweep(cfg, cfg.sweep_target_q, 3, 1);
  const auto many = run_sweep(cfg, cfg.sweep_target_q, 3, 4);
  REQUIRE(one.size() == 5);
  REQUIRE(many.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(one[i].index == i);
    CHECK(one[i].target_q == cfg.sweep_target_q[i]);
    REQUIRE(one[i].ok);
    CHECK(one[i].fitted_q == many[i].fitted_q);
    CHECK(one[i].n_eff == many[i].n_eff);
    CHECK(std::abs(one[i].fitted_q - one[i].target_q) < 3 * one[i].sigma_q);
    CHECK(std::abs(one[i].n_eff - one[i].model_n_eff) < 3 * one[i].sigma_n);
  }
  CHECK(one.front().fitted_q > 40);
  CHECK(one.back().fitted_q < 1.2);
  const Provenance prov{cfg.hash(), 3};
  CHECK(sweep_csv(one, prov) == sweep_csv(many, prov));
}

TEST_CASE("a failing setting is recorded without aborting the sweep") {
  auto cfg = ExperimentConfig::defaults();
  cfg.imp_asd = 0;
  cfg.backaction_enabled = false;
  cfg.actuator_enabled = false;
  cfg.oscillator.temperature = 0;
  const auto rows = run_sweep(cfg, {8.0, 1.0}, 1, 1);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(!r.ok);
    CHECK(!r.error.empty());
  }
  const std::string csv = sweep_csv(rows, {cfg.hash(), 1});
  CHECK(csv.find("error: ") != std::string::npos);
}
