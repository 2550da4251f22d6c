#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"
#include "coldamp/io.hpp"
#include "coldamp/pipeline.hpp"
#include "coldamp/simkit.hpp"

using namespace coldamp;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string band;
  bool force = false;
};

std::pair<double, double> parse_band(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("--band: expected LO:HI in Hz, got '" + s + "'");
  double lo, hi;
  try {
    std::size_t p1 = 0, p2 = 0;
    lo = std::stod(s.substr(0, colon), &p1);
    hi = std::stod(s.substr(colon + 1), &p2);
    if (p1 != colon || p2 != s.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("--band: expected LO:HI in Hz, got '" + s + "'");
  }
  if (!(lo > 0 && hi > lo)) throw ConfigError("--band: need 0 < LO < HI");
  return {lo, hi};
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig::defaults() : load_config(c.config);
  if (c.seed) cfg.measurement.seed = *c.seed;
  return cfg;
}

std::optional<std::pair<double, double>> band_of(const Common& c) {
  if (c.band.empty()) return std::nullopt;
  return parse_band(c.band);
}

void emit(const Common& c, const std::string& suffix, const std::string& content) {
  if (c.out.empty()) {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << '\n';
    return;
  }
  const std::string path = c.out + suffix;
  write_file(path, content, c.force);
  std::cerr << "wrote " << path << "\n";
}

void require_out(const Common& c, const char* cmd) {
  if (c.out.empty()) throw ConfigError(std::string(cmd) + ": --out PREFIX is required");
}

void check_hashes(const std::string& cfg_hash, const std::vector<std::pair<std::string, std::string>>& inputs,
                  bool allow_mixed) {
  if (allow_mixed) return;
  for (const auto& [name, h] : inputs) {
    if (h != cfg_hash) {
      throw ConfigError(name + " was produced with config hash " + h + " but the active config hashes to " + cfg_hash +
                        " (pass --allow-mixed-hash to override)");
    }
  }
}

std::string dump(const nlohmann::ordered_json& j) { return j.dump(2) + "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coldamp: feedback cold-damping noise budget, simulation and fitting"};
  app.require_subcommand(1);
  Common c;
  std::string tf_path, psd_path, tf_fit_path, target_q;
  bool sweep = false, allow_mixed = false;
  unsigned threads = 0;

  auto add_common = [&](CLI::App* s, bool with_seed) {
    s->add_option("--config", c.config, "Config file (INI-style, *_hz keys)");
    if (with_seed) s->add_option("--seed", c.seed, "RNG seed (overrides measurement.seed)");
    s->add_option("--out", c.out, "Output path prefix");
    s->add_option("--band", c.band, "Occupancy band LO:HI in Hz");
    s->add_flag("--force-overwrite", c.force, "Replace existing output files");
  };

  auto* budget = app.add_subcommand("budget", "Per-source displacement PSDs and scalar summary");
  add_common(budget, false);

  auto* simulate = app.add_subcommand("simulate", "Synthetic transfer-function and spectrum measurements");
  add_common(simulate, true);
  simulate->add_flag("--sweep", sweep, "One TF/PSD pair per sweep setting");
  simulate->add_option("--target-q", target_q, "Comma-separated damping Q values for --sweep");

  auto* fit_tf = app.add_subcommand("fit-tf", "Fit the closed-loop resonator to a TF CSV");
  add_common(fit_tf, false);
  fit_tf->add_option("--tf", tf_path, "TF CSV")->required();
  fit_tf->add_flag("--allow-mixed-hash", allow_mixed, "Accept inputs made with another config");

  auto* fit_sp = app.add_subcommand("fit-spectrum", "Fit force and imprecision levels to a PSD CSV");
  add_common(fit_sp, false);
  fit_sp->add_option("--psd", psd_path, "PSD CSV")->required();
  auto* tf_opt = fit_sp->add_option("--tf", tf_path, "TF CSV (fitted first)");
  fit_sp->add_option("--tf-fit", tf_fit_path, "TF fit JSON from fit-tf")->excludes(tf_opt);
  fit_sp->add_flag("--allow-mixed-hash", allow_mixed, "Accept inputs made with another config");

  auto* fit = app.add_subcommand("fit", "TF fit, spectrum fit and occupancy with uncertainty");
  add_common(fit, false);
  fit->add_option("--tf", tf_path, "TF CSV")->required();
  fit->add_option("--psd", psd_path, "PSD CSV")->required();
  fit->add_flag("--allow-mixed-hash", allow_mixed, "Accept inputs made with another config");

  auto* occ = app.add_subcommand("occupancy", "Occupancy from data (--tf and --psd) or from the model");
  add_common(occ, false);
  auto* occ_tf = occ->add_option("--tf", tf_path, "TF CSV");
  auto* occ_psd = occ->add_option("--psd", psd_path, "PSD CSV");
  occ_tf->needs(occ_psd);
  occ_psd->needs(occ_tf);
  occ->add_flag("--allow-mixed-hash", allow_mixed, "Accept inputs made with another config");

  auto* sw = app.add_subcommand("sweep", "Simulate and fit every damping setting; occupancy versus Q");
  add_common(sw, true);
  sw->add_option("--target-q", target_q, "Comma-separated damping Q values (default: sweep.target_q)");
  sw->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto q_list = [&](const ExperimentConfig& cfg) {
    if (target_q.empty()) return cfg.sweep_target_q;
    std::vector<double> qs;
    std::stringstream ss(target_q);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        qs.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("--target-q: not a number: '" + tok + "'");
      }
    }
    for (double q : qs) {
      if (!(q > 0)) throw ConfigError("--target-q: values must be positive");
    }
    return qs;
  };

  try {
    if (*budget) {
      const auto cfg = load(c);
      const auto b = run_budget(cfg, band_of(c));
      const Provenance prov{cfg.hash(), std::nullopt};
      if (c.out.empty()) {
        std::cout << dump(budget_json(b.summary, prov));
      } else {
        emit(c, "_budget.csv", budget_csv(b, prov));
        emit(c, "_budget.json", dump(budget_json(b.summary, prov)));
      }
      for (const auto& w : b.summary.warnings) std::cerr << "warning: " << w << "\n";
    } else if (*simulate) {
      require_out(c, "simulate");
      const auto cfg = load(c);
      const std::uint64_t seed = cfg.measurement.seed;
      const Provenance prov{cfg.hash(), seed};
      if (!sweep) {
        const auto sim = run_simulate(cfg, cfg.loop_config(), seed);
        emit(c, "_tf.csv", tf_csv(sim.tf, prov));
        emit(c, "_psd.csv", psd_csv(sim.psd, prov));
      } else {
        const auto qs = q_list(cfg);
        if (qs.size() < 2) throw ConfigError("sweep needs at least 2 settings");
        for (std::size_t i = 0; i < qs.size(); ++i) {
          const auto sim = run_simulate(cfg, cfg.loop_config(qs[i]), substream_seed(seed, 100 + i));
          const std::string tag = "_s" + std::to_string(i);
          emit(c, tag + "_tf.csv", tf_csv(sim.tf, prov));
          emit(c, tag + "_psd.csv", psd_csv(sim.psd, prov));
        }
      }
    } else if (*fit_tf) {
      const auto cfg = load(c);
      const auto in = read_tf_csv(tf_path);
      check_hashes(cfg.hash(), {{tf_path, in.prov.config_hash}}, allow_mixed);
      const auto fr = run_fit_tf(cfg, in.tf);
      auto j = fit_result_json(fr);
      j["config_hash"] = cfg.hash();
      emit(c, "_fit_tf.json", dump(j));
    } else if (*fit_sp) {
      const auto cfg = load(c);
      const auto ps = read_psd_csv(psd_path);
      std::vector<std::pair<std::string, std::string>> hashes{{psd_path, ps.prov.config_hash}};
      FitResult tfr;
      if (!tf_fit_path.empty()) {
        const auto j = nlohmann::ordered_json::parse(read_file(tf_fit_path), nullptr, false);
        if (j.is_discarded()) throw SchemaError(tf_fit_path + ": invalid JSON");
        tfr = fit_result_from_json(j);
        hashes.push_back({tf_fit_path, j.value("config_hash", std::string())});
      } else if (!tf_path.empty()) {
        const auto in = read_tf_csv(tf_path);
        hashes.push_back({tf_path, in.prov.config_hash});
        check_hashes(cfg.hash(), hashes, allow_mixed);
        tfr = run_fit_tf(cfg, in.tf);
      } else {
        throw ConfigError("fit-spectrum: one of --tf or --tf-fit is required");
      }
      check_hashes(cfg.hash(), hashes, allow_mixed);
      auto c2 = cfg;
      if (auto b = band_of(c)) {
        c2.band_lo_hz = b->first;
        c2.band_hi_hz = b->second;
      }
      const auto sr = run_fit_spectrum(c2, tfr, ps.psd);
      auto j = fit_result_json(sr);
      j["config_hash"] = cfg.hash();
      emit(c, "_fit_spectrum.json", dump(j));
    } else if (*fit || (*occ && !tf_path.empty())) {
      const auto cfg = load(c);
      const auto tf = read_tf_csv(tf_path);
      const auto ps = read_psd_csv(psd_path);
      check_hashes(cfg.hash(), {{tf_path, tf.prov.config_hash}, {psd_path, ps.prov.config_hash}}, allow_mixed);
      const auto f = run_fit(cfg, tf.tf, ps.psd, band_of(c));
      const Provenance prov{cfg.hash(), tf.prov.seed};
      if (*fit) {
        emit(c, "_fit.json", dump(fit_output_json(f, prov)));
        if (!c.out.empty()) emit(c, "_physical_psd.csv", psd_csv(f.physical.grid, f.physical.values, ps.psd.n_avg, prov));
      } else {
        auto j = occupancy_json(f.occupancy);
        j["config_hash"] = prov.config_hash;
        emit(c, "_occupancy.json", dump(j));
      }
    } else if (*occ) {
      const auto cfg = load(c);
      const auto loop = cfg.loop_config();
      double lo = hz_to_rad(cfg.band_lo_hz), hi = hz_to_rad(cfg.band_hi_hz);
      if (auto b = band_of(c)) {
        lo = hz_to_rad(b->first);
        hi = hz_to_rad(b->second);
      }
      auto j = occupancy_json(model_occupancy(cfg, loop, lo, hi));
      j["config_hash"] = cfg.hash();
      emit(c, "_occupancy.json", dump(j));
    } else if (*sw) {
      const auto cfg = load(c);
      const auto qs = q_list(cfg);
      auto c2 = cfg;
      if (auto b = band_of(c)) {
        c2.band_lo_hz = b->first;
        c2.band_hi_hz = b->second;
      }
      const auto rows = run_sweep(c2, qs, cfg.measurement.seed, threads);
      const Provenance prov{cfg.hash(), cfg.measurement.seed};
      emit(c, "_sweep.csv", sweep_csv(rows, prov));
      if (!c.out.empty()) emit(c, "_sweep.json", dump(sweep_json(rows, prov)));
      for (const auto& r : rows) {
        if (!r.ok) std::cerr << "setting " << r.index << " (Q=" << r.target_q << ") failed: " << r.error << "\n";
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
