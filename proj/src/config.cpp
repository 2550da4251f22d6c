#include "coldamp/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"

namespace coldamp {

namespace {

// n_imp = S_imp m Omega0^2 / (8 hbar Q0), independent of the reference frequency.
double omega0_for_n_imp(double n_imp, double s_imp, double mass, double q0) {
  return std::sqrt(8.0 * constants::hbar * q0 * n_imp / (s_imp * mass));
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  double d;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  if (pos != v.size() || !std::isfinite(d)) throw ConfigError("expected a finite number, got '" + v + "'");
  return d;
}

long long parse_int(const std::string& v) {
  std::size_t pos = 0;
  long long d;
  try {
    d = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return d;
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t pos = 0;
  unsigned long long d;
  if (!v.empty() && v[0] == '-') throw ConfigError("expected a non-negative integer, got '" + v + "'");
  try {
    d = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return d;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["oscillator.mass_kg"] = [](auto& c, auto& v) { c.oscillator.mass = parse_double(v); };
    t["oscillator.f0_hz"] = [](auto& c, auto& v) { c.oscillator.omega0 = hz_to_rad(parse_double(v)); };
    t["oscillator.q0"] = [](auto& c, auto& v) { c.oscillator.q0 = parse_double(v); };
    t["oscillator.temperature_k"] = [](auto& c, auto& v) { c.oscillator.temperature = parse_double(v); };

    t["backaction.enabled"] = [](auto& c, auto& v) { c.backaction_enabled = parse_bool(v); };
    t["backaction.cavity_power_w"] = [](auto& c, auto& v) { c.backaction.cavity_power = parse_double(v); };
    t["backaction.finesse"] = [](auto& c, auto& v) { c.backaction.finesse = parse_double(v); };
    t["backaction.wavelength_m"] = [](auto& c, auto& v) { c.backaction.wavelength = parse_double(v); };
    t["backaction.antisqueeze_db"] = [](auto& c, auto& v) { c.backaction.antisqueeze_db = parse_double(v); };

    t["actuator.enabled"] = [](auto& c, auto& v) { c.actuator_enabled = parse_bool(v); };

    t["loop.trap_hz"] = [](auto& c, auto& v) { c.loop.trap_hz = parse_double(v); };
    t["loop.damping_hz"] = [](auto& c, auto& v) {
      c.loop.damping_hz = parse_double(v);
      c.loop.target_q = -1.0;
    };
    t["loop.target_q"] = [](auto& c, auto& v) {
      c.loop.target_q = parse_double(v);
      c.loop.damping_hz = -1.0;
    };
    t["loop.delay_s"] = [](auto& c, auto& v) { c.loop.delay_s = parse_double(v); };
    t["loop.delay_q"] = [](auto& c, auto& v) {
      c.loop.delay_q = parse_double(v);
      c.loop.delay_s = -1.0;
    };
    t["loop.band_lo_hz"] = [](auto& c, auto& v) { c.loop.band_lo_hz = parse_double(v); };
    t["loop.band_hi_hz"] = [](auto& c, auto& v) { c.loop.band_hi_hz = parse_double(v); };
    t["loop.rolloff_order"] = [](auto& c, auto& v) { c.loop.rolloff_order = static_cast<int>(parse_int(v)); };
    t["loop.notch_hz"] = [](auto& c, auto& v) { c.loop.notch_hz = parse_list(v); };
    t["loop.notch_depth"] = [](auto& c, auto& v) { c.loop.notch_depth = parse_list(v); };
    t["loop.notch_width_hz"] = [](auto& c, auto& v) { c.loop.notch_width_hz = parse_list(v); };

    t["imprecision.asd_m_per_rthz"] = [](auto& c, auto& v) { c.imp_asd = parse_double(v); };
    t["imprecision.ref_hz"] = [](auto& c, auto& v) { c.imp_ref_hz = parse_double(v); };
    t["imprecision.log_coeffs"] = [](auto& c, auto& v) { c.imp_log_coeffs = parse_list(v); };

    t["occupancy.band_lo_hz"] = [](auto& c, auto& v) { c.band_lo_hz = parse_double(v); };
    t["occupancy.band_hi_hz"] = [](auto& c, auto& v) { c.band_hi_hz = parse_double(v); };

    auto& m = t;
    m["measurement.tf_points"] = [](auto& c, auto& v) { c.measurement.tf_points = static_cast<int>(parse_int(v)); };
    m["measurement.tf_lo_hz"] = [](auto& c, auto& v) { c.measurement.tf_lo_hz = parse_double(v); };
    m["measurement.tf_hi_hz"] = [](auto& c, auto& v) { c.measurement.tf_hi_hz = parse_double(v); };
    m["measurement.coherence"] = [](auto& c, auto& v) { c.measurement.coherence = parse_list(v); };
    m["measurement.coherence_knots_hz"] = [](auto& c, auto& v) { c.measurement.coherence_knots_hz = parse_list(v); };
    m["measurement.tf_n_avg"] = [](auto& c, auto& v) { c.measurement.tf_n_avg = static_cast<int>(parse_int(v)); };
    m["measurement.tf_phase_rad"] = [](auto& c, auto& v) { c.measurement.tf_phase_rad = parse_double(v); };
    m["measurement.tf_delay_s"] = [](auto& c, auto& v) { c.measurement.tf_delay_s = parse_double(v); };
    m["measurement.tf_gain"] = [](auto& c, auto& v) { c.measurement.tf_gain = parse_double(v); };
    m["measurement.tf_sigma_freq_hz"] = [](auto& c, auto& v) { c.measurement.tf_sigma_freq_hz = parse_double(v); };
    m["measurement.segment_duration_s"] = [](auto& c, auto& v) { c.measurement.segment_duration_s = parse_double(v); };
    m["measurement.psd_lo_hz"] = [](auto& c, auto& v) { c.measurement.psd_lo_hz = parse_double(v); };
    m["measurement.psd_hi_hz"] = [](auto& c, auto& v) { c.measurement.psd_hi_hz = parse_double(v); };
    m["measurement.psd_bin_hz"] = [](auto& c, auto& v) { c.measurement.psd_bin_hz = parse_double(v); };
    m["measurement.psd_n_avg"] = [](auto& c, auto& v) { c.measurement.psd_n_avg = static_cast<int>(parse_int(v)); };
    m["measurement.seed"] = [](auto& c, auto& v) { c.measurement.seed = parse_u64(v); };

    t["uncertainty.calibration_rel"] = [](auto& c, auto& v) { c.uncertainty.calibration_rel = parse_double(v); };
    t["uncertainty.spectrum_model_rel"] = [](auto& c, auto& v) { c.uncertainty.spectrum_model_rel = parse_double(v); };
    t["uncertainty.calibration_scale"] = [](auto& c, auto& v) { c.uncertainty.calibration_scale = parse_double(v); };

    t["grid.lo_hz"] = [](auto& c, auto& v) { c.grid.lo_hz = parse_double(v); };
    t["grid.hi_hz"] = [](auto& c, auto& v) { c.grid.hi_hz = parse_double(v); };
    t["grid.points"] = [](auto& c, auto& v) { c.grid.points = static_cast<int>(parse_int(v)); };

    t["fit.imp_order"] = [](auto& c, auto& v) { c.fit.imp_order = static_cast<int>(parse_int(v)); };
    t["fit.force_shape"] = [](auto& c, auto& v) { c.fit.force_shape = v; };

    t["sweep.target_q"] = [](auto& c, auto& v) { c.sweep_target_q = parse_list(v); };
    return t;
  }();
  return table;
}

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) throw ConfigError(path + ": " + msg);
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  c.oscillator.mass = 10.0;
  c.oscillator.q0 = 1e8;
  c.oscillator.omega0 = omega0_for_n_imp(3.5e-13, c.imp_asd * c.imp_asd, c.oscillator.mass, c.oscillator.q0);
  c.oscillator.temperature = 9e12 * constants::hbar * c.oscillator.omega0 / constants::k_boltzmann;
  c.backaction.finesse = 45.0;
  c.backaction.wavelength = 1064e-9;
  c.backaction.antisqueeze_db = 8.0;
  c.backaction.cavity_power = cavity_power_for_n_backaction(1e12, c.backaction, c.oscillator);
  return c;
}

BudgetSources ExperimentConfig::sources() const {
  BudgetSources s;
  s.backaction = backaction_enabled;
  s.actuator = actuator_enabled;
  return s;
}

ImprecisionModel ExperimentConfig::imprecision() const {
  ImprecisionModel m;
  m.omega_ref = hz_to_rad(imp_ref_hz);
  if (imp_asd == 0.0) {
    m.enabled = false;
    m.coeffs = {0.0};
    return m;
  }
  m.coeffs = {std::log(imp_asd * imp_asd)};
  for (double c : imp_log_coeffs) m.coeffs.push_back(c);
  return m;
}

LoopConfig ExperimentConfig::loop_config(double target_q_override) const {
  LoopConfig lc;
  lc.filter.mass = oscillator.mass;
  lc.filter.omega_fb = hz_to_rad(loop.trap_hz);
  lc.envelope.band_lo = hz_to_rad(loop.band_lo_hz);
  lc.envelope.band_hi = hz_to_rad(loop.band_hi_hz);
  lc.envelope.rolloff_order = loop.rolloff_order;
  for (std::size_t i = 0; i < loop.notch_hz.size(); ++i) {
    lc.notches.push_back({hz_to_rad(loop.notch_hz[i]), loop.notch_depth[i], hz_to_rad(loop.notch_width_hz[i])});
  }
  try {
    lc.delay = loop.delay_s >= 0.0 ? loop.delay_s : delay_for_loop_q(oscillator, lc, loop.delay_q);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("loop.delay_q: ") + e.what());
  }
  const double tq = target_q_override > 0.0 ? target_q_override : loop.target_q;
  if (tq > 0.0) {
    try {
      lc.filter.gamma_fb = gamma_fb_for_q(oscillator, lc, tq);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("loop.target_q: ") + e.what());
    }
  } else {
    lc.filter.gamma_fb = hz_to_rad(loop.damping_hz);
  }
  return lc;
}

CoherenceProfile ExperimentConfig::coherence_profile() const {
  const auto& m = measurement;
  if (m.coherence_knots_hz.empty()) return CoherenceProfile::constant(m.coherence.at(0));
  CoherenceProfile p;
  for (double f : m.coherence_knots_hz) p.knots.push_back(hz_to_rad(f));
  p.values = m.coherence;
  return p;
}

void ExperimentConfig::validate() const {
  require(oscillator.mass > 0, "oscillator.mass_kg", "must be > 0");
  require(oscillator.omega0 > 0, "oscillator.f0_hz", "must be > 0");
  require(oscillator.q0 > 0, "oscillator.q0", "must be > 0");
  require(oscillator.temperature >= 0, "oscillator.temperature_k", "must be >= 0");
  if (backaction_enabled) {
    require(backaction.cavity_power > 0, "backaction.cavity_power_w", "must be > 0 (set enabled = false to drop back-action)");
    require(backaction.finesse > 0, "backaction.finesse", "must be > 0");
    require(backaction.wavelength > 0, "backaction.wavelength_m", "must be > 0");
    require(backaction.antisqueeze_db >= 0, "backaction.antisqueeze_db", "must be >= 0");
  }
  require(loop.trap_hz > 0, "loop.trap_hz", "must be > 0");
  require(loop.target_q > 0 || loop.damping_hz >= 0, "loop.damping_hz", "must be >= 0");
  require(loop.delay_s >= 0 || loop.delay_q > 0, "loop.delay_q", "must be > 0");
  require(loop.band_lo_hz > 0 && loop.band_hi_hz > loop.band_lo_hz, "loop.band_hi_hz", "need 0 < band_lo_hz < band_hi_hz");
  require(loop.rolloff_order >= 2, "loop.rolloff_order", "must be >= 2");
  require(loop.notch_depth.size() == loop.notch_hz.size(), "loop.notch_depth", "needs one entry per notch_hz");
  require(loop.notch_width_hz.size() == loop.notch_hz.size(), "loop.notch_width_hz", "needs one entry per notch_hz");
  for (std::size_t i = 0; i < loop.notch_hz.size(); ++i) {
    require(loop.notch_hz[i] > 0, "loop.notch_hz", "must be > 0");
    require(loop.notch_hz[i] < loop.band_lo_hz || loop.notch_hz[i] > loop.band_hi_hz, "loop.notch_hz",
            "notch inside the active band");
    require(loop.notch_depth[i] > 0 && loop.notch_depth[i] <= 1, "loop.notch_depth", "must lie in (0, 1]");
    require(loop.notch_width_hz[i] > 0, "loop.notch_width_hz", "must be > 0");
  }
  require(imp_asd >= 0, "imprecision.asd_m_per_rthz", "must be >= 0");
  require(imp_ref_hz > 0, "imprecision.ref_hz", "must be > 0");
  require(imp_log_coeffs.size() <= 3, "imprecision.log_coeffs", "at most 3 coefficients (order <= 3)");
  require(band_lo_hz > 0 && band_hi_hz > band_lo_hz, "occupancy.band_hi_hz", "need 0 < band_lo_hz < band_hi_hz");

  const auto& m = measurement;
  require(m.tf_points >= 6, "measurement.tf_points", "must be >= 6");
  require(m.tf_lo_hz > 0 && m.tf_hi_hz > m.tf_lo_hz, "measurement.tf_hi_hz", "need 0 < tf_lo_hz < tf_hi_hz");
  require(!m.coherence.empty(), "measurement.coherence", "must not be empty");
  require(m.coherence_knots_hz.empty() ? m.coherence.size() == 1 : m.coherence.size() == m.coherence_knots_hz.size(),
          "measurement.coherence", "one value, or one value per coherence_knots_hz entry");
  for (double c : m.coherence) require(c > 0 && c <= 1, "measurement.coherence", "values must lie in (0, 1]");
  for (std::size_t i = 1; i < m.coherence_knots_hz.size(); ++i) {
    require(m.coherence_knots_hz[i] > m.coherence_knots_hz[i - 1], "measurement.coherence_knots_hz", "must increase");
  }
  require(m.tf_n_avg >= 1, "measurement.tf_n_avg", "must be >= 1");
  require(m.tf_delay_s >= 0, "measurement.tf_delay_s", "must be >= 0");
  require(m.tf_gain > 0, "measurement.tf_gain", "must be > 0");
  require(m.tf_sigma_freq_hz >= 0, "measurement.tf_sigma_freq_hz", "must be >= 0");
  require(m.segment_duration_s > 0, "measurement.segment_duration_s", "must be > 0");
  require(m.psd_lo_hz > 0 && m.psd_hi_hz > m.psd_lo_hz, "measurement.psd_hi_hz", "need 0 < psd_lo_hz < psd_hi_hz");
  require(m.psd_bin_hz > 0, "measurement.psd_bin_hz", "must be > 0");
  require(m.psd_n_avg >= 1, "measurement.psd_n_avg", "must be >= 1");
  require(uncertainty.calibration_rel >= 0, "uncertainty.calibration_rel", "must be >= 0");
  require(uncertainty.spectrum_model_rel >= 0, "uncertainty.spectrum_model_rel", "must be >= 0");
  require(uncertainty.calibration_scale > 0, "uncertainty.calibration_scale", "must be > 0");
  require(grid.lo_hz > 0 && grid.hi_hz > grid.lo_hz, "grid.hi_hz", "need 0 < lo_hz < hi_hz");
  require(grid.points >= 2, "grid.points", "must be >= 2");
  require(fit.imp_order >= 0 && fit.imp_order <= 3, "fit.imp_order", "must lie in 0..3");
  require(fit.force_shape == "structural" || fit.force_shape == "white", "fit.force_shape",
          "must be 'structural' or 'white'");
  for (double q : sweep_target_q) require(q > 0, "sweep.target_q", "values must be > 0");

  try {
    loop_config().validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("loop: ") + e.what());
  }
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  char buf[64];
  auto num = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += key;
    out += '=';
    out += buf;
    out += '\n';
  };
  auto list = [&](const char* key, const std::vector<double>& v) {
    out += key;
    out += '=';
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      if (i) out += ',';
      out += buf;
    }
    out += '\n';
  };
  num("oscillator.mass_kg", oscillator.mass);
  num("oscillator.omega0", oscillator.omega0);
  num("oscillator.q0", oscillator.q0);
  num("oscillator.temperature_k", oscillator.temperature);
  num("backaction.enabled", backaction_enabled);
  num("backaction.cavity_power_w", backaction.cavity_power);
  num("backaction.finesse", backaction.finesse);
  num("backaction.wavelength_m", backaction.wavelength);
  num("backaction.antisqueeze_db", backaction.antisqueeze_db);
  num("actuator.enabled", actuator_enabled);
  num("loop.trap_hz", loop.trap_hz);
  num("loop.damping_hz", loop.damping_hz);
  num("loop.target_q", loop.target_q);
  num("loop.delay_s", loop.delay_s);
  num("loop.delay_q", loop.delay_q);
  num("loop.band_lo_hz", loop.band_lo_hz);
  num("loop.band_hi_hz", loop.band_hi_hz);
  num("loop.rolloff_order", loop.rolloff_order);
  list("loop.notch_hz", loop.notch_hz);
  list("loop.notch_depth", loop.notch_depth);
  list("loop.notch_width_hz", loop.notch_width_hz);
  num("imprecision.asd_m_per_rthz", imp_asd);
  num("imprecision.ref_hz", imp_ref_hz);
  list("imprecision.log_coeffs", imp_log_coeffs);
  num("occupancy.band_lo_hz", band_lo_hz);
  num("occupancy.band_hi_hz", band_hi_hz);
  const auto& m = measurement;
  num("measurement.tf_points", m.tf_points);
  num("measurement.tf_lo_hz", m.tf_lo_hz);
  num("measurement.tf_hi_hz", m.tf_hi_hz);
  list("measurement.coherence", m.coherence);
  list("measurement.coherence_knots_hz", m.coherence_knots_hz);
  num("measurement.tf_n_avg", m.tf_n_avg);
  num("measurement.tf_phase_rad", m.tf_phase_rad);
  num("measurement.tf_delay_s", m.tf_delay_s);
  num("measurement.tf_gain", m.tf_gain);
  num("measurement.tf_sigma_freq_hz", m.tf_sigma_freq_hz);
  num("measurement.segment_duration_s", m.segment_duration_s);
  num("measurement.psd_lo_hz", m.psd_lo_hz);
  num("measurement.psd_hi_hz", m.psd_hi_hz);
  num("measurement.psd_bin_hz", m.psd_bin_hz);
  num("measurement.psd_n_avg", m.psd_n_avg);
  num("uncertainty.calibration_rel", uncertainty.calibration_rel);
  num("uncertainty.spectrum_model_rel", uncertainty.spectrum_model_rel);
  num("uncertainty.calibration_scale", uncertainty.calibration_scale);
  num("grid.lo_hz", grid.lo_hz);
  num("grid.hi_hz", grid.hi_hz);
  num("grid.points", grid.points);
  num("fit.imp_order", fit.imp_order);
  out += "fit.force_shape=" + fit.force_shape + "\n";
  list("sweep.target_q", sweep_target_q);
  return out;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  std::istringstream in(text);
  std::string line, section;
  std::set<std::string> seen;
  std::map<std::string, int> key_line;
  int lineno = 0;
  bool n_ba_set = false;
  double target_n_ba = 0.0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    auto hash_pos = line.find_first_of("#;");
    const std::string body = trim(hash_pos == std::string::npos ? line : line.substr(0, hash_pos));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(body.substr(1, body.size() - 2));
      static const std::set<std::string> known{"oscillator", "backaction", "actuator",  "loop",
                                               "imprecision", "occupancy", "measurement", "uncertainty",
                                               "grid",        "fit",       "sweep"};
      if (!known.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any section");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const std::string path = section + "." + key;
    if (!seen.insert(path).second) throw ConfigError(where + path + ": duplicate key");
    key_line[path] = lineno;
    try {
      if (path == "backaction.target_n_ba") {
        target_n_ba = parse_double(value);
        n_ba_set = true;
        continue;
      }
      if (path == "oscillator.omega0_rad_s" || key.ends_with("_rad_s")) {
        throw ConfigError("frequencies are given in Hz; use the *_hz key");
      }
      auto it = setters().find(path);
      if (it == setters().end()) throw ConfigError("unknown key");
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + path + ": " + e.what());
    }
  }
  // Post-parse errors point at the line that set the offending key when there is one.
  auto at = [&](const std::string& path) {
    auto it = key_line.find(path);
    return it == key_line.end() ? source + ": " : source + ":" + std::to_string(it->second) + ": ";
  };
  auto exclusive = [&](const std::string& a, const std::string& b) {
    if (seen.count(a) && seen.count(b)) {
      const std::string later = key_line[a] > key_line[b] ? a : b;
      throw ConfigError(at(later) + a + " and " + b + " are mutually exclusive");
    }
  };
  exclusive("loop.damping_hz", "loop.target_q");
  exclusive("loop.delay_s", "loop.delay_q");
  exclusive("backaction.cavity_power_w", "backaction.target_n_ba");
  if (n_ba_set) {
    if (!(target_n_ba > 0)) throw ConfigError(at("backaction.target_n_ba") + "backaction.target_n_ba: must be > 0");
    cfg.backaction.cavity_power = cavity_power_for_n_backaction(target_n_ba, cfg.backaction, cfg.oscillator);
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    throw ConfigError(at(colon == std::string::npos ? std::string() : msg.substr(0, colon)) + msg);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace coldamp
