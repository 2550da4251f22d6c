#include "coldamp/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coldamp/constants.hpp"
#include "coldamp/error.hpp"

namespace coldamp {

namespace {

constexpr const char* kTfSchema = "coldamp.tf";
constexpr const char* kPsdSchema = "coldamp.psd";
constexpr const char* kBudgetSchema = "coldamp.budget";
constexpr const char* kSweepSchema = "coldamp.sweep";

constexpr const char* kTfHeader = "frequency_hz,re_g,im_g,coherence,n_avg,sigma_g";
constexpr const char* kPsdHeader = "frequency_hz,psd_m2_per_hz,n_avg";

std::string preamble(const char* schema, const Provenance& prov) {
  std::string s = "# schema: ";
  s += schema;
  s += "/" + std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor) + "\n";
  s += "# config_hash: " + prov.config_hash + "\n";
  if (prov.seed) s += "# seed: " + std::to_string(*prov.seed) + "\n";
  return s;
}

nlohmann::ordered_json nullable(double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double cell_double(const std::string& v, const std::string& where) {
  std::size_t pos = 0;
  double d;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw SchemaError(where + ": not a number: '" + v + "'");
  }
  if (pos != v.size() || !std::isfinite(d)) throw SchemaError(where + ": not a finite number: '" + v + "'");
  return d;
}

int cell_int(const std::string& v, const std::string& where) {
  const double d = cell_double(v, where);
  if (d != std::floor(d) || d < 1 || d > 2147483647.0) throw SchemaError(where + ": expected a positive integer");
  return static_cast<int>(d);
}

struct Table {
  std::map<std::string, std::string> meta;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_lines;
};

Table parse_table(const std::string& text, const std::string& source, const char* schema, const char* header) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Table t;
  bool schema_seen = false, header_seen = false;
  std::size_t ncol = split(header, ',').size();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = source + ":" + std::to_string(lineno);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header_seen) throw SchemaError(where + ": metadata after the header");
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(' ');
        const auto b = s.find_last_not_of(' ');
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      const std::string key = trim(line.substr(1, colon - 1));
      const std::string val = trim(line.substr(colon + 1));
      if (!schema_seen) {
        if (key != "schema") throw SchemaError(where + ": first line must declare the schema");
        const auto slash = val.find('/');
        if (slash == std::string::npos || val.substr(0, slash) != schema) {
          throw SchemaError(where + ": expected schema " + schema + ", found '" + val + "'");
        }
        const std::string ver = val.substr(slash + 1);
        const auto dot = ver.find('.');
        int major = -1;
        try {
          major = std::stoi(ver.substr(0, dot));
        } catch (const std::exception&) {
          throw SchemaError(where + ": malformed schema version '" + ver + "'");
        }
        if (major != kSchemaMajor) {
          throw SchemaError(where + ": unsupported schema major version " + std::to_string(major));
        }
        schema_seen = true;
      }
      t.meta[key] = val;
      continue;
    }
    if (!schema_seen) throw SchemaError(where + ": missing schema line");
    if (!header_seen) {
      if (line != header) throw SchemaError(where + ": expected header '" + std::string(header) + "'");
      header_seen = true;
      continue;
    }
    auto cells = split(line, ',');
    if (cells.size() != ncol) {
      throw SchemaError(where + ": expected " + std::to_string(ncol) + " columns, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.row_lines.push_back(lineno);
  }
  if (!schema_seen) throw SchemaError(source + ": empty file or missing schema line");
  if (!header_seen) throw SchemaError(source + ": missing header");
  return t;
}

Provenance provenance_of(const Table& t, const std::string& source) {
  Provenance p;
  auto it = t.meta.find("config_hash");
  if (it == t.meta.end()) throw SchemaError(source + ": missing config_hash metadata");
  p.config_hash = it->second;
  auto s = t.meta.find("seed");
  if (s != t.meta.end()) {
    try {
      p.seed = std::stoull(s->second);
    } catch (const std::exception&) {
      throw SchemaError(source + ": malformed seed metadata");
    }
  }
  return p;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content, bool overwrite) {
  std::error_code ec;
  if (!overwrite && std::filesystem::exists(path, ec)) {
    throw IoError("refusing to overwrite '" + path + "' (use --force-overwrite)");
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << content;
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string tf_csv(const TFMeasurement& tf, const Provenance& prov) {
  std::string s = preamble(kTfSchema, prov);
  s += "# segment_duration_s: " + format_double(tf.segment_duration) + "\n";
  s += "# bin_width_hz: " + format_double(tf.bin_width_hz()) + "\n";
  s += kTfHeader;
  s += '\n';
  for (const auto& p : tf.points) {
    s += format_double(rad_to_hz(p.frequency)) + "," + format_double(p.g_hat.real()) + "," +
         format_double(p.g_hat.imag()) + "," + format_double(p.coherence) + "," + std::to_string(p.n_avg) + "," +
         format_double(p.sigma_g) + "\n";
  }
  return s;
}

std::string psd_csv(const std::vector<double>& grid, const std::vector<double>& values, int n_avg,
                    const Provenance& prov) {
  std::string s = preamble(kPsdSchema, prov);
  s += kPsdHeader;
  s += '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    s += format_double(rad_to_hz(grid[i])) + "," + format_double(values[i]) + "," + std::to_string(n_avg) + "\n";
  }
  return s;
}

std::string psd_csv(const SpectrumMeasurement& m, const Provenance& prov) {
  return psd_csv(m.grid, m.s_hat, m.n_avg, prov);
}

std::string budget_csv(const BudgetOutput& b, const Provenance& prov) {
  std::string s = preamble(kBudgetSchema, prov);
  s += "frequency_hz,thermal_m2_per_hz,backaction_m2_per_hz,actuator_m2_per_hz,imprecision_observed_m2_per_hz,"
       "imprecision_feedback_m2_per_hz,observed_m2_per_hz,physical_m2_per_hz\n";
  for (std::size_t i = 0; i < b.budget.grid.size(); ++i) {
    s += format_double(rad_to_hz(b.budget.grid[i])) + "," + format_double(b.thermal_x[i]) + "," +
         format_double(b.backaction_x[i]) + "," + format_double(b.actuator_x[i]) + "," +
         format_double(b.imprecision_obs_x[i]) + "," + format_double(b.imprecision_fb_x[i]) + "," +
         format_double(b.observed.values[i]) + "," + format_double(b.physical.values[i]) + "\n";
  }
  return s;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const Provenance& prov) {
  std::string s = preamble(kSweepSchema, prov);
  s += "index,target_q,fitted_q,sigma_q,n_eff,sigma_n,fitted_gamma_hz,model_q,model_gamma_eff_hz,model_n_eff,status\n";
  for (const auto& r : rows) {
    s += std::to_string(r.index) + "," + format_double(r.target_q) + ",";
    if (r.ok) {
      s += format_double(r.fitted_q) + "," + format_double(r.sigma_q) + "," + format_double(r.n_eff) + "," +
           format_double(r.sigma_n) + "," + format_double(rad_to_hz(r.fitted_gamma)) + ",";
    } else {
      s += ",,,,,";
    }
    s += format_double(r.model_q) + "," + format_double(rad_to_hz(r.model_gamma_eff)) + "," +
         format_double(r.model_n_eff) + ",";
    if (r.ok) {
      s += "ok";
    } else {
      std::string e = r.error;
      for (char& ch : e) {
        if (ch == ',' || ch == '\n') ch = ';';
      }
      s += "error: " + e;
    }
    s += "\n";
  }
  return s;
}

TfFile parse_tf_csv(const std::string& text, const std::string& source) {
  const Table t = parse_table(text, source, kTfSchema, kTfHeader);
  TfFile out;
  out.prov = provenance_of(t, source);
  if (auto it = t.meta.find("segment_duration_s"); it != t.meta.end()) {
    out.tf.segment_duration = cell_double(it->second, source + ": segment_duration_s");
  }
  out.tf.seed = out.prov.seed.value_or(0);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& c = t.rows[i];
    const std::string where = source + ":" + std::to_string(t.row_lines[i]);
    TFPoint p;
    p.frequency = hz_to_rad(cell_double(c[0], where + " frequency_hz"));
    p.g_hat = cplx(cell_double(c[1], where + " re_g"), cell_double(c[2], where + " im_g"));
    p.coherence = cell_double(c[3], where + " coherence");
    p.n_avg = cell_int(c[4], where + " n_avg");
    p.sigma_g = cell_double(c[5], where + " sigma_g");
    if (!(p.frequency > 0)) throw SchemaError(where + ": frequency_hz must be > 0");
    if (!(p.coherence >= 0 && p.coherence <= 1)) throw SchemaError(where + ": coherence must lie in [0, 1]");
    if (!(p.sigma_g >= 0)) throw SchemaError(where + ": sigma_g must be >= 0");
    out.tf.points.push_back(p);
  }
  try {
    out.tf.validate();
  } catch (const DomainError& e) {
    throw SchemaError(source + ": " + e.what());
  }
  return out;
}

PsdFile parse_psd_csv(const std::string& text, const std::string& source) {
  const Table t = parse_table(text, source, kPsdSchema, kPsdHeader);
  PsdFile out;
  out.prov = provenance_of(t, source);
  out.psd.seed = out.prov.seed.value_or(0);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& c = t.rows[i];
    const std::string where = source + ":" + std::to_string(t.row_lines[i]);
    out.psd.grid.push_back(hz_to_rad(cell_double(c[0], where + " frequency_hz")));
    out.psd.s_hat.push_back(cell_double(c[1], where + " psd_m2_per_hz"));
    const int n = cell_int(c[2], where + " n_avg");
    if (i == 0) {
      out.psd.n_avg = n;
    } else if (n != out.psd.n_avg) {
      throw SchemaError(where + ": n_avg must be the same in every row");
    }
  }
  try {
    out.psd.validate();
  } catch (const DomainError& e) {
    throw SchemaError(source + ": " + e.what());
  }
  return out;
}

TfFile read_tf_csv(const std::string& path) { return parse_tf_csv(read_file(path), path); }
PsdFile read_psd_csv(const std::string& path) { return parse_psd_csv(read_file(path), path); }

using nlohmann::ordered_json;

ordered_json fit_result_json(const FitResult& fr) {
  ordered_json j;
  j["names"] = fr.names;
  ordered_json vals = ordered_json::object();
  ordered_json sig = ordered_json::object();
  for (std::size_t i = 0; i < fr.names.size(); ++i) {
    vals[fr.names[i]] = fr.params[static_cast<Eigen::Index>(i)];
    sig[fr.names[i]] = fr.sigma(fr.names[i]);
  }
  j["values"] = vals;
  j["sigmas"] = sig;
  ordered_json cov = ordered_json::array();
  for (Eigen::Index r = 0; r < fr.covariance.rows(); ++r) {
    for (Eigen::Index c = 0; c < fr.covariance.cols(); ++c) cov.push_back(format_double(fr.covariance(r, c)));
  }
  j["covariance_row_major"] = cov;
  j["chi2"] = fr.chi2;
  j["dof"] = fr.dof;
  j["chi2_per_dof"] = fr.chi2_per_dof;
  j["n_points"] = fr.n_points;
  j["iterations"] = fr.iterations;
  return j;
}

FitResult fit_result_from_json(const ordered_json& j) {
  FitResult fr;
  try {
    fr.names = j.at("names").get<std::vector<std::string>>();
    const auto n = static_cast<Eigen::Index>(fr.names.size());
    fr.params.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) fr.params[i] = j.at("values").at(fr.names[static_cast<std::size_t>(i)]).get<double>();
    const auto& cov = j.at("covariance_row_major");
    if (static_cast<Eigen::Index>(cov.size()) != n * n) throw SchemaError("fit json: covariance size mismatch");
    fr.covariance.resize(n, n);
    for (Eigen::Index k = 0; k < n * n; ++k) {
      fr.covariance(k / n, k % n) = cell_double(cov[static_cast<std::size_t>(k)].get<std::string>(), "fit json covariance");
    }
    fr.chi2 = j.at("chi2").get<double>();
    fr.dof = j.at("dof").get<int>();
    fr.chi2_per_dof = j.at("chi2_per_dof").get<double>();
    fr.n_points = j.at("n_points").get<int>();
    fr.iterations = j.value("iterations", 0);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("fit json: ") + e.what());
  }
  return fr;
}

ordered_json occupancy_json(const OccupancyReport& r) {
  ordered_json j;
  j["n_eff"] = r.n_eff;
  j["sigma_n"] = r.sigma_n;
  j["relative_uncertainty"] = r.n_eff > 0 ? r.sigma_n / r.n_eff : 0.0;
  j["temperature_eff_k"] = r.temperature_eff;
  j["band_hz"] = {rad_to_hz(r.band_lo), rad_to_hz(r.band_hi)};
  ordered_json d = ordered_json::object();
  for (const auto& [k, v] : r.decomposition) d[k] = v;
  j["decomposition"] = d;
  return j;
}

ordered_json budget_json(const BudgetSummary& s, const Provenance& prov) {
  ordered_json j;
  j["schema"] = std::string(kBudgetSchema) + "/" + std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor);
  j["config_hash"] = prov.config_hash;
  j["omega_eff_rad_s"] = s.omega_eff;
  j["f_eff_hz"] = rad_to_hz(s.omega_eff);
  j["gamma_fb_rad_s"] = s.gamma_fb;
  j["gamma_eff_rad_s"] = s.gamma_eff;
  j["q_eff"] = s.q_eff;
  j["delay_s"] = s.delay;
  j["n_th_omega0"] = s.n_th_omega0;
  j["n_th_omega_eff"] = s.n_th_eff;
  j["n_ba"] = s.n_ba;
  j["n_imp"] = s.n_imp;
  j["n_fb"] = s.n_fb;
  j["n_fb_ex"] = s.n_fb_ex;
  j["n_fb_ex_in_n_eff"] = s.n_fb_ex_steady;
  j["decoherence_rate_rad_s"] = s.decoherence_rate;
  j["decoherence_rate_hz"] = rad_to_hz(s.decoherence_rate);
  j["n_eff_white_approx"] = s.n_eff_white;
  j["gamma_opt_rad_s"] = s.gamma_opt;
  j["occupancy"] = occupancy_json(s.occupancy);
  ordered_json st;
  st["phase_margin_deg"] = s.stability.phase_margin;
  st["gain_margin"] = nullable(s.stability.gain_margin);
  st["gain_margin_db"] = nullable(s.stability.gain_margin_db);
  std::vector<double> ug, pc;
  for (double w : s.stability.unity_gain_frequencies) ug.push_back(rad_to_hz(w));
  for (double w : s.stability.phase_crossover_frequencies) pc.push_back(rad_to_hz(w));
  st["unity_gain_hz"] = ug;
  st["phase_crossover_hz"] = pc;
  st["unstable"] = s.stability.unstable;
  j["stability"] = st;
  j["warnings"] = s.warnings;
  return j;
}

ordered_json fit_output_json(const FitOutput& f, const Provenance& prov) {
  ordered_json j;
  j["schema"] = "coldamp.fit/" + std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor);
  j["config_hash"] = prov.config_hash;
  if (prov.seed) j["seed"] = *prov.seed;
  j["transfer_function"] = fit_result_json(f.tf);
  j["spectrum"] = fit_result_json(f.spectrum);
  j["occupancy"] = occupancy_json(f.occupancy);
  return j;
}

ordered_json sweep_json(const std::vector<SweepRow>& rows, const Provenance& prov) {
  ordered_json j;
  j["schema"] = std::string(kSweepSchema) + "/" + std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor);
  j["config_hash"] = prov.config_hash;
  if (prov.seed) j["seed"] = *prov.seed;
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json o;
    o["index"] = r.index;
    o["target_q"] = r.target_q;
    o["ok"] = r.ok;
    if (r.ok) {
      o["fitted_q"] = r.fitted_q;
      o["sigma_q"] = r.sigma_q;
      o["n_eff"] = r.n_eff;
      o["sigma_n"] = r.sigma_n;
    } else {
      o["error"] = r.error;
    }
    o["model_q"] = r.model_q;
    o["model_n_eff"] = r.model_n_eff;
    arr.push_back(o);
  }
  j["settings"] = arr;
  return j;
}

}  // namespace coldamp
