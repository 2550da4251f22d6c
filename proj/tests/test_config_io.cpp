#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <string>

#include "coldamp/config.hpp"
#include "coldamp/error.hpp"
#include "coldamp/io.hpp"
#include "oracles.hpp"

using namespace coldamp;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config(text, "t.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TFMeasurement sample_tf() {
  TFMeasurement tf;
  tf.segment_duration = 2.5;
  tf.seed = 7;
  for (int i = 0; i < 5; ++i) {
    TFPoint p;
    p.frequency = 2 * oracle::kPi * (100.0 + 1.0 / 3.0 * i);
    p.g_hat = {std::sqrt(2.0) * (i + 1), -1.0 / 7.0 * i};
    p.coherence = 0.9 - 0.01 * i;
    p.n_avg = 64;
    p.sigma_g = 1e-3 / 3.0;
    tf.points.push_back(p);
  }
  return tf;
}

}  // namespace

TEST_CASE("empty config gives the built-in defaults") {
  const auto a = parse_config("");
  const auto b = ExperimentConfig::defaults();
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
}

TEST_CASE("the shipped default file restates the defaults") {
  const auto cfg = load_config(std::string(COLDAMP_SOURCE_DIR) + "/configs/default.ini");
  CHECK(cfg.hash() == ExperimentConfig::defaults().hash());
}

TEST_CASE("hash ignores comments, spacing and the seed but tracks every value") {
  const auto base = parse_config("[loop]\ntarget_q = 8\n");
  CHECK(parse_config("# c\n[loop]   ; x\n  target_q=8   # eight\n\n").hash() == base.hash());
  CHECK(parse_config("[loop]\ntarget_q = 8\n[measurement]\nseed = 99\n").hash() == base.hash());
  CHECK(parse_config("[loop]\ntarget_q = 8.0000001\n").hash() != base.hash());
  CHECK(parse_config("[loop]\ntarget_q = 8\n[measurement]\ntf_n_avg = 65\n").hash() != base.hash());
  // FNV-1a 64 reference value for the canonical text.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : base.canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  CHECK(base.hash() == buf);
}

TEST_CASE("values are applied") {
  const auto c = parse_config(
      "[oscillator]\nf0_hz = 0.5\nmass_kg = 2\n[loop]\ndamping_hz = 3\ndelay_s = 2e-5\n"
      "[backaction]\ncavity_power_w = 1000\n[measurement]\ncoherence_knots_hz = 100, 200\ncoherence = 0.5, 0.9\n");
  CHECK(c.oscillator.omega0 == doctest::Approx(2 * oracle::kPi * 0.5).epsilon(1e-15));
  CHECK(c.oscillator.mass == 2.0);
  CHECK(c.loop.damping_hz == 3.0);
  CHECK(c.loop.target_q <= 0.0);
  CHECK(c.loop_config().filter.gamma_fb == doctest::Approx(2 * oracle::kPi * 3.0).epsilon(1e-15));
  CHECK(c.loop_config().delay == 2e-5);
  CHECK(c.backaction.cavity_power == 1000.0);
  const auto prof = c.coherence_profile();
  CHECK(prof.at(2 * oracle::kPi * 150.0) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("errors name the source, line and key") {
  CHECK(message_of("[loop]\n\ntarget_q = abc\n").rfind("t.ini:3: loop.target_q:", 0) == 0);
  CHECK(message_of("[bogus]\n").rfind("t.ini:1:", 0) == 0);
  CHECK(message_of("[loop]\nnot_a_key = 1\n").find("t.ini:2: loop.not_a_key") == 0);
  CHECK(message_of("target_q = 1\n").rfind("t.ini:1:", 0) == 0);
  CHECK(message_of("[loop]\ntarget_q = 1\ntarget_q = 2\n").find("duplicate") != std::string::npos);
  CHECK(message_of("[loop]\ntarget_q\n").rfind("t.ini:2:", 0) == 0);
  // Range checks after parsing still point at the offending line.
  CHECK(message_of("[oscillator]\n\n\nmass_kg = -1\n").rfind("t.ini:4:", 0) == 0);
  CHECK_THROWS_AS(parse_config("[measurement]\ncoherence = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[measurement]\ntf_n_avg = 0\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/x.ini"), IoError);
}

TEST_CASE("mutually exclusive keys") {
  const auto m = message_of("[loop]\ntarget_q = 3\ndamping_hz = 2\n");
  CHECK(m.rfind("t.ini:3:", 0) == 0);
  CHECK(m.find("mutually exclusive") != std::string::npos);
  CHECK_THROWS_AS(parse_config("[loop]\ndelay_q = 3\ndelay_s = 1e-5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[backaction]\ncavity_power_w = 3\ntarget_n_ba = 1e10\n"), ConfigError);
}

TEST_CASE("angular-frequency keys are rejected") {
  const auto m = message_of("[oscillator]\nomega0_rad_s = 4\n");
  CHECK(m.rfind("t.ini:2: oscillator.omega0_rad_s:", 0) == 0);
  CHECK(m.find("Hz") != std::string::npos);
  CHECK_THROWS_AS(parse_config("[loop]\ntrap_rad_s = 900\n"), ConfigError);
}

TEST_CASE("ConfigError maps to exit code 2, SchemaError to 3, IoError to 5") {
  CHECK(ConfigError("x").exit_code() == 2);
  CHECK(SchemaError("x").exit_code() == 3);
  CHECK(FitError("x").exit_code() == 4);
  CHECK(IoError("x").exit_code() == 5);
}

TEST_CASE("format_double round-trips") {
  oracle::Gen g(31);
  for (int i = 0; i < 2000; ++i) {
    const double v = (g.uniform(0, 1) < 0.5 ? -1 : 1) * g.log_uniform(1e-300, 1e300);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(std::stod(format_double(0.1)) == 0.1);
  const double tiny = std::numeric_limits<double>::denorm_min();
  CHECK(std::strtod(format_double(tiny).c_str(), nullptr) == tiny);
}

TEST_CASE("TF CSV round-trips exactly") {
  const auto tf = sample_tf();
  const std::string text = tf_csv(tf, {"0123456789abcdef", 7});
  CHECK(text.rfind("# schema: coldamp.tf/1.0\n", 0) == 0);
  const auto back = parse_tf_csv(text);
  CHECK(back.prov.config_hash == "0123456789abcdef");
  REQUIRE(back.prov.seed.has_value());
  CHECK(*back.prov.seed == 7);
  CHECK(back.tf.segment_duration == 2.5);
  REQUIRE(back.tf.points.size() == tf.points.size());
  for (std::size_t i = 0; i < tf.points.size(); ++i) {
    // Frequencies pass through Hz, so allow one rounding in each direction.
    CHECK(oracle::rel(back.tf.points[i].frequency, tf.points[i].frequency) < 4e-16);
    CHECK(back.tf.points[i].g_hat == tf.points[i].g_hat);
    CHECK(back.tf.points[i].coherence == tf.points[i].coherence);
    CHECK(back.tf.points[i].n_avg == 64);
    CHECK(back.tf.points[i].sigma_g == tf.points[i].sigma_g);
  }
  // Writing what was read gives the same bytes.
  CHECK(tf_csv(back.tf, back.prov) == text);
}

TEST_CASE("PSD CSV round-trips exactly") {
  SpectrumMeasurement s;
  s.n_avg = 300;
  for (int i = 0; i < 7; ++i) {
    s.grid.push_back(2 * oracle::kPi * (100 + 0.25 * i));
    s.s_hat.push_back(1e-38 * (1 + i / 3.0));
  }
  const std::string text = psd_csv(s, {"fedcba9876543210", std::nullopt});
  const auto back = parse_psd_csv(text);
  CHECK(!back.prov.seed.has_value());
  CHECK(back.psd.n_avg == 300);
  REQUIRE(back.psd.s_hat.size() == 7);
  for (int i = 0; i < 7; ++i) CHECK(back.psd.s_hat[i] == s.s_hat[i]);
  CHECK(psd_csv(back.psd, back.prov) == text);
}

TEST_CASE("readers reject bad schema and malformed tables") {
  const std::string good = tf_csv(sample_tf(), {"0123456789abcdef", 1});
  auto replace = [](std::string s, const std::string& a, const std::string& b) {
    s.replace(s.find(a), a.size(), b);
    return s;
  };
  // Minor version bumps are accepted, major ones are not.
  CHECK_NOTHROW(parse_tf_csv(replace(good, "coldamp.tf/1.0", "coldamp.tf/1.7")));
  CHECK_THROWS_AS(parse_tf_csv(replace(good, "coldamp.tf/1.0", "coldamp.tf/2.0")), SchemaError);
  CHECK_THROWS_AS(parse_tf_csv(replace(good, "coldamp.tf/1.0", "coldamp.psd/1.0")), SchemaError);
  CHECK_THROWS_AS(parse_tf_csv(replace(good, "# config_hash: 0123456789abcdef\n", "")), SchemaError);
  CHECK_THROWS_AS(parse_tf_csv(replace(good, "re_g", "real_g")), SchemaError);
  CHECK_THROWS_AS(parse_tf_csv(good + "1,2,3\n"), SchemaError);
  CHECK_THROWS_AS(parse_tf_csv(good + "1,2,3,0.5,4,x\n"), SchemaError);
  CHECK_THROWS_AS(parse_tf_csv(good + "1,2,3,1.5,4,0.1\n"), SchemaError);
  CHECK_THROWS_AS(parse_tf_csv(good + "1,2,3,0.5,2.5,0.1\n"), SchemaError);
  CHECK_THROWS_AS(parse_tf_csv(""), SchemaError);
  try {
    parse_tf_csv(good + "1,2,3\n", "m.csv");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).rfind("m.csv:", 0) == 0);
  }
  SpectrumMeasurement s{{1000.0, 1001.0}, {1e-38, 1e-38}, 10, 0};
  const std::string psd = psd_csv(s, {"0123456789abcdef", 1});
  CHECK_THROWS_AS(parse_psd_csv(psd + "160,1e-38,11\n"), SchemaError);
}

TEST_CASE("fit result JSON keeps every covariance bit") {
  FitResult fr;
  fr.names = kResonatorNames;
  fr.params.resize(5);
  fr.params << 2e4, 0.3, 1e-3, 2 * oracle::kPi * 148, 20.0 / 3.0;
  fr.covariance = Eigen::MatrixXd::Zero(5, 5);
  oracle::Gen g(32);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c <= r; ++c) fr.covariance(r, c) = fr.covariance(c, r) = g.normal() * 1e-7;
    fr.covariance(r, r) = g.log_uniform(1e-12, 1e2);
  }
  fr.chi2 = 198.123456789;
  fr.dof = 195;
  fr.chi2_per_dof = fr.chi2 / fr.dof;
  fr.n_points = 200;
  fr.iterations = 9;
  const auto j = fit_result_json(fr);
  CHECK(j.at("covariance_row_major").at(0).is_string());
  const auto back = fit_result_from_json(nlohmann::ordered_json::parse(j.dump()));
  CHECK(back.names == fr.names);
  CHECK(back.params == fr.params);
  CHECK(back.covariance == fr.covariance);
  CHECK(back.chi2 == fr.chi2);
  CHECK(back.dof == fr.dof);
  CHECK(back.iterations == 9);
  auto broken = j;
  broken["covariance_row_major"].erase(0);
  CHECK_THROWS_AS(fit_result_from_json(broken), SchemaError);
  auto missing = j;
  missing.erase("chi2");
  CHECK_THROWS_AS(fit_result_from_json(missing), SchemaError);
}

TEST_CASE("write_file refuses to overwrite unless asked") {
  const auto dir = std::filesystem::temp_directory_path() / "coldamp_test_io";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "out.txt").string();
  std::filesystem::remove(path);
  write_file(path, "one", false);
  CHECK(read_file(path) == "one");
  CHECK_THROWS_AS(write_file(path, "two", false), IoError);
  CHECK(read_file(path) == "one");
  write_file(path, "two", true);
  CHECK(read_file(path) == "two");
  CHECK_THROWS_AS(read_file((dir / "missing.txt").string()), IoError);
  CHECK_THROWS_AS(write_file((dir / "no/such/dir.txt").string(), "x", true), IoError);
  std::filesystem::remove_all(dir);
}
