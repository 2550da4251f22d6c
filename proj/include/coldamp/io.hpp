#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "coldamp/pipeline.hpp"

namespace coldamp {

inline constexpr int kSchemaMajor = 1;
inline constexpr int kSchemaMinor = 0;

struct Provenance {
  std::string config_hash;
  std::optional<std::uint64_t> seed;
};

/// "%.17g"; round-trips every double.
std::string format_double(double v);

/// Writes text, refusing to replace an existing file unless overwrite is set.
void write_file(const std::string& path, const std::string& content, bool overwrite);
std::string read_file(const std::string& path);

std::string tf_csv(const TFMeasurement& tf, const Provenance& prov);
std::string psd_csv(const std::vector<double>& grid, const std::vector<double>& values, int n_avg,
                    const Provenance& prov);
std::string psd_csv(const SpectrumMeasurement& s, const Provenance& prov);
std::string budget_csv(const BudgetOutput& b, const Provenance& prov);
std::string sweep_csv(const std::vector<SweepRow>& rows, const Provenance& prov);

struct TfFile {
  TFMeasurement tf;
  Provenance prov;
};
struct PsdFile {
  SpectrumMeasurement psd;
  Provenance prov;
};

/// Readers accept any minor version of a known major version and throw SchemaError otherwise.
TfFile parse_tf_csv(const std::string& text, const std::string& source = "<tf>");
PsdFile parse_psd_csv(const std::string& text, const std::string& source = "<psd>");
TfFile read_tf_csv(const std::string& path);
PsdFile read_psd_csv(const std::string& path);

nlohmann::ordered_json fit_result_json(const FitResult& fr);
nlohmann::ordered_json occupancy_json(const OccupancyReport& r);
nlohmann::ordered_json budget_json(const BudgetSummary& s, const Provenance& prov);
nlohmann::ordered_json fit_output_json(const FitOutput& f, const Provenance& prov);
nlohmann::ordered_json sweep_json(const std::vector<SweepRow>& rows, const Provenance& prov);

/// Covariance entries are decimal strings; parameters and the rest are plain numbers.
FitResult fit_result_from_json(const nlohmann::ordered_json& j);

}  // namespace coldamp
