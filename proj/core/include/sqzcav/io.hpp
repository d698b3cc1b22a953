#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqzcav/cavity.hpp"
#include "sqzcav/estimator.hpp"
#include "sqzcav/synth.hpp"
#include "sqzcav/two_photon.hpp"

namespace sqzcav::io {

using Header = std::vector<std::pair<std::string, std::string>>;

struct TraceFile {
    Header header;
    QuadratureSpectrum spectrum;  // linear units
};

/// Trace format: '#'-prefixed "key: value" header lines (an optional "rows: N"
/// is checked against the data), one column line
/// (frequency_hz,v1_db,v2_db[,sigma1_db,sigma2_db]; either variance column
/// may be absent), then comma-separated rows in dB relative to shot noise.
std::string format_trace(const QuadratureSpectrum& spectrum, const Header& header);
TraceFile parse_trace(const std::string& text, const std::string& source = "<memory>");

void save_trace(const std::filesystem::path& path, const QuadratureSpectrum& spectrum,
                const Header& header = {});
TraceFile read_trace_file(const std::filesystem::path& path);
QuadratureSpectrum load_trace(const std::filesystem::path& path);

/// Linear sigma from a dB sigma by local linearization (valid for small sigma_db).
double sigma_db_to_linear(double value_linear, double sigma_db) noexcept;
double sigma_linear_to_db(double value_linear, double sigma_linear) noexcept;

/// Writes to "<path>.tmp" then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

struct GridConfig {
    double start_hz = 5e6;
    double stop_hz = 20e6;
    std::size_t points = 401;

    std::vector<double> frequencies() const;
};

struct OutputConfig {
    std::string dir = "out";
    std::string trace = "trace.csv";
    std::string model = "model.csv";
    std::string report = "fit_report.json";
    std::string residuals = "residuals.csv";
};

struct RunConfig {
    RingCavity cavity;
    Detuning detuning;
    InputSqueezingModel squeezing;
    DetectionModel detection;
    MeasurementConfig measurement;
    GridConfig grid;
    FitSpec fit;
    OutputConfig output;
};

/// Cavity and detuning from the reflection fit in the test run, 1064 nm
/// carrier, 0.9 x 0.85 detection, 100 kHz RBW with 100 averages.
RunConfig default_config();

/// Parses and validates. Missing fields take default_config() values.
/// Throws Error(config) whose message starts with the offending field path.
RunConfig parse_config(const nlohmann::json& document);
RunConfig load_config(const std::filesystem::path& path);

/// Fully resolved configuration, defaults expanded.
nlohmann::ordered_json to_json(const RunConfig& config);

/// Rebuilds the fit spec's fixed values and context from the model blocks.
/// parse_config calls this; callers that edit the model blocks call it again.
void sync_fit_spec(RunConfig& config, const nlohmann::json* fit_block = nullptr);

nlohmann::ordered_json fit_report(const FitResult& result, const FitSpec& spec);
std::string format_residuals(const FitResult& result);
std::string format_profile(const std::vector<ProfilePoint>& profile, Param param);

}  // namespace sqzcav::io
