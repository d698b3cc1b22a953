#include "sqzcav/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sqzcav/error.hpp"

namespace sqzcav::io {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kDbPerNeper = 10.0 / 2.302585092994045684;  // 10 / ln 10

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> parts;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, delim)) parts.push_back(trim(field));
    if (!line.empty() && line.back() == delim) parts.emplace_back();
    return parts;
}

[[noreturn]] void format_error(const std::string& source, std::size_t line, const std::string& what) {
    throw Error(ErrorKind::trace_format, source + ":" + std::to_string(line) + ": " + what);
}

// ---- config reading -------------------------------------------------------

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::config, path + ": " + what);
}

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

const json* child(const json& obj, const std::string& key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double number_or(const json& obj, const std::string& prefix, const std::string& key, double fallback) {
    const json* v = child(obj, key);
    if (!v) return fallback;
    if (v->is_null()) return std::numeric_limits<double>::infinity();
    if (!v->is_number()) config_error(join(prefix, key), "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) config_error(join(prefix, key), "must be finite");
    return x;
}

const json& object_or_empty(const json& obj, const std::string& key, const std::string& prefix) {
    static const json empty = json::object();
    const json* v = child(obj, key);
    if (!v || v->is_null()) return empty;
    if (!v->is_object()) config_error(join(prefix, key), "expected an object");
    return *v;
}

void reject_unknown(const json& obj, const std::string& prefix,
                    std::initializer_list<std::string_view> known) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (auto k : known) ok = ok || k == key;
        if (!ok) config_error(join(prefix, key), "unknown field");
    }
}

// Literals built in code are signed even when non-negative.
bool non_negative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

template <typename Fn>
auto revalidate(const std::string& path, Fn&& make) {
    try {
        return make();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::config) throw;
        config_error(path, e.what());
    }
}

std::string_view squeezing_kind_name(InputSqueezingModel::Kind k) {
    switch (k) {
        case InputSqueezingModel::Kind::constant: return "constant";
        case InputSqueezingModel::Kind::opo_lorentzian: return "opo_lorentzian";
        case InputSqueezingModel::Kind::tabulated: return "tabulated";
    }
    return "constant";
}

std::string_view quadrature_name(QuadratureSelection q) {
    switch (q) {
        case QuadratureSelection::first: return "1";
        case QuadratureSelection::second: return "2";
        case QuadratureSelection::both: return "both";
    }
    return "both";
}

json bound_value(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

// ---- traces -----------------------------------------------------------------

double sigma_db_to_linear(double value_linear, double sigma_db) noexcept {
    return value_linear * sigma_db / kDbPerNeper;
}

double sigma_linear_to_db(double value_linear, double sigma_linear) noexcept {
    return kDbPerNeper * sigma_linear / value_linear;
}

std::string format_trace(const QuadratureSpectrum& spectrum, const Header& header) {
    spectrum.validate();
    std::ostringstream out;
    out << "# sqzcav trace v1\n";
    out << "# units: dB relative to shot noise\n";
    out << "# rows: " << spectrum.size() << "\n";
    for (const auto& [key, value] : header) out << "# " << key << ": " << value << "\n";

    const bool has1 = !spectrum.v1.empty();
    const bool has2 = !spectrum.v2.empty();
    const bool sig1 = has1 && !spectrum.sigma1.empty();
    const bool sig2 = has2 && !spectrum.sigma2.empty();
    out << "frequency_hz";
    if (has1) out << ",v1_db";
    if (has2) out << ",v2_db";
    if (sig1) out << ",sigma1_db";
    if (sig2) out << ",sigma2_db";
    out << "\n";
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        out << format_number(spectrum.freqs_hz[i]);
        if (has1) out << "," << format_number(to_db(spectrum.v1[i]));
        if (has2) out << "," << format_number(to_db(spectrum.v2[i]));
        if (sig1) out << "," << format_number(sigma_linear_to_db(spectrum.v1[i], spectrum.sigma1[i]));
        if (sig2) out << "," << format_number(sigma_linear_to_db(spectrum.v2[i], spectrum.sigma2[i]));
        out << "\n";
    }
    return out.str();
}

TraceFile parse_trace(const std::string& text, const std::string& source) {
    TraceFile file;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    std::vector<std::string> columns;
    int col_v1 = -1, col_v2 = -1, col_s1 = -1, col_s2 = -1;
    std::size_t previous_line = 0;
    std::optional<std::size_t> expected_rows;

    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const std::string body = trim(std::string_view(line).substr(1));
            const auto colon = body.find(':');
            if (colon != std::string::npos) {
                const std::string key = trim(std::string_view(body).substr(0, colon));
                const std::string value = trim(std::string_view(body).substr(colon + 1));
                if (key == "rows") {
                    std::size_t n = 0;
                    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
                    if (ec != std::errc() || ptr != value.data() + value.size()) {
                        format_error(source, line_no, "malformed rows count '" + value + "'");
                    }
                    expected_rows = n;
                } else if (key != "units") {
                    file.header.emplace_back(key, value);
                }
            }
            continue;
        }
        if (columns.empty()) {
            columns = split(line, ',');
            if (columns.empty() || columns[0] != "frequency_hz") {
                format_error(source, line_no, "first column must be frequency_hz");
            }
            for (std::size_t c = 1; c < columns.size(); ++c) {
                const auto& name = columns[c];
                int* slot = name == "v1_db" ? &col_v1
                          : name == "v2_db" ? &col_v2
                          : name == "sigma1_db" ? &col_s1
                          : name == "sigma2_db" ? &col_s2 : nullptr;
                if (!slot) format_error(source, line_no, "unknown column '" + name + "'");
                if (*slot >= 0) format_error(source, line_no, "duplicate column '" + name + "'");
                *slot = static_cast<int>(c);
            }
            if (col_v1 < 0 && col_v2 < 0) {
                format_error(source, line_no, "missing required column v1_db or v2_db");
            }
            if ((col_s1 >= 0 && col_v1 < 0) || (col_s2 >= 0 && col_v2 < 0)) {
                format_error(source, line_no, "sigma column without its variance column");
            }
            continue;
        }

        const auto fields = split(line, ',');
        if (fields.size() != columns.size()) {
            format_error(source, line_no,
                         "expected " + std::to_string(columns.size()) + " fields, found " +
                             std::to_string(fields.size()));
        }
        std::vector<double> values(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto& f = fields[c];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[c]);
            if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(values[c])) {
                format_error(source, line_no, "malformed value '" + f + "' in column " + columns[c]);
            }
        }
        auto& s = file.spectrum;
        if (!s.freqs_hz.empty() && !(values[0] > s.freqs_hz.back())) {
            format_error(source, line_no,
                         "frequencies not strictly ascending (previous row at line " +
                             std::to_string(previous_line) + ")");
        }
        previous_line = line_no;
        s.freqs_hz.push_back(values[0]);
        if (col_v1 >= 0) s.v1.push_back(from_db(values[col_v1]));
        if (col_v2 >= 0) s.v2.push_back(from_db(values[col_v2]));
        if (col_s1 >= 0) {
            if (values[col_s1] < 0.0) format_error(source, line_no, "negative sigma1_db");
            s.sigma1.push_back(sigma_db_to_linear(s.v1.back(), values[col_s1]));
        }
        if (col_s2 >= 0) {
            if (values[col_s2] < 0.0) format_error(source, line_no, "negative sigma2_db");
            s.sigma2.push_back(sigma_db_to_linear(s.v2.back(), values[col_s2]));
        }
    }
    if (columns.empty()) format_error(source, line_no, "missing column header line");
    if (file.spectrum.freqs_hz.empty()) format_error(source, line_no, "no data rows");
    if (expected_rows && *expected_rows != file.spectrum.size()) {
        format_error(source, line_no,
                     "truncated or padded file: header declares " + std::to_string(*expected_rows) +
                         " rows, found " + std::to_string(file.spectrum.size()));
    }
    return file;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw Error(ErrorKind::io, "failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorKind::io, "cannot rename onto " + path.string());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void save_trace(const std::filesystem::path& path, const QuadratureSpectrum& spectrum,
                const Header& header) {
    write_file_atomic(path, format_trace(spectrum, header));
}

TraceFile read_trace_file(const std::filesystem::path& path) {
    return parse_trace(read_file(path), path.string());
}

QuadratureSpectrum load_trace(const std::filesystem::path& path) {
    return read_trace_file(path).spectrum;
}

// ---- configuration --------------------------------------------------------

std::vector<double> GridConfig::frequencies() const { return linear_grid(start_hz, stop_hz, points); }

RunConfig default_config() {
    RunConfig config{
        RingCavity::from_amplitudes(0.99783, 0.99628, 713e6, kSpeedOfLight / 1064e-9),
        Detuning{-11.098e6},
        InputSqueezingModel::opo_lorentzian(0.41, 66.2e6, 0.7),
        DetectionModel::from_coupled(0.9 * 0.85, 0.0),
        MeasurementConfig{},
        GridConfig{},
        FitSpec{},
        OutputConfig{},
    };
    config.measurement.seed = 1;
    config.fit.float_params = {Param::sqrt_r1, Param::sqrt_r1r2r3, Param::omega_d_hz,
                               Param::pump_x, Param::escape_purity};
    sync_fit_spec(config);
    return config;
}

void sync_fit_spec(RunConfig& config, const json* fit_block) {
    FitSpec& spec = config.fit;
    const bool power_r1 = std::find(spec.float_params.begin(), spec.float_params.end(),
                                    Param::r1) != spec.float_params.end();
    const bool power_prod = std::find(spec.float_params.begin(), spec.float_params.end(),
                                      Param::r1r2r3) != spec.float_params.end();
    const RingCavity& cav = config.cavity;

    ParamValues model;
    if (power_r1) model[Param::r1] = cav.r1_sq();
    else model[Param::sqrt_r1] = cav.sqrt_r1();
    if (power_prod) model[Param::r1r2r3] = cav.r1_sq() * cav.r2r3_sq();
    else model[Param::sqrt_r1r2r3] = cav.round_trip_amplitude();
    model[Param::omega_d_hz] = config.detuning.omega_d_hz;
    model[Param::fsr_hz] = cav.fsr_hz();
    model[Param::eta_c] = config.detection.eta_c();
    if (config.squeezing.kind() == InputSqueezingModel::Kind::opo_lorentzian) {
        model[Param::pump_x] = config.squeezing.pump_x();
        model[Param::opo_linewidth_hz] = config.squeezing.opo_linewidth_hz();
        model[Param::escape_purity] = config.squeezing.escape_purity();
    }

    ParamValues guesses;
    if (fit_block) {
        const json& g = object_or_empty(*fit_block, "initial_guess", "fit");
        for (const auto& [key, value] : g.items()) {
            const auto p = parse_param(key);
            if (!p) config_error("fit.initial_guess." + key, "unknown parameter");
            guesses[*p] = number_or(g, "fit.initial_guess", key, 0.0);
        }
    } else {
        for (Param p : spec.float_params) {
            if (auto it = spec.initial_guess.find(p); it != spec.initial_guess.end()) {
                guesses[p] = it->second;
            }
        }
    }

    spec.fixed_params.clear();
    spec.initial_guess.clear();
    for (const auto& [p, value] : model) {
        const bool floated =
            std::find(spec.float_params.begin(), spec.float_params.end(), p) != spec.float_params.end();
        if (floated) {
            const auto it = guesses.find(p);
            spec.initial_guess[p] = it != guesses.end() ? it->second : value;
        } else {
            spec.fixed_params[p] = value;
        }
    }
    spec.context.carrier_hz = cav.carrier_hz();
    spec.context.input_mirror_loss = std::max(0.0, cav.input_mirror_loss());
    spec.context.eta_m = config.detection.eta_m();
    spec.context.squeezing = config.squeezing;
    spec.context.rbw_hz = config.measurement.rbw_hz;
}

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) config_error("<root>", "expected a JSON object");
    reject_unknown(doc, "", {"cavity", "detuning", "squeezing", "detection", "measurement", "grid",
                             "fit", "output"});
    RunConfig config = default_config();

    {
        const std::string P = "cavity";
        const json& c = object_or_empty(doc, "cavity", "");
        reject_unknown(c, P, {"r1", "sqrt_r1", "r2r3", "sqrt_r1r2r3", "t1", "fsr_hz", "carrier_hz",
                              "wavelength_m"});
        if (child(c, "r1") && child(c, "sqrt_r1")) config_error(P, "give r1 or sqrt_r1, not both");
        if (child(c, "r2r3") && child(c, "sqrt_r1r2r3")) {
            config_error(P, "give r2r3 or sqrt_r1r2r3, not both");
        }
        if (child(c, "carrier_hz") && child(c, "wavelength_m")) {
            config_error(P, "give carrier_hz or wavelength_m, not both");
        }
        const RingCavity& d = config.cavity;
        const double sqrt_r1 = child(c, "r1") ? std::sqrt(std::max(0.0, number_or(c, P, "r1", 0.0)))
                                              : number_or(c, P, "sqrt_r1", d.sqrt_r1());
        const double r1 = sqrt_r1 * sqrt_r1;
        double r2r3 = d.r2r3_sq();
        if (child(c, "r2r3")) {
            r2r3 = number_or(c, P, "r2r3", 0.0);
        } else {
            const double s = number_or(c, P, "sqrt_r1r2r3", d.round_trip_amplitude());
            if (!(r1 > 0.0)) config_error(join(P, "sqrt_r1"), "must be > 0");
            r2r3 = s * s / r1;
        }
        std::optional<double> t1;
        if (child(c, "t1")) t1 = number_or(c, P, "t1", 0.0);
        double carrier = d.carrier_hz();
        if (child(c, "wavelength_m")) {
            const double wl = number_or(c, P, "wavelength_m", 0.0);
            if (!(wl > 0.0)) config_error(join(P, "wavelength_m"), "must be > 0");
            carrier = kSpeedOfLight / wl;
        }
        carrier = number_or(c, P, "carrier_hz", carrier);
        const double fsr = number_or(c, P, "fsr_hz", d.fsr_hz());
        config.cavity = revalidate(P, [&] { return RingCavity(r1, r2r3, fsr, carrier, t1); });
    }
    {
        const json& c = object_or_empty(doc, "detuning", "");
        reject_unknown(c, "detuning", {"omega_d_hz"});
        config.detuning.omega_d_hz = number_or(c, "detuning", "omega_d_hz", config.detuning.omega_d_hz);
    }
    {
        const std::string P = "squeezing";
        const json& c = object_or_empty(doc, "squeezing", "");
        reject_unknown(c, P, {"kind", "pump_x", "opo_linewidth_hz", "escape_purity", "v1", "v2", "table"});
        std::string kind = "opo_lorentzian";
        if (const json* k = child(c, "kind")) {
            if (!k->is_string()) config_error(join(P, "kind"), "expected a string");
            kind = k->get<std::string>();
        }
        const auto& d = config.squeezing;
        if (kind == "opo_lorentzian") {
            const double x = number_or(c, P, "pump_x", d.pump_x());
            const double lw = number_or(c, P, "opo_linewidth_hz", d.opo_linewidth_hz());
            const double eta = number_or(c, P, "escape_purity", d.escape_purity());
            config.squeezing = revalidate(P, [&] { return InputSqueezingModel::opo_lorentzian(x, lw, eta); });
        } else if (kind == "constant") {
            const double v1 = number_or(c, P, "v1", 1.0);
            const double v2 = number_or(c, P, "v2", 1.0);
            config.squeezing = revalidate(P, [&] { return InputSqueezingModel::constant(v1, v2); });
        } else if (kind == "tabulated") {
            const json* t = child(c, "table");
            if (!t || !t->is_array()) config_error(join(P, "table"), "expected an array of [freq_hz, v1, v2]");
            std::vector<SqueezingRow> rows;
            for (std::size_t i = 0; i < t->size(); ++i) {
                const json& row = (*t)[i];
                const std::string rp = join(P, "table[" + std::to_string(i) + "]");
                if (!row.is_array() || row.size() != 3 || !row[0].is_number() || !row[1].is_number() ||
                    !row[2].is_number()) {
                    config_error(rp, "expected [freq_hz, v1, v2]");
                }
                rows.push_back({row[0].get<double>(), row[1].get<double>(), row[2].get<double>()});
            }
            config.squeezing = revalidate(join(P, "table"), [&] { return InputSqueezingModel::tabulated(rows); });
        } else {
            config_error(join(P, "kind"), "must be one of opo_lorentzian, constant, tabulated");
        }
    }
    {
        const std::string P = "detection";
        const json& c = object_or_empty(doc, "detection", "");
        reject_unknown(c, P, {"eta_c", "eta_m", "eta_l"});
        const double eta_c = number_or(c, P, "eta_c", config.detection.eta_c());
        const double eta_m = number_or(c, P, "eta_m", child(c, "eta_c") ? 0.0 : config.detection.eta_m());
        if (child(c, "eta_l")) {
            const double eta_l = number_or(c, P, "eta_l", 0.0);
            config.detection = revalidate(P, [&] { return DetectionModel(eta_c, eta_m, eta_l); });
        } else {
            config.detection = revalidate(P, [&] { return DetectionModel::from_coupled(eta_c, eta_m); });
        }
    }
    {
        const std::string P = "measurement";
        const json& c = object_or_empty(doc, "measurement", "");
        reject_unknown(c, P, {"rbw_hz", "n_averages", "seed", "spur"});
        auto& m = config.measurement;
        m.rbw_hz = number_or(c, P, "rbw_hz", m.rbw_hz);
        m.n_averages = number_or(c, P, "n_averages", m.n_averages);
        if (const json* s = child(c, "seed")) {
            if (!non_negative_integer(*s)) config_error(join(P, "seed"), "expected a non-negative integer");
            m.seed = s->get<std::uint64_t>();
        }
        if (const json* s = child(c, "spur"); s && !s->is_null()) {
            if (!s->is_object()) config_error(join(P, "spur"), "expected an object or null");
            const std::string SP = join(P, "spur");
            reject_unknown(*s, SP, {"center_hz", "height_linear", "width_hz"});
            Spur spur;
            spur.center_hz = number_or(*s, SP, "center_hz", spur.center_hz);
            spur.height_linear = number_or(*s, SP, "height_linear", spur.height_linear);
            spur.width_hz = number_or(*s, SP, "width_hz", spur.width_hz);
            m.spur = spur;
        } else if (s) {
            m.spur.reset();
        }
        revalidate(P, [&] { m.validate(); return 0; });
    }
    {
        const std::string P = "grid";
        const json& c = object_or_empty(doc, "grid", "");
        reject_unknown(c, P, {"start_hz", "stop_hz", "points"});
        auto& g = config.grid;
        g.start_hz = number_or(c, P, "start_hz", g.start_hz);
        g.stop_hz = number_or(c, P, "stop_hz", g.stop_hz);
        if (const json* n = child(c, "points")) {
            if (!non_negative_integer(*n)) config_error(join(P, "points"), "expected a positive integer");
            g.points = n->get<std::size_t>();
        }
        if (!(g.start_hz >= 0.0)) config_error(join(P, "start_hz"), "must be >= 0");
        if (g.points < 2) config_error(join(P, "points"), "need at least 2 points");
        if (!(g.stop_hz > g.start_hz)) config_error(join(P, "stop_hz"), "must exceed start_hz");
    }
    {
        const std::string P = "output";
        const json& c = object_or_empty(doc, "output", "");
        reject_unknown(c, P, {"dir", "trace", "model", "report", "residuals"});
        auto str = [&](const char* key, std::string& target) {
            if (const json* v = child(c, key)) {
                if (!v->is_string()) config_error(join(P, key), "expected a string");
                target = v->get<std::string>();
            }
        };
        str("dir", config.output.dir);
        str("trace", config.output.trace);
        str("model", config.output.model);
        str("report", config.output.report);
        str("residuals", config.output.residuals);
    }
    {
        const std::string P = "fit";
        const json& c = object_or_empty(doc, "fit", "");
        reject_unknown(c, P, {"float", "initial_guess", "bounds", "masks", "quadrature",
                              "max_iterations", "try_both_signs", "unit_weights"});
        FitSpec& spec = config.fit;
        if (const json* f = child(c, "float")) {
            if (!f->is_array()) config_error(join(P, "float"), "expected an array of parameter names");
            spec.float_params.clear();
            for (std::size_t i = 0; i < f->size(); ++i) {
                const json& name = (*f)[i];
                const std::string fp = join(P, "float[" + std::to_string(i) + "]");
                if (!name.is_string()) config_error(fp, "expected a parameter name");
                const auto p = parse_param(name.get<std::string>());
                if (!p) config_error(fp, "unknown parameter '" + name.get<std::string>() + "'");
                spec.float_params.push_back(*p);
            }
        }
        spec.bounds.clear();
        const json& b = object_or_empty(c, "bounds", P);
        for (const auto& [key, value] : b.items()) {
            const std::string bp = join(P, "bounds." + key);
            const auto p = parse_param(key);
            if (!p) config_error(bp, "unknown parameter");
            if (!value.is_array() || value.size() != 2) config_error(bp, "expected [lo, hi]");
            auto bound = [&](const json& x, double inf) {
                if (x.is_null()) return inf;
                if (!x.is_number()) config_error(bp, "expected numbers or null");
                return x.get<double>();
            };
            spec.bounds[*p] = {bound(value[0], -std::numeric_limits<double>::infinity()),
                               bound(value[1], std::numeric_limits<double>::infinity())};
        }
        if (const json* m = child(c, "masks")) {
            if (!m->is_array()) config_error(join(P, "masks"), "expected an array of [lo_hz, hi_hz]");
            spec.masks.clear();
            for (std::size_t i = 0; i < m->size(); ++i) {
                const json& row = (*m)[i];
                const std::string mp = join(P, "masks[" + std::to_string(i) + "]");
                if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
                    config_error(mp, "expected [lo_hz, hi_hz]");
                }
                const FrequencyMask mask{row[0].get<double>(), row[1].get<double>()};
                if (!(mask.lo_hz < mask.hi_hz)) config_error(mp, "lo must be below hi");
                spec.masks.push_back(mask);
            }
        }
        if (const json* q = child(c, "quadrature")) {
            const std::string s = q->is_string() ? q->get<std::string>()
                                : q->is_number_integer() ? std::to_string(q->get<int>()) : "";
            if (s == "1") spec.options.quadratures = QuadratureSelection::first;
            else if (s == "2") spec.options.quadratures = QuadratureSelection::second;
            else if (s == "both") spec.options.quadratures = QuadratureSelection::both;
            else config_error(join(P, "quadrature"), "must be 1, 2 or both");
        }
        if (const json* n = child(c, "max_iterations")) {
            if (!n->is_number_integer() || n->get<int>() < 1) {
                config_error(join(P, "max_iterations"), "expected a positive integer");
            }
            spec.options.max_iterations = n->get<int>();
        }
        auto flag = [&](const char* key, bool& target) {
            if (const json* v = child(c, key)) {
                if (!v->is_boolean()) config_error(join(P, key), "expected true or false");
                target = v->get<bool>();
            }
        };
        flag("try_both_signs", spec.options.try_both_signs);
        flag("unit_weights", spec.options.unit_weights);

        sync_fit_spec(config, &c);
        revalidate(P, [&] { spec.validate(); return 0; });
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::config, path.string() + ": invalid JSON: " + e.what());
    }
    return parse_config(doc);
}

ordered_json to_json(const RunConfig& config) {
    ordered_json doc;
    const RingCavity& cav = config.cavity;
    doc["cavity"] = {{"sqrt_r1", cav.sqrt_r1()},
                     {"sqrt_r1r2r3", cav.round_trip_amplitude()},
                     {"t1", cav.t1()},
                     {"fsr_hz", cav.fsr_hz()},
                     {"carrier_hz", cav.carrier_hz()}};
    doc["detuning"] = {{"omega_d_hz", config.detuning.omega_d_hz}};

    const auto& sq = config.squeezing;
    ordered_json squeezing;
    squeezing["kind"] = squeezing_kind_name(sq.kind());
    switch (sq.kind()) {
        case InputSqueezingModel::Kind::opo_lorentzian:
            squeezing["pump_x"] = sq.pump_x();
            squeezing["opo_linewidth_hz"] = sq.opo_linewidth_hz();
            squeezing["escape_purity"] = sq.escape_purity();
            break;
        case InputSqueezingModel::Kind::constant:
            squeezing["v1"] = sq.constant_value().v1;
            squeezing["v2"] = sq.constant_value().v2;
            break;
        case InputSqueezingModel::Kind::tabulated: {
            ordered_json rows = ordered_json::array();
            for (const auto& r : sq.table()) rows.push_back({r.omega_hz, r.v1, r.v2});
            squeezing["table"] = rows;
            break;
        }
    }
    doc["squeezing"] = squeezing;
    doc["detection"] = {{"eta_c", config.detection.eta_c()},
                        {"eta_m", config.detection.eta_m()},
                        {"eta_l", config.detection.eta_l()}};

    const auto& m = config.measurement;
    ordered_json meas = {{"rbw_hz", m.rbw_hz}, {"n_averages", m.n_averages}, {"seed", m.seed}};
    meas["spur"] = m.spur ? ordered_json{{"center_hz", m.spur->center_hz},
                                         {"height_linear", m.spur->height_linear},
                                         {"width_hz", m.spur->width_hz}}
                          : ordered_json(nullptr);
    doc["measurement"] = meas;
    doc["grid"] = {{"start_hz", config.grid.start_hz},
                   {"stop_hz", config.grid.stop_hz},
                   {"points", config.grid.points}};

    const FitSpec& spec = config.fit;
    ordered_json fit;
    fit["float"] = ordered_json::array();
    ordered_json guesses = ordered_json::object();
    ordered_json bounds = ordered_json::object();
    for (Param p : spec.float_params) {
        const std::string name(param_name(p));
        fit["float"].push_back(name);
        guesses[name] = spec.initial_guess.at(p);
        const Bounds b = spec.bounds_for(p);
        bounds[name] = {bound_value(b.lo), bound_value(b.hi)};
    }
    fit["initial_guess"] = guesses;
    fit["bounds"] = bounds;
    fit["masks"] = ordered_json::array();
    for (const auto& mask : spec.masks) fit["masks"].push_back({mask.lo_hz, mask.hi_hz});
    fit["quadrature"] = quadrature_name(spec.options.quadratures);
    fit["max_iterations"] = spec.options.max_iterations;
    fit["try_both_signs"] = spec.options.try_both_signs;
    fit["unit_weights"] = spec.options.unit_weights;
    doc["fit"] = fit;

    doc["output"] = {{"dir", config.output.dir},
                     {"trace", config.output.trace},
                     {"model", config.output.model},
                     {"report", config.output.report},
                     {"residuals", config.output.residuals}};
    return doc;
}

// ---- reports --------------------------------------------------------------

ordered_json fit_report(const FitResult& result, const FitSpec& spec) {
    ordered_json report;
    report["status"] = result.converged ? "converged" : "not converged";
    report["stop_reason"] = result.stop_reason;
    report["iterations"] = result.iterations;
    report["detuning_branch"] = to_string(result.branch);
    report["branch_tie"] = result.branch_tie;
    report["other_branch_chi2"] =
        result.other_branch_chi2 ? ordered_json(*result.other_branch_chi2) : ordered_json(nullptr);

    ordered_json params = ordered_json::array();
    for (std::size_t k = 0; k < result.float_params.size(); ++k) {
        params.push_back({{"name", param_name(result.float_params[k])},
                          {"value", result.estimates[k]},
                          {"sigma", result.sigma(result.float_params[k])}});
    }
    report["parameters"] = params;

    ordered_json fixed = ordered_json::object();
    for (const auto& [p, v] : spec.fixed_params) fixed[std::string(param_name(p))] = v;
    report["fixed"] = fixed;

    const Eigen::MatrixXd corr = result.correlation();
    ordered_json names = ordered_json::array();
    ordered_json matrix = ordered_json::array();
    for (Eigen::Index i = 0; i < corr.rows(); ++i) {
        names.push_back(param_name(result.float_params[static_cast<std::size_t>(i)]));
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < corr.cols(); ++j) row.push_back(corr(i, j));
        matrix.push_back(row);
    }
    report["correlation"] = {{"names", names}, {"matrix", matrix}};

    auto derived = [](const DerivedValue& d) {
        return ordered_json{{"value", d.value}, {"sigma", d.sigma}};
    };
    report["derived"] = {{"gamma_hz", derived(result.derived.gamma_hz)},
                         {"q_factor", derived(result.derived.q_factor)},
                         {"finesse", derived(result.derived.finesse)}};
    report["chi2"] = result.chi2;
    report["chi2_reduced"] = result.chi2_reduced;
    report["n_points"] = result.n_points;
    report["dof"] = result.dof;
    report["quadrature"] = quadrature_name(spec.options.quadratures);
    ordered_json masks = ordered_json::array();
    for (const auto& m : spec.masks) masks.push_back({m.lo_hz, m.hi_hz});
    report["masked_intervals_hz"] = masks;
    return report;
}

std::string format_residuals(const FitResult& result) {
    std::ostringstream out;
    out << "frequency_hz,quadrature,data,model,weighted_residual\n";
    for (const auto& r : result.residuals) {
        out << format_number(r.freq_hz) << "," << r.quadrature << "," << format_number(r.data) << ","
            << format_number(r.model) << "," << format_number(r.weighted) << "\n";
    }
    return out.str();
}

std::string format_profile(const std::vector<ProfilePoint>& profile, Param param) {
    std::ostringstream out;
    out << param_name(param) << ",chi2,ok,error\n";
    for (const auto& p : profile) {
        out << format_number(p.value) << "," << (p.ok ? format_number(p.chi2) : "") << ","
            << (p.ok ? 1 : 0) << ",\"" << p.error << "\"\n";
    }
    return out.str();
}

}  // namespace sqzcav::io
