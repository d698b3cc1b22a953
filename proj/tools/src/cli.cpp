#include "sqzcav_cli/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sqzcav/cavity.hpp"
#include "sqzcav/error.hpp"
#include "sqzcav/estimator.hpp"
#include "sqzcav/io.hpp"
#include "sqzcav/synth.hpp"
#include "sqzcav/two_photon.hpp"

namespace sqzcav::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> masks;
    std::string quadrature;
    std::string format = "csv";
};

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

double parse_double(const std::string& text, const std::string& what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw UsageError(what + ": '" + text + "' is not a number");
    }
    return v;
}

std::vector<std::string> split_colon(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ':')) parts.push_back(part);
    if (!text.empty() && text.back() == ':') parts.emplace_back();
    return parts;
}

FrequencyMask parse_mask(const std::string& text) {
    const auto parts = split_colon(text);
    if (parts.size() != 2) throw UsageError("--mask expects LO:HI, got '" + text + "'");
    const FrequencyMask m{parse_double(parts[0], "--mask"), parse_double(parts[1], "--mask")};
    if (!(m.lo_hz < m.hi_hz)) throw UsageError("--mask " + text + ": LO must be below HI");
    return m;
}

std::vector<double> parse_range(const std::string& text) {
    const auto parts = split_colon(text);
    if (parts.size() != 3) throw UsageError("--range expects START:STOP:N, got '" + text + "'");
    const double start = parse_double(parts[0], "--range");
    const double stop = parse_double(parts[1], "--range");
    long n = 0;
    const auto& np = parts[2];
    const auto [ptr, ec] = std::from_chars(np.data(), np.data() + np.size(), n);
    if (ec != std::errc() || ptr != np.data() + np.size() || n < 1) {
        throw UsageError("--range: empty range (N must be a positive integer)");
    }
    if (n == 1) return {start};
    if (start == stop) throw UsageError("--range: empty range (START equals STOP)");
    std::vector<double> values(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        values[static_cast<std::size_t>(i)] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return values;
}

Param parse_param_or_throw(const std::string& name) {
    const auto p = parse_param(name);
    if (!p) throw UsageError("unknown parameter '" + name + "'");
    return *p;
}

io::RunConfig resolve_config(const CommonOptions& opts) {
    io::RunConfig config =
        opts.config_path.empty() ? io::default_config() : io::load_config(opts.config_path);
    if (opts.seed) config.measurement.seed = *opts.seed;
    if (!opts.out_dir.empty()) config.output.dir = opts.out_dir;
    if (!opts.masks.empty()) {
        config.fit.masks.clear();
        for (const auto& m : opts.masks) config.fit.masks.push_back(parse_mask(m));
    }
    if (!opts.quadrature.empty()) {
        config.fit.options.quadratures = opts.quadrature == "1"   ? QuadratureSelection::first
                                       : opts.quadrature == "2"   ? QuadratureSelection::second
                                                                  : QuadratureSelection::both;
    }
    return config;
}

void echo_config(const io::RunConfig& config, std::ostream& err) {
    err << "resolved config: " << io::to_json(config).dump() << "\n";
}

fs::path prepare_out_dir(const io::RunConfig& config) {
    const fs::path dir = config.output.dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create output directory " + dir.string());
    return dir;
}

// The cavity signature is taken from whichever quadrature departs further
// from the uncoupled baseline.
FeatureSummary strongest_feature(const io::RunConfig& c) {
    const auto grid = c.grid.frequencies();
    const auto model = spectrum(c.cavity, c.detuning, c.squeezing, c.detection, grid);
    const auto base = uncoupled_spectrum(c.squeezing, c.detection, grid);
    const auto f1 = locate_feature(model, base, 1);
    const auto f2 = locate_feature(model, base, 2);
    return std::abs(f1.peak_deviation) > std::abs(f2.peak_deviation) ? f1 : f2;
}

struct CavitySummary {
    Linewidth gamma;
    double q;
    double finesse;
    FeatureSummary feature;
};

CavitySummary summarize(const io::RunConfig& c) {
    return {linewidth(c.cavity), quality_factor(c.cavity), finesse(c.cavity), strongest_feature(c)};
}

ordered_json summary_json(const CavitySummary& s) {
    return {{"gamma_hz", s.gamma.exact_hz},
            {"gamma_approx_hz", s.gamma.approx_hz},
            {"q_factor", s.q},
            {"finesse", s.finesse},
            {"feature_center_hz", s.feature.center_hz},
            {"feature_fwhm_hz", s.feature.fwhm_hz},
            {"feature_quadrature", s.feature.quadrature},
            {"feature_peak_deviation", s.feature.peak_deviation}};
}

constexpr const char* kSummaryColumns =
    "gamma_hz,gamma_approx_hz,q_factor,finesse,feature_center_hz,feature_fwhm_hz,"
    "feature_quadrature,feature_peak_deviation";

std::string summary_csv_row(const CavitySummary& s) {
    return num(s.gamma.exact_hz) + "," + num(s.gamma.approx_hz) + "," + num(s.q) + "," +
           num(s.finesse) + "," + num(s.feature.center_hz) + "," + num(s.feature.fwhm_hz) + "," +
           std::to_string(s.feature.quadrature) + "," + num(s.feature.peak_deviation);
}

void apply_param(io::RunConfig& c, Param p, double v) {
    const RingCavity cav = c.cavity;
    const double loss = cav.input_mirror_loss();
    auto with_amplitudes = [&](double sqrt_r1, double s) {
        return RingCavity::from_amplitudes(sqrt_r1, s, cav.fsr_hz(), cav.carrier_hz(),
                                           1.0 - sqrt_r1 * sqrt_r1 - loss);
    };
    // Sweeping the round trip keeps the input mirror's share of it, so every
    // s in (0, 1) stays physical.
    auto coupled_sqrt_r1 = [&](double s) {
        const double share = (1.0 - cav.sqrt_r1()) / (1.0 - cav.round_trip_amplitude());
        return 1.0 - share * (1.0 - s);
    };
    auto require_opo = [&] {
        if (c.squeezing.kind() != InputSqueezingModel::Kind::opo_lorentzian) {
            throw UsageError(std::string(param_name(p)) + " needs an opo_lorentzian squeezing model");
        }
    };
    const auto& sq = c.squeezing;
    switch (p) {
        case Param::sqrt_r1: c.cavity = with_amplitudes(v, cav.round_trip_amplitude()); break;
        case Param::r1: c.cavity = with_amplitudes(std::sqrt(v), cav.round_trip_amplitude()); break;
        case Param::sqrt_r1r2r3: c.cavity = with_amplitudes(coupled_sqrt_r1(v), v); break;
        case Param::r1r2r3: c.cavity = with_amplitudes(coupled_sqrt_r1(std::sqrt(v)), std::sqrt(v)); break;
        case Param::omega_d_hz: c.detuning.omega_d_hz = v; break;
        case Param::fsr_hz:
            c.cavity = RingCavity(cav.r1_sq(), cav.r2r3_sq(), v, cav.carrier_hz(), cav.t1());
            break;
        case Param::pump_x:
            require_opo();
            c.squeezing = InputSqueezingModel::opo_lorentzian(v, sq.opo_linewidth_hz(), sq.escape_purity());
            break;
        case Param::opo_linewidth_hz:
            require_opo();
            c.squeezing = InputSqueezingModel::opo_lorentzian(sq.pump_x(), v, sq.escape_purity());
            break;
        case Param::escape_purity:
            require_opo();
            c.squeezing = InputSqueezingModel::opo_lorentzian(sq.pump_x(), sq.opo_linewidth_hz(), v);
            break;
        case Param::eta_c: c.detection = DetectionModel::from_coupled(v, c.detection.eta_m()); break;
    }
}

io::Header trace_header(const io::RunConfig& c, bool noisy) {
    io::Header h{{"v1", "amplitude quadrature (squeezed at low frequency)"},
                 {"v2", "phase quadrature (anti-squeezed at low frequency)"},
                 {"reference", "shot noise = 0 dB"}};
    if (noisy) {
        h.emplace_back("kind", "synthetic measurement");
        h.emplace_back("rbw_hz", num(c.measurement.rbw_hz));
        h.emplace_back("n_averages", num(c.measurement.n_averages));
        h.emplace_back("seed", std::to_string(c.measurement.seed));
    } else {
        h.emplace_back("kind", "analytic model");
    }
    return h;
}

int cmd_simulate(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
    const io::RunConfig config = resolve_config(opts);
    echo_config(config, err);
    const auto grid = config.grid.frequencies();
    const auto trace = synthesize_trace(config.cavity, config.detuning, config.squeezing,
                                        config.detection, config.measurement, grid);
    const auto model = spectrum(config.cavity, config.detuning, config.squeezing, config.detection, grid);
    const CavitySummary summary = summarize(config);

    const fs::path dir = prepare_out_dir(config);
    io::save_trace(dir / config.output.trace, trace, trace_header(config, true));
    io::save_trace(dir / config.output.model, model, trace_header(config, false));

    if (opts.format == "json") {
        out << summary_json(summary).dump(2) << "\n";
    } else {
        out << kSummaryColumns << "\n" << summary_csv_row(summary) << "\n";
    }
    return kOk;
}

int cmd_fit(const CommonOptions& opts, const std::string& trace_path, const std::string& profile_param,
            const std::string& profile_range, std::ostream& out, std::ostream& err) {
    const io::RunConfig config = resolve_config(opts);
    std::optional<Param> profile;
    std::vector<double> profile_grid;
    if (!profile_param.empty()) {
        profile = parse_param_or_throw(profile_param);
        if (profile_range.empty()) throw UsageError("--profile needs --range START:STOP:N");
        profile_grid = parse_range(profile_range);
    }
    echo_config(config, err);

    const QuadratureSpectrum traces = io::load_trace(trace_path);
    const FitResult result = fit(traces, config.fit);
    const ordered_json report = io::fit_report(result, config.fit);

    const fs::path dir = prepare_out_dir(config);
    io::write_file_atomic(dir / config.output.report, report.dump(2) + "\n");
    io::write_file_atomic(dir / config.output.residuals, io::format_residuals(result));

    if (profile) {
        FitSpec warm = config.fit;
        for (std::size_t k = 0; k < result.float_params.size(); ++k) {
            warm.initial_guess[result.float_params[k]] = result.estimates[k];
        }
        const auto points = profile_identifiability(traces, warm, *profile, profile_grid);
        io::write_file_atomic(dir / ("profile_" + std::string(param_name(*profile)) + ".csv"),
                              io::format_profile(points, *profile));
    }

    if (opts.format == "json") {
        out << report.dump(2) << "\n";
    } else {
        out << "quantity,value,sigma\n";
        for (std::size_t k = 0; k < result.float_params.size(); ++k) {
            out << param_name(result.float_params[k]) << "," << num(result.estimates[k]) << ","
                << num(result.sigma(result.float_params[k])) << "\n";
        }
        const auto& d = result.derived;
        out << "gamma_hz," << num(d.gamma_hz.value) << "," << num(d.gamma_hz.sigma) << "\n";
        out << "q_factor," << num(d.q_factor.value) << "," << num(d.q_factor.sigma) << "\n";
        out << "finesse," << num(d.finesse.value) << "," << num(d.finesse.sigma) << "\n";
        out << "chi2_reduced," << num(result.chi2_reduced) << ",\n";
        out << "detuning_branch," << to_string(result.branch) << ",\n";
    }
    return kOk;
}

struct ContrastOptions {
    std::string preset;
    std::optional<double> v1_db, v2_db, v1, v2;
};

int cmd_contrast(const ContrastOptions& c, const std::string& format, std::ostream& out,
                 std::ostream& err) {
    if ((c.v1 && c.v1_db) || (c.v2 && c.v2_db)) throw UsageError("give each variance in dB or linear, not both");
    if (c.preset.empty() && (!(c.v1 || c.v1_db) || !(c.v2 || c.v2_db))) {
        throw UsageError("contrast needs --preset or both incident variances");
    }
    double v1 = 1.0, v2 = 1.0;
    if (c.preset == "classical") {
        v1 = from_db(0.0);
        v2 = from_db(10.0);
    } else if (c.preset == "squeezed") {
        v1 = from_db(-6.0);
        v2 = from_db(10.0);
    }
    if (c.v1_db) v1 = from_db(*c.v1_db);
    if (c.v2_db) v2 = from_db(*c.v2_db);
    if (c.v1) v1 = *c.v1;
    if (c.v2) v2 = *c.v2;
    if (!(v1 > 0.0) || !(v2 > 0.0)) {
        throw Error(ErrorKind::invalid_argument, "contrast: variances must be positive");
    }
    err << "resolved config: "
        << ordered_json{{"preset", c.preset.empty() ? "none" : c.preset}, {"v1_a", v1}, {"v2_a", v2}}.dump()
        << "\n";
    const SignalContrast s = signal_contrast(v1, v2);
    if (format == "json") {
        out << ordered_json{{"v1_a", v1},           {"v2_a", v2},
                            {"v1_a_db", to_db(v1)}, {"v2_a_db", to_db(v2)},
                            {"s1", s.s1},           {"s2", s.s2},
                            {"v_matched", s.v_matched}, {"v_matched_db", to_db(s.v_matched)}}
                   .dump(2)
            << "\n";
    } else {
        out << "v1_a,v2_a,s1,s2,v_matched,v_matched_db\n"
            << num(v1) << "," << num(v2) << "," << num(s.s1) << "," << num(s.s2) << ","
            << num(s.v_matched) << "," << num(to_db(s.v_matched)) << "\n";
    }
    return kOk;
}

int cmd_sweep(const CommonOptions& opts, const std::string& param_name_text, const std::string& range,
              std::ostream& out, std::ostream& err) {
    const Param p = parse_param_or_throw(param_name_text);
    const auto values = parse_range(range);
    const io::RunConfig base = resolve_config(opts);
    echo_config(base, err);

    std::vector<std::pair<double, CavitySummary>> rows;
    for (double v : values) {
        io::RunConfig c = base;
        try {
            apply_param(c, p, v);
        } catch (const Error& e) {
            throw Error(ErrorKind::config, std::string(param_name(p)) + " = " + num(v) + ": " + e.what());
        }
        rows.emplace_back(v, summarize(c));
    }

    if (opts.format == "json") {
        ordered_json table = ordered_json::array();
        for (const auto& [v, s] : rows) {
            ordered_json row{{std::string(param_name(p)), v}};
            row.update(summary_json(s));
            table.push_back(row);
        }
        out << table.dump(2) << "\n";
    } else {
        out << param_name(p) << "," << kSummaryColumns << "\n";
        for (const auto& [v, s] : rows) out << num(v) << "," << summary_csv_row(s) << "\n";
    }
    return kOk;
}

int cmd_validate(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
    const io::RunConfig config = resolve_config(opts);
    echo_config(config, err);
    config.fit.validate();
    out << io::to_json(config).dump(2) << "\n";
    return kOk;
}

int exit_code_for(ErrorKind kind, bool fitting) {
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::invalid_argument: return kConfigError;
        case ErrorKind::io:
        case ErrorKind::trace_format: return kIoError;
        case ErrorKind::fit_not_converged:
        case ErrorKind::unidentifiable: return kFitError;
        default: return fitting ? kFitError : kConfigError;
    }
}

void add_common(CLI::App* cmd, CommonOptions& o, bool fit_flags) {
    cmd->add_option("--config", o.config_path, "JSON run configuration (defaults when omitted)");
    cmd->add_option("--out", o.out_dir, "output directory (overrides output.dir)");
    cmd->add_option("--seed", o.seed, "measurement noise seed (overrides measurement.seed)");
    if (fit_flags) {
        cmd->add_option("--mask", o.masks, "exclude LO:HI hertz from the fit (repeatable)");
        cmd->add_option("--quadrature", o.quadrature, "quadratures to fit")
            ->check(CLI::IsMember({"1", "2", "both"}));
    }
    cmd->add_option("--format", o.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Squeezed-vacuum cavity spectroscopy: simulate, fit and inspect reflected spectra",
                 "sqzcav"};
    app.require_subcommand(1);

    CommonOptions sim_opts, fit_opts, sweep_opts, validate_opts;
    std::string contrast_format = "csv";
    ContrastOptions contrast;
    std::string trace_path, profile_param, profile_range, sweep_param, sweep_range;

    auto* simulate = app.add_subcommand("simulate", "synthesize a noisy trace and the analytic curve");
    add_common(simulate, sim_opts, false);

    auto* fit_cmd = app.add_subcommand("fit", "fit a trace and write a report and residuals");
    add_common(fit_cmd, fit_opts, true);
    fit_cmd->add_option("trace", trace_path, "trace file")->required();
    fit_cmd->add_option("--profile", profile_param, "also write a chi2 profile over this parameter");
    fit_cmd->add_option("--range", profile_range, "profile grid START:STOP:N");

    auto* contrast_cmd = app.add_subcommand("contrast", "signal contrast for given incident variances");
    contrast_cmd->add_option("--preset", contrast.preset, "input preset")
        ->check(CLI::IsMember({"vacuum", "classical", "squeezed"}));
    contrast_cmd->add_option("--v1-db", contrast.v1_db, "incident V1 in dB");
    contrast_cmd->add_option("--v2-db", contrast.v2_db, "incident V2 in dB");
    contrast_cmd->add_option("--v1", contrast.v1, "incident V1, linear");
    contrast_cmd->add_option("--v2", contrast.v2, "incident V2, linear");
    contrast_cmd->add_option("--format", contrast_format, "stdout format")
        ->check(CLI::IsMember({"csv", "json"}));

    auto* sweep = app.add_subcommand("sweep", "derived quantities and feature summary over a parameter");
    add_common(sweep, sweep_opts, false);
    sweep->add_option("--param", sweep_param, "parameter name")->required();
    sweep->add_option("--range", sweep_range, "START:STOP:N")->required();

    auto* validate = app.add_subcommand("validate", "check a configuration and print it resolved");
    add_common(validate, validate_opts, true);

    std::vector<const char*> argv{"sqzcav"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigError;
    }

    const bool fitting = fit_cmd->parsed();
    try {
        if (simulate->parsed()) return cmd_simulate(sim_opts, out, err);
        if (fit_cmd->parsed()) return cmd_fit(fit_opts, trace_path, profile_param, profile_range, out, err);
        if (contrast_cmd->parsed()) return cmd_contrast(contrast, contrast_format, out, err);
        if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_param, sweep_range, out, err);
        if (validate->parsed()) return cmd_validate(validate_opts, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const UnidentifiableError& e) {
        err << "error (unidentifiable): " << e.what() << "\n  direction:";
        for (std::size_t k = 0; k < e.direction().size(); ++k) {
            err << " " << e.parameter_names()[k] << "=" << num(e.direction()[k]);
        }
        err << "\n";
        return kFitError;
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e.kind(), fitting);
    }
    return kConfigError;
}

}  // namespace sqzcav::cli
