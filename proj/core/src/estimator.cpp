#include "sqzcav/estimator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include "sqzcav/error.hpp"
#include "sqzcav/synth.hpp"

namespace sqzcav {
namespace {

constexpr std::array<std::pair<Param, std::string_view>, 10> kParamNames{{
    {Param::sqrt_r1, "sqrt_r1"},
    {Param::sqrt_r1r2r3, "sqrt_r1r2r3"},
    {Param::r1, "r1"},
    {Param::r1r2r3, "r1r2r3"},
    {Param::omega_d_hz, "omega_d_hz"},
    {Param::fsr_hz, "fsr_hz"},
    {Param::pump_x, "pump_x"},
    {Param::opo_linewidth_hz, "opo_linewidth_hz"},
    {Param::escape_purity, "escape_purity"},
    {Param::eta_c, "eta_c"},
}};

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void bad_spec(const std::string& what) {
    throw Error(ErrorKind::invalid_argument, "FitSpec: " + what);
}

bool contains(const std::vector<Param>& v, Param p) {
    return std::find(v.begin(), v.end(), p) != v.end();
}

double lookup(const ParamValues& values, Param p) {
    const auto it = values.find(p);
    if (it == values.end()) {
        throw Error(ErrorKind::invalid_argument,
                    "missing model parameter " + std::string(param_name(p)));
    }
    return it->second;
}

/// Smooth map from an unconstrained internal coordinate to a bounded value.
class Coordinate {
public:
    Coordinate(Param param, Bounds bounds) : param_(param), lo_(bounds.lo), hi_(bounds.hi) {}

    Param param() const noexcept { return param_; }

    double to_user(double u) const noexcept {
        if (std::isfinite(lo_) && std::isfinite(hi_)) return lo_ + (hi_ - lo_) * logistic(u);
        if (std::isfinite(lo_)) return lo_ + std::exp(u);
        if (std::isfinite(hi_)) return hi_ - std::exp(u);
        return u;
    }

    double to_internal(double p) const noexcept {
        if (std::isfinite(lo_) && std::isfinite(hi_)) {
            const double q = (p - lo_) / (hi_ - lo_);
            return std::log(q / (1.0 - q));
        }
        if (std::isfinite(lo_)) return std::log(p - lo_);
        if (std::isfinite(hi_)) return std::log(hi_ - p);
        return p;
    }

    /// dp/du
    double derivative(double u) const noexcept {
        if (std::isfinite(lo_) && std::isfinite(hi_)) {
            const double s = logistic(u);
            return (hi_ - lo_) * s * (1.0 - s);
        }
        if (std::isfinite(lo_)) return std::exp(u);
        if (std::isfinite(hi_)) return -std::exp(u);
        return 1.0;
    }

    /// Natural size used to compare parameter directions in the
    /// identifiability check.
    double scale(double p) const noexcept {
        if (std::isfinite(lo_) && std::isfinite(hi_)) return hi_ - lo_;
        return std::max(std::abs(p), 1.0);
    }

private:
    static double logistic(double u) noexcept {
        return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
    }

    Param param_;
    double lo_;
    double hi_;
};

struct DataPoint {
    std::size_t index;
    int quadrature;
    double data;
    double sigma;
};

/// Selected, unmasked observations with their weights.
std::vector<DataPoint> collect_points(const QuadratureSpectrum& traces, const FitSpec& spec) {
    const auto sel = spec.options.quadratures;
    const bool want1 = sel != QuadratureSelection::second;
    const bool want2 = sel != QuadratureSelection::first;
    if (want1 && traces.v1.empty()) bad_spec("quadrature 1 requested but the trace has no v1 data");
    if (want2 && traces.v2.empty()) bad_spec("quadrature 2 requested but the trace has no v2 data");
    if (!spec.options.unit_weights) {
        if ((want1 && traces.sigma1.empty()) || (want2 && traces.sigma2.empty())) {
            bad_spec("trace has no sigmas; request unit weights explicitly");
        }
    }

    std::vector<DataPoint> points;
    auto add = [&](int q, const std::vector<double>& v, const std::vector<double>& s) {
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const double f = traces.freqs_hz[i];
            const bool masked = std::any_of(spec.masks.begin(), spec.masks.end(),
                                            [f](const FrequencyMask& m) { return m.contains(f); });
            if (masked) continue;
            const double sigma = spec.options.unit_weights ? 1.0 : s[i];
            if (!(sigma > 0.0)) bad_spec("non-positive sigma at index " + std::to_string(i));
            points.push_back({i, q, v[i], sigma});
        }
    };
    if (want1) add(1, traces.v1, traces.sigma1);
    if (want2) add(2, traces.v2, traces.sigma2);
    return points;
}

QuadratureSpectrum model_trace(const QuadratureSpectrum& traces, const FitSpec& spec,
                               const ParamValues& values) {
    const ModelPoint m = build_model(values, spec.context);
    MeasurementConfig smoothing;
    smoothing.rbw_hz = spec.context.rbw_hz;
    if (!(smoothing.rbw_hz > 0.0)) {
        return spectrum(m.cavity, m.detuning, m.squeezing, m.detection, traces.freqs_hz);
    }
    return expected_trace(m.cavity, m.detuning, m.squeezing, m.detection, smoothing,
                          traces.freqs_hz);
}

/// Least-squares problem in internal coordinates for one detuning branch.
class Problem {
public:
    Problem(const QuadratureSpectrum& traces, const FitSpec& spec, double detuning_sign)
        : traces_(traces),
          spec_(spec),
          points_(collect_points(traces, spec)),
          sign_(detuning_sign) {
        for (Param p : spec.float_params) coords_.emplace_back(p, spec.bounds_for(p));
        base_ = spec.fixed_params;
    }

    std::size_t n_params() const noexcept { return coords_.size(); }
    std::size_t n_points() const noexcept { return points_.size(); }
    const std::vector<Coordinate>& coords() const noexcept { return coords_; }
    const std::vector<DataPoint>& points() const noexcept { return points_; }

    Eigen::VectorXd internal_from_guess() const {
        Eigen::VectorXd u(coords_.size());
        for (std::size_t k = 0; k < coords_.size(); ++k) {
            double p = spec_.initial_guess.at(coords_[k].param());
            if (coords_[k].param() == Param::omega_d_hz) p = std::abs(p);
            u(k) = coords_[k].to_internal(p);
        }
        return u;
    }

    ParamValues values(const Eigen::VectorXd& u) const {
        ParamValues v = base_;
        for (std::size_t k = 0; k < coords_.size(); ++k) {
            double p = coords_[k].to_user(u(k));
            if (coords_[k].param() == Param::omega_d_hz) p *= sign_;
            v[coords_[k].param()] = p;
        }
        return v;
    }

    /// d(user value)/du, including the detuning sign.
    Eigen::VectorXd user_derivatives(const Eigen::VectorXd& u) const {
        Eigen::VectorXd d(coords_.size());
        for (std::size_t k = 0; k < coords_.size(); ++k) {
            d(k) = coords_[k].derivative(u(k));
            if (coords_[k].param() == Param::omega_d_hz) d(k) *= sign_;
        }
        return d;
    }

    QuadratureSpectrum model(const Eigen::VectorXd& u) const {
        return model_trace(traces_, spec_, values(u));
    }

    Eigen::VectorXd residuals(const Eigen::VectorXd& u) const {
        const QuadratureSpectrum m = model(u);
        Eigen::VectorXd r(points_.size());
        for (std::size_t j = 0; j < points_.size(); ++j) {
            const auto& pt = points_[j];
            const double v = pt.quadrature == 1 ? m.v1[pt.index] : m.v2[pt.index];
            r(j) = (v - pt.data) / pt.sigma;
        }
        return r;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& u, const Eigen::VectorXd& r0) const {
        Eigen::MatrixXd jac(points_.size(), coords_.size());
        for (std::size_t k = 0; k < coords_.size(); ++k) {
            const double h = 1e-6 * std::max(1.0, std::abs(u(k)));
            Eigen::VectorXd up = u, down = u;
            up(k) += h;
            down(k) -= h;
            // One-sided fallback when a probe leaves the physical domain.
            std::optional<Eigen::VectorXd> rp, rm;
            try { rp = residuals(up); } catch (const Error&) {}
            try { rm = residuals(down); } catch (const Error&) {}
            if (rp && rm) {
                jac.col(k) = (*rp - *rm) / (2.0 * h);
            } else if (rp) {
                jac.col(k) = (*rp - r0) / h;
            } else if (rm) {
                jac.col(k) = (r0 - *rm) / h;
            } else {
                throw Error(ErrorKind::fit_not_converged,
                            "model undefined around " + std::string(param_name(coords_[k].param())));
            }
        }
        return jac;
    }

    /// Throws UnidentifiableError if the Jacobian, expressed in user units
    /// scaled by each parameter's natural size, is numerically rank deficient.
    void check_identifiable(const Eigen::VectorXd& u, const Eigen::MatrixXd& jac) const {
        const Eigen::VectorXd d = user_derivatives(u);
        Eigen::MatrixXd scaled = jac;
        for (std::size_t k = 0; k < coords_.size(); ++k) {
            const double p = std::abs(coords_[k].to_user(u(k)));
            scaled.col(k) *= coords_[k].scale(p) / d(k);
        }
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        const Eigen::Index last = sv.size() - 1;
        // With real sigmas the scaled singular values are inverse 1-sigma
        // widths in natural units, so an absolute floor applies as well.
        const double floor = spec_.options.unit_weights ? 0.0 : spec_.options.min_scaled_sensitivity;
        if (sv(0) > 0.0 && sv(last) > spec_.options.singular_tol * sv(0) && sv(last) >= floor) return;

        std::vector<std::string> names;
        std::vector<double> direction;
        std::ostringstream msg;
        msg << "singular Jacobian: parameters not identifiable along direction [";
        for (std::size_t k = 0; k < coords_.size(); ++k) {
            names.emplace_back(param_name(coords_[k].param()));
            direction.push_back(svd.matrixV()(static_cast<Eigen::Index>(k), last));
            msg << (k ? ", " : "") << names.back() << "=" << direction.back();
        }
        msg << "] (condition " << (sv(0) > 0.0 ? sv(0) / sv(last) : kInf) << ")";
        throw UnidentifiableError(msg.str(), std::move(names), std::move(direction));
    }

private:
    const QuadratureSpectrum& traces_;
    const FitSpec& spec_;
    std::vector<DataPoint> points_;
    double sign_;
    std::vector<Coordinate> coords_;
    ParamValues base_;
};

struct BranchOutcome {
    Eigen::VectorXd u;
    double chi2;
    int iterations;
    std::string stop_reason;
};

BranchOutcome minimize(const Problem& problem, const FitOptions& options) {
    Eigen::VectorXd u = problem.internal_from_guess();
    Eigen::VectorXd r = problem.residuals(u);
    double chi2 = r.squaredNorm();
    double lambda = 1e-3;

    for (int iter = 1; iter <= options.max_iterations; ++iter) {
        const Eigen::MatrixXd jac = problem.jacobian(u, r);
        problem.check_identifiable(u, jac);
        if (chi2 == 0.0) return {u, chi2, iter, "exact fit"};

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;
        const Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-300);

        while (true) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * diag;
            const Eigen::VectorXd step = damped.ldlt().solve(-grad);

            Eigen::VectorXd trial = u + step;
            std::optional<Eigen::VectorXd> r_trial;
            try {
                r_trial = problem.residuals(trial);
            } catch (const Error&) {
                // Stepped outside the physical domain (e.g. R2R3 > 1).
            }
            const double chi2_trial = r_trial ? r_trial->squaredNorm() : kInf;
            if (chi2_trial < chi2) {
                const double rel_change = (chi2 - chi2_trial) / std::max(chi2_trial, 1e-300);
                u = trial;
                r = *r_trial;
                chi2 = chi2_trial;
                lambda = std::max(lambda / 10.0, 1e-12);
                if (rel_change < options.rel_chi2_tol) {
                    return {u, chi2, iter, "relative chi2 change below tolerance"};
                }
                if (step.norm() < options.step_tol) return {u, chi2, iter, "step below tolerance"};
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e16) return {u, chi2, iter, "no further decrease"};
        }
    }
    std::ostringstream msg;
    msg << "fit did not converge within " << options.max_iterations << " iterations (chi2 = "
        << chi2 << ")";
    throw Error(ErrorKind::fit_not_converged, msg.str());
}

FitResult assemble(const Problem& problem, const FitSpec& spec, const BranchOutcome& outcome) {
    FitResult result;
    result.float_params = spec.float_params;
    result.values = problem.values(outcome.u);
    result.chi2 = outcome.chi2;
    result.n_points = problem.n_points();
    result.dof = problem.n_points() - problem.n_params();
    result.chi2_reduced = result.chi2 / static_cast<double>(result.dof);
    result.converged = true;
    result.iterations = outcome.iterations;
    result.stop_reason = outcome.stop_reason;

    const Eigen::VectorXd r = problem.residuals(outcome.u);
    const Eigen::MatrixXd jac = problem.jacobian(outcome.u, r);
    problem.check_identifiable(outcome.u, jac);

    // Covariance in user coordinates: D (J^T J)^-1 D * chi2_red with
    // D = dp/du; the weights are already folded into J and r.
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::MatrixXd inv = jtj.ldlt().solve(
        Eigen::MatrixXd::Identity(jtj.rows(), jtj.cols()));
    const Eigen::VectorXd d = problem.user_derivatives(outcome.u);
    result.covariance = d.asDiagonal() * inv * d.asDiagonal() * result.chi2_reduced;
    result.covariance = 0.5 * (result.covariance + result.covariance.transpose()).eval();

    for (Param p : spec.float_params) result.estimates.push_back(result.values.at(p));
    result.derived =
        derive_parameters(result.values, spec.float_params, result.covariance, spec.context);

    const QuadratureSpectrum m = problem.model(outcome.u);
    result.residuals.reserve(problem.n_points());
    for (std::size_t j = 0; j < problem.points().size(); ++j) {
        const auto& pt = problem.points()[j];
        const double model = pt.quadrature == 1 ? m.v1[pt.index] : m.v2[pt.index];
        result.residuals.push_back(
            {m.freqs_hz[pt.index], pt.quadrature, pt.data, model, r(static_cast<Eigen::Index>(j))});
    }
    return result;
}

}  // namespace

std::string_view param_name(Param p) noexcept {
    for (const auto& [param, name] : kParamNames) {
        if (param == p) return name;
    }
    return "unknown";
}

std::optional<Param> parse_param(std::string_view name) noexcept {
    for (const auto& [param, n] : kParamNames) {
        if (n == name) return param;
    }
    return std::nullopt;
}

Bounds default_bounds(Param p) noexcept {
    switch (p) {
        case Param::omega_d_hz:
        case Param::fsr_hz:
        case Param::opo_linewidth_hz:
            return {0.0, kInf};
        default:
            return {0.0, 1.0};
    }
}

std::string_view to_string(DetuningBranch b) noexcept {
    switch (b) {
        case DetuningBranch::negative: return "negative";
        case DetuningBranch::positive: return "positive";
        case DetuningBranch::fixed: return "fixed";
    }
    return "fixed";
}

Bounds FitSpec::bounds_for(Param p) const {
    const auto it = bounds.find(p);
    return it != bounds.end() ? it->second : default_bounds(p);
}

std::vector<Param> FitSpec::required_params() const {
    auto present = [this](Param p) { return contains(float_params, p) || fixed_params.count(p) > 0; };
    std::vector<Param> req;
    req.push_back(present(Param::r1) ? Param::r1 : Param::sqrt_r1);
    req.push_back(present(Param::r1r2r3) ? Param::r1r2r3 : Param::sqrt_r1r2r3);
    req.push_back(Param::omega_d_hz);
    req.push_back(Param::fsr_hz);
    req.push_back(Param::eta_c);
    if (context.squeezing.kind() == InputSqueezingModel::Kind::opo_lorentzian) {
        req.push_back(Param::pump_x);
        req.push_back(Param::opo_linewidth_hz);
        req.push_back(Param::escape_purity);
    }
    return req;
}

void FitSpec::validate() const {
    if (float_params.empty()) bad_spec("no floated parameters");
    for (std::size_t i = 0; i < float_params.size(); ++i) {
        const Param p = float_params[i];
        if (std::find(float_params.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                      float_params.end(), p) != float_params.end()) {
            bad_spec(std::string(param_name(p)) + " floated twice");
        }
        if (fixed_params.count(p)) bad_spec(std::string(param_name(p)) + " both floated and fixed");
    }
    auto present = [this](Param p) { return contains(float_params, p) || fixed_params.count(p) > 0; };
    if (present(Param::r1) && present(Param::sqrt_r1)) bad_spec("use either r1 or sqrt_r1, not both");
    if (present(Param::r1r2r3) && present(Param::sqrt_r1r2r3)) {
        bad_spec("use either r1r2r3 or sqrt_r1r2r3, not both");
    }
    const auto required = required_params();
    for (Param p : required) {
        if (!present(p)) bad_spec("parameter " + std::string(param_name(p)) + " is neither floated nor fixed");
    }
    for (Param p : float_params) {
        if (!contains(required, p)) {
            bad_spec("parameter " + std::string(param_name(p)) + " does not enter the configured model");
        }
        const auto it = initial_guess.find(p);
        if (it == initial_guess.end()) bad_spec("no initial guess for " + std::string(param_name(p)));
        const Bounds b = bounds_for(p);
        if (!(b.lo < b.hi)) bad_spec("empty bounds for " + std::string(param_name(p)));
        const double guess = p == Param::omega_d_hz ? std::abs(it->second) : it->second;
        if (!(guess > b.lo && guess < b.hi)) {
            std::ostringstream msg;
            msg << "initial guess " << it->second << " for " << param_name(p)
                << " outside bounds (" << b.lo << ", " << b.hi << ")";
            bad_spec(msg.str());
        }
    }
    for (const auto& m : masks) {
        if (!(m.lo_hz < m.hi_hz)) bad_spec("mask interval must have lo < hi");
    }
    if (options.max_iterations < 1) bad_spec("max_iterations must be >= 1");
}

ModelPoint build_model(const ParamValues& values, const ModelContext& context) {
    const double sqrt_r1 = values.count(Param::r1) ? std::sqrt(lookup(values, Param::r1))
                                                   : lookup(values, Param::sqrt_r1);
    const double s = values.count(Param::r1r2r3) ? std::sqrt(lookup(values, Param::r1r2r3))
                                                 : lookup(values, Param::sqrt_r1r2r3);
    const double t1 = 1.0 - sqrt_r1 * sqrt_r1 - context.input_mirror_loss;
    if (!(t1 >= 0.0)) {
        throw Error(ErrorKind::invalid_argument, "input mirror: R1 + L1 exceeds unity");
    }
    if (!(s <= sqrt_r1)) {
        throw Error(ErrorKind::invalid_argument,
                    "sqrt(R1 R2 R3) exceeds sqrt(R1): R2R3 would be above unity");
    }
    RingCavity cavity = RingCavity::from_amplitudes(sqrt_r1, s, lookup(values, Param::fsr_hz),
                                                    context.carrier_hz, t1);
    const Detuning detuning{lookup(values, Param::omega_d_hz)};
    InputSqueezingModel squeezing = context.squeezing;
    if (squeezing.kind() == InputSqueezingModel::Kind::opo_lorentzian) {
        squeezing = InputSqueezingModel::opo_lorentzian(lookup(values, Param::pump_x),
                                                        lookup(values, Param::opo_linewidth_hz),
                                                        lookup(values, Param::escape_purity));
    }
    const DetectionModel detection =
        DetectionModel::from_coupled(lookup(values, Param::eta_c), context.eta_m);
    return {std::move(cavity), detuning, std::move(squeezing), detection};
}

DerivedParameters derive_parameters(const ParamValues& values, std::span<const Param> floated,
                                    const Eigen::MatrixXd& covariance,
                                    const ModelContext& context) {
    const bool power = values.count(Param::r1r2r3) > 0;
    const double s = power ? std::sqrt(lookup(values, Param::r1r2r3))
                           : lookup(values, Param::sqrt_r1r2r3);
    const double fsr = lookup(values, Param::fsr_hz);
    if (!(s < 1.0)) {
        throw Error(ErrorKind::zero_linewidth, "derive_parameters: R1 R2 R3 >= 1");
    }
    const auto n = static_cast<Eigen::Index>(floated.size());
    if (covariance.rows() != n || covariance.cols() != n) {
        throw Error(ErrorKind::invalid_argument, "derive_parameters: covariance size mismatch");
    }

    const Linewidth lw = linewidth_from_product(s, fsr);
    const double gamma = lw.exact_hz;
    const double fin = finesse_from_product(s);
    const double q = context.carrier_hz / gamma;

    // Analytic partials of the arcsine linewidth and the finesse.
    const double x = (1.0 - s) / (2.0 * std::sqrt(s));
    const double dx_ds = -(1.0 + s) / (4.0 * s * std::sqrt(s));
    const double dgamma_ds = (2.0 / kPi) * fsr / std::sqrt(1.0 - x * x) * dx_ds;
    const double dgamma_dfsr = gamma / fsr;
    const double dfin_ds = kPi * (1.0 + s) / (2.0 * std::sqrt(s) * (1.0 - s) * (1.0 - s));

    Eigen::VectorXd g_gamma = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd g_fin = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        switch (floated[static_cast<std::size_t>(k)]) {
            case Param::sqrt_r1r2r3:
                g_gamma(k) = dgamma_ds;
                g_fin(k) = dfin_ds;
                break;
            case Param::r1r2r3:  // s = sqrt(P)
                g_gamma(k) = dgamma_ds / (2.0 * s);
                g_fin(k) = dfin_ds / (2.0 * s);
                break;
            case Param::fsr_hz:
                g_gamma(k) = dgamma_dfsr;
                break;
            default:
                break;
        }
    }
    auto propagate = [&covariance](const Eigen::VectorXd& g) {
        return std::sqrt(std::max(0.0, g.dot(covariance * g)));
    };
    DerivedParameters out;
    out.gamma_hz = {gamma, propagate(g_gamma)};
    out.q_factor = {q, q / gamma * out.gamma_hz.sigma};
    out.finesse = {fin, propagate(g_fin)};
    return out;
}

double FitResult::sigma(Param p) const {
    for (std::size_t k = 0; k < float_params.size(); ++k) {
        if (float_params[k] == p) {
            const auto i = static_cast<Eigen::Index>(k);
            return std::sqrt(std::max(0.0, covariance(i, i)));
        }
    }
    return 0.0;
}

Eigen::MatrixXd FitResult::correlation() const {
    const Eigen::VectorXd sd = covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd corr = covariance;
    for (Eigen::Index i = 0; i < corr.rows(); ++i) {
        for (Eigen::Index j = 0; j < corr.cols(); ++j) {
            const double denom = sd(i) * sd(j);
            corr(i, j) = denom > 0.0 ? covariance(i, j) / denom : (i == j ? 1.0 : 0.0);
        }
    }
    return corr;
}

FitResult fit(const QuadratureSpectrum& traces, const FitSpec& spec) {
    traces.validate();
    spec.validate();

    {
        const Problem probe(traces, spec, 1.0);
        if (probe.n_points() < 2 * probe.n_params()) {
            bad_spec("need at least twice as many data points as floated parameters");
        }
    }

    const bool detuning_floated = contains(spec.float_params, Param::omega_d_hz);
    if (!detuning_floated) {
        const Problem problem(traces, spec, 1.0);
        FitResult result = assemble(problem, spec, minimize(problem, spec.options));
        result.branch = DetuningBranch::fixed;
        return result;
    }

    std::vector<double> signs;
    const double guess = spec.initial_guess.at(Param::omega_d_hz);
    if (spec.options.try_both_signs) {
        signs = {-1.0, 1.0};
    } else {
        signs = {guess > 0.0 ? 1.0 : -1.0};
    }

    struct Candidate {
        double sign;
        FitResult result;
    };
    std::vector<Candidate> candidates;
    std::optional<Error> first_error;
    std::optional<UnidentifiableError> first_unidentifiable;
    for (double sign : signs) {
        const Problem problem(traces, spec, sign);
        try {
            candidates.push_back({sign, assemble(problem, spec, minimize(problem, spec.options))});
        } catch (const UnidentifiableError& e) {
            if (!first_unidentifiable) first_unidentifiable = e;
        } catch (const Error& e) {
            if (!first_error) first_error = e;
        }
    }
    if (candidates.empty()) {
        if (first_unidentifiable) throw *first_unidentifiable;
        throw *first_error;
    }

    auto best = candidates.begin();
    bool tie = false;
    if (candidates.size() == 2) {
        const double a = candidates[0].result.chi2;  // negative branch
        const double b = candidates[1].result.chi2;
        tie = std::abs(a - b) <= 1e-9 * std::max(1.0, std::max(a, b));
        if (!tie && b < a) best = candidates.begin() + 1;
    }
    FitResult result = std::move(best->result);
    result.branch = best->sign < 0.0 ? DetuningBranch::negative : DetuningBranch::positive;
    result.branch_tie = tie;
    if (candidates.size() == 2) {
        result.other_branch_chi2 =
            (best == candidates.begin() ? candidates[1] : candidates[0]).result.chi2;
    }
    return result;
}

double chi2_at(const QuadratureSpectrum& traces, const FitSpec& spec, const ParamValues& values) {
    const auto points = collect_points(traces, spec);
    const QuadratureSpectrum m = model_trace(traces, spec, values);
    double chi2 = 0.0;
    for (const auto& pt : points) {
        const double v = pt.quadrature == 1 ? m.v1[pt.index] : m.v2[pt.index];
        const double z = (v - pt.data) / pt.sigma;
        chi2 += z * z;
    }
    return chi2;
}

std::vector<ProfilePoint> profile_identifiability(const QuadratureSpectrum& traces,
                                                  const FitSpec& spec, Param param,
                                                  std::span<const double> grid) {
    if (!contains(spec.float_params, param)) {
        throw Error(ErrorKind::invalid_argument,
                    "profile_identifiability: " + std::string(param_name(param)) +
                        " is not a floated parameter");
    }
    FitSpec pinned = spec;
    pinned.float_params.erase(
        std::find(pinned.float_params.begin(), pinned.float_params.end(), param));
    pinned.initial_guess.erase(param);

    std::vector<ProfilePoint> profile;
    profile.reserve(grid.size());
    for (double value : grid) {
        pinned.fixed_params[param] = value;
        try {
            const FitResult r = fit(traces, pinned);
            profile.push_back({value, r.chi2, true, {}});
            // Warm start the next grid point from this optimum.
            for (Param p : pinned.float_params) {
                const Bounds b = pinned.bounds_for(p);
                const double v = r.values.at(p);
                const double mag = p == Param::omega_d_hz ? std::abs(v) : v;
                if (mag > b.lo && mag < b.hi) pinned.initial_guess[p] = v;
            }
        } catch (const Error& e) {
            profile.push_back({value, std::numeric_limits<double>::quiet_NaN(), false, e.what()});
        }
    }
    return profile;
}

}  // namespace sqzcav
