#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sqzcav/cavity.hpp"
#include "sqzcav/two_photon.hpp"

namespace sqzcav {

/// Model parameters the estimator knows about. `r1`/`r1r2r3` are the power
/// coordinates of `sqrt_r1`/`sqrt_r1r2r3`; a spec uses one of each pair.
enum class Param {
    sqrt_r1,
    sqrt_r1r2r3,
    r1,
    r1r2r3,
    omega_d_hz,
    fsr_hz,
    pump_x,
    opo_linewidth_hz,
    escape_purity,
    eta_c,
};

std::string_view param_name(Param p) noexcept;
std::optional<Param> parse_param(std::string_view name) noexcept;

/// Box constraint. For omega_d_hz the bounds apply to |omega_d|; the sign is
/// handled by the branch search.
struct Bounds {
    double lo;
    double hi;
};

Bounds default_bounds(Param p) noexcept;

struct FrequencyMask {
    double lo_hz;
    double hi_hz;

    bool contains(double f_hz) const noexcept { return f_hz >= lo_hz && f_hz <= hi_hz; }
};

enum class QuadratureSelection { first, second, both };

/// Everything the model needs that is never a fit parameter.
struct ModelContext {
    double carrier_hz = kSpeedOfLight / 1064e-9;
    double input_mirror_loss = 0.0;  // T1 = 1 - R1 - L1
    double eta_m = 0.0;
    /// Supplies the squeezing kind, and the values of a tabulated or
    /// constant model. OPO parameters come from the parameter set.
    InputSqueezingModel squeezing = InputSqueezingModel::constant(1.0, 1.0);
    double rbw_hz = 0.0;  // 0 disables smoothing of the model
};

struct FitOptions {
    int max_iterations = 500;
    double rel_chi2_tol = 1e-10;
    double step_tol = 1e-12;
    /// Condition threshold on the scaled Jacobian below which the fit is
    /// declared unidentifiable.
    double singular_tol = 1e-9;
    /// Also unidentifiable when the weakest direction's 1-sigma width exceeds
    /// the parameters' natural scale (bound width, or magnitude when unbounded).
    /// Ignored with unit weights.
    double min_scaled_sensitivity = 1.0;
    bool try_both_signs = true;
    bool unit_weights = false;
    QuadratureSelection quadratures = QuadratureSelection::both;
};

using ParamValues = std::map<Param, double>;

struct FitSpec {
    std::vector<Param> float_params;
    ParamValues fixed_params;
    ParamValues initial_guess;
    std::map<Param, Bounds> bounds;  // overrides of default_bounds
    std::vector<FrequencyMask> masks;
    ModelContext context;
    FitOptions options;

    Bounds bounds_for(Param p) const;
    /// Parameters that must be either floated or fixed.
    std::vector<Param> required_params() const;
    /// Throws Error(invalid_argument).
    void validate() const;
};

/// Model objects for one parameter point. Throws for nonphysical values.
struct ModelPoint {
    RingCavity cavity;
    Detuning detuning;
    InputSqueezingModel squeezing;
    DetectionModel detection;
};

ModelPoint build_model(const ParamValues& values, const ModelContext& context);

struct DerivedValue {
    double value = 0.0;
    double sigma = 0.0;
};

struct DerivedParameters {
    DerivedValue gamma_hz;
    DerivedValue q_factor;
    DerivedValue finesse;
};

/// Linewidth, Q and finesse at `values`, with first-order uncertainties from
/// the covariance of `floated` (same order as the covariance rows).
DerivedParameters derive_parameters(const ParamValues& values, std::span<const Param> floated,
                                    const Eigen::MatrixXd& covariance,
                                    const ModelContext& context);

enum class DetuningBranch { negative, positive, fixed };

std::string_view to_string(DetuningBranch b) noexcept;

struct Residual {
    double freq_hz;
    int quadrature;
    double data;
    double model;
    double weighted;  // (model - data) / sigma
};

struct FitResult {
    std::vector<Param> float_params;
    std::vector<double> estimates;
    Eigen::MatrixXd covariance;
    ParamValues values;  // floated and fixed, at the optimum
    DerivedParameters derived;

    double chi2 = 0.0;
    double chi2_reduced = 0.0;
    std::size_t n_points = 0;
    std::size_t dof = 0;
    std::vector<Residual> residuals;

    bool converged = false;
    int iterations = 0;
    std::string stop_reason;

    DetuningBranch branch = DetuningBranch::fixed;
    std::optional<double> other_branch_chi2;
    bool branch_tie = false;

    double sigma(Param p) const;
    Eigen::MatrixXd correlation() const;
};

/// Weighted damped least-squares fit of the reflected-variance model to one
/// or both quadratures. Throws Error(fit_not_converged), UnidentifiableError,
/// or Error(invalid_argument) for a bad spec.
FitResult fit(const QuadratureSpectrum& traces, const FitSpec& spec);

/// chi^2 of the model at a full parameter set against the traces.
double chi2_at(const QuadratureSpectrum& traces, const FitSpec& spec, const ParamValues& values);

struct ProfilePoint {
    double value;
    double chi2;
    bool ok;
    std::string error;
};

/// chi^2 with `param` pinned at each grid value and the remaining floated
/// parameters re-optimized.
std::vector<ProfilePoint> profile_identifiability(const QuadratureSpectrum& traces,
                                                  const FitSpec& spec, Param param,
                                                  std::span<const double> grid);

}  // namespace sqzcav
