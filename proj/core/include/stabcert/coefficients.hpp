#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stabcert {

/// How a coefficient model was constructed. ClosedForm models carry exact
/// derivative closures; Sampled models differentiate a table numerically.
enum class CoefficientKind { ClosedForm, Sampled };

/// Time-dependent coefficients of the damped beam-wave operator
///
///   L u = u_tt + a u_t - C(t) u_xx - eps(t) u_xxt
///
/// on x in (0, pi) with zero Dirichlet data. The model is defined on the
/// horizon [t_min, t_max]; evaluation outside raises std::domain_error.
struct CoefficientModel {
    double a = 0.0;

    std::function<double(double)> eps;
    std::function<double(double)> eps_d1;
    std::function<double(double)> eps_d2;
    std::function<double(double)> cc;
    std::function<double(double)> cc_d1;

    CoefficientKind kind = CoefficientKind::ClosedForm;

    double t_min = 0.0;
    double t_max = 50.0;

    /// True when the preset guarantees that the admissibility margins do not
    /// degenerate beyond t_max (monotone or periodic tails). Sampled models
    /// never set it; certified statements then hold on the horizon only.
    bool tail_ok = false;

    /// Exact bounds supplied by presets that know them in closed form.
    /// When absent, consumers fall back to safeguarded grid sampling.
    std::optional<double> eps_inf_exact;
    std::optional<double> eps_sup_exact;
    std::optional<double> cc_inf_exact;

    /// Preset identity for serialization round-trips ("constant", "example1",
    /// "example2", "example3", "sampled"). Empty for ad-hoc models.
    std::string preset;
    std::map<std::string, double> params;

    /// Sample file for kind == Sampled, kept for serialization.
    std::string source_file;
};

/// One-point evaluation of the model and its derivative split.
/// cc_d1_pos is max(Cdot, 0) and cc_d1_neg = cc_d1 - cc_d1_pos, so the two
/// parts recompose exactly and their product is zero.
struct CoefficientBundle {
    double eps = 0.0;
    double eps_d1 = 0.0;
    double eps_d2 = 0.0;
    double cc = 0.0;
    double cc_d1 = 0.0;
    double cc_d1_pos = 0.0;
    double cc_d1_neg = 0.0;
};

/// Result of the admissibility scan. cond_flags[i] reports clause i+1:
///   1: inf C > 0
///   2: inf eps >= 0
///   3: a + inf eps > 0
///   4: C - eps_d1 >= mu (1 + eps) on the grid
///   5: mu eps^2 + mu eps + eps_d2 - (1 + gamma) min(Cdot, 0) > 0 on the grid
/// margin is the smallest slack of clauses 4 and 5 over the grid.
struct AdmissibilityReport {
    double mu = 0.0;
    double eps_inf = 0.0;
    double eps_sup = 0.0;
    double cc_inf = 0.0;
    std::array<bool, 5> cond_flags{false, false, false, false, false};
    double gamma_used = 0.0;
    double margin = 0.0;

    [[nodiscard]] bool all_ok() const {
        for (bool f : cond_flags)
            if (!f) return false;
        return true;
    }
};

/// @brief Evaluate eps, C and their derivatives at time t.
/// @throws std::domain_error when t lies outside [t_min, t_max].
[[nodiscard]] CoefficientBundle eval_bundle(const CoefficientModel& model, double t);

/// @brief Largest decay-rate constant supported by the model on its horizon.
///
/// Returns 0.99 times the sampled infimum of (C - eps_d1) / (1 + eps) over
/// an equispaced grid (`samples` points, endpoints included). A non-positive
/// infimum yields 0.
[[nodiscard]] double infimum_mu(const CoefficientModel& model, int samples = 4096);

/// @brief Scan the five admissibility clauses on an equispaced horizon grid.
///
/// Failures are reported through cond_flags, not raised, so callers can show
/// all of them at once. Clause 5 depends on gamma; run the scan again after
/// the final gamma is known.
[[nodiscard]] AdmissibilityReport check_condi4(const CoefficientModel& model, double gamma,
                                               double mu, int samples = 4096);

/// Horizon bounds used by certificate construction: exact values when the
/// preset provides them, otherwise safeguarded grid estimates (inf scaled by
/// 0.99, sup by 1.01).
struct HorizonBounds {
    double eps_inf = 0.0;
    double eps_sup = 0.0;
    double cc_inf = 0.0;
};
[[nodiscard]] HorizonBounds horizon_bounds(const CoefficientModel& model, int samples = 4096);

/// Preset with slow algebraic stiffness decay: eps = eps0 (1+t)^-nu, C const.
[[nodiscard]] CoefficientModel make_example1(double eps0 = 1.0, double nu = 1.0, double C = 1.2,
                                             double a = 1.0, double t_min = 0.0,
                                             double t_max = 50.0);

/// Preset with growing coefficients: eps = eps0 (1+t)^p, C = C0 (1+t)^q.
[[nodiscard]] CoefficientModel make_example2(double eps0 = 1.0, double C0 = 2.0, double p = 0.5,
                                             double q = 0.5, double a = 1.0, double t_min = 0.0,
                                             double t_max = 50.0);

/// Preset with oscillating stiffness: eps = eps_mean + eps_amp cos(omega t),
/// C = C0 + C1 (1+t)^-q with q > 0.
[[nodiscard]] CoefficientModel make_example3(double eps_mean = 0.7, double eps_amp = 0.3,
                                             double omega = 1.0, double C0 = 2.0, double C1 = 1.0,
                                             double q = 0.5, double a = 1.0, double t_min = 0.0,
                                             double t_max = 50.0);

/// Constant-coefficient preset.
[[nodiscard]] CoefficientModel make_constant(double eps, double C, double a, double t_min = 0.0,
                                             double t_max = 50.0);

/// @brief Build a Sampled model from a CSV table with header `t,eps,C`.
///
/// The time column must be strictly increasing and uniformly spaced (relative
/// tolerance 1e-8). Derivatives use fourth-order central differences inside
/// the table and matching one-sided stencils at the ends; values between
/// nodes are linearly interpolated.
/// @throws config_error on malformed input.
[[nodiscard]] CoefficientModel make_sampled_from_csv(const std::string& path, double a);

/// Same as make_sampled_from_csv but from in-memory columns.
[[nodiscard]] CoefficientModel make_sampled_from_values(std::vector<double> t,
                                                        std::vector<double> eps,
                                                        std::vector<double> C, double a);

/// @brief Rebuild a preset model by name ("constant", "example1", "example2",
/// "example3", "sampled") with the given parameter map; missing parameters
/// take the preset defaults. Used by configuration and serialization code.
/// @throws config_error on an unknown preset name.
[[nodiscard]] CoefficientModel make_preset(const std::string& preset,
                                           const std::map<std::string, double>& params,
                                           double t_min, double t_max,
                                           const std::string& source_file = "");

}  // namespace stabcert
