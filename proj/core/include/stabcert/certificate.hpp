#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stabcert/coefficients.hpp"

namespace stabcert {

/// Interior samples of a state (u, u_t) on the uniform grid x_j = j h,
/// j = 1..N, h = pi/(N+1). Boundary values are identically zero and are not
/// stored; difference operators use zero ghost nodes.
struct EnergyState {
    double h = 0.0;
    double t = 0.0;
    std::vector<double> u;
    std::vector<double> v;

    [[nodiscard]] int n() const { return static_cast<int>(u.size()); }

    /// Sample closures u0(x), u1(x) on the interior grid with N points.
    static EnergyState from_closures(int N, double t, const std::function<double(double)>& u0,
                                     const std::function<double(double)>& u1);
};

/// Second difference with zero ghost nodes, (w[j-1] - 2 w[j] + w[j+1]) / h^2.
[[nodiscard]] double second_diff(const std::vector<double>& w, int j, double h);

/// Trapezoid-exact quadratures used by the energy functionals: node sums
/// h * sum_j w_j^2 and the edge gradient sum h * sum_{edges} ((w_{j+1}-w_j)/h)^2
/// including both boundary edges.
[[nodiscard]] double node_sq_sum(const std::vector<double>& w, double h);
[[nodiscard]] double edge_grad_sq_sum(const std::vector<double>& w, double h);

/// Smallest eigenvalue of the discrete -d^2/dx^2 with step h = pi/(N+1):
/// (4/h^2) sin^2(h/2). It is the sharp constant in the discrete inequality
/// (edge gradient sum) >= lambda1 * (node sum), with equality on sin(x_j).
[[nodiscard]] double poincare_min_eigenvalue(int N);

/// @brief Squared graph norm d^2 = int eps^2 u_xx^2 + u_x^2 + u^2 + v^2 dx
/// evaluated with the discrete quadratures above.
[[nodiscard]] double d_norm_sq(const EnergyState& state, double eps_at_t);

/// One violated pointwise bound (see pointwise_bounds_check).
struct PointwiseViolation {
    std::string bound;
    int node = 0;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct PointwiseReport {
    bool ok = true;
    std::vector<PointwiseViolation> violations;
};

/// @brief Check the sampled analogues of the sup-norm bounds
/// |u| <= d, eps |u| <= pi^(3/2) d, eps |u_x| <= pi^(1/2) d
/// with relative tolerance 1e-8 (gradients at edge midpoints).
[[nodiscard]] PointwiseReport pointwise_bounds_check(const EnergyState& state, double eps_at_t);

/// Stability certificate for a coefficient model: the scalar parameters and
/// the derived constants of the energy estimate, plus the forcing's d^2-slope
/// bound gt_bound used by the decay-rate function.
struct Certificate {
    double lambda = 0.5;
    double theta = 0.0;
    double gamma = 0.0;
    double mu = 0.0;

    double chi0 = 0.0;
    double chi1 = 0.0;
    double bigB = 0.0;

    double eps_inf = 0.0;
    double eps_sup = 0.0;
    double cc_inf = 0.0;

    CoefficientModel model;

    std::function<double(double)> gt_bound;  // defaults to zero
    /// Descriptor for serialization of gt_bound ("zero", "const",
    /// "lipschitz", "sine_gordon", "pulse_train") with its parameters.
    std::string gt_kind = "zero";
    std::map<std::string, double> gt_params;
};

/// Pointwise pieces of the decay rate at time t:
///   G   = C - eps_d1/2 + 1
///   J   = half the min of the three damping margins (see implementation)
///   b   = (chi1 + J) / (gamma G)
///   g   = (1+gamma)/(2 chi0) * (max(Cdot,0) + gt(t))
///   psi = b - g.
struct PsiBundle {
    double G = 0.0;
    double J = 0.0;
    double b = 0.0;
    double g = 0.0;
    double psi = 0.0;
};

/// @brief Choose (lambda, theta, gamma) for the model at decay constant mu
/// and freeze the derived constants.
///
/// lambda = 1/2 when a >= 0, otherwise the midpoint of (-a/eps_inf, 1);
/// theta exceeds the critical theta1 = max(2a, -a/(1-lambda)) by
/// max(0.1, 0.1 |theta1|); gamma is the closed-form threshold gamma1. The
/// clause-5 scan is re-run at the chosen gamma.
/// @throws inadmissible_error when a + eps_inf <= 0 (damping clause) or the
/// re-scan fails.
[[nodiscard]] Certificate select_parameters(const CoefficientModel& model, double mu);

/// @brief Freeze a certificate at caller-chosen parameters.
///
/// Validates the same admissibility clauses as select_parameters, that
/// lambda lies in (0,1) with a + lambda inf eps > 0, that theta reaches the
/// critical value, and that gamma reaches its closed-form threshold.
/// @throws inadmissible_error on any violation.
[[nodiscard]] Certificate make_certificate(const CoefficientModel& model, double mu, double lambda,
                                           double theta, double gamma);

/// @brief Evaluate the decay-rate split at time t.
[[nodiscard]] PsiBundle psi_functions(const Certificate& cert, double t);

/// @brief Energy functional of the certificate,
/// V = int 1/2 { gamma v^2 + (eps u_xx - v)^2
///             + [C (1+gamma) - eps_d1 + eps (a+theta)] u_x^2
///             + a theta u^2 + 2 theta u v } dx.
[[nodiscard]] double liapunov_V(const EnergyState& state, const Certificate& cert);

/// Upper sandwich factor: V <= gamma G(t) d^2 with G from psi_functions.
[[nodiscard]] double sandwich_upper_factor(const Certificate& cert, double t);

enum class CertObjective { MaxInfPsi, MaxChi0 };

/// @brief Deterministic coordinate search over (lambda, theta, gamma)
/// maximizing either the sampled infimum of psi or chi0. The default
/// selection is always a candidate, so the result never scores below it.
[[nodiscard]] Certificate optimize_certificate(const CoefficientModel& model, double mu,
                                               CertObjective objective);

/// @brief Serialize the certificate (schema field "cert_v": 1).
[[nodiscard]] std::string certificate_to_json(const Certificate& cert);

/// @brief Rebuild a certificate from JSON produced by certificate_to_json.
///
/// The coefficient model is reconstructed from its stored preset; gt_bound
/// is rebuilt from the stored descriptor.
/// @throws config_error on schema mismatch (wrong cert_v, missing fields).
[[nodiscard]] Certificate certificate_from_json(const std::string& doc);

}  // namespace stabcert
