#pragma once

#include <functional>
#include <map>
#include <string>

#include "stabcert/coefficients.hpp"

namespace stabcert {

using TimeFn = std::function<double(double)>;
using EtaFn = std::function<double(double, double)>;      // (t, eta)
using FieldFn = std::function<double(double, double)>;    // (x, t)
using ForcingFn = std::function<double(double, double, double, double, double)>;  // (x,t,u,ux,ut)

/// Scalar field on [0,pi] x [t_min,t_max] with the derivatives the witness
/// quadratures need. Used for boundary lifts and additive perturbations.
struct SpacetimeField {
    FieldFn value;
    FieldFn dt1;
    FieldFn dt2;
    FieldFn dx1;
    bool zero = true;

    static SpacetimeField zero_field();
};

enum class ForcingKind { Zero, SineGordonJJ, NonAnalytic, Lipschitz, PulseTrain, Custom };

/// Growth bounds certifying the forcing against the energy norm:
///
///   B int f^2 dx  <=  gt(t) d^2 + g1(t, d^2) + g21(t, d^2) + g22(t).
///
/// gt multiplies d^2 directly and feeds the decay-rate margin; g1 and g21
/// vanish at eta = 0 when special_split is set; g22 depends on time only.
struct ForcingWitnesses {
    TimeFn gt;
    EtaFn g1;
    EtaFn g21;
    TimeFn g22;

    /// (s, eta) -> certified bound on the integral of g1(., eta) + g21(., eta)
    /// + g22 over [s, infinity). Returns NaN when no tail bound is available;
    /// consumers then restrict claims to the sampled horizon.
    EtaFn g2_tail;

    bool null_preserving = true;
    bool special_split = true;
    /// Set when only the time-uniform comparison route applies (nonzero
    /// reference trajectory in the non-analytic case).
    bool uniform_route_only = false;
};

/// Forcing term of the reduced problem. The closures in `witnesses` must be
/// sound for the f that eval_f computes; shipped kinds construct them,
/// Custom callers supply their own (or none, leaving simulation-only mode).
struct ForcingSpec {
    ForcingKind kind = ForcingKind::Zero;

    // SineGordonJJ: f = b_sg sin(u) - gamma_bias - beta_sg ut cos(u) - lambda_x ux
    double b_sg = 0.0;
    double gamma_bias = 0.0;
    double beta_sg = 0.0;
    double lambda_x = 0.0;

    // NonAnalytic: f = h0(t) |u|^omega u;  Lipschitz: f = h0(t) shape(u)
    TimeFn h0;
    double h0_const = 0.0;
    double omega = 1.0;
    std::string shape = "sin";
    bool eps_branch = false;  // NonAnalytic: use the 1/eps^(2w+2) pointwise bound

    // PulseTrain: f = r(t) sin(u) with r^2 a tent sequence centered at integers
    double r0 = 0.0;
    double alpha_tri = 1.0;
    double beta_tri = 1.0;

    ForcingFn custom_f;

    /// Set by make_reduced_forcing when a lift or perturbation is composed
    /// in; eval_f dispatches to it when present.
    ForcingFn composed_f;

    ForcingWitnesses witnesses;

    /// Extra parameters kept for serialization round-trips.
    std::map<std::string, double> params;
};

/// @brief Evaluate the forcing at one point of the reduced problem.
[[nodiscard]] double eval_f(const ForcingSpec& spec, double x, double t, double u, double ux,
                            double ut);

/// @brief Tent-train squared amplitude r^2(t).
///
/// Isosceles tents centered at integer n >= 1 with base 1/n^alpha and peak
/// 2 r0^2 n^beta, zero elsewhere. The tent over n has area r0^2 n^(beta-alpha).
[[nodiscard]] double pulse_train_r2(double r0, double alpha_tri, double beta_tri, double t);

/// @brief Witnesses for a Lipschitz forcing with time-dependent constant h0.
///
/// gt = 7 h0^2; g22 integrates the lift and perturbation terms
/// 7 { h0^2 (p^2 + p_x^2 + p_t^2) + 3 p_tt^2 + 3 (a p_t)^2 + 3 k^2 }.
/// g1 and g21 vanish identically.
[[nodiscard]] ForcingWitnesses witness_lipschitz(TimeFn h0, const SpacetimeField& p,
                                                 const SpacetimeField& k, double a);

/// @brief Witnesses for f = h0(t) |u|^omega u with zero reference state.
///
/// g1(t, eta) = (B/2) h0^2 (2 sqrt(eta))^(2w+2) * pi          (pointwise branch)
///            = (B/2) h0^2 (2 sqrt(eta))^(2w+2) * pi^(3w+4) / eps^(2w+2)  (eps branch)
/// g22(t) = 2B int (h0 2^w |p|^(w+1) + |Lp| + |k|)^2 dx.
/// The eps branch requires inf eps > 0 on the horizon.
/// @throws inadmissible_error when the eps branch is requested with inf eps = 0.
[[nodiscard]] ForcingWitnesses witness_nonanalytic(TimeFn h0, double omega, bool eps_branch,
                                                   const CoefficientModel& model, double bigB,
                                                   const SpacetimeField& p,
                                                   const SpacetimeField& k, double a);

/// @brief Non-analytic witnesses against a nonzero reference state.
///
/// phi_abs_pow(t) must return int (h0 2^w |phi + p|^(w+1) + h0 |phi|^(w+1)
/// + |Lp| + |k|)^2 dx along the precomputed reference. Only the
/// time-uniform comparison route applies; the result flags it.
[[nodiscard]] ForcingWitnesses witness_nonanalytic_reference(TimeFn h0, double omega,
                                                             bool eps_branch,
                                                             const CoefficientModel& model,
                                                             double bigB, TimeFn phi_term_sq);

/// @brief Witnesses for the Josephson junction forcing.
///
/// gt = 6B max((b_sg + beta_sg Pt)^2, beta_sg^2, lambda_x^2) where Pt bounds
/// |p_t| on the horizon; g22(t) = 2B int j^2 dx with j = f(x,t,0,0,0), plus
/// the constant bias block when gamma_bias is nonzero.
[[nodiscard]] ForcingWitnesses witness_sine_gordon(double b_sg, double gamma_bias, double beta_sg,
                                                   double lambda_x, double bigB,
                                                   const SpacetimeField& p,
                                                   const SpacetimeField& k, double a,
                                                   double pt_sup);

/// @brief Witnesses for the tent-train forcing f = r(t) sin(u).
///
/// Unperturbed: gt = pi B r^2(t), everything else zero. With perturbations
/// the state part uses 2B r^2 and g22(t) = 2B int j^2 dx.
[[nodiscard]] ForcingWitnesses witness_pulse_train(double r0, double alpha_tri, double beta_tri,
                                                   double bigB, const SpacetimeField& p,
                                                   const SpacetimeField& k, double a);

/// @brief Compose a forcing with a boundary lift and an additive perturbation.
///
/// Produces the forcing of the shifted problem,
/// f'(x,t,U) = f(x, t, u + p, ux + p_x, ut + p_t) - (p_tt + a p_t) + k,
/// and rebuilds the witnesses for the shifted state (using bigB where the
/// kind needs it; the non-analytic kind also needs the coefficient model).
/// With zero p and k only the witnesses are attached.
[[nodiscard]] ForcingSpec make_reduced_forcing(const ForcingSpec& raw, const SpacetimeField& p,
                                               const SpacetimeField& k, double a, double bigB,
                                               double pt_sup = 0.0,
                                               const CoefficientModel* model = nullptr);

/// @brief The inhomogeneity j(x,t) = f(x,t,0,0,0) of a reduced forcing.
[[nodiscard]] double eval_j(const ForcingSpec& reduced, double x, double t);

}  // namespace stabcert
