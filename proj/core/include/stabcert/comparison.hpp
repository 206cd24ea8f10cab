#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stabcert/certificate.hpp"
#include "stabcert/pde_solver.hpp"

namespace stabcert {

/// Scalar comparison problem  y' = -psi(t) y + g1(t,y) + g21(t,y) + g22(t).
/// The g closures must be non-decreasing in their second argument;
/// make_envelope wraps arbitrary closures with a running max to enforce it.
struct EnvelopeProblem {
    TimeFn psi;
    EtaFn g1;
    EtaFn g21;
    TimeFn g22;

    double y0 = 0.0;
    double t0 = 0.0;

    /// First time from which psi stays positive on the sampled horizon
    /// (quiet NaN when it never does).
    double t_bar = 0.0;
    /// Uniform lower bound for psi on [t_bar, horizon] (0 when none).
    double psi0 = 0.0;

    double horizon = 50.0;
    /// Certified bound on int_s^inf of g1(.,eta)+g21(.,eta)+g22 (NaN = none;
    /// claims are then horizon-restricted).
    EtaFn g2_tail;
    bool tail_ok = false;

    bool special_split = true;  // g1(.,0) = g21(.,0) = 0
    bool g_t_only = false;      // g1, g21 constant in eta (enables quadrature cross-check)
};

/// @brief Assemble the comparison problem for a certificate and forcing
/// witnesses: psi from the certificate, g_i(t, eta) = (1+gamma)/2 *
/// witness_i(t, eta/chi0), initial value y0 (normally V at t0).
[[nodiscard]] EnvelopeProblem make_envelope(const Certificate& cert,
                                            const ForcingWitnesses& witnesses, double y0,
                                            double t0, double horizon);

struct EnvelopePoint {
    double t = 0.0;
    double y = 0.0;
};

struct EnvelopeResult {
    std::vector<EnvelopePoint> points;
    bool diverged = false;     // y exceeded 1e12 and was capped
    double diverged_at = 0.0;  // first capped time
    bool clipped = false;      // y dipped below -1e-12 before clipping at 0
    double max_quad_mismatch = 0.0;  // cross-check disagreement (t-only g)
};

/// @brief Integrate the envelope with classical fourth-order Runge-Kutta.
///
/// Negative excursions are clipped at zero; values above 1e12 cap the
/// envelope and flag divergence. When the sources are t-only the integral
/// form (integrating-factor quadrature) is evaluated alongside and the
/// maximum relative mismatch is reported; it must stay within 1e-6 for
/// smooth inputs.
[[nodiscard]] EnvelopeResult integrate_envelope(const EnvelopeProblem& prob, double dt,
                                                double t_end, bool cross_check = false);

/// Quantified bound package produced by the certified-bound routines.
struct BoundBundle {
    double alpha = 0.0;
    double beta = 0.0;        // 3 alpha
    double beta_tilde = 0.0;  // alpha + M1 + M2 (uniform route)
    double M1 = 0.0;
    double M2 = 0.0;
    double s_alpha = 0.0;     // admissible starting time
    double T_estimate = 0.0;  // elapsed attraction time
    double delta_hat = 0.0;   // total-stability threshold
    bool horizon_certified_only = false;
};

/// @brief Starting time s(alpha) after which every envelope with y0 <= alpha
/// stays below beta = 3 alpha.
///
/// s1 scans for the first grid time from which g1(t, 3a)/psi(t) < alpha on
/// the rest of the horizon; s2 for the first grid time whose g2 tail
/// integral is below alpha. Failures raise hypothesis_violation naming the
/// clause. When the sources vanish identically s(alpha) = t_bar.
[[nodiscard]] BoundBundle eventual_bound(const EnvelopeProblem& prob, double alpha,
                                         int samples = 4096);

/// @brief Non-eventual bound via the uniform route:
/// beta_tilde = alpha + sup_{t >= t_bar} g1/psi + int_{t_bar}^inf g2.
/// @throws hypothesis_violation when the sup or the integral is unbounded.
[[nodiscard]] BoundBundle uniform_bound(const EnvelopeProblem& prob, double alpha,
                                        int samples = 4096);

/// @brief Elapsed time T after which envelopes started anywhere past
/// s(alpha) with y0 <= alpha have decayed below rho.
///
/// Uses the frozen majorant z' = -psi z + g1(t, beta) + g2(t, beta). The
/// returned T combines the uniform decay of the initial value with the
/// times at which the frozen sources have drained below rho/6 fractions;
/// each piece is conservative, so T is an upper estimate. rho >= beta
/// returns T = 0. When the horizon cannot certify the decay the bundle is
/// flagged horizon_certified_only and T is the horizon length.
[[nodiscard]] BoundBundle attraction_time(const EnvelopeProblem& prob, double rho, double alpha,
                                          int samples = 4096);

/// @brief Perturbation threshold delta_hat(beta) by bisection.
///
/// Certifies that every envelope with y0 < delta and persistent-source
/// budget delta (scaled reference g22, a front-loaded pulse of the same
/// mass, and the pointwise-capped variant) stays below beta. The returned
/// delta_hat is the largest certified dyadic fraction of beta after `iters`
/// bisection steps.
[[nodiscard]] BoundBundle total_stability_bound(const EnvelopeProblem& prob, double beta,
                                                int iters = 20);

/// One verification verdict. status is "PASS", "FAIL" or "INCONCLUSIVE";
/// first_violation_t is NaN when there is none.
struct CheckVerdict {
    std::string check;
    std::string status;
    double first_violation_t = 0.0;
    double pass_fraction = 1.0;
    std::string note;
};

/// @brief Compare a simulated trajectory against its certificate and
/// envelope: the two-sided energy sandwich chi0 d^2 <= V <= gamma G d^2
/// (relative slack 1e-8), the finite-difference slope inequality
/// dV/dt <= -psi V + g1 + g2 (tolerance 1e-2 (1 + |rhs|)), and envelope
/// domination V <= y (1 + 5e-2). Samples where the envelope was capped
/// count as dominated.
[[nodiscard]] std::vector<CheckVerdict> verify_against_envelope(const Trajectory& traj,
                                                                const Certificate& cert,
                                                                const EnvelopeProblem& prob);

/// @brief Serialize verdicts as a JSON array of
/// {"check":..., "status":..., "first_violation_t":...} objects.
[[nodiscard]] std::string verdicts_to_json(const std::vector<CheckVerdict>& verdicts);

}  // namespace stabcert
