#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stabcert/certificate.hpp"
#include "stabcert/coefficients.hpp"
#include "stabcert/forcing.hpp"

namespace stabcert {

/// Time-dependent boundary data for one endpoint: value and first two
/// derivatives. Zero closures mean homogeneous data.
struct BoundaryEndpoint {
    TimeFn value;
    TimeFn d1;
    TimeFn d2;
    bool zero = true;
};

/// Full problem description before boundary reduction:
///   u_tt + a u_t - C(t) u_xx - eps(t) u_xxt = f(x,t,u,u_x,u_t)
/// on (0,pi) with data w0(t) at x=0, wpi(t) at x=pi, initial values
/// u0(x), u1(x), starting at t0.
struct ProblemSpec {
    CoefficientModel model;
    ForcingSpec forcing;
    BoundaryEndpoint w0;
    BoundaryEndpoint wpi;
    std::function<double(double)> u0;
    std::function<double(double)> u1;
    double t0 = 0.0;
};

/// Linear-in-x lift of the boundary data, p(x,t) = (x/pi) wpi + (1 - x/pi) w0.
/// p_xx vanishes, so Lp = p_tt + a p_t.
struct BoundaryLift {
    SpacetimeField p;
    bool zero = true;
};

/// @brief Build the lift for a problem's boundary data.
[[nodiscard]] BoundaryLift lift_boundary(const ProblemSpec& spec);

/// @brief Reduce a problem to zero Dirichlet data via its boundary lift.
///
/// Checks the corner compatibility u0(0) = w0(t0), u0(pi) = wpi(t0),
/// u1(0) = w0'(t0), u1(pi) = wpi'(t0) to absolute tolerance 1e-10 and
/// returns the shifted problem with composed forcing.
/// @throws std::invalid_argument when the corners are inconsistent.
[[nodiscard]] ProblemSpec reduce_boundary(const ProblemSpec& spec, double bigB,
                                          double pt_sup = 0.0,
                                          const SpacetimeField* k = nullptr);

struct SolverOptions {
    int N = 200;
    double dt = 1e-3;
    double t_end = 50.0;
    int output_stride = 100;
    /// Fixed-point corrector sweeps on the midpoint forcing (0 = predictor only).
    int corrector_iters = 0;
    double corrector_tol = 1e-10;
};

/// One stored diagnostic row. y_envelope is NaN until a comparison envelope
/// is attached.
struct TrajectorySample {
    double t = 0.0;
    double d2 = 0.0;
    double V = 0.0;
    double psi = 0.0;
    double y_envelope = 0.0;
    double max_u = 0.0;
    double residual = 0.0;
};

struct Trajectory {
    int N = 0;
    double h = 0.0;
    double dt = 0.0;
    int output_stride = 1;
    std::vector<EnergyState> states;
    std::vector<TrajectorySample> samples;
    bool diverged = false;
    double last_valid_t = 0.0;
};

/// @brief One implicit-midpoint step of the first-order system.
///
/// The update solves a symmetric tridiagonal system for the new velocity;
/// stiffness and damping coefficients are frozen at the half step and the
/// forcing is evaluated at the half step on a predictor state.
[[nodiscard]] EnergyState step_imex(const EnergyState& state, const ProblemSpec& spec, double dt,
                                    int corrector_iters = 0, double corrector_tol = 1e-10);

/// @brief March the reduced problem and record diagnostics every
/// output_stride steps (certificate diagnostics when cert is given).
///
/// Divergence (non-finite values or d^2 > 1e12) stops the march and flags
/// the trajectory. Requires N >= 16.
[[nodiscard]] Trajectory simulate(const ProblemSpec& spec, const SolverOptions& opts,
                                  const Certificate* cert = nullptr);

/// Result of the constant-stiffness change of variables. The transformed
/// problem has eps = eps_ref, C = 1, a = 0 on the rescaled time axis.
struct TransformResult {
    ProblemSpec transformed;
    double eps_ref = 0.0;
    double tau0 = 0.0;
    double tau_end = 0.0;
    std::function<double(double)> tau_of_t;
    std::function<double(double)> t_of_tau;
    std::function<double(double)> b_of_tau;
    std::function<double(double)> b_d1_of_tau;
};

/// @brief Rescale time by tau = (1/eps_ref) int_0^t eps and gauge the state
/// by b(tau) so the equation becomes u_tt - u_xx - eps_ref u_xxt = f'.
///
/// Requires eps > 0 on the horizon. eps_ref defaults to eps at t = 0 when
/// passed as 0.
/// @throws std::domain_error when inf eps <= 0.
[[nodiscard]] TransformResult transform_constant_eps(const ProblemSpec& spec, double t_end,
                                                     double eps_ref = 0.0);

/// @brief Write samples as CSV with header `t,d2,V,psi,y_envelope,max_u,residual`.
/// Values are printed with %.17g; output is byte-stable for identical inputs.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

/// @brief Read back a CSV produced by write_trajectory_csv.
/// @throws config_error on a malformed file or wrong header.
[[nodiscard]] std::vector<TrajectorySample> read_trajectory_csv(const std::string& path);

}  // namespace stabcert
