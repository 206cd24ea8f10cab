#include "stabcert/pde_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "stabcert/errors.hpp"

namespace stabcert {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDivergenceCap = 1e12;

double end_value(const BoundaryEndpoint& e, double t) { return e.value ? e.value(t) : 0.0; }
double end_d1(const BoundaryEndpoint& e, double t) { return e.d1 ? e.d1(t) : 0.0; }
double end_d2(const BoundaryEndpoint& e, double t) { return e.d2 ? e.d2(t) : 0.0; }

/// Scratch buffers reused across steps.
struct Workspace {
    std::vector<double> d2u;
    std::vector<double> d2v;
    std::vector<double> u_pred;
    std::vector<double> v_pred;
    std::vector<double> f_half;
    std::vector<double> rhs;
    std::vector<double> cp;  // Thomas forward coefficients

    explicit Workspace(int n)
        : d2u(n), d2v(n), u_pred(n), v_pred(n), f_half(n), rhs(n), cp(n) {}
};

void apply_second_diff(const std::vector<double>& w, std::vector<double>& out, double h) {
    const int n = static_cast<int>(w.size());
    const double inv_h2 = 1.0 / (h * h);
    for (int j = 0; j < n; ++j) {
        const double left = j > 0 ? w[j - 1] : 0.0;
        const double right = j + 1 < n ? w[j + 1] : 0.0;
        out[j] = (left - 2.0 * w[j] + right) * inv_h2;
    }
}

/// Solve (diag, off, off) tridiagonal system in place; rhs becomes the solution.
void thomas_const(double diag, double off, std::vector<double>& rhs, std::vector<double>& cp) {
    const int n = static_cast<int>(rhs.size());
    double denom = diag;
    cp[0] = off / denom;
    rhs[0] /= denom;
    for (int i = 1; i < n; ++i) {
        denom = diag - off * cp[i - 1];
        cp[i] = off / denom;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
    }
    for (int i = n - 2; i >= 0; --i) rhs[i] -= cp[i] * rhs[i + 1];
}

double centered_gradient(const std::vector<double>& w, int j, double h) {
    const int n = static_cast<int>(w.size());
    const double left = j > 0 ? w[j - 1] : 0.0;
    const double right = j + 1 < n ? w[j + 1] : 0.0;
    return (right - left) / (2.0 * h);
}

/// One implicit-midpoint update. Returns the max-norm residual of the linear
/// solve. The state is advanced in place; time is advanced by the caller.
double step_core(EnergyState& s, const ProblemSpec& spec, double dt, Workspace& ws,
                 int corrector_iters, double corrector_tol) {
    const int n = s.n();
    const double h = s.h;
    const double a = spec.model.a;
    const double t_half = s.t + 0.5 * dt;

    const double eps_n = spec.model.eps(s.t);
    const double cc_n = spec.model.cc(s.t);
    const double eps_h = spec.model.eps(t_half);
    const double cc_h = spec.model.cc(t_half);

    apply_second_diff(s.u, ws.d2u, h);
    apply_second_diff(s.v, ws.d2v, h);

    // Half-step predictor for the forcing argument.
    const bool has_forcing = spec.forcing.kind != ForcingKind::Zero || spec.forcing.composed_f;
    if (has_forcing) {
        for (int j = 0; j < n; ++j) {
            const double x = (j + 1) * h;
            const double f_n = eval_f(spec.forcing, x, s.t, s.u[j],
                                      centered_gradient(s.u, j, h), s.v[j]);
            ws.u_pred[j] = s.u[j] + 0.5 * dt * s.v[j];
            ws.v_pred[j] =
                s.v[j] + 0.5 * dt * (-a * s.v[j] + cc_n * ws.d2u[j] + eps_n * ws.d2v[j] + f_n);
        }
        for (int j = 0; j < n; ++j) {
            const double x = (j + 1) * h;
            ws.f_half[j] = eval_f(spec.forcing, x, t_half, ws.u_pred[j],
                                  centered_gradient(ws.u_pred, j, h), ws.v_pred[j]);
        }
    } else {
        std::fill(ws.f_half.begin(), ws.f_half.end(), 0.0);
    }

    const double sigma = 0.5 * dt * eps_h + 0.25 * dt * dt * cc_h;
    const double diag = 1.0 + 0.5 * dt * a + 2.0 * sigma / (h * h);
    const double off = -sigma / (h * h);

    auto assemble_rhs = [&]() {
        for (int j = 0; j < n; ++j)
            ws.rhs[j] = (1.0 - 0.5 * dt * a) * s.v[j] + sigma * ws.d2v[j] + dt * cc_h * ws.d2u[j] +
                        dt * ws.f_half[j];
    };

    assemble_rhs();
    thomas_const(diag, off, ws.rhs, ws.cp);
    // ws.rhs now holds v^{n+1}.

    for (int it = 0; it < corrector_iters && has_forcing; ++it) {
        // Re-evaluate the forcing at the midpoint of the current iterate.
        double change = 0.0;
        for (int j = 0; j < n; ++j) {
            ws.u_pred[j] = s.u[j] + 0.25 * dt * (s.v[j] + ws.rhs[j]);
            ws.v_pred[j] = 0.5 * (s.v[j] + ws.rhs[j]);
        }
        for (int j = 0; j < n; ++j) {
            const double x = (j + 1) * h;
            const double f_new = eval_f(spec.forcing, x, t_half, ws.u_pred[j],
                                        centered_gradient(ws.u_pred, j, h), ws.v_pred[j]);
            change = std::max(change, std::abs(f_new - ws.f_half[j]));
            ws.f_half[j] = f_new;
        }
        assemble_rhs();
        thomas_const(diag, off, ws.rhs, ws.cp);
        if (change < corrector_tol) break;
    }

    // Residual of the linear system, then the state update.
    double residual = 0.0;
    {
        // Recompute A v_new - rhs with a fresh rhs assembly.
        std::vector<double>& vnew = ws.rhs;
        for (int j = 0; j < n; ++j) {
            const double left = j > 0 ? vnew[j - 1] : 0.0;
            const double right = j + 1 < n ? vnew[j + 1] : 0.0;
            const double av = diag * vnew[j] + off * (left + right);
            const double rhs_j = (1.0 - 0.5 * dt * a) * s.v[j] + sigma * ws.d2v[j] +
                                 dt * cc_h * ws.d2u[j] + dt * ws.f_half[j];
            residual = std::max(residual, std::abs(av - rhs_j));
        }
    }

    for (int j = 0; j < n; ++j) {
        const double v_new = ws.rhs[j];
        s.u[j] += 0.5 * dt * (s.v[j] + v_new);
        s.v[j] = v_new;
    }
    return residual;
}

void check_solvable(const ProblemSpec& spec, double dt) {
    if (1.0 + 0.5 * dt * spec.model.a <= 0.0)
        throw std::invalid_argument("time step too large for the negative damping constant");
}

}  // namespace

BoundaryLift lift_boundary(const ProblemSpec& spec) {
    BoundaryLift lift;
    if (spec.w0.zero && spec.wpi.zero) {
        lift.p = SpacetimeField::zero_field();
        lift.zero = true;
        return lift;
    }
    const BoundaryEndpoint w0 = spec.w0;
    const BoundaryEndpoint wpi = spec.wpi;
    lift.zero = false;
    lift.p.zero = false;
    lift.p.value = [w0, wpi](double x, double t) {
        return (x / kPi) * end_value(wpi, t) + (1.0 - x / kPi) * end_value(w0, t);
    };
    lift.p.dt1 = [w0, wpi](double x, double t) {
        return (x / kPi) * end_d1(wpi, t) + (1.0 - x / kPi) * end_d1(w0, t);
    };
    lift.p.dt2 = [w0, wpi](double x, double t) {
        return (x / kPi) * end_d2(wpi, t) + (1.0 - x / kPi) * end_d2(w0, t);
    };
    lift.p.dx1 = [w0, wpi](double, double t) {
        return (end_value(wpi, t) - end_value(w0, t)) / kPi;
    };
    return lift;
}

ProblemSpec reduce_boundary(const ProblemSpec& spec, double bigB, double pt_sup,
                            const SpacetimeField* k) {
    const BoundaryLift lift = lift_boundary(spec);

    // Corner compatibility between the initial data and the boundary data.
    const double t0 = spec.t0;
    auto u0 = spec.u0 ? spec.u0 : [](double) { return 0.0; };
    auto u1 = spec.u1 ? spec.u1 : [](double) { return 0.0; };
    const double tol = 1e-10;
    const double c00 = u0(0.0) - end_value(spec.w0, t0);
    const double c0p = u0(kPi) - end_value(spec.wpi, t0);
    const double c10 = u1(0.0) - end_d1(spec.w0, t0);
    const double c1p = u1(kPi) - end_d1(spec.wpi, t0);
    if (std::abs(c00) > tol || std::abs(c0p) > tol || std::abs(c10) > tol || std::abs(c1p) > tol) {
        std::ostringstream msg;
        msg << "initial data is incompatible with the boundary data at the corners: "
            << "defects (" << c00 << ", " << c0p << ", " << c10 << ", " << c1p << ")";
        throw std::invalid_argument(msg.str());
    }

    ProblemSpec reduced = spec;
    reduced.forcing = make_reduced_forcing(spec.forcing, lift.p,
                                           k ? *k : SpacetimeField::zero_field(), spec.model.a,
                                           bigB, pt_sup, &spec.model);
    if (!lift.zero) {
        const SpacetimeField p = lift.p;
        reduced.u0 = [u0, p, t0](double x) { return u0(x) - p.value(x, t0); };
        reduced.u1 = [u1, p, t0](double x) { return u1(x) - p.dt1(x, t0); };
    }
    BoundaryEndpoint zero_end;
    zero_end.zero = true;
    reduced.w0 = zero_end;
    reduced.wpi = zero_end;
    return reduced;
}

EnergyState step_imex(const EnergyState& state, const ProblemSpec& spec, double dt,
                      int corrector_iters, double corrector_tol) {
    check_solvable(spec, dt);
    EnergyState next = state;
    Workspace ws(state.n());
    step_core(next, spec, dt, ws, corrector_iters, corrector_tol);
    next.t = state.t + dt;
    return next;
}

Trajectory simulate(const ProblemSpec& spec, const SolverOptions& opts, const Certificate* cert) {
    if (opts.N < 16) throw std::invalid_argument("simulate needs N >= 16");
    if (!(opts.dt > 0.0)) throw std::invalid_argument("simulate needs dt > 0");
    if (!(opts.t_end > spec.t0)) throw std::invalid_argument("simulate needs t_end > t0");
    if (opts.output_stride < 1) throw std::invalid_argument("output stride must be positive");
    if (!spec.w0.zero || !spec.wpi.zero)
        throw std::invalid_argument("simulate expects a reduced problem (zero boundary data)");
    check_solvable(spec, opts.dt);

    Trajectory traj;
    traj.N = opts.N;
    traj.h = kPi / (opts.N + 1);
    traj.dt = opts.dt;
    traj.output_stride = opts.output_stride;

    EnergyState state = EnergyState::from_closures(opts.N, spec.t0, spec.u0, spec.u1);
    Workspace ws(opts.N);

    const double span = opts.t_end - spec.t0;
    const auto n_steps = static_cast<long>(std::ceil(span / opts.dt - 1e-12));

    double residual = 0.0;
    auto record = [&](const EnergyState& s) {
        const double eps_t = spec.model.eps(s.t);
        TrajectorySample sample;
        sample.t = s.t;
        sample.d2 = d_norm_sq(s, eps_t);
        if (cert) {
            sample.V = liapunov_V(s, *cert);
            sample.psi = psi_functions(*cert, s.t).psi;
        }
        sample.y_envelope = std::numeric_limits<double>::quiet_NaN();
        double mu = 0.0;
        for (double x : s.u) mu = std::max(mu, std::abs(x));
        sample.max_u = mu;
        sample.residual = residual;

        bool finite = std::isfinite(sample.d2);
        for (double x : s.v)
            if (!std::isfinite(x)) finite = false;
        if (!finite || sample.d2 > kDivergenceCap) {
            traj.diverged = true;
            return false;
        }
        traj.samples.push_back(sample);
        traj.states.push_back(s);
        traj.last_valid_t = s.t;
        return true;
    };

    if (!record(state)) return traj;

    for (long k = 1; k <= n_steps; ++k) {
        const double t_next = k == n_steps ? opts.t_end : spec.t0 + static_cast<double>(k) * opts.dt;
        const double dt_k = t_next - state.t;
        if (dt_k <= 0.0) continue;
        residual = step_core(state, spec, dt_k, ws, opts.corrector_iters, opts.corrector_tol);
        state.t = t_next;
        if (k % opts.output_stride == 0 || k == n_steps) {
            if (!record(state)) return traj;
        }
    }
    return traj;
}

TransformResult transform_constant_eps(const ProblemSpec& spec, double t_end, double eps_ref) {
    if (!spec.w0.zero || !spec.wpi.zero)
        throw std::invalid_argument("the time rescaling expects a reduced problem");
    if (!(t_end > spec.t0)) throw std::invalid_argument("transform needs t_end > t0");

    const CoefficientModel& model = spec.model;
    const double t_lo = std::min(0.0, spec.t0);
    if (t_lo < model.t_min - 1e-12)
        throw std::domain_error("the rescaling integrates from 0, outside the model horizon");

    // The rescaled clock needs eps bounded away from zero on [t_lo, t_end].
    constexpr int kScan = 4096;
    double eps_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kScan; ++i) {
        const double t = t_lo + (t_end - t_lo) * static_cast<double>(i) / (kScan - 1);
        eps_min = std::min(eps_min, model.eps(t));
    }
    if (!(eps_min > 0.0))
        throw std::domain_error("the rescaling needs eps > 0 up to t_end");

    const double epsilon = eps_ref > 0.0 ? eps_ref : model.eps(std::max(0.0, model.t_min));

    // Cumulative Simpson tables for tau(t) on [t_lo, t_end].
    constexpr int kNodes = 8193;
    const double dt_grid = (t_end - t_lo) / (kNodes - 1);
    auto t_node = [t_lo, dt_grid](int i) { return t_lo + dt_grid * i; };
    std::vector<double> tau_table(kNodes);
    tau_table[0] = 0.0;
    for (int i = 1; i < kNodes; ++i) {
        const double a = t_node(i - 1);
        const double b = t_node(i);
        const double m = 0.5 * (a + b);
        tau_table[i] = tau_table[i - 1] +
                       dt_grid / 6.0 * (model.eps(a) + 4.0 * model.eps(m) + model.eps(b)) / epsilon;
    }
    // Shift so tau(0) = 0 when t_lo < 0 (t0 negative is unusual but legal).
    double tau_shift = 0.0;
    if (t_lo < 0.0) {
        const double s = -t_lo / dt_grid;
        const int i = std::min(static_cast<int>(s), kNodes - 2);
        const double w = s - i;
        tau_shift = tau_table[i] * (1.0 - w) + tau_table[i + 1] * w;
    }

    auto tau_of_t = [=](double t) {
        const double s = std::clamp((t - t_lo) / dt_grid, 0.0, static_cast<double>(kNodes - 1));
        const int i = std::min(static_cast<int>(s), kNodes - 2);
        const double a = t_node(i);
        const double dt_loc = t - a;
        const double m = a + 0.5 * dt_loc;
        const double partial =
            dt_loc / 6.0 * (model.eps(a) + 4.0 * model.eps(m) + model.eps(t)) / epsilon;
        return tau_table[i] + partial - tau_shift;
    };

    auto t_of_tau = [=](double tau) {
        const double target = tau + tau_shift;
        // Binary search over the table, then Newton refinement.
        int lo = 0, hi = kNodes - 1;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            if (tau_table[mid] < target)
                lo = mid;
            else
                hi = mid;
        }
        double t = t_node(lo);
        for (int it = 0; it < 4; ++it) {
            const double resid = (tau_of_t(t) + tau_shift) - target;
            t -= resid * epsilon / model.eps(t);
        }
        return std::clamp(t, t_lo, t_end);
    };

    const double tau0 = tau_of_t(spec.t0);
    const double tau_end = tau_of_t(t_end);

    // b(tau) = exp(Phi(tau)) with Phi' = 1/eps_ref - eps_ref C / eps^2.
    auto rate = [=](double tau) {
        const double t = t_of_tau(tau);
        const double e = model.eps(t);
        return 1.0 / epsilon - epsilon * model.cc(t) / (e * e);
    };
    auto rate_d1 = [=](double tau) {
        const double t = t_of_tau(tau);
        const double e = model.eps(t);
        const double cdot = model.cc_d1(t);
        const double edot = model.eps_d1(t);
        // d/dtau = (dt/dtau) d/dt with dt/dtau = epsilon / eps.
        return -epsilon * (cdot - 2.0 * model.cc(t) * edot / e) / (e * e) * (epsilon / e);
    };

    const int phi_nodes = kNodes;
    const double dtau_grid = (tau_end - tau0) / (phi_nodes - 1);
    std::vector<double> phi_table(phi_nodes);
    phi_table[0] = 0.0;
    for (int i = 1; i < phi_nodes; ++i) {
        const double a = tau0 + dtau_grid * (i - 1);
        const double b = tau0 + dtau_grid * i;
        const double m = 0.5 * (a + b);
        phi_table[i] = phi_table[i - 1] + dtau_grid / 6.0 * (rate(a) + 4.0 * rate(m) + rate(b));
    }
    auto log_b = [=](double tau) {
        const double s = std::clamp((tau - tau0) / dtau_grid, 0.0, static_cast<double>(phi_nodes - 1));
        const int i = std::min(static_cast<int>(s), phi_nodes - 2);
        const double a = tau0 + dtau_grid * i;
        const double dloc = tau - a;
        const double m = a + 0.5 * dloc;
        return phi_table[i] + dloc / 6.0 * (rate(a) + 4.0 * rate(m) + rate(tau));
    };
    auto b_of_tau = [=](double tau) { return std::exp(log_b(tau)); };
    auto b_d1_of_tau = [=](double tau) { return rate(tau) * b_of_tau(tau); };

    TransformResult result;
    result.eps_ref = epsilon;
    result.tau0 = tau0;
    result.tau_end = tau_end;
    result.tau_of_t = tau_of_t;
    result.t_of_tau = t_of_tau;
    result.b_of_tau = b_of_tau;
    result.b_d1_of_tau = b_d1_of_tau;

    ProblemSpec out;
    out.model = make_constant(epsilon, 1.0, 0.0, tau0, tau_end);
    out.t0 = tau0;
    BoundaryEndpoint zero_end;
    out.w0 = zero_end;
    out.wpi = zero_end;

    const ForcingSpec raw = spec.forcing;
    const double a_coef = model.a;
    ForcingSpec composed;
    composed.kind = ForcingKind::Custom;
    composed.custom_f = [=](double x, double tau, double u, double ux, double ut) {
        const double t = t_of_tau(tau);
        const double e = model.eps(t);
        const double edot = model.eps_d1(t);
        const double b = b_of_tau(tau);
        const double brate = rate(tau);  // b_tau / b
        const double b_ss = brate * brate + rate_d1(tau);  // b_tautau / b
        const double phi = b * u;
        const double phi_x = b * ux;
        const double phi_t = (b * e / epsilon) * ut + (brate * b * e / epsilon) * u;
        const double f_orig = eval_f(raw, x, t, phi, phi_x, phi_t);
        const double c1 = a_coef * epsilon / e + 2.0 * brate + edot * epsilon / (e * e);
        const double c0 = b_ss + (a_coef * epsilon / e) * brate +
                          (edot * epsilon / (e * e)) * brate;
        return (epsilon * epsilon / (b * e * e)) * f_orig - c1 * ut - c0 * u;
    };
    out.forcing = composed;

    auto u0 = spec.u0 ? spec.u0 : [](double) { return 0.0; };
    auto u1 = spec.u1 ? spec.u1 : [](double) { return 0.0; };
    const double b0 = b_of_tau(tau0);
    const double brate0 = rate(tau0);
    const double eps_t0 = model.eps(spec.t0);
    out.u0 = [u0, b0](double x) { return u0(x) / b0; };
    out.u1 = [u0, u1, b0, brate0, eps_t0, epsilon](double x) {
        return epsilon * u1(x) / (b0 * eps_t0) - (brate0 / b0) * u0(x);
    };

    result.transformed = out;
    return result;
}

namespace {

std::string fmt17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "t,d2,V,psi,y_envelope,max_u,residual\n";
    for (const TrajectorySample& s : traj.samples) {
        out << fmt17(s.t) << ',' << fmt17(s.d2) << ',' << fmt17(s.V) << ',' << fmt17(s.psi) << ','
            << fmt17(s.y_envelope) << ',' << fmt17(s.max_u) << ',' << fmt17(s.residual) << '\n';
    }
}

std::vector<TrajectorySample> read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open trajectory CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw config_error("empty trajectory CSV: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,d2,V,psi,y_envelope,max_u,residual")
        throw config_error("unexpected trajectory CSV header: " + line);
    std::vector<TrajectorySample> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        double vals[7];
        for (int c = 0; c < 7; ++c) {
            if (!std::getline(row, cell, ','))
                throw config_error(path + ": row " + std::to_string(lineno) +
                                   " has fewer than 7 columns");
            try {
                vals[c] = std::stod(cell);
            } catch (const std::exception&) {
                throw config_error(path + ": row " + std::to_string(lineno) +
                                   " has a non-numeric cell: " + cell);
            }
        }
        TrajectorySample s;
        s.t = vals[0];
        s.d2 = vals[1];
        s.V = vals[2];
        s.psi = vals[3];
        s.y_envelope = vals[4];
        s.max_u = vals[5];
        s.residual = vals[6];
        rows.push_back(s);
    }
    return rows;
}

}  // namespace stabcert
