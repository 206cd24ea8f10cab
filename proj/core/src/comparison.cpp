#include "stabcert/comparison.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "stabcert/errors.hpp"

namespace stabcert {

namespace {

constexpr double kCap = 1e12;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Wrap an eta closure with a coarse running max over [0, eta] so the
/// comparison machinery always sees a non-decreasing source. Closures that
/// are already monotone are returned unchanged in value.
EtaFn monotone_wrap(EtaFn g) {
    if (!g) return g;
    return [g](double t, double eta) {
        double best = g(t, eta);
        for (int k = 1; k < 16; ++k) {
            best = std::max(best, g(t, eta * static_cast<double>(k) / 16.0));
        }
        return best;
    };
}

double eval_or_zero(const EtaFn& g, double t, double eta) { return g ? g(t, eta) : 0.0; }
double eval_or_zero(const TimeFn& g, double t) { return g ? g(t) : 0.0; }

/// Tabulate a time-only closure on a uniform grid and return a linear
/// interpolant. Witness quadratures are expensive; the envelope integrator
/// calls them hundreds of thousands of times.
TimeFn tabulate(TimeFn g, double t0, double t1) {
    if (!g || !(t1 > t0)) return g;
    constexpr int kNodes = 32769;
    auto values = std::make_shared<std::vector<double>>(kNodes);
    const double dt = (t1 - t0) / (kNodes - 1);
    for (int i = 0; i < kNodes; ++i) (*values)[i] = g(t0 + dt * i);
    return [values, t0, dt](double t) {
        const double s = std::clamp((t - t0) / dt, 0.0, static_cast<double>(kNodes - 1));
        const int i = std::min(static_cast<int>(s), kNodes - 2);
        const double w = s - i;
        return (*values)[i] * (1.0 - w) + (*values)[i + 1] * w;
    };
}

double rhs_value(const EnvelopeProblem& prob, double t, double y) {
    return -eval_or_zero(prob.psi, t) * y + eval_or_zero(prob.g1, t, y) +
           eval_or_zero(prob.g21, t, y) + eval_or_zero(prob.g22, t);
}

}  // namespace

EnvelopeProblem make_envelope(const Certificate& cert, const ForcingWitnesses& witnesses,
                              double y0, double t0, double horizon) {
    if (!(horizon > t0)) throw std::invalid_argument("make_envelope needs horizon > t0");
    if (!(y0 >= 0.0)) throw std::invalid_argument("make_envelope needs y0 >= 0");

    EnvelopeProblem prob;
    prob.y0 = y0;
    prob.t0 = t0;
    prob.horizon = horizon;
    prob.special_split = witnesses.special_split;
    prob.g_t_only = !witnesses.g1 && !witnesses.g21;

    const Certificate c = cert;
    prob.psi = [c](double t) { return psi_functions(c, t).psi; };

    const double scale = 0.5 * (1.0 + cert.gamma);
    const double chi0 = cert.chi0;
    if (witnesses.g1) {
        EtaFn w = witnesses.g1;
        prob.g1 = monotone_wrap([w, scale, chi0](double t, double y) {
            return scale * w(t, y / chi0);
        });
    }
    if (witnesses.g21) {
        EtaFn w = witnesses.g21;
        prob.g21 = monotone_wrap([w, scale, chi0](double t, double y) {
            return scale * w(t, y / chi0);
        });
    }
    if (witnesses.g22) {
        TimeFn w = witnesses.g22;
        prob.g22 = tabulate([w, scale](double t) { return scale * w(t); }, t0, horizon);
    }
    if (witnesses.g2_tail) {
        EtaFn w = witnesses.g2_tail;
        prob.g2_tail = [w, scale, chi0](double s, double y) {
            return scale * w(s, y / chi0);
        };
        const double probe = prob.g2_tail(0.5 * (t0 + horizon), 1.0);
        prob.tail_ok = std::isfinite(probe);
    }

    // Locate the positive suffix of psi on the sampled horizon.
    constexpr int kScan = 4097;
    std::vector<double> psi_vals(kScan);
    const double dt = (horizon - t0) / (kScan - 1);
    for (int i = 0; i < kScan; ++i) psi_vals[i] = prob.psi(t0 + dt * i);
    double suffix_min = std::numeric_limits<double>::infinity();
    int best = -1;
    for (int i = kScan - 1; i >= 0; --i) {
        suffix_min = std::min(suffix_min, psi_vals[i]);
        if (suffix_min > 0.0) best = i;
        else break;
    }
    if (best < 0) {
        prob.t_bar = kNaN;
        prob.psi0 = 0.0;
    } else {
        prob.t_bar = t0 + dt * best;
        double m = std::numeric_limits<double>::infinity();
        for (int i = best; i < kScan; ++i) m = std::min(m, psi_vals[i]);
        prob.psi0 = m;
    }
    return prob;
}

EnvelopeResult integrate_envelope(const EnvelopeProblem& prob, double dt, double t_end,
                                  bool cross_check) {
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_envelope needs dt > 0");
    if (!(t_end > prob.t0)) throw std::invalid_argument("integrate_envelope needs t_end > t0");

    EnvelopeResult result;
    double t = prob.t0;
    double y = prob.y0;
    result.points.push_back({t, y});

    const bool do_check = cross_check && prob.g_t_only;
    double big_psi = 0.0;  // cumulative integral of psi
    double duhamel = 0.0;  // int e^{Psi(s)-Psi(t)} g(s) ds, updated per step

    const auto n_steps = static_cast<long>(std::ceil((t_end - prob.t0) / dt - 1e-12));
    for (long k = 1; k <= n_steps; ++k) {
        const double t_next = k == n_steps ? t_end : prob.t0 + dt * static_cast<double>(k);
        const double h = t_next - t;
        if (h <= 0.0) continue;

        if (!result.diverged) {
            const double k1 = rhs_value(prob, t, y);
            const double k2 = rhs_value(prob, t + 0.5 * h, y + 0.5 * h * k1);
            const double k3 = rhs_value(prob, t + 0.5 * h, y + 0.5 * h * k2);
            const double k4 = rhs_value(prob, t + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (y < 0.0) {
                if (y < -1e-12) result.clipped = true;
                y = 0.0;
            }
            if (!std::isfinite(y) || y > kCap) {
                result.diverged = true;
                result.diverged_at = t_next;
                y = kCap;
            }
        }

        if (do_check) {
            const double tm = t + 0.5 * h;
            const double psi_a = eval_or_zero(prob.psi, t);
            const double psi_m = eval_or_zero(prob.psi, tm);
            const double psi_b = eval_or_zero(prob.psi, t_next);
            const double dpsi = h / 6.0 * (psi_a + 4.0 * psi_m + psi_b);
            auto g_at = [&](double s) {
                return eval_or_zero(prob.g1, s, 0.0) + eval_or_zero(prob.g21, s, 0.0) +
                       eval_or_zero(prob.g22, s);
            };
            duhamel = duhamel * std::exp(-dpsi) +
                      h / 6.0 * (g_at(t) * std::exp(-dpsi) + 4.0 * g_at(tm) * std::exp(-0.5 * dpsi) +
                                 g_at(t_next));
            big_psi += dpsi;
            const double y_exact = prob.y0 * std::exp(-big_psi) + duhamel;
            const double mismatch = std::abs(y - y_exact) / (1.0 + std::abs(y_exact));
            result.max_quad_mismatch = std::max(result.max_quad_mismatch, mismatch);
        }

        t = t_next;
        result.points.push_back({t, y});
    }
    return result;
}

BoundBundle eventual_bound(const EnvelopeProblem& prob, double alpha, int samples) {
    if (!(alpha > 0.0)) throw std::invalid_argument("eventual_bound needs alpha > 0");
    if (samples < 16) throw std::invalid_argument("eventual_bound needs samples >= 16");
    if (!std::isfinite(prob.t_bar))
        throw hypothesis_violation("psi has no positive suffix on the sampled horizon");

    BoundBundle bundle;
    bundle.alpha = alpha;
    bundle.beta = 3.0 * alpha;
    const double beta = bundle.beta;

    const int n = samples + 1;
    const double dt = (prob.horizon - prob.t_bar) / samples;
    std::vector<double> ts(n);
    for (int i = 0; i < n; ++i) ts[i] = prob.t_bar + dt * i;
    for (int i = 0; i < n; ++i) {
        if (!(prob.psi(ts[i]) > 0.0)) {
            std::ostringstream msg;
            msg << "psi is not positive after t_bar (t=" << ts[i] << ")";
            throw hypothesis_violation(msg.str());
        }
    }

    // Ratio clause for the slowly-decaying source.
    double s1 = prob.t_bar;
    if (prob.g1) {
        std::vector<char> ok(n);
        int worst = -1;
        for (int i = 0; i < n; ++i) {
            const double psi = prob.psi(ts[i]);
            const double val = prob.g1(ts[i], beta);
            ok[i] = psi > 0.0 && val < alpha * psi;
            if (!ok[i]) worst = i;
        }
        if (worst == n - 1) {
            std::ostringstream msg;
            msg << "eventual bound fails: g1(t, 3a)/psi stays at or above alpha=" << alpha
                << " through the horizon (t=" << ts[worst] << ")";
            throw hypothesis_violation(msg.str());
        }
        s1 = ts[worst + 1];
    }

    // Tail clause for the integrable source.
    double s2 = prob.t_bar;
    const bool has_g2 = static_cast<bool>(prob.g21) || static_cast<bool>(prob.g22);
    if (has_g2) {
        std::vector<double> g2_vals(n);
        double peak = 0.0;
        for (int i = 0; i < n; ++i) {
            g2_vals[i] = eval_or_zero(prob.g21, ts[i], beta) + eval_or_zero(prob.g22, ts[i]);
            peak = std::max(peak, std::abs(g2_vals[i]));
        }
        if (peak == 0.0 && !prob.tail_ok) {
            s2 = prob.t_bar;
        } else if (prob.tail_ok) {
            int found = -1;
            for (int i = 0; i < n; ++i) {
                if (prob.g2_tail(ts[i], beta) < alpha) {
                    found = i;
                    break;
                }
            }
            if (found < 0) {
                std::ostringstream msg;
                msg << "eventual bound fails: the certified g2 tail stays at or above alpha="
                    << alpha << " through the horizon";
                throw hypothesis_violation(msg.str());
            }
            s2 = ts[found];
        } else {
            // No tail certificate: integrate the remaining-horizon mass.
            std::vector<double> rem(n, 0.0);
            for (int i = n - 2; i >= 0; --i)
                rem[i] = rem[i + 1] + 0.5 * (g2_vals[i] + g2_vals[i + 1]) * dt;
            int found = -1;
            for (int i = 0; i < n; ++i) {
                if (rem[i] < alpha) {
                    found = i;
                    break;
                }
            }
            if (found < 0)
                throw hypothesis_violation(
                    "eventual bound fails: the g2 mass on the remaining horizon never drops "
                    "below alpha and no tail certificate is available");
            s2 = ts[found];
            bundle.horizon_certified_only = true;
        }
    }

    bundle.s_alpha = std::max(s1, s2);
    return bundle;
}

BoundBundle uniform_bound(const EnvelopeProblem& prob, double alpha, int samples) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("uniform_bound needs alpha >= 0");
    if (samples < 16) throw std::invalid_argument("uniform_bound needs samples >= 16");
    if (!prob.g_t_only)
        throw hypothesis_violation("the uniform route needs sources independent of the state");
    if (!std::isfinite(prob.t_bar))
        throw hypothesis_violation("psi has no positive suffix on the sampled horizon");

    BoundBundle bundle;
    bundle.alpha = alpha;
    bundle.beta = 3.0 * alpha;

    const int n = samples + 1;
    const double dt = (prob.horizon - prob.t_bar) / samples;

    double m1 = 0.0;
    double g21_mass_peak = 0.0;
    std::vector<double> g2_vals(n);
    for (int i = 0; i < n; ++i) {
        const double t = prob.t_bar + dt * i;
        const double psi = prob.psi(t);
        if (!(psi > 0.0)) {
            std::ostringstream msg;
            msg << "psi is not positive after t_bar (t=" << t << ")";
            throw hypothesis_violation(msg.str());
        }
        const double v1 = eval_or_zero(prob.g1, t, 0.0);
        if (v1 > 0.0) m1 = std::max(m1, v1 / psi);
        g2_vals[i] = eval_or_zero(prob.g21, t, 0.0) + eval_or_zero(prob.g22, t);
        g21_mass_peak = std::max(g21_mass_peak, std::abs(g2_vals[i]));
    }
    bundle.M1 = m1;

    if (g21_mass_peak == 0.0 && !prob.tail_ok) {
        bundle.M2 = 0.0;
    } else if (prob.tail_ok) {
        bundle.M2 = prob.g2_tail(prob.t_bar, 0.0);
    } else {
        double mass = 0.0;
        for (int i = 0; i + 1 < n; ++i) mass += 0.5 * (g2_vals[i] + g2_vals[i + 1]) * dt;
        bundle.M2 = mass;
        bundle.horizon_certified_only = true;
    }
    if (!std::isfinite(bundle.M2))
        throw hypothesis_violation("the g2 mass is unbounded; no uniform bound exists");

    bundle.beta_tilde = alpha + bundle.M1 + bundle.M2;
    bundle.s_alpha = prob.t_bar;
    return bundle;
}

BoundBundle attraction_time(const EnvelopeProblem& prob, double rho, double alpha, int samples) {
    if (!(rho > 0.0)) throw std::invalid_argument("attraction_time needs rho > 0");

    BoundBundle bundle = eventual_bound(prob, alpha, samples);
    const double beta = bundle.beta;
    if (rho >= beta) {
        bundle.T_estimate = 0.0;
        return bundle;
    }

    const int n = samples + 1;
    const double span = prob.horizon - bundle.s_alpha;
    if (!(span > 0.0)) {
        bundle.horizon_certified_only = true;
        bundle.T_estimate = prob.horizon - prob.t_bar;
        return bundle;
    }
    const double dt = span / samples;
    std::vector<double> ts(n);
    for (int i = 0; i < n; ++i) ts[i] = bundle.s_alpha + dt * i;

    std::vector<double> ratio(n, 0.0);
    std::vector<double> g2_vals(n, 0.0);
    bool active1 = false, active2 = false;
    for (int i = 0; i < n; ++i) {
        if (prob.g1) {
            const double psi = prob.psi(ts[i]);
            ratio[i] = psi > 0.0 ? prob.g1(ts[i], beta) / psi : std::numeric_limits<double>::infinity();
            if (ratio[i] > 0.0) active1 = true;
        }
        g2_vals[i] = eval_or_zero(prob.g21, ts[i], beta) + eval_or_zero(prob.g22, ts[i]);
        if (g2_vals[i] > 0.0) active2 = true;
    }

    if (prob.psi0 > 0.0) {
        // Uniform branch: each Duhamel piece gets an equal share of rho and
        // the attraction time is the max of the per-piece elapsed times.
        const int m = (active1 ? 1 : 0) + (active2 ? 1 : 0);
        const double share = rho / (m + 1);
        const double psi0 = prob.psi0;
        double t_decay = std::log(beta / share) / psi0;
        double t_ratio = 0.0;
        double t_mass = 0.0;

        if (active1) {
            double sigma1 = 0.0;
            for (double r : ratio) sigma1 = std::max(sigma1, r);
            std::vector<char> ok(n);
            for (int i = 0; i < n; ++i) ok[i] = ratio[i] <= 0.5 * share;
            int first = -1;
            for (int i = n - 1; i >= 0 && ok[i]; --i) first = i;
            if (first < 0) {
                bundle.horizon_certified_only = true;
                bundle.T_estimate = span;
                return bundle;
            }
            t_ratio = (ts[first] - bundle.s_alpha) +
                      std::max(0.0, std::log(2.0 * sigma1 / share)) / psi0;
        }
        if (active2) {
            std::vector<double> rem(n, 0.0);
            if (prob.tail_ok) {
                for (int i = 0; i < n; ++i) rem[i] = prob.g2_tail(ts[i], beta);
            } else {
                for (int i = n - 2; i >= 0; --i)
                    rem[i] = rem[i + 1] + 0.5 * (g2_vals[i] + g2_vals[i + 1]) * dt;
                bundle.horizon_certified_only = true;
            }
            const double sigma2 = rem[0];
            int first = -1;
            for (int i = n - 1; i >= 0 && rem[i] <= 0.5 * share; --i) first = i;
            if (first < 0) {
                bundle.horizon_certified_only = true;
                bundle.T_estimate = span;
                return bundle;
            }
            t_mass = (ts[first] - bundle.s_alpha) +
                     std::max(0.0, std::log(2.0 * sigma2 / share)) / psi0;
        }
        bundle.T_estimate = std::max({t_decay, t_ratio, t_mass});
        return bundle;
    }

    // General branch: integrate the frozen-argument majorant from a grid of
    // restart times and take the worst first-entry time into [0, rho).
    const double dt_ode = std::min(1e-3, span / 4096.0);
    double worst_T = 0.0;
    bool all_ok = true;
    for (int restart = 0; restart <= 8; ++restart) {
        const double t_start = bundle.s_alpha + span * static_cast<double>(restart) / 8.0;
        if (prob.horizon - t_start < dt_ode) break;
        std::vector<double> zs;
        std::vector<double> zt;
        double z = beta;
        double t = t_start;
        zs.push_back(z);
        zt.push_back(t);
        while (t < prob.horizon - 1e-12) {
            const double h = std::min(dt_ode, prob.horizon - t);
            auto frhs = [&](double tt, double zz) {
                return -eval_or_zero(prob.psi, tt) * zz + eval_or_zero(prob.g1, tt, beta) +
                       eval_or_zero(prob.g21, tt, beta) + eval_or_zero(prob.g22, tt);
            };
            const double k1 = frhs(t, z);
            const double k2 = frhs(t + 0.5 * h, z + 0.5 * h * k1);
            const double k3 = frhs(t + 0.5 * h, z + 0.5 * h * k2);
            const double k4 = frhs(t + h, z + h * k3);
            z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            z = std::max(z, 0.0);
            t += h;
            zs.push_back(z);
            zt.push_back(t);
        }
        int first = -1;
        for (int i = static_cast<int>(zs.size()) - 1; i >= 0 && zs[i] < rho; --i) first = i;
        if (first < 0) {
            all_ok = false;
            break;
        }
        worst_T = std::max(worst_T, zt[first] - t_start);
    }
    if (!all_ok) {
        bundle.horizon_certified_only = true;
        bundle.T_estimate = span;
    } else {
        bundle.T_estimate = worst_T;
    }
    return bundle;
}

BoundBundle total_stability_bound(const EnvelopeProblem& prob, double beta, int iters) {
    if (!(beta > 0.0)) throw std::invalid_argument("total_stability_bound needs beta > 0");
    if (iters < 1) throw std::invalid_argument("total_stability_bound needs iters >= 1");
    if (!prob.special_split)
        throw hypothesis_violation(
            "total stability needs the special split (sources vanishing at the origin)");

    const double span = prob.horizon - prob.t0;
    const double dt = span / 5000.0;

    // Base mass of the problem's own time-only source, used to shape the
    // scaled-reference surrogate.
    double base_mass = 0.0;
    if (prob.g22) {
        const int n = 2048;
        double prev = prob.g22(prob.t0);
        for (int i = 1; i <= n; ++i) {
            const double t = prob.t0 + span * static_cast<double>(i) / n;
            const double cur = prob.g22(t);
            base_mass += 0.5 * (prev + cur) * (span / n);
            prev = cur;
        }
    }

    auto certify = [&](double delta) {
        // Three surrogate shapes carrying total mass delta.
        const double w = std::max(span / 100.0, 10.0 * dt);
        std::vector<TimeFn> shapes;
        if (prob.g22 && base_mass > 0.0) {
            TimeFn g22 = prob.g22;
            const double f = delta / base_mass;
            shapes.push_back([g22, f](double t) { return f * g22(t); });
        }
        const double t0 = prob.t0;
        shapes.push_back([t0, w, delta](double t) {
            return (t >= t0 && t < t0 + w) ? delta / w : 0.0;
        });
        shapes.push_back([t0, span, delta](double t) {
            return (t >= t0 && t <= t0 + span) ? delta / span : 0.0;
        });

        for (const TimeFn& extra : shapes) {
            double y = delta;
            double t = prob.t0;
            auto rhs = [&](double tt, double yy) { return rhs_value(prob, tt, yy) + extra(tt); };
            const auto steps = static_cast<long>(std::ceil(span / dt - 1e-12));
            for (long k = 1; k <= steps; ++k) {
                const double t_next = k == steps ? prob.horizon : prob.t0 + dt * k;
                const double h = t_next - t;
                const double k1 = rhs(t, y);
                const double k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
                const double k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
                const double k4 = rhs(t + h, y + h * k3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                y = std::max(y, 0.0);
                t = t_next;
                if (!(y < beta * (1.0 - 1e-9))) return false;
            }
        }
        return true;
    };

    double lo = 0.0;
    double hi = beta;
    if (certify(hi)) {
        lo = hi;
    } else {
        for (int i = 0; i < iters; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (certify(mid))
                lo = mid;
            else
                hi = mid;
        }
    }

    BoundBundle bundle;
    bundle.alpha = beta / 3.0;
    bundle.beta = beta;
    bundle.delta_hat = lo;
    bundle.s_alpha = prob.t0;
    bundle.horizon_certified_only = !prob.tail_ok;
    return bundle;
}

std::vector<CheckVerdict> verify_against_envelope(const Trajectory& traj, const Certificate& cert,
                                                  const EnvelopeProblem& prob) {
    std::vector<CheckVerdict> verdicts;
    if (traj.samples.empty()) {
        verdicts.push_back({"sandwich", "INCONCLUSIVE", kNaN, 0.0, "no samples"});
        verdicts.push_back({"slope", "INCONCLUSIVE", kNaN, 0.0, "no samples"});
        verdicts.push_back({"envelope", "INCONCLUSIVE", kNaN, 0.0, "no samples"});
        return verdicts;
    }

    const auto& samples = traj.samples;
    const int n = static_cast<int>(samples.size());

    // Two-sided energy sandwich.
    {
        CheckVerdict v;
        v.check = "sandwich";
        int passed = 0;
        v.first_violation_t = kNaN;
        for (const TrajectorySample& s : samples) {
            const double upper = sandwich_upper_factor(cert, s.t) * s.d2;
            const double lower = cert.chi0 * s.d2;
            const bool ok = lower <= s.V * (1.0 + 1e-8) + 1e-14 &&
                            s.V <= upper * (1.0 + 1e-8) + 1e-14;
            if (ok) {
                ++passed;
            } else if (std::isnan(v.first_violation_t)) {
                v.first_violation_t = s.t;
            }
        }
        v.pass_fraction = static_cast<double>(passed) / n;
        v.status = passed == n ? "PASS" : "FAIL";
        verdicts.push_back(v);
    }

    // Finite-difference slope against the envelope right-hand side.
    {
        CheckVerdict v;
        v.check = "slope";
        v.first_violation_t = kNaN;
        int passed = 0;
        int total = 0;
        for (int i = 0; i + 1 < n; ++i) {
            const double dt = samples[i + 1].t - samples[i].t;
            if (!(dt > 0.0)) continue;
            ++total;
            const double slope = (samples[i + 1].V - samples[i].V) / dt;
            const double rhs = rhs_value(prob, samples[i].t, samples[i].V);
            const bool ok = slope <= rhs + 1e-2 * (1.0 + std::abs(rhs));
            if (ok) {
                ++passed;
            } else if (std::isnan(v.first_violation_t)) {
                v.first_violation_t = samples[i].t;
            }
        }
        v.pass_fraction = total > 0 ? static_cast<double>(passed) / total : 1.0;
        v.status = v.pass_fraction >= 0.99 ? "PASS" : "FAIL";
        v.note = "pass threshold 0.99";
        verdicts.push_back(v);
    }

    // Envelope domination.
    {
        CheckVerdict v;
        v.check = "envelope";
        v.first_violation_t = kNaN;
        const double t_end = samples.back().t;
        EnvelopeResult env = integrate_envelope(prob, std::min(1e-3, (t_end - prob.t0) / 1000.0),
                                                std::max(t_end, prob.t0 + 1e-9));
        int passed = 0;
        std::size_t cursor = 0;
        for (const TrajectorySample& s : samples) {
            while (cursor + 1 < env.points.size() && env.points[cursor + 1].t <= s.t) ++cursor;
            double y = env.points[cursor].y;
            if (cursor + 1 < env.points.size()) {
                const auto& a = env.points[cursor];
                const auto& b = env.points[cursor + 1];
                if (b.t > a.t && s.t >= a.t)
                    y = a.y + (b.y - a.y) * (s.t - a.t) / (b.t - a.t);
            }
            const bool capped = env.diverged && s.t >= env.diverged_at;
            const bool ok = capped || s.V <= y * (1.0 + 5e-2) + 1e-12;
            if (ok) {
                ++passed;
            } else if (std::isnan(v.first_violation_t)) {
                v.first_violation_t = s.t;
            }
        }
        v.pass_fraction = static_cast<double>(passed) / n;
        v.status = passed == n ? "PASS" : "FAIL";
        if (env.diverged) v.note = "envelope capped at 1e12";
        verdicts.push_back(v);
    }

    return verdicts;
}

std::string verdicts_to_json(const std::vector<CheckVerdict>& verdicts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const CheckVerdict& v : verdicts) {
        nlohmann::json item;
        item["check"] = v.check;
        item["status"] = v.status;
        if (std::isfinite(v.first_violation_t))
            item["first_violation_t"] = v.first_violation_t;
        else
            item["first_violation_t"] = nullptr;
        item["pass_fraction"] = v.pass_fraction;
        if (!v.note.empty()) item["note"] = v.note;
        arr.push_back(item);
    }
    return arr.dump(2);
}

}  // namespace stabcert
