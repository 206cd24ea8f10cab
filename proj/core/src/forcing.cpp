#include "stabcert/forcing.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "stabcert/errors.hpp"

namespace stabcert {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kQuadIntervals = 256;  // composite Simpson panels on [0, pi]

double quad_x(const std::function<double(double)>& f) {
    const double h = kPi / kQuadIntervals;
    double odd = 0.0, even = 0.0;
    for (int i = 1; i < kQuadIntervals; i += 2) odd += f(i * h);
    for (int i = 2; i < kQuadIntervals; i += 2) even += f(i * h);
    return h / 3.0 * (f(0.0) + 4.0 * odd + 2.0 * even + f(kPi));
}

double field_at(const FieldFn& fn, double x, double t) { return fn ? fn(x, t) : 0.0; }

TimeFn zero_time_fn() {
    return [](double) { return 0.0; };
}

EtaFn zero_eta_fn() {
    return [](double, double) { return 0.0; };
}

EtaFn zero_tail_fn() {
    return [](double, double) { return 0.0; };
}

EtaFn nan_tail_fn() {
    return [](double, double) { return std::numeric_limits<double>::quiet_NaN(); };
}

/// Lp - k evaluated pointwise for a linear-in-x lift: Lp = p_tt + a p_t.
double lift_residual(const SpacetimeField& p, const SpacetimeField& k, double a, double x,
                     double t) {
    const double ptt = field_at(p.dt2, x, t);
    const double pt = field_at(p.dt1, x, t);
    const double kv = field_at(k.value, x, t);
    return ptt + a * pt - kv;
}

}  // namespace

SpacetimeField SpacetimeField::zero_field() {
    SpacetimeField f;
    f.value = [](double, double) { return 0.0; };
    f.dt1 = f.value;
    f.dt2 = f.value;
    f.dx1 = f.value;
    f.zero = true;
    return f;
}

double pulse_train_r2(double r0, double alpha_tri, double beta_tri, double t) {
    const double n = std::round(t);
    if (n < 1.0) return 0.0;
    const double half_base = 0.5 * std::pow(n, -alpha_tri);
    const double dist = std::abs(t - n);
    if (dist > half_base) return 0.0;
    const double peak = 2.0 * std::pow(n, beta_tri);
    const double slope = 4.0 * std::pow(n, alpha_tri + beta_tri);
    return r0 * r0 * (peak - slope * dist);
}

double eval_f(const ForcingSpec& spec, double x, double t, double u, double ux, double ut) {
    if (spec.composed_f) return spec.composed_f(x, t, u, ux, ut);
    switch (spec.kind) {
        case ForcingKind::Zero:
            return 0.0;
        case ForcingKind::SineGordonJJ:
            return spec.b_sg * std::sin(u) - spec.gamma_bias - spec.beta_sg * ut * std::cos(u) -
                   spec.lambda_x * ux;
        case ForcingKind::NonAnalytic: {
            const double h0 = spec.h0 ? spec.h0(t) : spec.h0_const;
            return h0 * std::pow(std::abs(u), spec.omega) * u;
        }
        case ForcingKind::Lipschitz: {
            const double h0 = spec.h0 ? spec.h0(t) : spec.h0_const;
            if (spec.shape == "sin") return h0 * std::sin(u);
            if (spec.shape == "tanh") return h0 * std::tanh(u);
            throw std::invalid_argument("unknown Lipschitz shape: " + spec.shape);
        }
        case ForcingKind::PulseTrain:
            return std::sqrt(pulse_train_r2(spec.r0, spec.alpha_tri, spec.beta_tri, t)) *
                   std::sin(u);
        case ForcingKind::Custom:
            if (!spec.custom_f) return 0.0;
            return spec.custom_f(x, t, u, ux, ut);
    }
    return 0.0;
}

ForcingWitnesses witness_lipschitz(TimeFn h0, const SpacetimeField& p, const SpacetimeField& k,
                                   double a) {
    ForcingWitnesses w;
    TimeFn h0fn = h0 ? std::move(h0) : zero_time_fn();
    w.gt = [h0fn](double t) {
        const double h = h0fn(t);
        return 7.0 * h * h;
    };
    w.g1 = zero_eta_fn();
    w.g21 = zero_eta_fn();
    const bool no_sources = p.zero && k.zero;
    if (no_sources) {
        w.g22 = zero_time_fn();
        w.g2_tail = zero_tail_fn();
    } else {
        w.g22 = [h0fn, p, k, a](double t) {
            const double h = h0fn(t);
            return quad_x([&](double x) {
                const double pv = field_at(p.value, x, t);
                const double px = field_at(p.dx1, x, t);
                const double pt = field_at(p.dt1, x, t);
                const double ptt = field_at(p.dt2, x, t);
                const double kv = field_at(k.value, x, t);
                return 7.0 * (h * h * (pv * pv + px * px + pt * pt) + 3.0 * ptt * ptt +
                              3.0 * (a * pt) * (a * pt) + 3.0 * kv * kv);
            });
        };
        w.g2_tail = nan_tail_fn();
        w.null_preserving = false;
    }
    return w;
}

ForcingWitnesses witness_nonanalytic(TimeFn h0, double omega, bool eps_branch,
                                     const CoefficientModel& model, double bigB,
                                     const SpacetimeField& p, const SpacetimeField& k, double a) {
    if (omega <= 0.0) throw std::invalid_argument("non-analytic exponent omega must be positive");
    double eps_floor = 0.0;
    if (eps_branch) {
        eps_floor = horizon_bounds(model).eps_inf;
        if (!(eps_floor > 0.0))
            throw inadmissible_error(
                "the 1/eps pointwise bound needs inf eps > 0 on the horizon");
    }
    TimeFn h0fn = h0 ? std::move(h0) : zero_time_fn();
    const CoefficientModel eps_model = model;

    ForcingWitnesses w;
    w.gt = zero_time_fn();
    w.g1 = [h0fn, omega, eps_branch, eps_model, bigB](double t, double eta) {
        const double h = h0fn(t);
        const double d = std::sqrt(std::max(eta, 0.0));
        const double power = std::pow(2.0 * d, 2.0 * omega + 2.0);
        double branch = kPi;
        if (eps_branch) {
            const double eps = eps_model.eps(t);
            branch = std::pow(kPi, 3.0 * omega + 4.0) / std::pow(eps, 2.0 * omega + 2.0);
        }
        return 0.5 * bigB * h * h * power * branch;
    };
    w.g21 = zero_eta_fn();
    const bool no_sources = p.zero && k.zero;
    if (no_sources) {
        w.g22 = zero_time_fn();
    } else {
        w.g22 = [h0fn, omega, bigB, p, k, a](double t) {
            const double h = h0fn(t);
            const double pow2w = std::pow(2.0, omega);
            return 2.0 * bigB * quad_x([&](double x) {
                       const double pv = std::abs(field_at(p.value, x, t));
                       const double lift = std::abs(lift_residual(p, k, a, x, t));
                       const double term = h * pow2w * std::pow(pv, omega + 1.0) + lift;
                       return term * term;
                   });
        };
        w.null_preserving = false;
    }
    // g1 grows with eta, so no finite tail budget exists in general.
    w.g2_tail = nan_tail_fn();
    return w;
}

ForcingWitnesses witness_nonanalytic_reference(TimeFn h0, double omega, bool eps_branch,
                                               const CoefficientModel& model, double bigB,
                                               TimeFn phi_term_sq) {
    ForcingWitnesses w = witness_nonanalytic(std::move(h0), omega, eps_branch, model, bigB,
                                             SpacetimeField::zero_field(),
                                             SpacetimeField::zero_field(), model.a);
    if (!phi_term_sq)
        throw std::invalid_argument("reference witnesses need the precomputed phi quadrature");
    w.g22 = [bigB, phi_term_sq](double t) { return 2.0 * bigB * phi_term_sq(t); };
    w.null_preserving = false;
    w.special_split = false;
    w.uniform_route_only = true;
    w.g2_tail = nan_tail_fn();
    return w;
}

ForcingWitnesses witness_sine_gordon(double b_sg, double gamma_bias, double beta_sg,
                                     double lambda_x, double bigB, const SpacetimeField& p,
                                     const SpacetimeField& k, double a, double pt_sup) {
    ForcingWitnesses w;
    const double coupled = b_sg + beta_sg * pt_sup;
    const double slope =
        6.0 * bigB * std::max({coupled * coupled, beta_sg * beta_sg, lambda_x * lambda_x});
    w.gt = [slope](double) { return slope; };
    w.g1 = zero_eta_fn();
    w.g21 = zero_eta_fn();
    const bool no_sources = p.zero && k.zero && gamma_bias == 0.0;
    if (no_sources) {
        w.g22 = zero_time_fn();
        w.g2_tail = zero_tail_fn();
    } else {
        w.g22 = [b_sg, gamma_bias, beta_sg, lambda_x, bigB, p, k, a](double t) {
            return 2.0 * bigB * quad_x([&](double x) {
                       const double pv = field_at(p.value, x, t);
                       const double px = field_at(p.dx1, x, t);
                       const double pt = field_at(p.dt1, x, t);
                       const double j = b_sg * std::sin(pv) - gamma_bias -
                                        beta_sg * pt * std::cos(pv) - lambda_x * px -
                                        lift_residual(p, k, a, x, t);
                       return j * j;
                   });
        };
        w.g2_tail = nan_tail_fn();
        w.null_preserving = gamma_bias == 0.0 && p.zero && k.zero;
    }
    return w;
}

ForcingWitnesses witness_pulse_train(double r0, double alpha_tri, double beta_tri, double bigB,
                                     const SpacetimeField& p, const SpacetimeField& k, double a) {
    if (alpha_tri < 1.0) throw std::invalid_argument("pulse train needs alpha_tri >= 1");
    if (beta_tri <= alpha_tri - 1.0 || beta_tri > alpha_tri)
        throw std::invalid_argument("pulse train needs beta_tri in (alpha_tri - 1, alpha_tri]");
    ForcingWitnesses w;
    w.gt = [r0, alpha_tri, beta_tri, bigB](double t) {
        return kPi * bigB * pulse_train_r2(r0, alpha_tri, beta_tri, t);
    };
    w.g1 = zero_eta_fn();
    w.g21 = zero_eta_fn();
    const bool no_sources = p.zero && k.zero;
    if (no_sources) {
        w.g22 = zero_time_fn();
        w.g2_tail = zero_tail_fn();
    } else {
        w.g22 = [r0, alpha_tri, beta_tri, p, k, a, bigB](double t) {
            const double r = std::sqrt(pulse_train_r2(r0, alpha_tri, beta_tri, t));
            return 2.0 * bigB * quad_x([&](double x) {
                       const double pv = field_at(p.value, x, t);
                       const double j = r * std::sin(pv) - lift_residual(p, k, a, x, t);
                       return j * j;
                   });
        };
        w.g2_tail = nan_tail_fn();
        w.null_preserving = false;
    }
    return w;
}

ForcingSpec make_reduced_forcing(const ForcingSpec& raw, const SpacetimeField& p,
                                 const SpacetimeField& k, double a, double bigB, double pt_sup,
                                 const CoefficientModel* model) {
    ForcingSpec out = raw;
    const bool perturbed = !(p.zero && k.zero);

    switch (raw.kind) {
        case ForcingKind::Zero:
            if (perturbed) {
                // The composed forcing is -(p_tt + a p_t) + k, which is the
                // Lipschitz reduction with a vanishing nonlinearity.
                out.witnesses = witness_lipschitz(zero_time_fn(), p, k, a);
            } else {
                out.witnesses = ForcingWitnesses{};
                out.witnesses.gt = zero_time_fn();
                out.witnesses.g1 = zero_eta_fn();
                out.witnesses.g21 = zero_eta_fn();
                out.witnesses.g22 = zero_time_fn();
                out.witnesses.g2_tail = zero_tail_fn();
            }
            break;
        case ForcingKind::Lipschitz:
            out.witnesses = witness_lipschitz(raw.h0 ? raw.h0
                                                     : TimeFn([c = raw.h0_const](double) {
                                                           return c;
                                                       }),
                                              p, k, a);
            break;
        case ForcingKind::NonAnalytic: {
            if (!model)
                throw std::invalid_argument(
                    "non-analytic witnesses need the coefficient model");
            out.witnesses = witness_nonanalytic(raw.h0 ? raw.h0
                                                       : TimeFn([c = raw.h0_const](double) {
                                                             return c;
                                                         }),
                                                raw.omega, raw.eps_branch, *model, bigB, p, k, a);
            break;
        }
        case ForcingKind::SineGordonJJ:
            out.witnesses = witness_sine_gordon(raw.b_sg, raw.gamma_bias, raw.beta_sg,
                                                raw.lambda_x, bigB, p, k, a, pt_sup);
            break;
        case ForcingKind::PulseTrain:
            out.witnesses = witness_pulse_train(raw.r0, raw.alpha_tri, raw.beta_tri, bigB, p, k, a);
            break;
        case ForcingKind::Custom:
            // Custom witnesses are the caller's responsibility; keep them.
            break;
    }

    if (perturbed) {
        ForcingSpec raw_copy = raw;
        SpacetimeField pc = p;
        SpacetimeField kc = k;
        out.composed_f = [raw_copy, pc, kc, a](double x, double t, double u, double ux,
                                               double ut) {
            const double pv = field_at(pc.value, x, t);
            const double px = field_at(pc.dx1, x, t);
            const double pt = field_at(pc.dt1, x, t);
            const double ptt = field_at(pc.dt2, x, t);
            const double kv = field_at(kc.value, x, t);
            return eval_f(raw_copy, x, t, u + pv, ux + px, ut + pt) - (ptt + a * pt) + kv;
        };
        out.witnesses.null_preserving = false;
    }
    return out;
}

double eval_j(const ForcingSpec& reduced, double x, double t) {
    if (reduced.composed_f) return reduced.composed_f(x, t, 0.0, 0.0, 0.0);
    return eval_f(reduced, x, t, 0.0, 0.0, 0.0);
}

}  // namespace stabcert
