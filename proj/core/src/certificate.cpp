#include "stabcert/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "stabcert/errors.hpp"

namespace stabcert {

namespace {

constexpr double kPi = std::numbers::pi;

double grid_time(const CoefficientModel& model, int i, int samples) {
    return model.t_min + (model.t_max - model.t_min) * static_cast<double>(i) / (samples - 1);
}

/// Closed-form constants for a fixed parameter triple. Throws only on
/// structurally impossible input; clause checks are the caller's job.
struct DerivedConstants {
    double chi0 = 0.0;
    double chi1 = 0.0;
    double bigB = 0.0;
};

DerivedConstants derived_constants(double a, double mu, double lambda, double theta, double gamma,
                                   const HorizonBounds& bounds) {
    const double eps_inf = bounds.eps_inf;
    const double cc_inf = bounds.cc_inf;
    const double damp = eps_inf * lambda + a;

    DerivedConstants out;
    out.chi0 = 0.5 * std::min({0.5,
                               mu * (1.0 + eps_inf) + cc_inf * gamma +
                                   eps_inf * (a + (1.0 - lambda) * theta),
                               gamma - 1.0 - 4.0 * theta / damp,
                               0.75 * damp * theta});
    out.chi1 = 0.5 * std::min({mu / 4.0,
                               (eps_inf + a) * (gamma - 1.0) / 2.0 + a - theta,
                               (mu / 4.0) * eps_inf * eps_inf + cc_inf * (theta / 2.0 - a) +
                                   mu * (a + theta)});
    out.bigB = 1.0 / mu + 1.0 / (eps_inf + a) + 1.0 / cc_inf;
    return out;
}

double gamma_threshold(double a, double mu, double lambda, double theta, double eps_inf) {
    const double damp = eps_inf * lambda + a;
    return 2.0 + std::max({(a + theta) / mu, (std::abs(a) + 1.0) * theta, 4.0 * theta / damp,
                           2.0 * (theta - a) / (eps_inf + a)});
}

Certificate assemble(const CoefficientModel& model, double mu, double lambda, double theta,
                     double gamma, const HorizonBounds& bounds) {
    Certificate cert;
    cert.lambda = lambda;
    cert.theta = theta;
    cert.gamma = gamma;
    cert.mu = mu;
    cert.eps_inf = bounds.eps_inf;
    cert.eps_sup = bounds.eps_sup;
    cert.cc_inf = bounds.cc_inf;
    const DerivedConstants dc = derived_constants(model.a, mu, lambda, theta, gamma, bounds);
    cert.chi0 = dc.chi0;
    cert.chi1 = dc.chi1;
    cert.bigB = dc.bigB;
    cert.model = model;
    cert.gt_bound = [](double) { return 0.0; };
    cert.gt_kind = "zero";
    return cert;
}

double eval_gt(const Certificate& cert, double t) {
    return cert.gt_bound ? cert.gt_bound(t) : 0.0;
}

}  // namespace

EnergyState EnergyState::from_closures(int N, double t, const std::function<double(double)>& u0,
                                       const std::function<double(double)>& u1) {
    if (N < 1) throw std::invalid_argument("EnergyState needs at least one interior node");
    EnergyState s;
    s.h = kPi / (N + 1);
    s.t = t;
    s.u.resize(N);
    s.v.resize(N);
    for (int j = 0; j < N; ++j) {
        const double x = (j + 1) * s.h;
        s.u[j] = u0 ? u0(x) : 0.0;
        s.v[j] = u1 ? u1(x) : 0.0;
    }
    return s;
}

double second_diff(const std::vector<double>& w, int j, double h) {
    const int n = static_cast<int>(w.size());
    const double left = j > 0 ? w[j - 1] : 0.0;
    const double right = j + 1 < n ? w[j + 1] : 0.0;
    return (left - 2.0 * w[j] + right) / (h * h);
}

double node_sq_sum(const std::vector<double>& w, double h) {
    double acc = 0.0;
    for (double x : w) acc += x * x;
    return h * acc;
}

double edge_grad_sq_sum(const std::vector<double>& w, double h) {
    const int n = static_cast<int>(w.size());
    double acc = 0.0;
    double prev = 0.0;
    for (int j = 0; j < n; ++j) {
        const double diff = w[j] - prev;
        acc += diff * diff;
        prev = w[j];
    }
    acc += prev * prev;  // edge to the right boundary
    return acc / h;
}

double poincare_min_eigenvalue(int N) {
    const double h = kPi / (N + 1);
    const double s = std::sin(h / 2.0);
    return 4.0 / (h * h) * s * s;
}

double d_norm_sq(const EnergyState& state, double eps_at_t) {
    const double h = state.h;
    double nodes = 0.0;
    const int n = state.n();
    for (int j = 0; j < n; ++j) {
        const double uxx = second_diff(state.u, j, h);
        nodes += eps_at_t * eps_at_t * uxx * uxx + state.u[j] * state.u[j] +
                 state.v[j] * state.v[j];
    }
    return h * nodes + edge_grad_sq_sum(state.u, h);
}

PointwiseReport pointwise_bounds_check(const EnergyState& state, double eps_at_t) {
    PointwiseReport report;
    const double d = std::sqrt(d_norm_sq(state, eps_at_t));
    const double tol = 1e-8;
    auto check = [&](const std::string& name, int node, double lhs, double rhs) {
        if (lhs > rhs * (1.0 + tol) + 1e-14) {
            report.ok = false;
            report.violations.push_back({name, node, lhs, rhs});
        }
    };
    const int n = state.n();
    const double c_sup = std::pow(kPi, 1.5);
    const double c_grad = std::sqrt(kPi);
    for (int j = 0; j < n; ++j) {
        const double au = std::abs(state.u[j]);
        check("abs_u_le_d", j, au, d);
        check("eps_abs_u_le_pi32_d", j, eps_at_t * au, c_sup * d);
    }
    double prev = 0.0;
    for (int j = 0; j <= n; ++j) {
        const double next = j < n ? state.u[j] : 0.0;
        const double grad = std::abs(next - prev) / state.h;
        check("eps_abs_ux_le_pi12_d", j, eps_at_t * grad, c_grad * d);
        prev = next;
    }
    return report;
}

Certificate select_parameters(const CoefficientModel& model, double mu) {
    const HorizonBounds bounds = horizon_bounds(model);
    if (!(bounds.cc_inf > 0.0))
        throw inadmissible_error("stiffness clause fails: inf C <= 0 on the horizon");
    if (bounds.eps_inf < 0.0)
        throw inadmissible_error("viscosity clause fails: inf eps < 0 on the horizon");
    if (!(model.a + bounds.eps_inf > 0.0)) {
        std::ostringstream msg;
        msg << "damping clause fails: a + inf eps = " << model.a + bounds.eps_inf
            << " must be positive";
        throw inadmissible_error(msg.str());
    }
    if (!(mu > 0.0)) throw inadmissible_error("decay constant mu must be positive");

    double lambda = 0.5;
    if (model.a < 0.0) {
        const double lambda_min = -model.a / bounds.eps_inf;
        if (!(lambda_min < 1.0))
            throw inadmissible_error("damping clause leaves no feasible lambda in (0,1)");
        lambda = 0.5 * (lambda_min + 1.0);
    }
    const double theta1 = std::max(2.0 * model.a, -model.a / (1.0 - lambda));
    const double theta = theta1 + std::max(0.1, 0.1 * std::abs(theta1));
    const double gamma = gamma_threshold(model.a, mu, lambda, theta, bounds.eps_inf);

    Certificate cert = assemble(model, mu, lambda, theta, gamma, bounds);
    if (!(cert.chi0 > 0.0) || !(cert.chi1 > 0.0))
        throw inadmissible_error("derived energy constants are not positive");

    // gamma enters the oscillation clause, so the scan runs again at the
    // final value.
    const AdmissibilityReport recheck = check_condi4(model, gamma, mu);
    if (!recheck.cond_flags[3])
        throw inadmissible_error("decay clause C - eps' >= mu (1 + eps) fails on the horizon");
    if (!recheck.cond_flags[4])
        throw inadmissible_error(
            "oscillation clause mu eps^2 + mu eps + eps'' > (1+gamma) min(C',0) fails on the "
            "horizon");
    return cert;
}

Certificate make_certificate(const CoefficientModel& model, double mu, double lambda, double theta,
                             double gamma) {
    const HorizonBounds bounds = horizon_bounds(model);
    if (!(bounds.cc_inf > 0.0))
        throw inadmissible_error("stiffness clause fails: inf C <= 0 on the horizon");
    if (bounds.eps_inf < 0.0)
        throw inadmissible_error("viscosity clause fails: inf eps < 0 on the horizon");
    if (!(model.a + bounds.eps_inf > 0.0))
        throw inadmissible_error("damping clause fails: a + inf eps must be positive");
    if (!(mu > 0.0)) throw inadmissible_error("decay constant mu must be positive");
    if (!(lambda > 0.0) || !(lambda < 1.0))
        throw inadmissible_error("lambda must lie in (0, 1)");
    if (!(model.a + lambda * bounds.eps_inf > 0.0))
        throw inadmissible_error("a + lambda inf eps must be positive");
    const double theta1 = std::max(2.0 * model.a, -model.a / (1.0 - lambda));
    if (!(theta >= theta1) || !(theta > 0.0)) {
        std::ostringstream msg;
        msg << "theta = " << theta << " is below its critical value " << std::max(theta1, 0.0);
        throw inadmissible_error(msg.str());
    }
    const double gamma1 = gamma_threshold(model.a, mu, lambda, theta, bounds.eps_inf);
    if (gamma < gamma1 - 1e-12) {
        std::ostringstream msg;
        msg << "gamma = " << gamma << " is below its threshold " << gamma1;
        throw inadmissible_error(msg.str());
    }

    Certificate cert = assemble(model, mu, lambda, theta, gamma, bounds);
    if (!(cert.chi0 > 0.0) || !(cert.chi1 > 0.0))
        throw inadmissible_error("derived energy constants are not positive");
    const AdmissibilityReport recheck = check_condi4(model, gamma, mu);
    if (!recheck.cond_flags[3])
        throw inadmissible_error("decay clause C - eps' >= mu (1 + eps) fails on the horizon");
    if (!recheck.cond_flags[4])
        throw inadmissible_error(
            "oscillation clause mu eps^2 + mu eps + eps'' > (1+gamma) min(C',0) fails on the "
            "horizon");
    return cert;
}

PsiBundle psi_functions(const Certificate& cert, double t) {
    const CoefficientBundle b = eval_bundle(cert.model, t);
    PsiBundle out;
    out.G = b.cc - 0.5 * b.eps_d1 + 1.0;
    const double inv_branch =
        b.eps > 0.0 ? cert.mu / b.eps : std::numeric_limits<double>::infinity();
    out.J = 0.5 * std::min({inv_branch,
                            (b.eps + cert.model.a) * (cert.gamma - 1.0) / 2.0 + cert.model.a -
                                cert.theta,
                            cert.mu * b.eps * b.eps + cert.mu * b.eps + b.eps_d2 +
                                cert.mu * b.eps * (cert.model.a + cert.theta) -
                                (1.0 + cert.gamma) * b.cc_d1_neg});
    out.b = (cert.chi1 + out.J) / (cert.gamma * out.G);
    out.g = (1.0 + cert.gamma) / (2.0 * cert.chi0) * (b.cc_d1_pos + eval_gt(cert, t));
    out.psi = out.b - out.g;
    return out;
}

double liapunov_V(const EnergyState& state, const Certificate& cert) {
    const CoefficientBundle b = eval_bundle(cert.model, state.t);
    const double a = cert.model.a;
    const double h = state.h;
    const int n = state.n();
    double nodes = 0.0;
    for (int j = 0; j < n; ++j) {
        const double u = state.u[j];
        const double v = state.v[j];
        const double curv = b.eps * second_diff(state.u, j, h) - v;
        nodes += cert.gamma * v * v + curv * curv + a * cert.theta * u * u +
                 2.0 * cert.theta * u * v;
    }
    const double coef_ux = b.cc * (1.0 + cert.gamma) - b.eps_d1 + b.eps * (a + cert.theta);
    return 0.5 * (h * nodes + coef_ux * edge_grad_sq_sum(state.u, h));
}

double sandwich_upper_factor(const Certificate& cert, double t) {
    return cert.gamma * psi_functions(cert, t).G;
}

Certificate optimize_certificate(const CoefficientModel& model, double mu,
                                 CertObjective objective) {
    const HorizonBounds bounds = horizon_bounds(model);
    const Certificate base = select_parameters(model, mu);

    constexpr int kPsiSamples = 512;
    auto score = [&](const Certificate& cert) {
        if (objective == CertObjective::MaxChi0) return cert.chi0;
        double inf_psi = std::numeric_limits<double>::infinity();
        for (int i = 0; i < kPsiSamples; ++i) {
            const double t = grid_time(model, i, kPsiSamples);
            inf_psi = std::min(inf_psi, psi_functions(cert, t).psi);
        }
        return inf_psi;
    };

    auto try_candidate = [&](double lambda, double theta, double gamma,
                             Certificate& best, double& best_score) {
        if (!(lambda > 0.0) || !(lambda < 1.0)) return;
        if (model.a < 0.0 && !(lambda * bounds.eps_inf + model.a > 0.0)) return;
        const double theta1 = std::max(2.0 * model.a, -model.a / (1.0 - lambda));
        if (!(theta > theta1)) return;
        if (gamma < gamma_threshold(model.a, mu, lambda, theta, bounds.eps_inf)) return;
        Certificate cand = assemble(model, mu, lambda, theta, gamma, bounds);
        if (!(cand.chi0 > 0.0) || !(cand.chi1 > 0.0)) return;
        const AdmissibilityReport rep = check_condi4(model, gamma, mu, 1024);
        if (!rep.cond_flags[3] || !rep.cond_flags[4]) return;
        const double s = score(cand);
        if (s > best_score) {
            best_score = s;
            best = std::move(cand);
        }
    };

    Certificate best = base;
    double best_score = score(base);

    std::vector<double> lambdas;
    if (model.a >= 0.0) {
        lambdas = {0.25, 0.4, 0.5, 0.6, 0.75};
    } else {
        const double lambda_min = -model.a / bounds.eps_inf;
        for (int i = 1; i <= 5; ++i)
            lambdas.push_back(lambda_min + (1.0 - lambda_min) * static_cast<double>(i) / 6.0);
    }

    for (double lambda : lambdas) {
        const double theta1 = std::max(2.0 * model.a, -model.a / (1.0 - lambda));
        const double step = std::max(0.1, 0.1 * std::abs(theta1));
        for (double mult : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            const double theta = theta1 + step * mult;
            const double gamma1 = gamma_threshold(model.a, mu, lambda, theta, bounds.eps_inf);
            for (double gmult : {1.0, 1.25, 1.5, 2.0, 3.0})
                try_candidate(lambda, theta, gamma1 * gmult, best, best_score);
        }
    }

    // One refinement pass around the incumbent.
    const double lambda_ref = best.lambda;
    const double theta_ref = best.theta;
    const double gamma_ref = best.gamma;
    for (double dl : {-0.05, 0.0, 0.05})
        for (double tm : {0.75, 1.0, 1.5})
            for (double gm : {1.0, 1.1, 1.2})
                try_candidate(lambda_ref + dl, theta_ref * tm, gamma_ref * gm, best, best_score);

    return best;
}

std::string certificate_to_json(const Certificate& cert) {
    nlohmann::json doc;
    doc["cert_v"] = 1;
    doc["lambda"] = cert.lambda;
    doc["theta"] = cert.theta;
    doc["gamma"] = cert.gamma;
    doc["mu"] = cert.mu;
    doc["chi0"] = cert.chi0;
    doc["chi1"] = cert.chi1;
    doc["bigB"] = cert.bigB;
    doc["eps_inf"] = cert.eps_inf;
    doc["eps_sup"] = cert.eps_sup;
    doc["cc_inf"] = cert.cc_inf;
    doc["model"] = {{"preset", cert.model.preset},
                    {"params", cert.model.params},
                    {"t_min", cert.model.t_min},
                    {"t_max", cert.model.t_max},
                    {"a", cert.model.a}};
    if (!cert.model.source_file.empty()) doc["model"]["source_file"] = cert.model.source_file;
    doc["gt"] = {{"kind", cert.gt_kind}, {"params", cert.gt_params}};
    return doc.dump(2);
}

namespace {

std::function<double(double)> rebuild_gt(const std::string& kind,
                                         const std::map<std::string, double>& params) {
    auto get = [&params](const char* key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    if (kind == "zero") return [](double) { return 0.0; };
    if (kind == "const") {
        const double value = get("value", 0.0);
        return [value](double) { return value; };
    }
    if (kind == "pulse_train") {
        const double r0 = get("r0", 0.0);
        const double alpha = get("alpha_tri", 1.0);
        const double beta = get("beta_tri", 1.0);
        const double bigB = get("bigB", 1.0);
        return [r0, alpha, beta, bigB](double t) {
            // Mirrors witness_pulse_train; kept local to avoid a cycle.
            double r2 = 0.0;
            const double n = std::round(t);
            if (n >= 1.0) {
                const double half = 0.5 * std::pow(n, -alpha);
                const double dist = std::abs(t - n);
                if (dist <= half)
                    r2 = r0 * r0 * (2.0 * std::pow(n, beta) -
                                    4.0 * std::pow(n, alpha + beta) * dist);
            }
            return kPi * bigB * r2;
        };
    }
    throw config_error("unknown gt descriptor kind: " + kind);
}

}  // namespace

Certificate certificate_from_json(const std::string& doc_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(doc_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("certificate JSON parse error: ") + e.what());
    }
    try {
        if (!doc.contains("cert_v") || doc["cert_v"].get<int>() != 1)
            throw config_error("certificate schema version must be cert_v = 1");
        Certificate cert;
        cert.lambda = doc.at("lambda").get<double>();
        cert.theta = doc.at("theta").get<double>();
        cert.gamma = doc.at("gamma").get<double>();
        cert.mu = doc.at("mu").get<double>();
        cert.chi0 = doc.at("chi0").get<double>();
        cert.chi1 = doc.at("chi1").get<double>();
        cert.bigB = doc.at("bigB").get<double>();
        cert.eps_inf = doc.at("eps_inf").get<double>();
        cert.eps_sup = doc.at("eps_sup").get<double>();
        cert.cc_inf = doc.at("cc_inf").get<double>();

        const auto& jm = doc.at("model");
        std::map<std::string, double> params =
            jm.at("params").get<std::map<std::string, double>>();
        const std::string source =
            jm.contains("source_file") ? jm["source_file"].get<std::string>() : "";
        cert.model = make_preset(jm.at("preset").get<std::string>(), params,
                                 jm.at("t_min").get<double>(), jm.at("t_max").get<double>(),
                                 source);

        cert.gt_kind = doc.at("gt").at("kind").get<std::string>();
        cert.gt_params = doc.at("gt").at("params").get<std::map<std::string, double>>();
        cert.gt_bound = rebuild_gt(cert.gt_kind, cert.gt_params);

        // The derived constants must match their closed forms; a mismatch
        // means the document was edited or corrupted.
        const HorizonBounds bounds{cert.eps_inf, cert.eps_sup, cert.cc_inf};
        const DerivedConstants dc =
            derived_constants(cert.model.a, cert.mu, cert.lambda, cert.theta, cert.gamma, bounds);
        auto close = [](double x, double y) {
            return std::abs(x - y) <= 1e-9 * (1.0 + std::max(std::abs(x), std::abs(y)));
        };
        if (!close(dc.chi0, cert.chi0) || !close(dc.chi1, cert.chi1) ||
            !close(dc.bigB, cert.bigB))
            throw config_error("certificate constants are inconsistent with their parameters");
        return cert;
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("certificate JSON schema error: ") + e.what());
    }
}

}  // namespace stabcert
