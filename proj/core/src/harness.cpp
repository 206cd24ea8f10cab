#include "stabcert/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "stabcert/errors.hpp"

namespace stabcert {

namespace {

using nlohmann::json;

constexpr double kPi = std::numbers::pi;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

double get_param(const std::map<std::string, double>& params, const std::string& key,
                 double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void expect_keys(const json& obj, std::initializer_list<const char*> allowed,
                 const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed)
            if (key == a) known = true;
        if (!known) throw config_error("unknown field '" + key + "' in " + where);
    }
}

std::map<std::string, double> numeric_params(const json& obj,
                                             std::initializer_list<const char*> skip,
                                             const std::string& where) {
    std::map<std::string, double> out;
    for (const auto& [key, value] : obj.items()) {
        bool skipped = false;
        for (const char* s : skip)
            if (key == s) skipped = true;
        if (skipped) continue;
        if (!value.is_number())
            throw config_error("field '" + key + "' in " + where + " must be a number");
        out[key] = value.get<double>();
    }
    return out;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
    if (!obj.at(key).is_string())
        throw config_error(std::string("field '") + key + "' in " + where + " must be a string");
    return obj.at(key).get<std::string>();
}

const std::array<const char*, 5> kCheckNames = {"sandwich", "slope", "envelope", "pointwise",
                                                "witness"};

}  // namespace

Scenario scenario_from_json(const std::string& doc) {
    json j;
    try {
        j = json::parse(doc);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw config_error("config root must be an object");
    if (!j.contains("cfg_v")) throw config_error("config is missing 'cfg_v'");
    if (!j["cfg_v"].is_number_integer() || j["cfg_v"].get<int>() != 1)
        throw config_error("unsupported config schema version (expected cfg_v = 1)");
    expect_keys(j,
                {"cfg_v", "coefficients", "forcing", "initial", "boundary", "k", "grid",
                 "certificate", "checks", "seed"},
                "config");

    Scenario s;
    if (j.contains("coefficients")) {
        const json& c = j["coefficients"];
        if (c.contains("preset")) s.coeff_preset = require_string(c, "preset", "coefficients");
        if (c.contains("file")) s.sampled_file = require_string(c, "file", "coefficients");
        s.coeff_params = numeric_params(c, {"preset", "file"}, "coefficients");
    }
    if (j.contains("forcing")) {
        const json& f = j["forcing"];
        if (f.contains("kind")) s.forcing_kind = require_string(f, "kind", "forcing");
        if (f.contains("shape")) s.forcing_shape = require_string(f, "shape", "forcing");
        s.forcing_params = numeric_params(f, {"kind", "shape"}, "forcing");
    }
    if (j.contains("initial")) {
        const json& f = j["initial"];
        if (f.contains("preset")) s.initial_preset = require_string(f, "preset", "initial");
        s.initial_params = numeric_params(f, {"preset"}, "initial");
    }
    if (j.contains("boundary")) {
        const json& b = j["boundary"];
        expect_keys(b, {"w0", "wpi"}, "boundary");
        if (b.contains("w0")) {
            const json& e = b["w0"];
            if (e.contains("preset")) s.w0_preset = require_string(e, "preset", "boundary.w0");
            s.w0_params = numeric_params(e, {"preset"}, "boundary.w0");
        }
        if (b.contains("wpi")) {
            const json& e = b["wpi"];
            if (e.contains("preset")) s.wpi_preset = require_string(e, "preset", "boundary.wpi");
            s.wpi_params = numeric_params(e, {"preset"}, "boundary.wpi");
        }
    }
    if (j.contains("k")) {
        const json& f = j["k"];
        if (f.contains("preset")) s.k_preset = require_string(f, "preset", "k");
        s.k_params = numeric_params(f, {"preset"}, "k");
    }
    if (j.contains("grid")) {
        const json& g = j["grid"];
        expect_keys(g, {"N", "dt", "t0", "t_end", "output_stride"}, "grid");
        if (g.contains("N")) s.N = g["N"].get<int>();
        if (g.contains("dt")) s.dt = g["dt"].get<double>();
        if (g.contains("t0")) s.t0 = g["t0"].get<double>();
        if (g.contains("t_end")) s.t_end = g["t_end"].get<double>();
        if (g.contains("output_stride")) s.output_stride = g["output_stride"].get<int>();
    }
    if (j.contains("certificate")) {
        const json& c = j["certificate"];
        if (c.contains("mode")) s.cert_mode = require_string(c, "mode", "certificate");
        if (c.contains("objective"))
            s.cert_objective = require_string(c, "objective", "certificate");
        s.cert_params = numeric_params(c, {"mode", "objective"}, "certificate");
    }
    if (j.contains("checks")) {
        if (!j["checks"].is_array()) throw config_error("'checks' must be an array of names");
        s.checks.clear();
        for (const json& item : j["checks"]) {
            if (!item.is_string()) throw config_error("'checks' entries must be strings");
            const std::string name = item.get<std::string>();
            if (std::find(kCheckNames.begin(), kCheckNames.end(), name) == kCheckNames.end())
                throw config_error("unknown check name: " + name);
            s.checks.push_back(name);
        }
    }
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    return s;
}

std::string scenario_to_json(const Scenario& s) {
    json j;
    j["cfg_v"] = 1;
    json coeff;
    coeff["preset"] = s.coeff_preset;
    if (!s.sampled_file.empty()) coeff["file"] = s.sampled_file;
    for (const auto& [k, v] : s.coeff_params) coeff[k] = v;
    j["coefficients"] = coeff;

    json forcing;
    forcing["kind"] = s.forcing_kind;
    forcing["shape"] = s.forcing_shape;
    for (const auto& [k, v] : s.forcing_params) forcing[k] = v;
    j["forcing"] = forcing;

    json initial;
    initial["preset"] = s.initial_preset;
    for (const auto& [k, v] : s.initial_params) initial[k] = v;
    j["initial"] = initial;

    json w0, wpi;
    w0["preset"] = s.w0_preset;
    for (const auto& [k, v] : s.w0_params) w0[k] = v;
    wpi["preset"] = s.wpi_preset;
    for (const auto& [k, v] : s.wpi_params) wpi[k] = v;
    j["boundary"] = json{{"w0", w0}, {"wpi", wpi}};

    json kf;
    kf["preset"] = s.k_preset;
    for (const auto& [k, v] : s.k_params) kf[k] = v;
    j["k"] = kf;

    j["grid"] = json{{"N", s.N},
                     {"dt", s.dt},
                     {"t0", s.t0},
                     {"t_end", s.t_end},
                     {"output_stride", s.output_stride}};

    json cert;
    cert["mode"] = s.cert_mode;
    cert["objective"] = s.cert_objective;
    for (const auto& [k, v] : s.cert_params) cert[k] = v;
    j["certificate"] = cert;

    j["checks"] = s.checks;
    j["seed"] = s.seed;
    return j.dump(2);
}

namespace {

CoefficientModel build_model(const Scenario& sc) {
    const double t_min = std::min(0.0, sc.t0);
    const double t_max = std::max(sc.t_end, sc.t0 + 1.0);
    if (sc.coeff_preset == "sampled") {
        if (sc.sampled_file.empty())
            throw config_error("coefficients preset 'sampled' needs a 'file' entry");
        CoefficientModel m =
            make_sampled_from_csv(sc.sampled_file, get_param(sc.coeff_params, "a", 1.0));
        if (m.t_min > sc.t0 + 1e-12 || m.t_max < sc.t_end - 1e-12) {
            std::ostringstream msg;
            msg << "sampled coefficients cover [" << m.t_min << ", " << m.t_max
                << "] but the run needs [" << sc.t0 << ", " << sc.t_end << "]";
            throw config_error(msg.str());
        }
        return m;
    }
    return make_preset(sc.coeff_preset, sc.coeff_params, t_min, t_max);
}

/// Largest constant slope bound g0 keeping psi positive. Example 1 ships the
/// closed form; other models take the sampled minimum of the pointwise
/// margin 2 chi0 b(t)/(1+gamma) - max(Cdot, 0).
double g0_ceiling(const Certificate& cert) {
    if (cert.model.preset == "example1") {
        const double C = cert.model.cc(std::max(0.0, cert.model.t_min));
        return 2.0 * cert.chi0 * cert.chi1 / (cert.gamma * (cert.gamma + 1.0) * (C + 1.0));
    }
    const double t_lo = std::max(0.0, cert.model.t_min);
    const double t_hi = cert.model.t_max;
    double ceiling = std::numeric_limits<double>::infinity();
    constexpr int kScan = 4096;
    for (int i = 0; i <= kScan; ++i) {
        const double t = t_lo + (t_hi - t_lo) * static_cast<double>(i) / kScan;
        const PsiBundle pb = psi_functions(cert, t);
        const CoefficientBundle cb = eval_bundle(cert.model, t);
        const double margin = 2.0 * cert.chi0 * pb.b / (1.0 + cert.gamma) - cb.cc_d1_pos;
        ceiling = std::min(ceiling, margin);
    }
    return std::max(ceiling, 0.0);
}

ForcingSpec build_forcing(const Scenario& sc, double default_h0) {
    ForcingSpec f;
    const auto& P = sc.forcing_params;
    if (sc.forcing_kind == "zero") {
        f.kind = ForcingKind::Zero;
    } else if (sc.forcing_kind == "lipschitz") {
        f.kind = ForcingKind::Lipschitz;
        f.shape = sc.forcing_shape;
        f.h0_const = get_param(P, "h0", default_h0);
        f.h0 = [c = f.h0_const](double) { return c; };
    } else if (sc.forcing_kind == "nonanalytic") {
        f.kind = ForcingKind::NonAnalytic;
        f.h0_const = get_param(P, "h0", 0.05);
        f.h0 = [c = f.h0_const](double) { return c; };
        f.omega = get_param(P, "omega", 1.0);
        f.eps_branch = get_param(P, "eps_branch", 0.0) != 0.0;
    } else if (sc.forcing_kind == "sine_gordon") {
        f.kind = ForcingKind::SineGordonJJ;
        f.b_sg = get_param(P, "b", 0.05);
        f.gamma_bias = get_param(P, "gamma_bias", 0.0);
        f.beta_sg = get_param(P, "beta", 0.02);
        f.lambda_x = get_param(P, "lambda_x", 0.02);
    } else if (sc.forcing_kind == "pulse_train") {
        f.kind = ForcingKind::PulseTrain;
        f.r0 = get_param(P, "r0", 0.05);
        f.alpha_tri = get_param(P, "alpha", 2.0);
        f.beta_tri = get_param(P, "beta", 1.5);
    } else {
        throw config_error("unknown forcing kind: " + sc.forcing_kind);
    }
    f.params = P;
    return f;
}

void build_initial(const Scenario& sc, std::function<double(double)>& u0,
                   std::function<double(double)>& u1) {
    const auto& P = sc.initial_params;
    if (sc.initial_preset == "zero") {
        u0 = [](double) { return 0.0; };
        u1 = [](double) { return 0.0; };
    } else if (sc.initial_preset == "single_mode") {
        const double k = std::max(1.0, std::round(get_param(P, "k", 1.0)));
        const double amp = get_param(P, "amp", 0.1);
        const double vamp = get_param(P, "vamp", 0.0);
        u0 = [k, amp](double x) { return amp * std::sin(k * x); };
        u1 = [k, vamp](double x) { return vamp * std::sin(k * x); };
    } else if (sc.initial_preset == "random_smooth") {
        const auto seed = static_cast<std::uint64_t>(
            get_param(P, "seed", static_cast<double>(sc.seed)));
        const double amp = get_param(P, "amp", 0.1);
        const double vamp = get_param(P, "vamp", amp);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        auto coeffs = std::make_shared<std::array<double, 16>>();
        for (double& c : *coeffs) c = unit(rng);
        u0 = [coeffs, amp](double x) {
            double acc = 0.0;
            for (int k = 1; k <= 8; ++k)
                acc += (*coeffs)[k - 1] / (k * k) * std::sin(k * x);
            return amp * acc;
        };
        u1 = [coeffs, vamp](double x) {
            double acc = 0.0;
            for (int k = 1; k <= 8; ++k)
                acc += (*coeffs)[7 + k] / (k * k) * std::sin(k * x);
            return vamp * acc;
        };
    } else {
        throw config_error("unknown initial preset: " + sc.initial_preset);
    }
}

BoundaryEndpoint build_endpoint(const std::string& preset,
                                const std::map<std::string, double>& params, double t0) {
    BoundaryEndpoint e;
    if (preset == "zero") {
        e.zero = true;
        return e;
    }
    if (preset != "smooth_pulse") throw config_error("unknown boundary preset: " + preset);
    const double amp = get_param(params, "amp", 0.01);
    const double omega = get_param(params, "omega", 1.0);
    const double decay = get_param(params, "decay", 0.5);
    e.zero = false;
    e.value = [=](double t) {
        const double s = t - t0;
        if (s <= 0.0) return 0.0;
        return amp * (1.0 - std::cos(omega * s)) * std::exp(-decay * s);
    };
    e.d1 = [=](double t) {
        const double s = t - t0;
        if (s <= 0.0) return 0.0;
        return amp * (omega * std::sin(omega * s) - decay * (1.0 - std::cos(omega * s))) *
               std::exp(-decay * s);
    };
    e.d2 = [=](double t) {
        const double s = t - t0;
        if (s <= 0.0) return 0.0;
        return amp *
               (omega * omega * std::cos(omega * s) - 2.0 * decay * omega * std::sin(omega * s) +
                decay * decay * (1.0 - std::cos(omega * s))) *
               std::exp(-decay * s);
    };
    return e;
}

SpacetimeField build_kfield(const std::string& preset,
                            const std::map<std::string, double>& params) {
    if (preset == "zero") return SpacetimeField::zero_field();
    if (preset != "gauss_pulse") throw config_error("unknown k preset: " + preset);
    const double amp = get_param(params, "amp", 0.01);
    const double t_c = get_param(params, "t_c", 5.0);
    const double width = get_param(params, "width", 1.0);
    const double mode = std::max(1.0, std::round(get_param(params, "mode", 1.0)));
    SpacetimeField f;
    f.zero = false;
    auto bell = [t_c, width](double t) {
        const double q = (t - t_c) / width;
        return std::exp(-q * q);
    };
    f.value = [=](double x, double t) { return amp * std::sin(mode * x) * bell(t); };
    f.dt1 = [=](double x, double t) {
        const double q = (t - t_c) / width;
        return amp * std::sin(mode * x) * bell(t) * (-2.0 * q / width);
    };
    f.dt2 = [=](double x, double t) {
        const double q = (t - t_c) / width;
        return amp * std::sin(mode * x) * bell(t) * (4.0 * q * q - 2.0) / (width * width);
    };
    f.dx1 = [=](double x, double t) { return amp * mode * std::cos(mode * x) * bell(t); };
    return f;
}

double scan_pt_sup(const ProblemSpec& base, double t_end) {
    if (base.w0.zero && base.wpi.zero) return 0.0;
    double sup = 0.0;
    constexpr int kScan = 4096;
    for (int i = 0; i <= kScan; ++i) {
        const double t = base.t0 + (t_end - base.t0) * static_cast<double>(i) / kScan;
        const double a = base.w0.d1 ? std::abs(base.w0.d1(t)) : 0.0;
        const double b = base.wpi.d1 ? std::abs(base.wpi.d1(t)) : 0.0;
        sup = std::max({sup, a, b});
    }
    return 1.01 * sup;
}

void attach_gt(Certificate& cert, const ForcingSpec& reduced) {
    const ForcingWitnesses& w = reduced.witnesses;
    if (!w.gt) return;
    cert.gt_bound = w.gt;
    if (reduced.kind == ForcingKind::PulseTrain) {
        if (reduced.r0 == 0.0) return;
        // The witness is scale * r^2(t); probe the first tent peak so the
        // descriptor reproduces both the plain and the perturbed scale.
        const double peak_r2 = 2.0 * reduced.r0 * reduced.r0 *
                               std::pow(1.0, reduced.beta_tri);
        const double scale = w.gt(1.0) / peak_r2;
        cert.gt_kind = "pulse_train";
        cert.gt_params = {{"r0", reduced.r0},
                          {"alpha_tri", reduced.alpha_tri},
                          {"beta_tri", reduced.beta_tri},
                          {"bigB", scale / kPi}};
        return;
    }
    // The remaining kinds carry constant slope bounds; probe to be sure.
    const double t_lo = std::max(0.0, cert.model.t_min);
    const double v0 = w.gt(t_lo);
    const double v1 = w.gt(0.5 * (t_lo + cert.model.t_max));
    const double v2 = w.gt(cert.model.t_max);
    if (v0 == v1 && v1 == v2) {
        cert.gt_kind = "const";
        cert.gt_params = {{"value", v0}};
    } else {
        cert.gt_kind = "custom";
        cert.gt_params.clear();
    }
}

double interp_envelope(const EnvelopeResult& env, double t, std::size_t& cursor) {
    while (cursor + 1 < env.points.size() && env.points[cursor + 1].t <= t) ++cursor;
    double y = env.points[cursor].y;
    if (cursor + 1 < env.points.size()) {
        const auto& a = env.points[cursor];
        const auto& b = env.points[cursor + 1];
        if (b.t > a.t && t >= a.t && t <= b.t) y = a.y + (b.y - a.y) * (t - a.t) / (b.t - a.t);
    }
    return y;
}

CheckVerdict pointwise_check(const Trajectory& traj, const CoefficientModel& model) {
    CheckVerdict v;
    v.check = "pointwise";
    v.first_violation_t = kNaN;
    int passed = 0;
    const int n = static_cast<int>(traj.states.size());
    for (const EnergyState& s : traj.states) {
        const PointwiseReport rep = pointwise_bounds_check(s, model.eps(s.t));
        if (rep.ok) {
            ++passed;
        } else if (std::isnan(v.first_violation_t)) {
            v.first_violation_t = s.t;
            v.note = rep.violations.front().bound;
        }
    }
    v.pass_fraction = n > 0 ? static_cast<double>(passed) / n : 1.0;
    v.status = passed == n ? "PASS" : "FAIL";
    return v;
}

CheckVerdict witness_check(const Trajectory& traj, const ProblemSpec& reduced, double bigB) {
    CheckVerdict v;
    v.check = "witness";
    v.first_violation_t = kNaN;
    const ForcingWitnesses& w = reduced.forcing.witnesses;
    const int n = static_cast<int>(traj.states.size());
    const int stride = std::max(1, n / 500);
    int passed = 0;
    int total = 0;
    for (int i = 0; i < n; i += stride) {
        const EnergyState& s = traj.states[i];
        ++total;
        const double h = s.h;
        double sum = 0.0;
        for (int j = 0; j < s.n(); ++j) {
            const double x = (j + 1) * h;
            const double left = j > 0 ? s.u[j - 1] : 0.0;
            const double right = j + 1 < s.n() ? s.u[j + 1] : 0.0;
            const double ux = (right - left) / (2.0 * h);
            const double f = eval_f(reduced.forcing, x, s.t, s.u[j], ux, s.v[j]);
            sum += f * f;
        }
        const double d2 = d_norm_sq(s, reduced.model.eps(s.t));
        const double lhs = bigB * h * sum;
        const double rhs = (w.gt ? w.gt(s.t) * d2 : 0.0) + (w.g1 ? w.g1(s.t, d2) : 0.0) +
                           (w.g21 ? w.g21(s.t, d2) : 0.0) + (w.g22 ? w.g22(s.t) : 0.0);
        const bool ok = lhs <= rhs + 1e-8 * (1.0 + rhs);
        if (ok) {
            ++passed;
        } else if (std::isnan(v.first_violation_t)) {
            v.first_violation_t = s.t;
        }
    }
    v.pass_fraction = total > 0 ? static_cast<double>(passed) / total : 1.0;
    v.status = passed == total ? "PASS" : "FAIL";
    return v;
}

}  // namespace

Scenario example_scenario(int n) {
    if (n < 1 || n > 3) throw std::invalid_argument("example index must be 1, 2 or 3");
    Scenario s;
    s.coeff_preset = "example" + std::to_string(n);
    s.forcing_kind = "lipschitz";
    s.initial_preset = "single_mode";
    s.initial_params = {{"k", 1.0}, {"amp", 0.1}};
    return s;
}

VerdictReport run_scenario(const Scenario& sc, const std::string& csv_out) {
    if (sc.N < 16) throw config_error("grid.N must be at least 16");
    if (!(sc.dt > 0.0)) throw config_error("grid.dt must be positive");
    if (!(sc.t_end > sc.t0)) throw config_error("grid.t_end must exceed grid.t0");
    if (sc.output_stride < 1) throw config_error("grid.output_stride must be positive");

    const CoefficientModel model = build_model(sc);
    const double mu =
        sc.cert_params.count("mu") ? sc.cert_params.at("mu") : infimum_mu(model);

    Certificate cert;
    if (sc.cert_mode == "auto") {
        cert = select_parameters(model, mu);
    } else if (sc.cert_mode == "optimize") {
        CertObjective obj = CertObjective::MaxInfPsi;
        if (sc.cert_objective == "max_chi0")
            obj = CertObjective::MaxChi0;
        else if (sc.cert_objective != "max_inf_psi")
            throw config_error("unknown certificate objective: " + sc.cert_objective);
        cert = optimize_certificate(model, mu, obj);
    } else if (sc.cert_mode == "explicit") {
        if (!sc.cert_params.count("lambda") || !sc.cert_params.count("theta") ||
            !sc.cert_params.count("gamma"))
            throw config_error("explicit certificate mode needs lambda, theta and gamma");
        cert = make_certificate(model, mu, sc.cert_params.at("lambda"),
                                sc.cert_params.at("theta"), sc.cert_params.at("gamma"));
    } else {
        throw config_error("unknown certificate mode: " + sc.cert_mode);
    }

    double default_h0 = 0.05;
    if (sc.forcing_kind == "lipschitz" && !sc.forcing_params.count("h0"))
        default_h0 = std::sqrt(0.5 * g0_ceiling(cert) / 7.0);
    ForcingSpec raw = build_forcing(sc, default_h0);

    ProblemSpec base;
    base.model = model;
    base.forcing = raw;
    base.t0 = sc.t0;
    base.w0 = build_endpoint(sc.w0_preset, sc.w0_params, sc.t0);
    base.wpi = build_endpoint(sc.wpi_preset, sc.wpi_params, sc.t0);
    build_initial(sc, base.u0, base.u1);
    const SpacetimeField kf = build_kfield(sc.k_preset, sc.k_params);
    const double pt_sup = scan_pt_sup(base, sc.t_end);

    ProblemSpec reduced = reduce_boundary(base, cert.bigB, pt_sup, &kf);
    const ForcingWitnesses& wit = reduced.forcing.witnesses;
    attach_gt(cert, reduced.forcing);

    VerdictReport report;
    report.admissibility = check_condi4(model, cert.gamma, mu);
    report.certificate = cert;

    SolverOptions opts;
    opts.N = sc.N;
    opts.dt = sc.dt;
    opts.t_end = sc.t_end;
    opts.output_stride = sc.output_stride;
    report.trajectory = simulate(reduced, opts, &cert);
    Trajectory& traj = report.trajectory;

    const double y0 = traj.samples.empty() ? 0.0 : traj.samples.front().V;
    EnvelopeProblem prob = make_envelope(cert, wit, y0, sc.t0, sc.t_end);
    EnvelopeResult env = integrate_envelope(prob, std::min(sc.dt, 1e-3), sc.t_end);
    {
        std::size_t cursor = 0;
        for (TrajectorySample& s : traj.samples) s.y_envelope = interp_envelope(env, s.t, cursor);
    }
    if (!csv_out.empty()) write_trajectory_csv(traj, csv_out);

    const std::vector<CheckVerdict> standard = verify_against_envelope(traj, cert, prob);
    for (const std::string& name : sc.checks) {
        if (name == "sandwich" || name == "slope" || name == "envelope") {
            for (const CheckVerdict& v : standard)
                if (v.check == name) report.checks.push_back(v);
        } else if (name == "pointwise") {
            report.checks.push_back(pointwise_check(traj, model));
        } else if (name == "witness") {
            report.checks.push_back(witness_check(traj, reduced, cert.bigB));
        } else {
            throw config_error("unknown check name: " + name);
        }
    }

    // Theorem-level verdicts.
    const double alpha = std::max(y0, 1e-3);
    double s_alpha = kNaN;
    {
        TheoremVerdict tv;
        tv.name = "bounded";
        try {
            const BoundBundle bb = eventual_bound(prob, alpha);
            s_alpha = bb.s_alpha;
            bool ok = true;
            double first_bad = kNaN;
            for (const TrajectorySample& s : traj.samples) {
                if (s.t < bb.s_alpha) continue;
                if (!(s.V <= bb.beta * (1.0 + 1e-9))) {
                    ok = false;
                    if (std::isnan(first_bad)) first_bad = s.t;
                }
            }
            tv.status = ok ? "PASS" : "FAIL";
            tv.quantifiers = {{"alpha", bb.alpha}, {"beta", bb.beta}, {"s_alpha", bb.s_alpha}};
            if (!ok) {
                std::ostringstream msg;
                msg << "V exceeds beta at t=" << first_bad;
                tv.reason = msg.str();
            } else if (bb.horizon_certified_only) {
                tv.reason = "certified on the sampled horizon only";
            }
        } catch (const hypothesis_violation& e) {
            tv.status = "INCONCLUSIVE";
            tv.reason = e.what();
        }
        report.theorems.push_back(tv);
    }
    {
        TheoremVerdict tv;
        tv.name = "attracted";
        try {
            const double rho = alpha;
            const BoundBundle bb = attraction_time(prob, rho, alpha);
            tv.quantifiers = {{"alpha", bb.alpha},
                              {"beta", bb.beta},
                              {"rho", rho},
                              {"T", bb.T_estimate},
                              {"s_alpha", bb.s_alpha}};
            if (bb.horizon_certified_only) {
                tv.status = "INCONCLUSIVE";
                tv.reason = "the horizon cannot certify the decay";
            } else {
                bool ok = true;
                double first_bad = kNaN;
                bool window_seen = false;
                for (const TrajectorySample& s : traj.samples) {
                    if (s.t < bb.s_alpha + bb.T_estimate) continue;
                    window_seen = true;
                    if (!(s.V <= rho * (1.0 + 1e-9))) {
                        ok = false;
                        if (std::isnan(first_bad)) first_bad = s.t;
                    }
                }
                tv.status = ok ? "PASS" : "FAIL";
                if (!ok) {
                    std::ostringstream msg;
                    msg << "V exceeds rho at t=" << first_bad;
                    tv.reason = msg.str();
                } else if (!window_seen) {
                    tv.reason = "certified; the attraction window lies beyond the simulated span";
                }
            }
        } catch (const hypothesis_violation& e) {
            tv.status = "INCONCLUSIVE";
            tv.reason = e.what();
        }
        report.theorems.push_back(tv);
    }
    {
        TheoremVerdict tv;
        tv.name = "stable";
        if (!wit.null_preserving) {
            tv.status = "INCONCLUSIVE";
            tv.reason = "the forcing does not preserve the null solution";
        } else {
            double psi_inf = std::numeric_limits<double>::infinity();
            double amp_factor = 0.0;
            constexpr int kScan = 2048;
            for (int i = 0; i <= kScan; ++i) {
                const double t = sc.t0 + (sc.t_end - sc.t0) * static_cast<double>(i) / kScan;
                psi_inf = std::min(psi_inf, prob.psi(t));
                amp_factor = std::max(amp_factor, sandwich_upper_factor(cert, t));
            }
            tv.quantifiers = {{"psi_inf", psi_inf},
                              {"amplification", std::sqrt(amp_factor / cert.chi0)}};
            if (psi_inf >= 0.0) {
                tv.status = "PASS";
            } else {
                tv.status = "INCONCLUSIVE";
                tv.reason = "psi dips negative on the horizon; no uniform-stability certificate";
            }
        }
        report.theorems.push_back(tv);
    }
    {
        TheoremVerdict tv;
        tv.name = "totally_stable";
        ForcingSpec plain = make_reduced_forcing(raw, SpacetimeField::zero_field(),
                                                 SpacetimeField::zero_field(), model.a, cert.bigB,
                                                 0.0, &model);
        if (!plain.witnesses.null_preserving) {
            tv.status = "INCONCLUSIVE";
            tv.reason = "the unperturbed forcing does not preserve the null solution";
        } else if (!plain.witnesses.special_split) {
            tv.status = "INCONCLUSIVE";
            tv.reason = "the witnesses lack the special split";
        } else {
            const double sigma = get_param(sc.cert_params, "sigma", 0.5);
            const double beta_ts = cert.chi0 * sigma * sigma;
            EnvelopeProblem prob0 = make_envelope(cert, plain.witnesses, 0.0, sc.t0, sc.t_end);
            try {
                const BoundBundle bb = total_stability_bound(prob0, beta_ts);
                const double delta_prime =
                    std::sqrt(bb.delta_hat / sandwich_upper_factor(cert, sc.t0));
                const double nu = 2.0 * bb.delta_hat / (1.0 + cert.gamma);
                double mass = 0.0;
                if (wit.g22) {
                    constexpr int kQuad = 2048;
                    double prev = wit.g22(sc.t0);
                    for (int i = 1; i <= kQuad; ++i) {
                        const double t =
                            sc.t0 + (sc.t_end - sc.t0) * static_cast<double>(i) / kQuad;
                        const double cur = wit.g22(t);
                        mass += 0.5 * (prev + cur) * ((sc.t_end - sc.t0) / kQuad);
                        prev = cur;
                    }
                }
                tv.quantifiers = {{"sigma", sigma},        {"beta", beta_ts},
                                  {"delta_hat", bb.delta_hat}, {"delta_prime", delta_prime},
                                  {"nu", nu},              {"V0", y0},
                                  {"perturbation_mass", mass}};
                if (!(bb.delta_hat > 0.0)) {
                    tv.status = "INCONCLUSIVE";
                    tv.reason = "no positive perturbation threshold certified";
                } else if (y0 > bb.delta_hat || mass > nu) {
                    tv.status = "INCONCLUSIVE";
                    tv.reason = "this instance lies outside the certified thresholds";
                } else {
                    double sup_d = 0.0;
                    for (const TrajectorySample& s : traj.samples)
                        sup_d = std::max(sup_d, std::sqrt(std::max(s.d2, 0.0)));
                    tv.quantifiers["sup_d"] = sup_d;
                    tv.status = sup_d < sigma ? "PASS" : "FAIL";
                    if (tv.status == "FAIL") tv.reason = "sup d reaches the sigma level";
                }
            } catch (const hypothesis_violation& e) {
                tv.status = "INCONCLUSIVE";
                tv.reason = e.what();
            }
        }
        report.theorems.push_back(tv);
    }

    report.any_check_failed = false;
    for (const CheckVerdict& v : report.checks)
        if (v.status == "FAIL") report.any_check_failed = true;
    for (const TheoremVerdict& v : report.theorems)
        if (v.status == "FAIL") report.any_check_failed = true;
    return report;
}

VerdictReport run_example(int n, const Scenario* overrides, const std::string& csv_out) {
    Scenario s = overrides ? *overrides : example_scenario(n);
    s.coeff_preset = "example" + std::to_string(n);
    return run_scenario(s, csv_out);
}

std::string VerdictReport::to_json() const {
    json j;
    json adm;
    adm["mu"] = admissibility.mu;
    adm["eps_inf"] = admissibility.eps_inf;
    adm["eps_sup"] = admissibility.eps_sup;
    adm["cc_inf"] = admissibility.cc_inf;
    adm["cond_flags"] = admissibility.cond_flags;
    adm["gamma_used"] = admissibility.gamma_used;
    adm["margin"] = admissibility.margin;
    adm["all_ok"] = admissibility.all_ok();
    j["admissibility"] = adm;
    j["certificate"] = json::parse(certificate_to_json(certificate));
    j["checks"] = json::parse(verdicts_to_json(checks));
    json ths = json::array();
    for (const TheoremVerdict& t : theorems) {
        json item;
        item["name"] = t.name;
        item["status"] = t.status;
        if (!t.reason.empty()) item["reason"] = t.reason;
        item["quantifiers"] = t.quantifiers;
        ths.push_back(item);
    }
    j["theorems"] = ths;
    json tr;
    tr["samples"] = trajectory.samples.size();
    tr["diverged"] = trajectory.diverged;
    tr["last_valid_t"] = trajectory.last_valid_t;
    double sup_d = 0.0;
    for (const TrajectorySample& s : trajectory.samples)
        sup_d = std::max(sup_d, std::sqrt(std::max(s.d2, 0.0)));
    tr["sup_d"] = sup_d;
    j["trajectory"] = tr;
    j["any_check_failed"] = any_check_failed;
    return j.dump(2);
}

namespace {

/// Multiply the amplitude-like parameters of a scenario by `factor`.
Scenario scale_scenario(const Scenario& base, double factor) {
    Scenario s = base;
    auto scale_key = [factor](std::map<std::string, double>& m, const char* key, double fallback) {
        m[key] = get_param(m, key, fallback) * factor;
    };
    scale_key(s.initial_params, "amp", 0.1);
    if (s.initial_preset == "single_mode") scale_key(s.initial_params, "vamp", 0.0);
    if (s.w0_preset != "zero") scale_key(s.w0_params, "amp", 0.01);
    if (s.wpi_preset != "zero") scale_key(s.wpi_params, "amp", 0.01);
    if (s.k_preset != "zero") scale_key(s.k_params, "amp", 0.01);
    return s;
}

struct InstanceMeasure {
    double v0 = 0.0;        // energy functional of the reduced initial data
    double env_mass = 0.0;  // (1+gamma)/2 * integral of the g22 witness
};

InstanceMeasure measure_instance(const Scenario& sc, const CoefficientModel& model,
                                 const Certificate& cert, double default_h0) {
    ProblemSpec base;
    base.model = model;
    base.forcing = build_forcing(sc, default_h0);
    base.t0 = sc.t0;
    base.w0 = build_endpoint(sc.w0_preset, sc.w0_params, sc.t0);
    base.wpi = build_endpoint(sc.wpi_preset, sc.wpi_params, sc.t0);
    build_initial(sc, base.u0, base.u1);
    const SpacetimeField kf = build_kfield(sc.k_preset, sc.k_params);
    const double pt_sup = scan_pt_sup(base, sc.t_end);
    ProblemSpec reduced = reduce_boundary(base, cert.bigB, pt_sup, &kf);

    InstanceMeasure m;
    const EnergyState state = EnergyState::from_closures(sc.N, sc.t0, reduced.u0, reduced.u1);
    m.v0 = liapunov_V(state, cert);
    const ForcingWitnesses& w = reduced.forcing.witnesses;
    if (w.g22) {
        constexpr int kQuad = 2048;
        double mass = 0.0;
        double prev = w.g22(sc.t0);
        for (int i = 1; i <= kQuad; ++i) {
            const double t = sc.t0 + (sc.t_end - sc.t0) * static_cast<double>(i) / kQuad;
            const double cur = w.g22(t);
            mass += 0.5 * (prev + cur) * ((sc.t_end - sc.t0) / kQuad);
            prev = cur;
        }
        m.env_mass = 0.5 * (1.0 + cert.gamma) * mass;
    }
    return m;
}

}  // namespace

PerturbationStudy run_perturbation_study(const Scenario& base, const std::vector<double>& scales,
                                         double sigma, const std::string& csv_out) {
    if (!(sigma > 0.0)) throw std::invalid_argument("the study needs sigma > 0");

    const CoefficientModel model = build_model(base);
    const double mu =
        base.cert_params.count("mu") ? base.cert_params.at("mu") : infimum_mu(model);
    Certificate cert = select_parameters(model, mu);

    double default_h0 = 0.05;
    if (base.forcing_kind == "lipschitz" && !base.forcing_params.count("h0"))
        default_h0 = std::sqrt(0.5 * g0_ceiling(cert) / 7.0);

    ForcingSpec raw = build_forcing(base, default_h0);
    ForcingSpec plain = make_reduced_forcing(raw, SpacetimeField::zero_field(),
                                             SpacetimeField::zero_field(), model.a, cert.bigB,
                                             0.0, &model);
    attach_gt(cert, plain);

    PerturbationStudy study;
    study.sigma = sigma;
    const double beta_ts = cert.chi0 * sigma * sigma;
    EnvelopeProblem prob0 = make_envelope(cert, plain.witnesses, 0.0, base.t0, base.t_end);
    study.delta_hat = total_stability_bound(prob0, beta_ts).delta_hat;
    study.delta_prime = std::sqrt(std::max(study.delta_hat, 0.0) /
                                  sandwich_upper_factor(cert, base.t0));
    study.nu = 2.0 * study.delta_hat / (1.0 + cert.gamma);

    // Normalize amplitudes so scale = 1 sits just inside the certified
    // thresholds: the larger of V0/delta_hat and mass/delta_hat equals 0.999.
    double a_star = 1.0;
    if (study.delta_hat > 0.0) {
        auto load = [&](double amp_factor) {
            const InstanceMeasure m =
                measure_instance(scale_scenario(base, amp_factor), model, cert, default_h0);
            return std::max(m.v0, m.env_mass) / study.delta_hat;
        };
        double hi = 1.0;
        int guard = 0;
        while (load(hi) < 0.999 && guard++ < 60) hi *= 2.0;
        double lo = 0.0;
        for (int i = 0; i < 50; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (load(mid) < 0.999)
                lo = mid;
            else
                hi = mid;
        }
        a_star = 0.5 * (lo + hi);
    }

    for (double scale : scales) {
        const Scenario sc = scale_scenario(base, scale * a_star);
        const InstanceMeasure m = measure_instance(sc, model, cert, default_h0);

        PerturbationRow row;
        row.scale = scale;
        row.sigma = sigma;
        row.certified = study.delta_hat > 0.0 && m.v0 <= study.delta_hat &&
                        m.env_mass <= study.delta_hat;

        ProblemSpec pbase;
        pbase.model = model;
        pbase.forcing = build_forcing(sc, default_h0);
        pbase.t0 = sc.t0;
        pbase.w0 = build_endpoint(sc.w0_preset, sc.w0_params, sc.t0);
        pbase.wpi = build_endpoint(sc.wpi_preset, sc.wpi_params, sc.t0);
        build_initial(sc, pbase.u0, pbase.u1);
        const SpacetimeField kf = build_kfield(sc.k_preset, sc.k_params);
        const double pt_sup = scan_pt_sup(pbase, sc.t_end);
        ProblemSpec reduced = reduce_boundary(pbase, cert.bigB, pt_sup, &kf);

        SolverOptions opts;
        opts.N = sc.N;
        opts.dt = sc.dt;
        opts.t_end = sc.t_end;
        opts.output_stride = sc.output_stride;
        const Trajectory traj = simulate(reduced, opts, &cert);
        double sup_d = 0.0;
        for (const TrajectorySample& s : traj.samples)
            sup_d = std::max(sup_d, std::sqrt(std::max(s.d2, 0.0)));
        row.sup_d = sup_d;
        row.pass = sup_d < sigma && !traj.diverged;
        study.rows.push_back(row);
    }

    if (!csv_out.empty()) {
        std::ofstream out(csv_out, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + csv_out);
        out << "scale,sup_d,sigma,pass\n";
        char buf[160];
        for (const PerturbationRow& r : study.rows) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n", r.scale, r.sup_d, r.sigma,
                          r.pass ? 1 : 0);
            out << buf;
        }
    }
    return study;
}

}  // namespace stabcert
