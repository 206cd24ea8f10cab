#include "stabcert/coefficients.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "stabcert/errors.hpp"

namespace stabcert {

namespace {

void require_horizon(const CoefficientModel& model, double t) {
    const double slack = 1e-9 * (1.0 + std::abs(model.t_max));
    if (t < model.t_min - slack || t > model.t_max + slack) {
        std::ostringstream msg;
        msg << "time " << t << " outside model horizon [" << model.t_min << ", " << model.t_max
            << "]";
        throw std::domain_error(msg.str());
    }
}

/// Uniform table with fourth-order finite-difference derivatives. Values and
/// derivative tables are linearly interpolated between nodes.
struct SampledTable {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> value;
    std::vector<double> d1;
    std::vector<double> d2;

    [[nodiscard]] double interp(const std::vector<double>& col, double t) const {
        const double s = (t - t0) / dt;
        const auto n = static_cast<long>(col.size());
        if (s <= 0.0) return col.front();
        if (s >= static_cast<double>(n - 1)) return col.back();
        const auto i = static_cast<long>(s);
        const double w = s - static_cast<double>(i);
        return col[i] * (1.0 - w) + col[i + 1] * w;
    }
};

// Fourth-order stencils. Interior points use the symmetric five-point rules;
// the two nodes nearest each end use one-sided rules of the same order.
double stencil_d1(const std::vector<double>& w, long i, double dt) {
    const auto n = static_cast<long>(w.size());
    if (i >= 2 && i + 2 < n)
        return (-w[i + 2] + 8.0 * w[i + 1] - 8.0 * w[i - 1] + w[i - 2]) / (12.0 * dt);
    if (i < 2) {
        const long j = 0;
        const double* a = w.data() + j;
        if (i == 0)
            return (-25.0 * a[0] + 48.0 * a[1] - 36.0 * a[2] + 16.0 * a[3] - 3.0 * a[4]) /
                   (12.0 * dt);
        return (-3.0 * a[0] - 10.0 * a[1] + 18.0 * a[2] - 6.0 * a[3] + a[4]) / (12.0 * dt);
    }
    const double* a = w.data() + (n - 5);
    if (i == n - 1)
        return (25.0 * a[4] - 48.0 * a[3] + 36.0 * a[2] - 16.0 * a[1] + 3.0 * a[0]) / (12.0 * dt);
    return (3.0 * a[4] + 10.0 * a[3] - 18.0 * a[2] + 6.0 * a[1] - a[0]) / (12.0 * dt);
}

double stencil_d2(const std::vector<double>& w, long i, double dt) {
    const auto n = static_cast<long>(w.size());
    const double dt2 = dt * dt;
    if (i >= 2 && i + 2 < n)
        return (-w[i + 2] + 16.0 * w[i + 1] - 30.0 * w[i] + 16.0 * w[i - 1] - w[i - 2]) /
               (12.0 * dt2);
    if (i < 2) {
        const double* a = w.data();
        if (i == 0)
            return (45.0 * a[0] - 154.0 * a[1] + 214.0 * a[2] - 156.0 * a[3] + 61.0 * a[4] -
                    10.0 * a[5]) /
                   (12.0 * dt2);
        return (10.0 * a[0] - 15.0 * a[1] - 4.0 * a[2] + 14.0 * a[3] - 6.0 * a[4] + a[5]) /
               (12.0 * dt2);
    }
    const double* a = w.data() + (n - 6);
    if (i == n - 1)
        return (45.0 * a[5] - 154.0 * a[4] + 214.0 * a[3] - 156.0 * a[2] + 61.0 * a[1] -
                10.0 * a[0]) /
               (12.0 * dt2);
    return (10.0 * a[5] - 15.0 * a[4] - 4.0 * a[3] + 14.0 * a[2] - 6.0 * a[1] + a[0]) /
           (12.0 * dt2);
}

SampledTable build_table(double t0, double dt, const std::vector<double>& values) {
    SampledTable table;
    table.t0 = t0;
    table.dt = dt;
    table.value = values;
    const auto n = static_cast<long>(values.size());
    table.d1.resize(values.size());
    table.d2.resize(values.size());
    for (long i = 0; i < n; ++i) {
        table.d1[i] = stencil_d1(values, i, dt);
        table.d2[i] = stencil_d2(values, i, dt);
    }
    return table;
}

CoefficientModel finish_preset(CoefficientModel model, std::string preset,
                               std::map<std::string, double> params) {
    model.preset = std::move(preset);
    model.params = std::move(params);
    if (model.t_max <= model.t_min)
        throw std::invalid_argument("coefficient horizon must satisfy t_max > t_min");
    return model;
}

}  // namespace

CoefficientBundle eval_bundle(const CoefficientModel& model, double t) {
    require_horizon(model, t);
    CoefficientBundle b;
    b.eps = model.eps(t);
    b.eps_d1 = model.eps_d1(t);
    b.eps_d2 = model.eps_d2(t);
    b.cc = model.cc(t);
    b.cc_d1 = model.cc_d1(t);
    b.cc_d1_pos = b.cc_d1 > 0.0 ? b.cc_d1 : 0.0;
    b.cc_d1_neg = b.cc_d1 - b.cc_d1_pos;
    return b;
}

double infimum_mu(const CoefficientModel& model, int samples) {
    if (samples < 2) throw std::invalid_argument("infimum_mu needs at least 2 samples");
    const double span = model.t_max - model.t_min;
    double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double t = model.t_min + span * static_cast<double>(i) / (samples - 1);
        const CoefficientBundle b = eval_bundle(model, t);
        const double quotient = (b.cc - b.eps_d1) / (1.0 + b.eps);
        inf = std::min(inf, quotient);
    }
    if (!(inf > 0.0)) return 0.0;
    return 0.99 * inf;
}

HorizonBounds horizon_bounds(const CoefficientModel& model, int samples) {
    HorizonBounds out;
    if (model.eps_inf_exact && model.eps_sup_exact && model.cc_inf_exact) {
        out.eps_inf = *model.eps_inf_exact;
        out.eps_sup = *model.eps_sup_exact;
        out.cc_inf = *model.cc_inf_exact;
        return out;
    }
    const double span = model.t_max - model.t_min;
    double eps_lo = std::numeric_limits<double>::infinity();
    double eps_hi = -std::numeric_limits<double>::infinity();
    double cc_lo = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double t = model.t_min + span * static_cast<double>(i) / (samples - 1);
        const double e = model.eps(t);
        eps_lo = std::min(eps_lo, e);
        eps_hi = std::max(eps_hi, e);
        cc_lo = std::min(cc_lo, model.cc(t));
    }
    // Grid minima overestimate the true infimum; shrink them, and stretch the
    // supremum, so the certified constants stay on the safe side.
    out.eps_inf = model.eps_inf_exact.value_or(eps_lo >= 0.0 ? 0.99 * eps_lo : 1.01 * eps_lo);
    out.eps_sup = model.eps_sup_exact.value_or(eps_hi >= 0.0 ? 1.01 * eps_hi : 0.99 * eps_hi);
    out.cc_inf = model.cc_inf_exact.value_or(cc_lo >= 0.0 ? 0.99 * cc_lo : 1.01 * cc_lo);
    return out;
}

AdmissibilityReport check_condi4(const CoefficientModel& model, double gamma, double mu,
                                 int samples) {
    if (samples < 2) throw std::invalid_argument("check_condi4 needs at least 2 samples");
    AdmissibilityReport report;
    report.mu = mu;
    report.gamma_used = gamma;

    const HorizonBounds bounds = horizon_bounds(model, samples);
    report.eps_inf = bounds.eps_inf;
    report.eps_sup = bounds.eps_sup;
    report.cc_inf = bounds.cc_inf;

    report.cond_flags[0] = bounds.cc_inf > 0.0;
    report.cond_flags[1] = bounds.eps_inf >= 0.0;
    report.cond_flags[2] = model.a + bounds.eps_inf > 0.0;

    const double span = model.t_max - model.t_min;
    bool clause4 = true;
    bool clause5 = true;
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double t = model.t_min + span * static_cast<double>(i) / (samples - 1);
        const CoefficientBundle b = eval_bundle(model, t);
        const double slack4 = (b.cc - b.eps_d1) - mu * (1.0 + b.eps);
        const double slack5 =
            mu * b.eps * b.eps + mu * b.eps + b.eps_d2 - (1.0 + gamma) * b.cc_d1_neg;
        if (slack4 < 0.0) clause4 = false;
        if (!(slack5 > 0.0)) clause5 = false;
        margin = std::min(margin, std::min(slack4, slack5));
    }
    report.cond_flags[3] = clause4;
    report.cond_flags[4] = clause5;
    report.margin = margin;
    return report;
}

CoefficientModel make_example1(double eps0, double nu, double C, double a, double t_min,
                               double t_max) {
    if (eps0 <= 0.0 || nu <= 0.0) throw std::invalid_argument("example1 needs eps0 > 0, nu > 0");
    CoefficientModel m;
    m.a = a;
    m.eps = [eps0, nu](double t) { return eps0 * std::pow(1.0 + t, -nu); };
    m.eps_d1 = [eps0, nu](double t) { return -nu * eps0 * std::pow(1.0 + t, -nu - 1.0); };
    m.eps_d2 = [eps0, nu](double t) {
        return nu * (nu + 1.0) * eps0 * std::pow(1.0 + t, -nu - 2.0);
    };
    m.cc = [C](double) { return C; };
    m.cc_d1 = [](double) { return 0.0; };
    m.t_min = t_min;
    m.t_max = t_max;
    m.tail_ok = true;
    m.eps_inf_exact = m.eps(t_max);  // eps decreases
    m.eps_sup_exact = m.eps(t_min);
    m.cc_inf_exact = C;
    return finish_preset(std::move(m), "example1",
                         {{"eps0", eps0}, {"nu", nu}, {"C", C}, {"a", a}});
}

CoefficientModel make_example2(double eps0, double C0, double p, double q, double a, double t_min,
                               double t_max) {
    if (eps0 <= 0.0 || C0 <= 0.0) throw std::invalid_argument("example2 needs eps0 > 0, C0 > 0");
    if (p < 0.0 || q < 0.0) throw std::invalid_argument("example2 needs p, q >= 0");
    CoefficientModel m;
    m.a = a;
    m.eps = [eps0, p](double t) { return eps0 * std::pow(1.0 + t, p); };
    m.eps_d1 = [eps0, p](double t) { return p * eps0 * std::pow(1.0 + t, p - 1.0); };
    m.eps_d2 = [eps0, p](double t) { return p * (p - 1.0) * eps0 * std::pow(1.0 + t, p - 2.0); };
    m.cc = [C0, q](double t) { return C0 * std::pow(1.0 + t, q); };
    m.cc_d1 = [C0, q](double t) { return q * C0 * std::pow(1.0 + t, q - 1.0); };
    m.t_min = t_min;
    m.t_max = t_max;
    m.tail_ok = true;
    m.eps_inf_exact = m.eps(t_min);  // eps grows
    m.eps_sup_exact = m.eps(t_max);
    m.cc_inf_exact = m.cc(t_min);
    return finish_preset(std::move(m), "example2",
                         {{"eps0", eps0}, {"C0", C0}, {"p", p}, {"q", q}, {"a", a}});
}

CoefficientModel make_example3(double eps_mean, double eps_amp, double omega, double C0, double C1,
                               double q, double a, double t_min, double t_max) {
    if (eps_mean - std::abs(eps_amp) < 0.0)
        throw std::invalid_argument("example3 needs eps_mean >= |eps_amp|");
    if (q <= 0.0) throw std::invalid_argument("example3 needs q > 0");
    CoefficientModel m;
    m.a = a;
    m.eps = [eps_mean, eps_amp, omega](double t) { return eps_mean + eps_amp * std::cos(omega * t); };
    m.eps_d1 = [eps_amp, omega](double t) { return -eps_amp * omega * std::sin(omega * t); };
    m.eps_d2 = [eps_amp, omega](double t) {
        return -eps_amp * omega * omega * std::cos(omega * t);
    };
    m.cc = [C0, C1, q](double t) { return C0 + C1 * std::pow(1.0 + t, -q); };
    m.cc_d1 = [C1, q](double t) { return -q * C1 * std::pow(1.0 + t, -q - 1.0); };
    m.t_min = t_min;
    m.t_max = t_max;
    m.tail_ok = true;
    if (omega != 0.0 && (t_max - t_min) * std::abs(omega) >= 2.0 * 3.14159265358979323846) {
        m.eps_inf_exact = eps_mean - std::abs(eps_amp);
        m.eps_sup_exact = eps_mean + std::abs(eps_amp);
    }
    if (C1 >= 0.0) m.cc_inf_exact = m.cc(t_max);  // C decreases toward C0
    return finish_preset(std::move(m), "example3",
                         {{"eps_mean", eps_mean},
                          {"eps_amp", eps_amp},
                          {"omega", omega},
                          {"C0", C0},
                          {"C1", C1},
                          {"q", q},
                          {"a", a}});
}

CoefficientModel make_constant(double eps, double C, double a, double t_min, double t_max) {
    CoefficientModel m;
    m.a = a;
    m.eps = [eps](double) { return eps; };
    m.eps_d1 = [](double) { return 0.0; };
    m.eps_d2 = [](double) { return 0.0; };
    m.cc = [C](double) { return C; };
    m.cc_d1 = [](double) { return 0.0; };
    m.t_min = t_min;
    m.t_max = t_max;
    m.tail_ok = true;
    m.eps_inf_exact = eps;
    m.eps_sup_exact = eps;
    m.cc_inf_exact = C;
    return finish_preset(std::move(m), "constant", {{"eps", eps}, {"C", C}, {"a", a}});
}

CoefficientModel make_sampled_from_values(std::vector<double> t, std::vector<double> eps,
                                          std::vector<double> C, double a) {
    if (t.size() < 6) throw config_error("sampled model needs at least 6 rows");
    if (eps.size() != t.size() || C.size() != t.size())
        throw config_error("sampled model columns have mismatched lengths");
    const double dt = t[1] - t[0];
    if (!(dt > 0.0)) throw config_error("sampled model time column must increase");
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double step = t[i] - t[i - 1];
        if (std::abs(step - dt) > 1e-8 * (std::abs(dt) + std::abs(t[i])))
            throw config_error("sampled model time column must be uniformly spaced");
    }

    auto eps_table = std::make_shared<SampledTable>(build_table(t.front(), dt, eps));
    auto cc_table = std::make_shared<SampledTable>(build_table(t.front(), dt, C));

    CoefficientModel m;
    m.a = a;
    m.kind = CoefficientKind::Sampled;
    m.eps = [eps_table](double s) { return eps_table->interp(eps_table->value, s); };
    m.eps_d1 = [eps_table](double s) { return eps_table->interp(eps_table->d1, s); };
    m.eps_d2 = [eps_table](double s) { return eps_table->interp(eps_table->d2, s); };
    m.cc = [cc_table](double s) { return cc_table->interp(cc_table->value, s); };
    m.cc_d1 = [cc_table](double s) { return cc_table->interp(cc_table->d1, s); };
    m.t_min = t.front();
    m.t_max = t.back();
    m.tail_ok = false;
    return finish_preset(std::move(m), "sampled", {{"a", a}});
}

CoefficientModel make_sampled_from_csv(const std::string& path, double a) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open coefficient table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw config_error("empty coefficient table: " + path);
    auto strip = [](std::string s) {
        s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
                s.end());
        return s;
    };
    if (strip(line) != "t,eps,C")
        throw config_error("coefficient table must start with header `t,eps,C`: " + path);

    std::vector<double> t, eps, C;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (strip(line).empty()) continue;
        std::istringstream row(line);
        std::string cell;
        double vals[3];
        for (int c = 0; c < 3; ++c) {
            if (!std::getline(row, cell, ','))
                throw config_error(path + ": row " + std::to_string(lineno) + " has fewer than 3 columns");
            try {
                vals[c] = std::stod(cell);
            } catch (const std::exception&) {
                throw config_error(path + ": row " + std::to_string(lineno) +
                                   " has a non-numeric cell: " + cell);
            }
        }
        t.push_back(vals[0]);
        eps.push_back(vals[1]);
        C.push_back(vals[2]);
    }
    CoefficientModel m = make_sampled_from_values(std::move(t), std::move(eps), std::move(C), a);
    m.source_file = path;
    return m;
}

CoefficientModel make_preset(const std::string& preset, const std::map<std::string, double>& params,
                             double t_min, double t_max, const std::string& source_file) {
    auto get = [&params](const char* key, double fallback) {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    if (preset == "constant")
        return make_constant(get("eps", 1.0), get("C", 1.0), get("a", 0.0), t_min, t_max);
    if (preset == "example1")
        return make_example1(get("eps0", 1.0), get("nu", 1.0), get("C", 1.2), get("a", 1.0), t_min,
                             t_max);
    if (preset == "example2")
        return make_example2(get("eps0", 1.0), get("C0", 2.0), get("p", 0.5), get("q", 0.5),
                             get("a", 1.0), t_min, t_max);
    if (preset == "example3")
        return make_example3(get("eps_mean", 0.7), get("eps_amp", 0.3), get("omega", 1.0),
                             get("C0", 2.0), get("C1", 1.0), get("q", 0.5), get("a", 1.0), t_min,
                             t_max);
    if (preset == "sampled") {
        if (source_file.empty()) throw config_error("sampled preset needs a source file");
        CoefficientModel m = make_sampled_from_csv(source_file, get("a", 0.0));
        // The table defines its own horizon; clip to the requested window when
        // it is strictly inside.
        m.t_min = std::max(m.t_min, t_min);
        m.t_max = std::min(m.t_max, t_max);
        if (!(m.t_max > m.t_min)) throw config_error("sampled table does not cover the horizon");
        return m;
    }
    throw config_error("unknown coefficient preset: " + preset);
}

}  // namespace stabcert
