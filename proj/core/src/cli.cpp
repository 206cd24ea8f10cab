#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "stabcert/errors.hpp"
#include "stabcert/harness.hpp"

namespace stabcert {

namespace {

using nlohmann::json;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << body;
}

json theorem_summary(const VerdictReport& report) {
    json out = json::parse(report.to_json());
    return out;
}

int thread_budget() {
    if (const char* env = std::getenv("STABCERT_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 2 : static_cast<int>(hw);
}

CoefficientModel model_for(const Scenario& sc) {
    const double t_min = std::min(0.0, sc.t0);
    const double t_max = std::max(sc.t_end, sc.t0 + 1.0);
    if (sc.coeff_preset == "sampled") {
        if (sc.sampled_file.empty())
            throw config_error("coefficients preset 'sampled' needs a 'file' entry");
        double a = 1.0;
        if (auto it = sc.coeff_params.find("a"); it != sc.coeff_params.end()) a = it->second;
        return make_sampled_from_csv(sc.sampled_file, a);
    }
    return make_preset(sc.coeff_preset, sc.coeff_params, t_min, t_max);
}

int run_check(const std::string& cfg_path, const std::string& cert_out) {
    const Scenario sc = scenario_from_json(slurp(cfg_path));
    const CoefficientModel model = model_for(sc);
    const double mu =
        sc.cert_params.count("mu") ? sc.cert_params.at("mu") : infimum_mu(model);

    Certificate cert;
    if (sc.cert_mode == "auto") {
        cert = select_parameters(model, mu);
    } else if (sc.cert_mode == "optimize") {
        const CertObjective obj = sc.cert_objective == "max_chi0" ? CertObjective::MaxChi0
                                                                  : CertObjective::MaxInfPsi;
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

    const AdmissibilityReport adm = check_condi4(model, cert.gamma, mu);
    json out;
    out["admissibility"] = {{"mu", adm.mu},
                            {"eps_inf", adm.eps_inf},
                            {"eps_sup", adm.eps_sup},
                            {"cc_inf", adm.cc_inf},
                            {"cond_flags", adm.cond_flags},
                            {"gamma_used", adm.gamma_used},
                            {"margin", adm.margin},
                            {"all_ok", adm.all_ok()}};
    out["certificate"] = json::parse(certificate_to_json(cert));
    std::cout << out.dump(2) << "\n";
    if (!cert_out.empty()) spit(cert_out, certificate_to_json(cert));
    return adm.all_ok() ? 0 : 1;
}

int run_simulate(const std::string& cfg_path, const std::string& csv_out,
                 const std::string& report_out) {
    const Scenario sc = scenario_from_json(slurp(cfg_path));
    const VerdictReport report = run_scenario(sc, csv_out);
    const std::string doc = report.to_json();
    if (!report_out.empty())
        spit(report_out, doc);
    else
        std::cout << doc << "\n";
    return report.any_check_failed ? 1 : 0;
}

int run_verify(const std::string& csv_path, const std::string& cert_path) {
    const Certificate cert = certificate_from_json(slurp(cert_path));
    Trajectory traj;
    traj.samples = read_trajectory_csv(csv_path);
    if (traj.samples.empty()) throw config_error("no samples in: " + csv_path);
    const double t0 = traj.samples.front().t;
    const double t_end = traj.samples.back().t;
    const double y0 = traj.samples.front().V;
    ForcingWitnesses none;
    none.gt = cert.gt_bound;
    EnvelopeProblem prob = make_envelope(cert, none, y0, t0, std::max(t_end, t0 + 1e-9));
    const std::vector<CheckVerdict> verdicts = verify_against_envelope(traj, cert, prob);
    std::cout << verdicts_to_json(verdicts) << "\n";
    for (const CheckVerdict& v : verdicts)
        if (v.status == "FAIL") return 1;
    return 0;
}

int run_example_cmd(int index, const std::string& csv_out, const std::string& report_out) {
    const VerdictReport report = run_example(index, nullptr, csv_out);
    const std::string doc = report.to_json();
    if (!report_out.empty())
        spit(report_out, doc);
    else
        std::cout << doc << "\n";
    return report.any_check_failed ? 1 : 0;
}

int run_sweep(const std::string& cfg_path, const std::string& param,
              const std::vector<double>& values) {
    if (values.empty()) throw config_error("sweep needs at least one value");
    const std::string base_doc = slurp(cfg_path);
    {
        const Scenario probe = scenario_from_json(base_doc);  // validate once up front
        (void)probe;
    }
    std::string pointer = "/" + param;
    std::replace(pointer.begin(), pointer.end(), '.', '/');

    struct Row {
        double value = 0.0;
        std::string status;
        json detail;
    };
    std::vector<Row> rows(values.size());
    std::mutex mtx;
    std::size_t next = 0;

    auto worker = [&]() {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mtx);
                if (next >= values.size()) return;
                i = next++;
            }
            Row row;
            row.value = values[i];
            try {
                json doc = json::parse(base_doc);
                doc[json::json_pointer(pointer)] = values[i];
                const Scenario sc = scenario_from_json(doc.dump());
                const VerdictReport report = run_scenario(sc);
                row.status = report.any_check_failed ? "FAIL" : "PASS";
                row.detail = theorem_summary(report);
                row.detail.erase("certificate");
                row.detail.erase("checks");
            } catch (const std::exception& e) {
                row.status = "ERROR";
                row.detail = json{{"error", e.what()}};
            }
            std::lock_guard<std::mutex> lock(mtx);
            rows[i] = std::move(row);
        }
    };

    const int budget = std::min<int>(thread_budget(), static_cast<int>(values.size()));
    std::vector<std::thread> pool;
    pool.reserve(budget);
    for (int i = 0; i < budget; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    json out = json::array();
    bool any_fail = false;
    for (const Row& r : rows) {
        json item;
        item["value"] = r.value;
        item["status"] = r.status;
        item["report"] = r.detail;
        out.push_back(item);
        if (r.status != "PASS") any_fail = true;
    }
    std::cout << out.dump(2) << "\n";
    return any_fail ? 1 : 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"stability certificates for damped second order evolution problems"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--seed", seed, "override the scenario seed")->each([&](const std::string&) {
        seed_set = true;
    });

    std::string cfg_path, cert_out, csv_out, report_out, csv_path, cert_path, param;
    int example_index = 1;
    std::vector<double> sweep_values;

    CLI::App* check = app.add_subcommand("check", "freeze a certificate and report admissibility");
    check->add_option("config", cfg_path, "scenario config (JSON)")->required();
    check->add_option("--cert-out", cert_out, "write the frozen certificate to this file");

    CLI::App* simulate = app.add_subcommand("simulate", "run a scenario and emit verdicts");
    simulate->add_option("config", cfg_path, "scenario config (JSON)")->required();
    simulate->add_option("--out", csv_out, "trajectory CSV path");
    simulate->add_option("--report", report_out, "verdict report path (stdout when omitted)");

    CLI::App* verify = app.add_subcommand("verify", "re-check a trajectory CSV against a certificate");
    verify->add_option("csv", csv_path, "trajectory CSV")->required();
    verify->add_option("--cert", cert_path, "certificate JSON")->required();

    CLI::App* example = app.add_subcommand("example", "run a bundled worked example");
    example->add_option("index", example_index, "example number (1-3)")->required();
    example->add_option("--out", csv_out, "trajectory CSV path");
    example->add_option("--report", report_out, "verdict report path (stdout when omitted)");

    CLI::App* sweep = app.add_subcommand("sweep", "rerun a scenario over a parameter grid");
    sweep->add_option("config", cfg_path, "scenario config (JSON)")->required();
    sweep->add_option("--param", param, "dotted path of the value to vary, e.g. forcing.h0")
        ->required();
    sweep->add_option("--values", sweep_values, "values to substitute")->required()->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (check->parsed()) return run_check(cfg_path, cert_out);
        if (simulate->parsed()) {
            if (seed_set) {
                Scenario sc = scenario_from_json(slurp(cfg_path));
                sc.seed = seed;
                const VerdictReport report = run_scenario(sc, csv_out);
                const std::string doc = report.to_json();
                if (!report_out.empty())
                    spit(report_out, doc);
                else
                    std::cout << doc << "\n";
                return report.any_check_failed ? 1 : 0;
            }
            return run_simulate(cfg_path, csv_out, report_out);
        }
        if (verify->parsed()) return run_verify(csv_path, cert_path);
        if (example->parsed()) return run_example_cmd(example_index, csv_out, report_out);
        if (sweep->parsed()) return run_sweep(cfg_path, param, sweep_values);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return 2;
    } catch (const inadmissible_error& e) {
        std::cerr << "inadmissible: " << e.what() << "\n";
        return 1;
    } catch (const hypothesis_violation& e) {
        std::cerr << "hypothesis violation: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace stabcert
