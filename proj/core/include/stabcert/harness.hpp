#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stabcert/comparison.hpp"

namespace stabcert {

/// Declarative run description, loadable from JSON (schema field "cfg_v": 1).
struct Scenario {
    std::string coeff_preset = "example1";
    std::map<std::string, double> coeff_params;

    std::string forcing_kind = "zero";
    std::map<std::string, double> forcing_params;
    std::string forcing_shape = "sin";  // Lipschitz nonlinearity shape

    std::string initial_preset = "zero";  // zero | single_mode | random_smooth
    std::map<std::string, double> initial_params;

    std::string w0_preset = "zero";  // zero | smooth_pulse
    std::map<std::string, double> w0_params;
    std::string wpi_preset = "zero";
    std::map<std::string, double> wpi_params;

    std::string k_preset = "zero";  // zero | gauss_pulse
    std::map<std::string, double> k_params;

    int N = 200;
    double dt = 1e-3;
    double t0 = 0.0;
    double t_end = 50.0;
    int output_stride = 100;

    std::string cert_mode = "auto";  // auto | explicit | optimize
    std::map<std::string, double> cert_params;
    std::string cert_objective = "max_inf_psi";

    std::vector<std::string> checks{"sandwich", "slope", "envelope", "pointwise", "witness"};

    std::uint64_t seed = 0;
    std::string sampled_file;  // coefficients CSV when coeff_preset == "sampled"
};

[[nodiscard]] Scenario scenario_from_json(const std::string& doc);
[[nodiscard]] std::string scenario_to_json(const Scenario& scenario);

/// Theorem-level verdict with its quantifiers. status is "PASS", "FAIL" or
/// "INCONCLUSIVE"; a theorem passes only when every constituent check and
/// hypothesis scan passed.
struct TheoremVerdict {
    std::string name;
    std::string status;
    std::string reason;
    std::map<std::string, double> quantifiers;
};

struct VerdictReport {
    AdmissibilityReport admissibility;
    Certificate certificate;
    std::vector<CheckVerdict> checks;
    std::vector<TheoremVerdict> theorems;
    Trajectory trajectory;
    bool any_check_failed = false;

    [[nodiscard]] std::string to_json() const;
};

/// @brief Assemble and run a scenario end to end: admissibility scan,
/// certificate, simulation, envelope, checks, theorem verdicts.
/// Optionally writes the trajectory CSV.
[[nodiscard]] VerdictReport run_scenario(const Scenario& scenario,
                                         const std::string& csv_out = "");

/// @brief Default scenario for the shipped example presets (n in 1..3).
[[nodiscard]] Scenario example_scenario(int n);

/// @brief Run a shipped example with optional field overrides.
[[nodiscard]] VerdictReport run_example(int n, const Scenario* overrides = nullptr,
                                        const std::string& csv_out = "");

/// One row of the perturbation study.
struct PerturbationRow {
    double scale = 0.0;
    double sup_d = 0.0;
    double sigma = 0.0;
    bool certified = false;  // scale is inside the certified thresholds
    bool pass = false;       // sup_d < sigma
};

struct PerturbationStudy {
    std::vector<PerturbationRow> rows;
    double delta_hat = 0.0;
    double delta_prime = 0.0;  // initial-data radius sqrt(delta_hat / (gamma G(t0)))
    double nu = 0.0;           // raw source-mass budget 2 delta_hat / (1 + gamma)
    double sigma = 0.0;
};

/// @brief Scale initial data and perturbations through `scales` and check
/// the certified total-stability thresholds against the observed sup of d.
///
/// The base scenario's perturbation amplitudes are normalized so scale = 1
/// sits on the certified boundary; every row below it must pass.
/// Writes CSV `scale,sup_d,sigma,pass` when csv_out is nonempty.
[[nodiscard]] PerturbationStudy run_perturbation_study(const Scenario& base,
                                                       const std::vector<double>& scales,
                                                       double sigma,
                                                       const std::string& csv_out = "");

/// @brief Command line entry point (subcommands check, simulate, verify,
/// example, sweep). Returns 0 on success/PASS, 1 on FAIL, 2 on config error.
[[nodiscard]] int cli_main(int argc, const char* const* argv);

}  // namespace stabcert
