#ifndef HCPLATE_PIPELINE_HPP
#define HCPLATE_PIPELINE_HPP

#include "hcplate/fine.hpp"
#include "hcplate/limit.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace hcp {

// Run configuration. The JSON layout is published in
// tools/config.schema.json; unknown keys are rejected.
struct RunConfig {
    nlohmann::json raw; // configuration as given
    std::string hash;   // FNV-1a 64 of the canonical configuration and material
    std::string base_dir;

    MaterialSpec mat;
    std::string material_source;
    InclusionShape shape;
    int cell_n = 16;
    int cell_nz = 4;
    RegimeConfig regime;
    double L1 = 1.0;
    double L2 = 1.0;
    int macro_n1 = 16;
    int macro_n2 = 16;
    std::vector<Edge> gamma_D{Edge::left};
    EigWorkspace ws;
    int modes = 30;
    int kappa_modes = 6;

    std::string bloch_operator = "auto";
    double zhikov_lambda_min = 0.0;
    double zhikov_lambda_max = 0.0; // <= 0: top eigenvalue used
    int zhikov_samples = 400;
    int spectrum_macro_modes = 30;
    double spectrum_lambda_max = 0.0;
    int strip_points = 81;
    double strip_eta_max = 20.0;
    LoadSpec load;
    double evolve_T = 1.0;
    double evolve_dt = 1e-3;
    int evolve_record_every = 10;
    std::string evolve_initial = "rest"; // rest | mode
    bool evolve_memory_kernel = false;
    double resolvent_lambda = 1.0;
    std::vector<double> validate_epsilons{0.5, 0.25};
    int validate_cell_n = 8;
    int validate_nz = 4;
    int validate_eigs = 3;
    std::string validate_parity = "auto"; // auto: membrane for tau = 0, none for tau = 2
    long validate_max_dofs = 200000;
    double validate_h = 0.0;

    int row() const { return regime_row(regime); }
};

std::string fnv1a_hex(const std::string& s);

RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

LimitSetup limit_setup(const RunConfig& cfg);
EffectiveTensor regime_tensor(const RunConfig& cfg);

extern const std::vector<std::string> kCommands;

struct CommandResult {
    nlohmann::json summary;
    std::vector<std::string> files;
};

// Runs one command and writes its outputs into out_dir (created when
// missing). Every output embeds the configuration hash.
CommandResult run_command(const std::string& command, const RunConfig& cfg, const std::string& out_dir);

} // namespace hcp

#endif
