#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "empc/io.hpp"

namespace empc::cmd {

namespace fs = std::filesystem;

/// Everything a pipeline stage needs; parsed from a single JSON file.
struct ExperimentConfig {
    Scenario scenario;
    std::uint64_t seed = 0;

    std::size_t n_tr = 5000;
    ExplicitOptions explicit_opts;
    std::size_t exact_samples = 10000;

    TrainConfig train;
    std::size_t poly_degree = 3;
    std::size_t pwa_horizon = 1;  ///< horizon of the partition that the PWA baseline refits

    std::size_t eval_states = 500;
    std::vector<std::string> controllers;  ///< empty → implicit plus every controller artifact present
    std::string projection = "clamp";      ///< clamp | qp | none
    std::size_t oracle_horizon = 0;        ///< 0 → scenario horizon
    std::size_t plot_trajectories = 20;

    std::string verify_controller = "network";
    LabelSizes label_sizes;
    SvmOptions svm;
    EllipsoidOptions ellipsoid{0.05, 1e-6, 1e-9};
    double delta = 0.02;

    double audit_fraction = 0.01;
};

ExperimentConfig parse_config(const io::json& j);
ExperimentConfig load_config(const fs::path& path);

struct Context {
    ExperimentConfig cfg;
    fs::path out;
    bool audit = false;
    std::ostream* log = nullptr;  ///< progress and audit lines; nullptr → silent
};

void cmd_generate(const Context& ctx);
void cmd_explicit(const Context& ctx);
void cmd_exactnet(const Context& ctx);
void cmd_train(const Context& ctx);
void cmd_baselines(const Context& ctx);
void cmd_evaluate(const Context& ctx);
void cmd_verify(const Context& ctx);
void cmd_report(const Context& ctx);

const std::vector<std::string>& command_names();
/// Dispatches by name; throws PreconditionViolated for unknown names.
void run_command(const std::string& name, const Context& ctx);

/// ">99.9" above 0.999, otherwise the percentage with one decimal.
std::string format_confidence(double confidence);

/// Exit code for an exception escaping a command: 2 precondition, 3 numerical.
int exit_code_for(const std::exception& e);

/// Full command-line driver (also used by tests).
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace empc::cmd
