#include "hcplate/hcplate.h"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

struct Options {
    std::string config;
    std::string out = "out";
    int threads = 0;
    bool quiet = false;
};

int run(const std::string& command, const Options& opt)
{
    hcp_status st = hcp_set_threads(opt.threads);
    if (st != HCP_OK) {
        std::cerr << "error: " << hcp_last_error() << "\n";
        return hcp_exit_code(st);
    }
    hcp_config* cfg = nullptr;
    st = hcp_config_load(opt.config.c_str(), &cfg);
    if (st != HCP_OK) {
        std::cerr << "error: " << hcp_last_error() << "\n";
        return hcp_exit_code(st);
    }
    char* summary = nullptr;
    st = hcp_run(cfg, command.c_str(), opt.out.c_str(), &summary);
    if (st != HCP_OK) {
        std::cerr << "error: " << hcp_last_error() << "\n";
    } else if (!opt.quiet && summary) {
        std::cout << summary << "\n";
    }
    hcp_string_free(summary);
    hcp_config_free(cfg);
    return hcp_exit_code(st);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"High-contrast plate homogenization toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", hcp_version());

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"tensor", "effective plate tensor of the configured regime"},
        {"bloch", "inclusion eigenpairs and weighted means"},
        {"zhikov", "Zhikov function poles, residues and samples"},
        {"spectrum", "limit spectrum, band gaps and dispersion samples"},
        {"evolve", "time evolution of the limit system"},
        {"resolvent", "resolvent solve of the limit system"},
        {"validate", "fine-scale eigenvalues against the limit spectrum"},
    };
    Options opt;
    std::string chosen;
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", opt.config, "configuration JSON file")->required();
        sub->add_option("--out", opt.out, "output directory")->capture_default_str();
        sub->add_option("--threads", opt.threads, "worker threads (0: hardware concurrency)")
            ->check(CLI::NonNegativeNumber);
        sub->add_flag("--quiet", opt.quiet, "suppress the summary on stdout");
        sub->callback([&chosen, n = name] { chosen = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    return run(chosen, opt);
}
