#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "geophase/config.hpp"
#include "geophase/errors.hpp"
#include "geophase/scenarios.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitValidity = 4;

int cmd_run(const std::string& config_path, const geophase::RunOptions& opts) {
    const geophase::ConfigDoc doc = geophase::parse_config_file(config_path);
    const geophase::RunOutcome outcome = geophase::run_scenario(doc, opts);
    for (const std::string& note : outcome.notes) std::printf("%s\n", note.c_str());
    if (opts.strict && outcome.validity_red) {
        std::fprintf(stderr, "strict mode: a validity flag is red\n");
        return kExitValidity;
    }
    return 0;
}

int cmd_validate(const std::string& config_path) {
    const geophase::ConfigDoc doc = geophase::parse_config_file(config_path);
    geophase::validate_scenario_config(doc);
    const geophase::ConfigEntry* name = doc.find("scenario", "name");
    std::printf("OK: %s\n", name ? name->value.c_str() : "");
    return 0;
}

int cmd_list() {
    for (const std::string& name : geophase::scenario_names())
        std::printf("%-16s %s\n", name.c_str(), geophase::scenario_summary(name).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geophase: geometric phases of guided modes in modulated waveguides"};
    app.require_subcommand(1);

    std::string config_path;
    geophase::RunOptions opts;
    unsigned long long seed = 0;

    CLI::App* run = app.add_subcommand("run", "execute a scenario config");
    run->add_option("config", config_path, "path to the .ini run configuration")->required();
    run->add_option("--out", opts.out_dir, "output directory (overrides [output] dir)");
    run->add_flag("--strict", opts.strict, "exit 4 if any validity flag is red");
    run->add_option("--threads", opts.threads, "worker threads for grid scenarios")
        ->check(CLI::Range(1, 256));
    CLI::Option* seed_opt =
        run->add_option("--seed", seed, "echoed into artifacts for provenance");

    CLI::App* validate = app.add_subcommand("validate", "parse and resolve a config, run nothing");
    validate->add_option("config", config_path, "path to the .ini run configuration")->required();

    app.add_subcommand("list-scenarios", "list registered scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (opts.out_dir.empty()) {
                if (const char* env = std::getenv("GEOPHASE_OUT"); env && *env)
                    opts.out_dir = env;
            }
            if (seed_opt->count() > 0) {
                opts.seed = seed;
                opts.seed_set = true;
            }
            return cmd_run(config_path, opts);
        }
        if (validate->parsed()) return cmd_validate(config_path);
        return cmd_list();
    } catch (const geophase::config_error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitConfig;
    } catch (const geophase::numerical_error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumerical;
    }
}
