#pragma once

#include <string>
#include <vector>

#include "geophase/config.hpp"

namespace geophase {

// Options the command line layers on top of the config file. Empty / zero
// fields defer to the config (and its defaults).
struct RunOptions {
    std::string out_dir;          // overrides [output] dir when non-empty
    bool strict = false;          // red validity flags become a failure
    int threads = 0;              // overrides [solver] threads when > 0
    unsigned long long seed = 0;  // echoed into outputs; no algorithm consumes it
    bool seed_set = false;
};

struct RunOutcome {
    std::string scenario;
    std::vector<std::string> files;  // artifacts written, in order
    std::vector<std::string> notes;  // one-line human summaries for stdout
    bool validity_red = false;       // any validity flag raised (gate-validation)
};

// Registered scenario names, in listing order.
std::vector<std::string> scenario_names();
std::string scenario_summary(const std::string& name);

// Resolve a parsed config against its scenario's key set and defaults
// without executing anything. Throws config_error on unknown sections or
// keys, unparsable values, or out-of-range parameters.
void validate_scenario_config(const ConfigDoc& doc);

// Resolve and execute, writing this scenario's artifacts. Deterministic:
// identical config (plus out_dir/seed overrides) produces byte-identical
// files regardless of thread count.
RunOutcome run_scenario(const ConfigDoc& doc, const RunOptions& opts);

}  // namespace geophase
