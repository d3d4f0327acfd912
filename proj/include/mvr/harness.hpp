#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mvr/config.hpp"

namespace mvr::harness {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    std::optional<std::uint64_t> seed;      // overrides mc.seed
    std::optional<std::string> out_dir;     // overrides output.dir
    bool deterministic = false;             // zero out wall-clock columns
    int threads = 1;
};

// Offline stage: greedy RB build, model serialization, convergence table.
void cmd_build_rb(const ExperimentConfig& cfg, const RunOptions& opts);

// Replication runs for one method (mc-hdg | mc-rb | mvr) over the M schedule;
// writes per-replication rows and a column-averaged summary per M.
void cmd_run(const ExperimentConfig& cfg, const std::string& method, const RunOptions& opts);

// Level-count comparison table from the cached test-set statistics.
void cmd_select(const ExperimentConfig& cfg, const RunOptions& opts);

// Closed-form benchmark reference values and probe outputs.
void cmd_oracle(const ExperimentConfig& cfg, const RunOptions& opts);

}  // namespace mvr::harness
