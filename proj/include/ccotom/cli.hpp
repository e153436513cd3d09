#pragma once

#include <string>
#include <vector>

#include "ccotom/chain.hpp"
#include "ccotom/core.hpp"

namespace ccotom::cli {

struct RunConfig {
    std::string dataset_path;
    DatasetFamily family = DatasetFamily::BigToM;
    chain::Method method = chain::Method::CCoToM;
    chain::AblationConfig ablation;
    std::string backend_path;
    std::string model_override;
    int workers = 1;
    std::string out_dir;
    double tau = 0.4;
    std::string embedder = "test";  // "test" or a config path
    std::string templates_dir;      // empty = built-in templates
    std::string constraints_path;   // empty = built-in constraints
    bool quiet = false;
};

/// Runs a dataset through one method and writes traces.jsonl, verdicts.jsonl,
/// report.json and report.txt under out_dir. Returns 0 on success, 2 when at
/// least one example errored (outputs are still written).
int cmd_run(const RunConfig& config);

struct AblateConfig {
    RunConfig base;
    std::vector<ToMDimension> drop;  // one run per dimension
    bool no_constraints = false;     // adds a constraint-free run
};

/// Runs the complete chain plus one ablated run per requested dimension and
/// writes each run into its own subdirectory with a delta summary on top.
int cmd_ablate(const AblateConfig& config);

struct ScoreConfig {
    std::string dataset_path;
    DatasetFamily family = DatasetFamily::BigToM;
    std::string traces_path;
    std::string out_dir;
    double tau = 0.4;
    std::string embedder = "test";
    bool quiet = false;
};

/// Rescores saved traces against the dataset without any backend calls.
int cmd_score(const ScoreConfig& config);

/// Entry point behind the ccotom binary.
int run(int argc, char** argv);

}  // namespace ccotom::cli
