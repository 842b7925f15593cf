#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boostfgl/federation.hpp"
#include "boostfgl/graph.hpp"

namespace boostfgl {

/// Everything needed to reproduce a run bit-exactly. Serialized back out as
/// config.resolved.json with all defaults materialized.
struct ExperimentConfig {
    bool use_synth = true;
    std::string graph_path;  // used when use_synth is false
    SynthConfig synth;
    double q = 0.2;
    double tau_h = 0.5;
    int clients = 5;
    RoundConfig round;
    HyperParams hyper;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string out_dir = "out";

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

nlohmann::json read_json_file(const std::string& path);

/// Applies a `--set dotted.key=value` override onto a config JSON. Values
/// parse as JSON when possible (numbers, bools, arrays), else as strings.
void apply_override(nlohmann::json& config, const std::string& assignment);

nlohmann::json synth_to_json(const SynthConfig& s);
SynthConfig synth_from_json(const nlohmann::json& j);

}  // namespace boostfgl
