#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boostfgl/config.hpp"
#include "boostfgl/theory.hpp"

namespace boostfgl {

/// Multi-seed experiment runner: per seed builds graph, groups, partition,
/// trains, and emits metrics.csv / diagnostics.jsonl / checkpoints plus a
/// mean/std summary and config.resolved.json under cfg.out_dir.
int cmd_run(const ExperimentConfig& cfg);

/// Runs the theory suite, writes theory_report.json, exits nonzero on any
/// violated claim (with strict, also on unmet/inconclusive ones).
int cmd_check(const TheoryCheckConfig& tcfg, bool strict,
              const std::string& report_path);

/// Cartesian sweep over parameter grids; one sweep.csv row per cell and seed.
int cmd_sweep(const ExperimentConfig& base, const nlohmann::json& base_json,
              const nlohmann::json& sweep_spec, int max_cells);

/// Exports the Louvain-based client partition as partition.tsv.
int cmd_partition(const ExperimentConfig& cfg, const std::string& out_path);

/// Writes a synthetic dataset (nodes.tsv / edges.tsv) to disk.
int cmd_synth(const SynthConfig& synth, std::uint64_t seed,
              const std::string& out_dir);

/// CLI entry point (subcommands: run, check, sweep, partition, synth).
int run_cli(int argc, char** argv);

/// The synthetic instance used by the acceptance suite: a 1000-node 4-class
/// SBM with a 5% minority class whose block is heterophilous.
ExperimentConfig acceptance_config();

}  // namespace boostfgl
