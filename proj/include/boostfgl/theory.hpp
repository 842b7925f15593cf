#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace boostfgl {

enum class ClaimStatus { Pass, Fail, AssumptionsUnmet, Inconclusive };

const char* to_string(ClaimStatus s);

/// One numerically validated claim. A claim is only asserted when its
/// assumptions were verified on the instance; failed assumption verification
/// yields AssumptionsUnmet, never Fail.
struct TheoryEntry {
    std::string name;
    ClaimStatus status = ClaimStatus::Pass;
    nlohmann::json details;
};

struct TheoryReport {
    std::vector<TheoryEntry> entries;
    nlohmann::json to_json() const;
    /// strict treats AssumptionsUnmet / Inconclusive as failures.
    bool all_pass(bool strict) const;
};

/// Gradient-share rectification: on instances with constant majority
/// difficulty, per-node minority difficulty above it, and norms c*dbar plus
/// nonnegative noise, verifies the boosted GSD dominates the base GSD times
/// (1 + lambda E[dbar|min]) / (1 + lambda E[dbar|maj]) over a lambda grid.
TheoryEntry check_gsd_rectification(int num_instances, std::uint64_t seed);

/// Harmful-message suppression: tilted-mean monotonicity in the edge
/// temperature and the exponential tail bound on P(R < 0), Monte Carlo over
/// noise realizations with 99% confidence intervals.
TheoryEntry check_epr_tilting(int num_instances, long mc_samples,
                              std::uint64_t seed);

/// Trust-gated aggregation: DR under trust weights dominates DR under
/// uniform weights on instances where trust is monotone in the positive
/// alignment, plus the per-client influence bound.
TheoryEntry check_dr_and_influence(int num_instances, std::uint64_t seed);

/// Reduction to FedAvg: trains a small separable instance into the
/// high-confidence regime and measures max|alpha - 1| and the aggregation
/// weight gap to size-proportional weights.
TheoryEntry check_fedavg_reduction(std::uint64_t seed);

struct TheoryCheckConfig {
    int lemma1_instances = 100;
    int thm1_instances = 50;
    long thm1_mc_samples = 100000;
    int thm2_instances = 100;
    std::uint64_t seed = 7;
    std::string only;  // empty = run all; otherwise: gsd|epr|dr|fedavg
};

TheoryReport run_theory_checks(const TheoryCheckConfig& cfg);

}  // namespace boostfgl
