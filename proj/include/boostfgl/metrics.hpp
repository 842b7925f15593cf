#pragma once

#include <optional>
#include <vector>

#include "boostfgl/graph.hpp"

namespace boostfgl {

/// Macro-F1 with per-class breakdown. Classes absent from the subset get
/// F1 ~ 0 through the epsilon guard; all C classes enter the average.
struct MacroF1 {
    std::optional<double> macro;
    std::vector<double> precision, recall, f1;
};

/// Fraction correct on subset; nullopt when the subset is empty.
std::optional<double> accuracy(const std::vector<int>& preds,
                               const std::vector<int>& labels,
                               const std::vector<int>& subset);

MacroF1 macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                 const std::vector<int>& subset, int num_classes,
                 double eps = 1e-12);

/// The four headline metrics plus the per-class breakdown on the full test
/// set. Undefined metrics (empty groups) stay nullopt and serialize as null.
struct EvalReport {
    std::optional<double> accuracy;
    std::optional<double> overall_f1;
    std::optional<double> hete_f1;
    std::optional<double> hete_min_f1;
    std::vector<double> precision, recall, f1;
    size_t n_test = 0, n_hete = 0, n_hete_min = 0;
};

/// preds/labels indexed by global node id; test_nodes lists the evaluated
/// split; groups supply the heterophilous / minority subsets.
EvalReport group_report(const std::vector<int>& preds,
                        const std::vector<int>& labels,
                        const std::vector<int>& test_nodes,
                        const GroupAssignment& groups, int num_classes,
                        double eps = 1e-12);

}  // namespace boostfgl
