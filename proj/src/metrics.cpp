#include "boostfgl/metrics.hpp"

namespace boostfgl {

std::optional<double> accuracy(const std::vector<int>& preds,
                               const std::vector<int>& labels,
                               const std::vector<int>& subset) {
    if (subset.empty()) return std::nullopt;
    long correct = 0;
    for (int v : subset) {
        if (labels[v] == kUnlabeled) {
            throw ContractError("accuracy over unlabeled node " +
                                std::to_string(v));
        }
        if (preds[v] == labels[v]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(subset.size());
}

MacroF1 macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                 const std::vector<int>& subset, int num_classes, double eps) {
    MacroF1 out;
    out.precision.assign(num_classes, 0.0);
    out.recall.assign(num_classes, 0.0);
    out.f1.assign(num_classes, 0.0);
    if (subset.empty()) return out;

    std::vector<long> tp(num_classes, 0), pred_c(num_classes, 0),
        true_c(num_classes, 0);
    for (int v : subset) {
        int y = labels[v], yh = preds[v];
        if (y == kUnlabeled) {
            throw ContractError("macro-F1 over unlabeled node " +
                                std::to_string(v));
        }
        ++true_c[y];
        if (yh >= 0 && yh < num_classes) ++pred_c[yh];
        if (yh == y) ++tp[y];
    }
    double total = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        double prec = static_cast<double>(tp[c]) /
                      (static_cast<double>(pred_c[c]) + eps);
        double rec = static_cast<double>(tp[c]) /
                     (static_cast<double>(true_c[c]) + eps);
        double f1 = 2.0 * prec * rec / (prec + rec + eps);
        out.precision[c] = prec;
        out.recall[c] = rec;
        out.f1[c] = f1;
        total += f1;
    }
    out.macro = total / static_cast<double>(num_classes);
    return out;
}

EvalReport group_report(const std::vector<int>& preds,
                        const std::vector<int>& labels,
                        const std::vector<int>& test_nodes,
                        const GroupAssignment& groups, int num_classes,
                        double eps) {
    EvalReport r;
    r.n_test = test_nodes.size();
    r.n_hete = groups.hete_nodes.size();
    r.n_hete_min = groups.hete_min_nodes.size();
    r.accuracy = accuracy(preds, labels, test_nodes);

    MacroF1 overall = macro_f1(preds, labels, test_nodes, num_classes, eps);
    r.overall_f1 = overall.macro;
    r.precision = std::move(overall.precision);
    r.recall = std::move(overall.recall);
    r.f1 = std::move(overall.f1);

    r.hete_f1 =
        macro_f1(preds, labels, groups.hete_nodes, num_classes, eps).macro;
    r.hete_min_f1 =
        macro_f1(preds, labels, groups.hete_min_nodes, num_classes, eps).macro;
    return r;
}

}  // namespace boostfgl
