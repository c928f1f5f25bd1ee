#include "memrouter/calibrate.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "memrouter/errors.hpp"

namespace memrouter {

RocCurve roc(const std::vector<std::pair<double, int>>& scored) {
    std::size_t pos = 0;
    for (const auto& [s, y] : scored) pos += y ? 1 : 0;
    const std::size_t neg = scored.size() - pos;
    if (pos == 0 || neg == 0)
        throw DataError("roc requires at least one positive and one negative label");

    std::vector<std::pair<double, int>> sorted = scored;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        double t = sorted[i].first;
        while (i < sorted.size() && sorted[i].first == t) {
            (sorted[i].second ? tp : fp) += 1;
            ++i;
        }
        curve.points.push_back({t, static_cast<double>(tp) / static_cast<double>(pos),
                                static_cast<double>(fp) / static_cast<double>(neg)});
    }
    if (curve.points.back().tpr < 1.0 || curve.points.back().fpr < 1.0 ||
        curve.points.back().threshold > 0.0)
        curve.points.push_back({0.0, 1.0, 1.0});

    double auc = 0.0;
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
        const auto& a = curve.points[k - 1];
        const auto& b = curve.points[k];
        auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    curve.auc = auc;
    return curve;
}

RocPoint pick_threshold(const RocCurve& curve, double target_tpr) {
    if (target_tpr <= 0.0 || target_tpr > 1.0)
        throw UsageError("target TPR must be in (0, 1]");
    for (const auto& p : curve.points)
        if (p.tpr >= target_tpr) return p;
    return {0.0, 1.0, 1.0};
}

std::pair<std::size_t, OperatingPoint>
select_best_algorithm(const std::vector<ArchiveModel>& candidates,
                      const std::vector<FeatureVector>& calibration_vectors,
                      const std::vector<std::uint8_t>& labels, double target_tpr) {
    if (candidates.empty())
        throw UsageError("select_best_algorithm needs at least one candidate");

    std::size_t positives = 0;
    for (auto y : labels) positives += y;

    std::vector<OperatingPoint> ops(candidates.size());
    bool any_realizable = false;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const auto& model = candidates[c];
        std::vector<std::pair<double, int>> scored(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i)
            scored[i] = {score(model, calibration_vectors[i]), labels[i]};
        RocPoint pt = pick_threshold(roc(scored), target_tpr);

        OperatingPoint& op = ops[c];
        op.archive_id = model.archive_id;
        op.algorithm = model.algo;
        op.target_tpr = target_tpr;
        op.threshold = std::isfinite(pt.threshold) ? pt.threshold : 1.0;
        op.achieved_tpr = pt.tpr;
        op.achieved_fpr = pt.fpr;
        op.calibration_size = labels.size();
        op.calibration_positives = positives;
        any_realizable =
            any_realizable || op.achieved_tpr - target_tpr <= kCalibrationTprSlack;
    }

    std::size_t best = 0;
    OperatingPoint best_op;
    bool have_best = false;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const OperatingPoint& op = ops[c];
        if (any_realizable && op.achieved_tpr - target_tpr > kCalibrationTprSlack)
            continue;
        bool better = !have_best || op.achieved_fpr < best_op.achieved_fpr ||
                      (op.achieved_fpr == best_op.achieved_fpr &&
                       op.threshold < best_op.threshold);
        // Candidates are ordered by algorithm enum; strict comparison keeps
        // the earlier algorithm on exact ties.
        if (better) {
            best = c;
            best_op = op;
            have_best = true;
        }
    }
    return {best, best_op};
}

void export_roc_csv(const std::string& archive_id, Algo algo,
                    const RocCurve& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write ROC CSV: " + path);
    out << "archive,algorithm,threshold,tpr,fpr\n";
    out.precision(12);
    for (const auto& p : curve.points)
        out << archive_id << ',' << to_string(algo) << ',' << p.threshold << ','
            << p.tpr << ',' << p.fpr << '\n';
}

} // namespace memrouter
