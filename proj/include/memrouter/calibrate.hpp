#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memrouter/learn.hpp"

namespace memrouter {

struct RocPoint {
    double threshold;
    double tpr;
    double fpr;
};

/// Standard ROC sweep: points ordered by descending threshold, a
/// predicted positive being score >= threshold. The first point sits at
/// threshold +inf (0,0) and the last at threshold 0 (1,1).
struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

/// Throws DataError unless both classes are present.
RocCurve roc(const std::vector<std::pair<double, int>>& scored);

/// Largest threshold whose TPR reaches the target; the threshold-0 end of
/// the sweep guarantees a hit (always poll) when no interior point does.
RocPoint pick_threshold(const RocCurve& curve, double target_tpr);

/// A calibrated per-archive decision point.
struct OperatingPoint {
    std::string archive_id;
    Algo algorithm = Algo::logreg;
    double target_tpr = 0.0;
    double threshold = 0.0;
    double achieved_tpr = 0.0;
    double achieved_fpr = 0.0;
    std::size_t calibration_size = 0;
    std::size_t calibration_positives = 0;
};

/// A point overshooting the requested TPR by more than this sits on a score
/// atom the threshold cannot split; the candidate is not calibratable there.
inline constexpr double kCalibrationTprSlack = 0.02;

/// Among candidate models for one archive, returns the index of the one
/// with the lowest FPR at >= target TPR, plus its operating point. Ties
/// break by algorithm enum order, then by lower threshold. Candidates whose
/// achieved TPR overshoots the target by more than kCalibrationTprSlack are
/// considered only when no candidate can realize the target.
std::pair<std::size_t, OperatingPoint>
select_best_algorithm(const std::vector<ArchiveModel>& candidates,
                      const std::vector<FeatureVector>& calibration_vectors,
                      const std::vector<std::uint8_t>& labels, double target_tpr);

/// ROC export rows: archive,algorithm,threshold,tpr,fpr.
void export_roc_csv(const std::string& archive_id, Algo algo,
                    const RocCurve& curve, const std::string& path);

} // namespace memrouter
