#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "memrouter/calibrate.hpp"
#include "memrouter/features.hpp"
#include "memrouter/holdings.hpp"
#include "memrouter/learn.hpp"

namespace memrouter {

struct CalibratedArchive {
    ArchiveModel model;
    std::vector<OperatingPoint> points; // one per calibrated target TPR
};

/// Everything the runtime router needs: the roster, the shared vocabulary,
/// and per archive the winning model with its calibrated thresholds.
/// Immutable after construction; the always-poll archive carries no model.
class ModelRegistry {
public:
    ModelRegistry(std::shared_ptr<const Roster> roster, Vocabulary vocab,
                  std::map<std::uint32_t, CalibratedArchive> archives);

    const Roster& roster() const { return *roster_; }
    std::shared_ptr<const Roster> roster_ptr() const { return roster_; }
    const Vocabulary& vocabulary() const { return vocab_; }
    const std::map<std::uint32_t, CalibratedArchive>& archives() const {
        return archives_;
    }
    const std::string& version() const { return version_; }

    std::optional<double> threshold_for(std::uint32_t archive,
                                        double target_tpr) const;

    std::string to_json_string() const;
    static ModelRegistry from_json_string(const std::string& text);
    void save(const std::string& path) const;
    static ModelRegistry load(const std::string& path);

private:
    std::shared_ptr<const Roster> roster_;
    Vocabulary vocab_;
    std::map<std::uint32_t, CalibratedArchive> archives_;
    std::string version_;
};

/// Builds a registry from candidate models (any mix of archives and
/// algorithms) against an external calibration set: per archive the
/// candidate with the lowest FPR (averaged over the requested targets)
/// wins, preferring candidates that realize every target within
/// kCalibrationTprSlack, and one operating point is stored per target.
/// Enforces that at most 0.1% of calibration URIs occur in the training set.
ModelRegistry calibrate_registry(const std::vector<ArchiveModel>& candidates,
                                 const LabelMatrix& training,
                                 const LabelMatrix& calibration,
                                 const Vocabulary& vocab,
                                 const std::vector<double>& targets);

} // namespace memrouter
