#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memrouter/learn.hpp"
#include "memrouter/registry.hpp"
#include "memrouter/router.hpp"
#include "memrouter/selection.hpp"
#include "memrouter/simeval.hpp"

namespace memrouter {

/// End-to-end training run: split the cache dump, build the shared
/// vocabulary, train and calibrate per-archive classifiers, evaluate on the
/// held-out split. Stages checkpoint on content digests of their inputs.
struct PipelineConfig {
    std::string roster_path;
    std::string psl_path;
    std::string holdings_path;
    std::string latency_path;
    std::string out_dir;

    SplitFractions fractions{0.4, 0.3, 0.3};
    std::uint64_t split_seed = 7;
    FeatureConfig features;
    VocabPlan vocab_plan;
    TrainConfig train;
    std::vector<double> targets{0.9, 0.8, 0.7, 0.6, 0.5};
    StrategyScope eval_scope = StrategyScope::all;
    std::uint64_t latency_seed = 99;
    bool force = false;  // rerun every stage, ignoring checkpoints

    std::string to_json_string() const;
    static PipelineConfig from_json_string(const std::string& text);
    static PipelineConfig load(const std::string& path);
};

struct PipelineResult {
    std::string train_path, calibrate_path, test_path;
    std::string vocab_path;
    std::string registry_path;
    std::string report_path;   // JSON array of per-strategy reports
    std::string report_csv_path;
    std::vector<std::string> stages_run;
    std::vector<std::string> stages_cached;
};

PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Core of the recurrent retraining workflow: trains every algorithm for
/// every archive with positives in `dump` (the always-poll archive needs no
/// model) and calibrates against the external set. Deterministic: trained_at
/// is stamped from the input digests unless the config sets one.
ModelRegistry retrain(const LabelMatrix& dump, const LabelMatrix& calibration,
                      const std::string& psl_source, const FeatureConfig& features,
                      const VocabPlan& plan, const TrainConfig& train_cfg,
                      const std::vector<double>& targets);

/// Writes `content` via a temp file and rename, so readers never observe a
/// partial artifact.
void write_atomic(const std::string& path, const std::string& content);

} // namespace memrouter
