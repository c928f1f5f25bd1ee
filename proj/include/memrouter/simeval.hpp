#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memrouter/latency.hpp"
#include "memrouter/router.hpp"

namespace memrouter {

/// Deterministic latency simulation: one uniform with-replacement draw from
/// the archive's observed samples per (archive, URI), keyed so the same pair
/// yields the same value across strategies and shard orders.
class LatencySampler {
public:
    LatencySampler(std::map<std::uint32_t, LatencySampleSet> samples,
                   std::uint64_t seed)
        : samples_(std::move(samples)), seed_(seed) {}

    double draw_ms(std::uint32_t archive, const std::string& uri) const;
    std::uint64_t seed() const { return seed_; }
    bool covers(std::uint32_t archive) const { return samples_.count(archive) > 0; }

private:
    std::map<std::uint32_t, LatencySampleSet> samples_;
    std::uint64_t seed_;
};

struct ArchiveConfusion {
    std::uint64_t tp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
};

struct EvalRow {
    double target_tpr = 1.0;     // 1.0 for brute-force strategies
    std::string scope;
    double avg_requests = 0.0;
    double avg_recall = 0.0;     // over URIs with at least one holding archive
    double avg_sum_t_s = 0.0;
    double avg_max_t_s = 0.0;
};

/// Per-URI outcome kept for scatter export: recall is -1 when the URI is
/// held by no archive (excluded from recall averages).
struct ScatterPoint {
    double recall = -1.0;
    std::uint32_t requests = 0;
    std::uint64_t uri_count = 0;
};

struct EvalReport {
    std::string strategy;
    std::vector<EvalRow> rows;                    // one per evaluated target
    std::vector<ArchiveConfusion> confusion;      // indexed by roster position
    std::uint64_t total_requests = 0;
    std::uint64_t eval_size = 0;
    std::uint64_t recall_defined = 0;             // URIs with >=1 holding archive
    double complete_timemap_fraction = 0.0;       // polled superset of holdings
    std::uint64_t seed = 0;
    std::vector<ScatterPoint> scatter;

    std::string to_json_string() const;
    static EvalReport from_json_string(const std::string& text);
    void save(const std::string& path) const;
    static EvalReport load(const std::string& path);
};

/// Simulates one strategy over the evaluation matrix. Per URI: requests =
/// |polled|, recall = |polled ∩ holdings| / |holdings| (skipped when the URI
/// is held nowhere), sum(T)/max(T) over the sampler's keyed draws. Throws
/// DataError when a polled archive has no latency samples.
EvalReport evaluate(const LabelMatrix& eval_matrix, const ModelRegistry& registry,
                    const RoutingStrategy& strategy, const LatencySampler& sampler);

/// One report per strategy, sharing the sampler's draws.
std::vector<EvalReport> evaluate(const LabelMatrix& eval_matrix,
                                 const ModelRegistry& registry,
                                 const std::vector<RoutingStrategy>& strategies,
                                 const LatencySampler& sampler);

/// Standard per-archive confusion over the full roster; decisions[i] must
/// correspond to eval_matrix record i.
std::vector<ArchiveConfusion> confusion(const LabelMatrix& eval_matrix,
                                        const std::vector<RoutingDecision>& decisions);

/// Percent drop in total requests going from report a to report b.
double request_reduction(const EvalReport& a, const EvalReport& b);

/// CSV `recall,requests,uri_count`; URIs with undefined recall carry -1 in
/// the recall column. Row multiplicities sum to the eval-set size.
void export_scatter(const EvalReport& report, const std::string& path);

/// Table-shaped CSV `tpr,scope,avg_requests,avg_recall,avg_sum_t,avg_max_t`.
void export_report_csv(const std::vector<EvalReport>& reports,
                       const std::string& path);

} // namespace memrouter
