#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "memrouter/features.hpp"
#include "memrouter/holdings.hpp"

namespace memrouter {

enum class Metric { most_common, difference, entropy, gini, random };
std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

/// Document frequencies for one candidate feature: how many records
/// contain it overall and per archive (each record counted once).
struct FeatureCounts {
    std::uint64_t global = 0;
    std::vector<std::uint32_t> per_archive; // indexed by roster position
};

/// Census of every feature observed in a training matrix, plus the count
/// statistics needed for dense standardization. Immutable once collected.
class FeatureStatsStore {
public:
    FeatureStatsStore(std::size_t roster_size, FeatureConfig cfg)
        : roster_size_(roster_size), cfg_(std::move(cfg)) {}

    const std::unordered_map<std::string, FeatureCounts>& family(Family f) const {
        return families_[static_cast<int>(f)];
    }
    std::size_t num_records() const { return num_records_; }
    const std::vector<std::size_t>& positives() const { return positives_; }
    const FeatureConfig& config() const { return cfg_; }

    Eigen::Matrix<double, kCountDim, 1> count_mean() const;
    Eigen::Matrix<double, kCountDim, 1> count_std() const;

    /// Shard-merge: counts add elementwise; associative and commutative.
    void merge(const FeatureStatsStore& other);

    friend FeatureStatsStore collect_stats(const LabelMatrix&, const PslRules&,
                                           const FeatureConfig&);

private:
    void add_record(const RawFeatures& raw, const std::vector<std::uint32_t>& archives);

    std::size_t roster_size_;
    FeatureConfig cfg_;
    std::unordered_map<std::string, FeatureCounts> families_[3];
    std::size_t num_records_ = 0;
    std::vector<std::size_t> positives_;
    Eigen::Matrix<double, kCountDim, 1> count_sum_ =
        Eigen::Matrix<double, kCountDim, 1>::Zero();
    Eigen::Matrix<double, kCountDim, 1> count_sumsq_ =
        Eigen::Matrix<double, kCountDim, 1>::Zero();
};

FeatureStatsStore collect_stats(const LabelMatrix& m, const PslRules& psl,
                                const FeatureConfig& cfg = {});

struct RankedList {
    Family family;
    Metric metric;
    std::vector<std::pair<std::string, double>> entries; // descending score
};

/// Scores every feature of a family. Supervised metrics (difference,
/// entropy, gini) require an archive; when `archive` is empty they sum
/// per-archive scores over all archives with at least one positive.
/// Ties break lexicographically; `random` shuffles under the seed.
RankedList rank(const FeatureStatsStore& stats, Family family, Metric metric,
                std::optional<std::uint32_t> archive = std::nullopt,
                std::uint64_t seed = 0);

/// Size of the intersection of two rankings' top-k feature sets.
std::size_t top_k_overlap(const RankedList& a, const RankedList& b, std::size_t k);

void export_ranked_csv(const RankedList& list, const std::string& path);

struct FamilyPlan {
    Metric metric;
    std::size_t count;
};

struct VocabPlan {
    FamilyPlan psl{Metric::most_common, 250};
    FamilyPlan gram{Metric::difference, 3000};
    FamilyPlan token{Metric::entropy, 2000};
    std::uint64_t seed = 0; // used only by the random metric
};

/// Builds the shared vocabulary: per family, top-k under the family's
/// metric (supervised scores summed across archives), clamped with a
/// warning when fewer features were observed.
Vocabulary build_vocabulary(const FeatureStatsStore& stats, const VocabPlan& plan,
                            const std::string& psl_source);

} // namespace memrouter
