#include "memrouter/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include "memrouter/errors.hpp"

namespace memrouter {

std::string to_string(Metric m) {
    switch (m) {
        case Metric::most_common: return "most_common";
        case Metric::difference: return "difference";
        case Metric::entropy: return "entropy";
        case Metric::gini: return "gini";
        case Metric::random: return "random";
    }
    return "most_common";
}

Metric metric_from_string(const std::string& s) {
    if (s == "most_common") return Metric::most_common;
    if (s == "difference") return Metric::difference;
    if (s == "entropy") return Metric::entropy;
    if (s == "gini") return Metric::gini;
    if (s == "random") return Metric::random;
    throw UsageError("unknown selection metric: " + s);
}

Eigen::Matrix<double, kCountDim, 1> FeatureStatsStore::count_mean() const {
    if (num_records_ == 0) return Eigen::Matrix<double, kCountDim, 1>::Zero();
    return count_sum_ / static_cast<double>(num_records_);
}

Eigen::Matrix<double, kCountDim, 1> FeatureStatsStore::count_std() const {
    Eigen::Matrix<double, kCountDim, 1> out =
        Eigen::Matrix<double, kCountDim, 1>::Ones();
    if (num_records_ == 0) return out;
    const double n = static_cast<double>(num_records_);
    for (int i = 0; i < kCountDim; ++i) {
        double var = count_sumsq_[i] / n - (count_sum_[i] / n) * (count_sum_[i] / n);
        out[i] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    return out;
}

void FeatureStatsStore::add_record(const RawFeatures& raw,
                                   const std::vector<std::uint32_t>& archives) {
    if (positives_.empty()) positives_.assign(roster_size_, 0);
    ++num_records_;
    for (auto a : archives) ++positives_[a];
    count_sum_ += raw.counts;
    count_sumsq_ += raw.counts.cwiseProduct(raw.counts);

    auto bump = [&](Family f, const std::string& feature) {
        auto& entry = families_[static_cast<int>(f)][feature];
        if (entry.per_archive.empty()) entry.per_archive.assign(roster_size_, 0);
        ++entry.global;
        for (auto a : archives) ++entry.per_archive[a];
    };

    bump(Family::psl, raw.psl_domain);
    // Document frequency: each distinct feature counted once per record.
    std::vector<std::string> uniq;
    auto grams = raw.ngrams.find(cfg_.gram_sizes.empty() ? 3 : cfg_.gram_sizes[0]);
    if (grams != raw.ngrams.end()) {
        uniq = grams->second;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        for (const auto& g : uniq) bump(Family::gram, g);
    }
    uniq = raw.tokens;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const auto& t : uniq) bump(Family::token, t);
}

void FeatureStatsStore::merge(const FeatureStatsStore& other) {
    if (roster_size_ != other.roster_size_)
        throw UsageError("cannot merge stats over different rosters");
    num_records_ += other.num_records_;
    if (positives_.empty()) positives_.assign(roster_size_, 0);
    if (!other.positives_.empty())
        for (std::size_t i = 0; i < roster_size_; ++i)
            positives_[i] += other.positives_[i];
    count_sum_ += other.count_sum_;
    count_sumsq_ += other.count_sumsq_;
    for (int f = 0; f < 3; ++f) {
        for (const auto& [feature, counts] : other.families_[f]) {
            auto& entry = families_[f][feature];
            if (entry.per_archive.empty()) entry.per_archive.assign(roster_size_, 0);
            entry.global += counts.global;
            for (std::size_t i = 0; i < roster_size_; ++i)
                entry.per_archive[i] += counts.per_archive[i];
        }
    }
}

FeatureStatsStore collect_stats(const LabelMatrix& m, const PslRules& psl,
                                const FeatureConfig& cfg) {
    if (m.size() == 0) throw UsageError("collect_stats requires a nonempty matrix");
    FeatureStatsStore store(m.roster().size(), cfg);
    for (const auto& r : m.records()) {
        RawFeatures raw = extract_raw(decompose(r.uri), psl, cfg);
        store.add_record(raw, r.archives);
    }
    return store;
}

namespace {

double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

double gini_impurity(double p) { return 2.0 * p * (1.0 - p); }

// Decrease in label impurity from splitting on feature presence.
double split_gain(double n, double pos, double nf, double nfa,
                  double (*impurity)(double)) {
    if (n <= 0) return 0.0;
    double parent = impurity(pos / n);
    double left = nf > 0 ? impurity(nfa / nf) : 0.0;
    double right = (n - nf) > 0 ? impurity((pos - nfa) / (n - nf)) : 0.0;
    double gain = parent - (nf / n) * left - ((n - nf) / n) * right;
    return gain > 0 ? gain : 0.0;
}

double supervised_score(Metric metric, double n, double pos, double nf, double nfa) {
    switch (metric) {
        case Metric::difference:
            return pos > 0 ? std::abs(nfa / pos - nf / n) : 0.0;
        case Metric::entropy:
            return split_gain(n, pos, nf, nfa, binary_entropy);
        case Metric::gini:
            return split_gain(n, pos, nf, nfa, gini_impurity);
        default:
            return 0.0;
    }
}

} // namespace

RankedList rank(const FeatureStatsStore& stats, Family family, Metric metric,
                std::optional<std::uint32_t> archive, std::uint64_t seed) {
    const auto& fam = stats.family(family);
    // Sorted feature list keeps scoring independent of hash iteration order.
    std::vector<const std::pair<const std::string, FeatureCounts>*> items;
    items.reserve(fam.size());
    for (const auto& kv : fam) items.push_back(&kv);
    std::sort(items.begin(), items.end(),
              [](auto* a, auto* b) { return a->first < b->first; });

    const double n = static_cast<double>(stats.num_records());
    std::vector<std::uint32_t> supervised_archives;
    if (metric == Metric::difference || metric == Metric::entropy ||
        metric == Metric::gini) {
        if (archive) {
            supervised_archives.push_back(*archive);
        } else {
            for (std::uint32_t a = 0; a < stats.positives().size(); ++a)
                if (stats.positives()[a] > 0) supervised_archives.push_back(a);
        }
        if (supervised_archives.empty())
            throw UsageError("supervised metric needs an archive with positives");
    }

    RankedList out{family, metric, {}};
    out.entries.reserve(items.size());
    std::mt19937_64 rng(seed);
    for (auto* item : items) {
        const auto& counts = item->second;
        double score = 0.0;
        switch (metric) {
            case Metric::most_common:
                score = static_cast<double>(counts.global);
                break;
            case Metric::random:
                score = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
                break;
            default:
                for (auto a : supervised_archives)
                    score += supervised_score(
                        metric, n, static_cast<double>(stats.positives()[a]),
                        static_cast<double>(counts.global),
                        static_cast<double>(counts.per_archive[a]));
        }
        out.entries.emplace_back(item->first, score);
    }
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const auto& a, const auto& b) {
                         if (a.second != b.second) return a.second > b.second;
                         return a.first < b.first;
                     });
    return out;
}

std::size_t top_k_overlap(const RankedList& a, const RankedList& b, std::size_t k) {
    std::vector<std::string> sa, sb;
    for (std::size_t i = 0; i < std::min(k, a.entries.size()); ++i)
        sa.push_back(a.entries[i].first);
    for (std::size_t i = 0; i < std::min(k, b.entries.size()); ++i)
        sb.push_back(b.entries[i].first);
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    std::vector<std::string> both;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(),
                          std::back_inserter(both));
    return both.size();
}

void export_ranked_csv(const RankedList& list, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write ranked CSV: " + path);
    out << "feature,family,metric,score\n";
    out.precision(12);
    for (const auto& [feature, score] : list.entries)
        out << feature << ',' << to_string(list.family) << ','
            << to_string(list.metric) << ',' << score << '\n';
}

Vocabulary build_vocabulary(const FeatureStatsStore& stats, const VocabPlan& plan,
                            const std::string& psl_source) {
    auto take = [&](Family family, const FamilyPlan& fp) {
        RankedList list = rank(stats, family, fp.metric, std::nullopt, plan.seed);
        std::size_t k = fp.count;
        if (k > list.entries.size()) {
            std::cerr << "warning: requested " << fp.count << " " << to_string(family)
                      << " features but only " << list.entries.size()
                      << " observed; clamping\n";
            k = list.entries.size();
        }
        std::vector<std::string> entries;
        entries.reserve(k);
        for (std::size_t i = 0; i < k; ++i) entries.push_back(list.entries[i].first);
        return entries;
    };
    const auto& cfg = stats.config();
    return Vocabulary(take(Family::psl, plan.psl), take(Family::gram, plan.gram),
                      cfg.gram_sizes.empty() ? 3 : cfg.gram_sizes[0], cfg.gram_scope,
                      take(Family::token, plan.token), stats.count_mean(),
                      stats.count_std(), psl_source);
}

} // namespace memrouter
