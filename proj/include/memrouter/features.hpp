#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "memrouter/psl.hpp"
#include "memrouter/uri.hpp"

namespace memrouter {

/// Count feature layout: 4 component lengths (whole, host, path, query)
/// followed by the counts of kCountChars in each of those components,
/// giving 4 + 8*4 = 36 features.
inline constexpr int kCountDim = 36;
inline constexpr std::string_view kCountChars = "/.?-_%=:";

/// Characters stripped before n-gram windows and used to split tokens:
/// RFC3986 reserved characters plus the count characters, plus whitespace.
inline constexpr std::string_view kDelimiters = ":/?#[]@!$&'()*+,;=.-_~%";

enum class NgramScope { whole, host, path };
std::string to_string(NgramScope s);
NgramScope ngram_scope_from_string(const std::string& s);

enum class Family { psl, gram, token };
std::string to_string(Family f);

/// Everything extracted from one URI before vocabulary lookup. Gram and
/// token lists are multisets: repeats are preserved.
struct RawFeatures {
    Eigen::Matrix<double, kCountDim, 1> counts;
    std::string psl_domain;
    std::map<int, std::vector<std::string>> ngrams; // n -> grams, document order
    std::vector<std::string> tokens;
};

Eigen::Matrix<double, kCountDim, 1> extract_counts(const UriParts& p);

/// Sliding window of width n (3..7) over the lowercased scope string with
/// delimiter characters removed. Shorter scopes yield an empty list.
std::vector<std::string> extract_ngrams(const UriParts& p, int n, NgramScope scope);

/// Splits the whole URI on the delimiter set, lowercases, and keeps
/// pieces of length 2..10.
std::vector<std::string> extract_tokens(const UriParts& p);

struct FeatureConfig {
    std::vector<int> gram_sizes = {3};
    NgramScope gram_scope = NgramScope::whole;
};

RawFeatures extract_raw(const UriParts& p, const PslRules& psl,
                        const FeatureConfig& cfg = {});

/// Dense standardized counts plus strictly sorted active binary columns
/// (all in [kCountDim, total_dim)).
struct FeatureVector {
    Eigen::Matrix<double, kCountDim, 1> dense;
    std::vector<std::uint32_t> sparse;
};

/// The selected feature space shared by every archive model: the 36 count
/// features plus ordered PSL / n-gram / token entries with fixed column
/// assignments, the standardization parameters for the dense block, and
/// the PSL rule text extraction was (and must keep being) performed with.
/// Immutable after construction.
class Vocabulary {
public:
    Vocabulary(std::vector<std::string> psl_entries,
               std::vector<std::string> gram_entries, int gram_n,
               NgramScope gram_scope, std::vector<std::string> token_entries,
               Eigen::Matrix<double, kCountDim, 1> count_mean,
               Eigen::Matrix<double, kCountDim, 1> count_std,
               std::string psl_source);

    std::uint32_t total_dim() const {
        return static_cast<std::uint32_t>(kCountDim + psl_entries_.size() +
                                          gram_entries_.size() + token_entries_.size());
    }
    const std::vector<std::string>& entries(Family f) const;
    int gram_n() const { return gram_n_; }
    NgramScope gram_scope() const { return gram_scope_; }
    FeatureConfig feature_config() const { return {{gram_n_}, gram_scope_}; }
    const std::string& digest() const { return digest_; }

    std::optional<std::uint32_t> column_of(Family f, const std::string& feature) const;
    const PslRules& psl_rules() const { return psl_rules_; }
    const std::string& psl_source() const { return psl_source_; }

    FeatureVector vectorize(const RawFeatures& raw) const;

    /// Extraction + vectorization with the vocabulary's own PSL rules and
    /// gram configuration; the one path routers and services should use.
    FeatureVector extract_and_vectorize(const UriParts& parts) const;

    std::string to_json_string() const;
    static Vocabulary from_json_string(const std::string& text);
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

private:
    std::vector<std::string> psl_entries_;
    std::vector<std::string> gram_entries_;
    int gram_n_;
    NgramScope gram_scope_;
    std::vector<std::string> token_entries_;
    Eigen::Matrix<double, kCountDim, 1> count_mean_;
    Eigen::Matrix<double, kCountDim, 1> count_std_;
    std::string psl_source_;
    PslRules psl_rules_;
    std::map<std::string, std::uint32_t> columns_[3]; // per family
    std::string digest_;
};

} // namespace memrouter
