#include "memrouter/features.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "memrouter/digest.hpp"
#include "memrouter/errors.hpp"

namespace memrouter {

using nlohmann::json;

std::string to_string(NgramScope s) {
    switch (s) {
        case NgramScope::whole: return "whole";
        case NgramScope::host: return "host";
        case NgramScope::path: return "path";
    }
    return "whole";
}

NgramScope ngram_scope_from_string(const std::string& s) {
    if (s == "whole") return NgramScope::whole;
    if (s == "host") return NgramScope::host;
    if (s == "path") return NgramScope::path;
    throw UsageError("unknown n-gram scope: " + s);
}

std::string to_string(Family f) {
    switch (f) {
        case Family::psl: return "psl";
        case Family::gram: return "gram";
        case Family::token: return "token";
    }
    return "psl";
}

Eigen::Matrix<double, kCountDim, 1> extract_counts(const UriParts& p) {
    Eigen::Matrix<double, kCountDim, 1> c;
    const std::string* comps[4] = {&p.whole, &p.host, &p.path, &p.query};
    for (int i = 0; i < 4; ++i) c[i] = static_cast<double>(comps[i]->size());
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < static_cast<int>(kCountChars.size()); ++j) {
            c[4 + 8 * i + j] = static_cast<double>(
                std::count(comps[i]->begin(), comps[i]->end(), kCountChars[j]));
        }
    }
    return c;
}

namespace {

bool is_delimiter(char c) {
    return kDelimiters.find(c) != std::string_view::npos ||
           std::isspace(static_cast<unsigned char>(c));
}

std::string strip_and_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
        if (!is_delimiter(c))
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

} // namespace

std::vector<std::string> extract_ngrams(const UriParts& p, int n, NgramScope scope) {
    if (n < 3 || n > 7) throw UsageError("n-gram size must be in [3,7]");
    std::string_view src;
    switch (scope) {
        case NgramScope::whole: src = p.whole; break;
        case NgramScope::host: src = p.host; break;
        case NgramScope::path: src = p.path; break;
    }
    std::string s = strip_and_lower(src);
    std::vector<std::string> grams;
    if (static_cast<int>(s.size()) < n) return grams;
    grams.reserve(s.size() - n + 1);
    for (std::size_t i = 0; i + n <= s.size(); ++i)
        grams.push_back(s.substr(i, n));
    return grams;
}

std::vector<std::string> extract_tokens(const UriParts& p) {
    std::vector<std::string> tokens;
    std::string cur;
    auto flush = [&]() {
        if (cur.size() >= 2 && cur.size() <= 10) tokens.push_back(cur);
        cur.clear();
    };
    for (char c : p.whole) {
        if (is_delimiter(c)) flush();
        else cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    flush();
    return tokens;
}

RawFeatures extract_raw(const UriParts& p, const PslRules& psl,
                        const FeatureConfig& cfg) {
    RawFeatures raw;
    raw.counts = extract_counts(p);
    raw.psl_domain = psl.suffix_of(p.host);
    for (int n : cfg.gram_sizes) raw.ngrams[n] = extract_ngrams(p, n, cfg.gram_scope);
    raw.tokens = extract_tokens(p);
    return raw;
}

Vocabulary::Vocabulary(std::vector<std::string> psl_entries,
                       std::vector<std::string> gram_entries, int gram_n,
                       NgramScope gram_scope,
                       std::vector<std::string> token_entries,
                       Eigen::Matrix<double, kCountDim, 1> count_mean,
                       Eigen::Matrix<double, kCountDim, 1> count_std,
                       std::string psl_source)
    : psl_entries_(std::move(psl_entries)), gram_entries_(std::move(gram_entries)),
      gram_n_(gram_n), gram_scope_(gram_scope),
      token_entries_(std::move(token_entries)), count_mean_(std::move(count_mean)),
      count_std_(std::move(count_std)), psl_source_(std::move(psl_source)),
      psl_rules_(PslRules::parse(psl_source_)) {
    std::uint32_t col = kCountDim;
    const std::vector<std::string>* fams[3] = {&psl_entries_, &gram_entries_,
                                               &token_entries_};
    for (int f = 0; f < 3; ++f) {
        for (const auto& e : *fams[f]) {
            if (!columns_[f].emplace(e, col).second)
                throw DataError("duplicate vocabulary entry: " + e);
            ++col;
        }
    }
    for (int i = 0; i < kCountDim; ++i)
        if (!(count_std_[i] > 0)) count_std_[i] = 1.0;

    // Content digest over everything that affects vectorization.
    std::ostringstream buf;
    buf.precision(17);
    buf << gram_n_ << '|' << to_string(gram_scope_) << '|';
    buf << fnv1a64(psl_source_) << '|';
    for (int f = 0; f < 3; ++f)
        for (const auto& e : *fams[f]) buf << e << '\x1f';
    for (int i = 0; i < kCountDim; ++i)
        buf << count_mean_[i] << ',' << count_std_[i] << ';';
    digest_ = content_digest(buf.str());
}

const std::vector<std::string>& Vocabulary::entries(Family f) const {
    switch (f) {
        case Family::psl: return psl_entries_;
        case Family::gram: return gram_entries_;
        case Family::token: return token_entries_;
    }
    return psl_entries_;
}

std::optional<std::uint32_t> Vocabulary::column_of(Family f,
                                                   const std::string& feature) const {
    const auto& m = columns_[static_cast<int>(f)];
    auto it = m.find(feature);
    if (it == m.end()) return std::nullopt;
    return it->second;
}

FeatureVector Vocabulary::vectorize(const RawFeatures& raw) const {
    FeatureVector v;
    v.dense = (raw.counts - count_mean_).cwiseQuotient(count_std_);
    v.sparse.reserve(32);
    if (auto c = column_of(Family::psl, raw.psl_domain)) v.sparse.push_back(*c);
    auto grams = raw.ngrams.find(gram_n_);
    if (grams != raw.ngrams.end())
        for (const auto& g : grams->second)
            if (auto c = column_of(Family::gram, g)) v.sparse.push_back(*c);
    for (const auto& t : raw.tokens)
        if (auto c = column_of(Family::token, t)) v.sparse.push_back(*c);
    // Binary presence encoding: sort and deduplicate active columns.
    std::sort(v.sparse.begin(), v.sparse.end());
    v.sparse.erase(std::unique(v.sparse.begin(), v.sparse.end()), v.sparse.end());
    return v;
}

FeatureVector Vocabulary::extract_and_vectorize(const UriParts& parts) const {
    return vectorize(extract_raw(parts, psl_rules_, feature_config()));
}

std::string Vocabulary::to_json_string() const {
    json doc;
    doc["version"] = 1;
    doc["counts_dim"] = kCountDim;
    doc["psl"] = psl_entries_;
    doc["grams"] = gram_entries_;
    doc["gram_n"] = gram_n_;
    doc["gram_scope"] = to_string(gram_scope_);
    doc["tokens"] = token_entries_;
    std::vector<double> mean(count_mean_.data(), count_mean_.data() + kCountDim);
    std::vector<double> stdev(count_std_.data(), count_std_.data() + kCountDim);
    doc["count_mean"] = mean;
    doc["count_std"] = stdev;
    doc["psl_source"] = psl_source_;
    doc["digest"] = digest_;
    return doc.dump(2) + "\n";
}

Vocabulary Vocabulary::from_json_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("vocabulary json parse error: ") + e.what());
    }
    if (doc.value("version", 0) != 1)
        throw DataError("unsupported vocabulary version");
    Eigen::Matrix<double, kCountDim, 1> mean, stdev;
    auto jm = doc.at("count_mean").get<std::vector<double>>();
    auto js = doc.at("count_std").get<std::vector<double>>();
    if (jm.size() != kCountDim || js.size() != kCountDim)
        throw DataError("vocabulary standardization arrays must have length 36");
    for (int i = 0; i < kCountDim; ++i) {
        mean[i] = jm[i];
        stdev[i] = js[i];
    }
    Vocabulary v(doc.at("psl").get<std::vector<std::string>>(),
                 doc.at("grams").get<std::vector<std::string>>(),
                 doc.at("gram_n").get<int>(),
                 ngram_scope_from_string(doc.at("gram_scope").get<std::string>()),
                 doc.at("tokens").get<std::vector<std::string>>(), mean, stdev,
                 doc.at("psl_source").get<std::string>());
    if (doc.contains("digest") &&
        doc["digest"].get<std::string>() != v.digest())
        throw DataError("vocabulary digest mismatch: file corrupted or edited");
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocabulary: " + path);
    out << to_json_string();
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocabulary: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json_string(text);
}

} // namespace memrouter
