#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>

#include "memrouter/errors.hpp"
#include "memrouter/features.hpp"
#include "memrouter/psl.hpp"
#include "memrouter/uri.hpp"

using namespace memrouter;

namespace {

const char* kGoldenUri = "http://www.dailymail.co.uk/science-tech/index.html";

const char* kPslSource =
    "// test rules\n"
    "com\n"
    "co.uk\n"
    "uk\n"
    "*.ck\n"
    "!www.ck\n";

std::size_t count_of(const std::vector<std::string>& v, const std::string& s) {
    return static_cast<std::size_t>(std::count(v.begin(), v.end(), s));
}

Vocabulary tiny_vocab() {
    Eigen::Matrix<double, kCountDim, 1> mean = Eigen::Matrix<double, kCountDim, 1>::Zero();
    Eigen::Matrix<double, kCountDim, 1> stdev = Eigen::Matrix<double, kCountDim, 1>::Ones();
    return Vocabulary({"co.uk", "com"}, {"dai", "ail", "zzz"}, 3, NgramScope::whole,
                      {"dailymail", "index", "unseen"}, mean, stdev, kPslSource);
}

} // namespace

TEST_CASE("count features: lengths and special characters") {
    UriParts p = decompose(kGoldenUri);
    auto c = extract_counts(p);

    CHECK(c[0] == 50);  // whole URI length
    CHECK(c[1] == 19);  // host length
    CHECK(c[2] == 24);  // path length
    CHECK(c[3] == 0);   // query length

    // whole-URI block: chars "/.?-_%=:"
    CHECK(c[4] == 4);   // '/'
    CHECK(c[5] == 4);   // '.'
    CHECK(c[6] == 0);   // '?'
    CHECK(c[7] == 1);   // '-'
    CHECK(c[11] == 1);  // ':'
    // host block
    CHECK(c[12] == 0);
    CHECK(c[13] == 3);  // dots in host
    // path block
    CHECK(c[20] == 2);  // '/'
    CHECK(c[21] == 1);  // '.'
    CHECK(c[23] == 1);  // '-'
    // query block all zero
    for (int i = 28; i < 36; ++i) CHECK(c[i] == 0);
}

TEST_CASE("count features: hand tally on a query-bearing URI") {
    UriParts p = decompose("https://a.example:8080/x_y/z%20q?k=v&k2=v2");
    auto c = extract_counts(p);
    CHECK(c[0] == static_cast<double>(p.whole.size()));
    CHECK(c[3] == static_cast<double>(p.query.size()));
    CHECK(c[4 + 6] == 2);      // '=' in whole
    CHECK(c[28 + 6] == 2);     // '=' in query
    CHECK(c[20 + 4] == 1);     // '_' in path
    CHECK(c[20 + 5] == 1);     // '%' in path
}

TEST_CASE("psl domain extraction") {
    PslRules rules = PslRules::parse(kPslSource);
    CHECK(rules.suffix_of("www.dailymail.co.uk") == "co.uk");
    CHECK(rules.suffix_of("DAILYMAIL.CO.UK") == "co.uk");
    CHECK(rules.suffix_of("news.uk") == "uk");
    // wildcard: any label directly under ck is a suffix-former
    CHECK(rules.suffix_of("foo.ck") == "ck");
    CHECK(rules.suffix_of("a.b.foo.ck") == "ck");
    // exception beats the wildcard
    CHECK(rules.suffix_of("www.ck") == "ck");
    // unlisted TLD falls back to the last label
    CHECK(rules.suffix_of("example.nothing") == "nothing");
    CHECK(rules.suffix_of("localhost") == "localhost");
    CHECK_THROWS_AS(rules.suffix_of(""), UsageError);
}

TEST_CASE("3-grams over the stripped whole URI") {
    UriParts p = decompose(kGoldenUri);
    auto grams = extract_ngrams(p, 3, NgramScope::whole);

    // stripped text: httpwwwdailymailcouksciencetechindexhtml (40 chars)
    CHECK(grams.size() == 40 - 3 + 1);
    CHECK(count_of(grams, "www") == 1);
    CHECK(count_of(grams, "dai") == 1);
    CHECK(count_of(grams, "ail") == 2);
    CHECK(count_of(grams, "ily") == 1);
    CHECK(count_of(grams, "lym") == 1);
    CHECK(count_of(grams, "yma") == 1);

    // independent sliding-window oracle
    std::string stripped;
    for (char ch : p.whole)
        if (kDelimiters.find(ch) == std::string_view::npos)
            stripped += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    for (std::size_t i = 0; i + 3 <= stripped.size(); ++i)
        CHECK(grams[i] == stripped.substr(i, 3));
}

TEST_CASE("n-gram bounds, scopes and short inputs") {
    UriParts p = decompose(kGoldenUri);
    CHECK_THROWS_AS(extract_ngrams(p, 2, NgramScope::whole), UsageError);
    CHECK_THROWS_AS(extract_ngrams(p, 8, NgramScope::whole), UsageError);

    auto host5 = extract_ngrams(p, 5, NgramScope::host);
    CHECK(host5.front() == "wwwda");  // "wwwdailymailcouk"
    CHECK(host5.size() == 16 - 5 + 1);

    UriParts tiny = decompose("http://ab.cd/");
    CHECK(extract_ngrams(tiny, 7, NgramScope::path).empty());
}

TEST_CASE("token extraction") {
    UriParts p = decompose(kGoldenUri);
    auto toks = extract_tokens(p);
    for (const char* t : {"www", "dailymail", "co", "uk", "science", "tech", "index"})
        CHECK(count_of(toks, t) == 1);
    // "http" survives (length 4), single chars and >10 chars do not
    UriParts q = decompose("http://x.example/a/averyverylongtoken/ok");
    auto toks2 = extract_tokens(q);
    CHECK(count_of(toks2, "a") == 0);
    CHECK(count_of(toks2, "averyverylongtoken") == 0);
    CHECK(count_of(toks2, "ok") == 1);
    for (const auto& t : toks2) {
        CHECK(t.size() >= 2);
        CHECK(t.size() <= 10);
    }
}

TEST_CASE("vectorize: sparse columns match a brute-force scan") {
    Vocabulary vocab = tiny_vocab();
    CHECK(vocab.total_dim() == 36 + 2 + 3 + 3);

    UriParts p = decompose(kGoldenUri);
    FeatureVector v = vocab.extract_and_vectorize(p);

    // independent scan over the vocabulary entries
    RawFeatures raw = extract_raw(p, vocab.psl_rules(), vocab.feature_config());
    std::vector<std::uint32_t> expected;
    for (const auto& e : vocab.entries(Family::psl))
        if (raw.psl_domain == e) expected.push_back(*vocab.column_of(Family::psl, e));
    for (const auto& e : vocab.entries(Family::gram))
        if (count_of(raw.ngrams.at(3), e) > 0)
            expected.push_back(*vocab.column_of(Family::gram, e));
    for (const auto& e : vocab.entries(Family::token))
        if (count_of(raw.tokens, e) > 0)
            expected.push_back(*vocab.column_of(Family::token, e));
    std::sort(expected.begin(), expected.end());
    CHECK(v.sparse == expected);

    // known memberships: psl co.uk (col 36), dai (38), ail (39),
    // dailymail (41), index (42); "zzz"/"unseen"/"com" absent
    CHECK(v.sparse == std::vector<std::uint32_t>{36, 38, 39, 41, 42});
    for (auto col : v.sparse) {
        CHECK(col >= 36);
        CHECK(col < vocab.total_dim());
    }
    CHECK(std::is_sorted(v.sparse.begin(), v.sparse.end()));
}

TEST_CASE("vectorize standardizes the dense block") {
    Eigen::Matrix<double, kCountDim, 1> mean, stdev;
    mean.setConstant(10.0);
    stdev.setConstant(2.0);
    Vocabulary vocab({}, {}, 3, NgramScope::whole, {}, mean, stdev, kPslSource);
    UriParts p = decompose(kGoldenUri);
    FeatureVector v = vocab.extract_and_vectorize(p);
    auto c = extract_counts(p);
    for (int i = 0; i < kCountDim; ++i)
        CHECK(v.dense[i] == doctest::Approx((c[i] - 10.0) / 2.0));
}

TEST_CASE("zero standard deviation falls back to unit scale") {
    Eigen::Matrix<double, kCountDim, 1> mean = Eigen::Matrix<double, kCountDim, 1>::Zero();
    Eigen::Matrix<double, kCountDim, 1> stdev = Eigen::Matrix<double, kCountDim, 1>::Zero();
    Vocabulary vocab({}, {}, 3, NgramScope::whole, {}, mean, stdev, kPslSource);
    FeatureVector v = vocab.extract_and_vectorize(decompose("http://ab.cd/e"));
    for (int i = 0; i < kCountDim; ++i) CHECK(std::isfinite(v.dense[i]));
}

TEST_CASE("longer URIs never shrink the whole-length feature") {
    // len(whole) is monotone under appending path segments
    std::string uri = "http://m.example/a";
    double prev = -1;
    for (int i = 0; i < 6; ++i) {
        auto c = extract_counts(decompose(uri));
        CHECK(c[0] > prev);
        prev = c[0];
        uri += "/seg";
    }
}

TEST_CASE("vocabulary JSON round-trip preserves the digest") {
    Vocabulary vocab = tiny_vocab();
    std::string text = vocab.to_json_string();
    Vocabulary back = Vocabulary::from_json_string(text);
    CHECK(back.digest() == vocab.digest());
    CHECK(back.total_dim() == vocab.total_dim());
    CHECK(back.to_json_string() == text);

    // same URI vectorizes identically through the reloaded vocabulary
    FeatureVector a = vocab.extract_and_vectorize(decompose(kGoldenUri));
    FeatureVector b = back.extract_and_vectorize(decompose(kGoldenUri));
    CHECK(a.sparse == b.sparse);
    CHECK((a.dense - b.dense).cwiseAbs().maxCoeff() == 0.0);

    // tampering with an entry breaks the digest check
    std::string tampered = text;
    auto pos = tampered.find("dailymail");
    tampered.replace(pos, 9, "dailymaiX");
    CHECK_THROWS_AS(Vocabulary::from_json_string(tampered), DataError);
}

TEST_CASE("duplicate vocabulary entries are rejected") {
    Eigen::Matrix<double, kCountDim, 1> mean = Eigen::Matrix<double, kCountDim, 1>::Zero();
    Eigen::Matrix<double, kCountDim, 1> stdev = Eigen::Matrix<double, kCountDim, 1>::Ones();
    CHECK_THROWS_AS(Vocabulary({"com", "com"}, {}, 3, NgramScope::whole, {}, mean,
                               stdev, kPslSource),
                    DataError);
}
