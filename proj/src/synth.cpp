#include "memrouter/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "memrouter/errors.hpp"

namespace memrouter {

namespace {

std::string make_word(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len) {
    static const char vowels[] = "aeiou";
    static const char consonants[] = "bcdfghjklmnpqrstvwz";
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<int> v(0, 4), c(0, 18);
    std::size_t n = len(rng);
    std::string w;
    for (std::size_t i = 0; i < n; ++i)
        w += (i % 2 == 0) ? consonants[c(rng)] : vowels[v(rng)];
    return w;
}

} // namespace

SyntheticCorpus gen_synthetic(const SyntheticCorpusSpec& spec) {
    if (spec.num_archives < 2)
        throw UsageError("synthetic corpus needs at least 2 archives");
    if (spec.num_uris == 0) throw UsageError("synthetic corpus needs at least 1 URI");
    if (spec.noise < 0.0 || spec.noise >= 1.0)
        throw UsageError("noise rate must lie in [0, 1)");
    if (spec.generic_fraction < 0.0 || spec.generic_fraction > 1.0)
        throw UsageError("generic fraction must lie in [0, 1]");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<ArchiveInfo> infos;
    infos.push_back({"ia", Compliance::native, true, true});
    for (std::size_t k = 1; k < spec.num_archives; ++k) {
        char id[16];
        std::snprintf(id, sizeof id, "arc%02zu", k);
        // Roughly a third of the fleet only speaks the protocol by proxy.
        infos.push_back({id, k % 3 == 0 ? Compliance::by_proxy : Compliance::native,
                         true, false});
    }
    auto roster = std::make_shared<const Roster>(std::move(infos));

    const std::vector<std::string> generic_suffixes = {
        "com", "net", "org", "io", "de", "fr", "co.uk", "edu", "gov"};

    // Each owner archive gets a unique TLD (two registrable suffixes under
    // it) and a handful of tokens; both leak into hosts and paths.
    std::set<std::string> used_tlds(generic_suffixes.begin(), generic_suffixes.end());
    std::vector<std::array<std::string, 2>> planted_suffixes(spec.num_archives);
    std::vector<std::vector<std::string>> planted_tokens(spec.num_archives);
    for (std::size_t k = 1; k < spec.num_archives; ++k) {
        std::string tld;
        do tld = make_word(rng, 3, 3);
        while (!used_tlds.insert(tld).second);
        planted_suffixes[k] = {tld, "co." + tld};
        for (int t = 0; t < 6; ++t)
            planted_tokens[k].push_back(make_word(rng, 5, 9));
    }
    std::vector<std::string> shared_words;
    for (int t = 0; t < 120; ++t) shared_words.push_back(make_word(rng, 4, 8));

    std::ostringstream psl;
    psl << "// synthetic registrable-domain rules\n";
    for (const auto& s : generic_suffixes) psl << s << "\n";
    for (std::size_t k = 1; k < spec.num_archives; ++k)
        psl << planted_suffixes[k][0] << "\n" << planted_suffixes[k][1] << "\n";

    auto pick = [&](const std::vector<std::string>& pool) -> const std::string& {
        return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    };

    const double stray_hold = spec.noise * 0.08;
    std::uniform_int_distribution<std::size_t> pick_owner(1, spec.num_archives - 1);

    std::vector<HoldingsRecord> records;
    records.reserve(spec.num_uris);
    for (std::size_t i = 0; i < spec.num_uris; ++i) {
        bool generic = unif(rng) < spec.generic_fraction;
        std::size_t owner = generic ? 0 : pick_owner(rng);

        std::string host;
        if (unif(rng) < 0.3) host += "www.";
        host += (!generic && unif(rng) < 0.7) ? pick(planted_tokens[owner])
                                              : pick(shared_words);
        host += '.';
        host += (!generic && unif(rng) < 0.85)
                    ? planted_suffixes[owner][unif(rng) < 0.5 ? 0 : 1]
                    : pick(generic_suffixes);

        std::string path = "/" + pick(shared_words);
        if (!generic && unif(rng) < 0.8) path += "/" + pick(planted_tokens[owner]);
        if (unif(rng) < 0.5) path += "/" + pick(shared_words) + ".html";
        path += "/p" + std::to_string(i);  // uniqueness guard

        std::string uri = "http://" + host + path;
        if (unif(rng) < 0.15)
            uri += "?id=" + std::to_string(
                       std::uniform_int_distribution<int>(1, 99999)(rng));

        HoldingsRecord rec;
        rec.uri = uri;
        double dom = generic ? spec.dominant_hold_generic : spec.dominant_hold_owned;
        if (unif(rng) < dom) rec.archives.push_back(0);
        for (std::size_t a = 1; a < spec.num_archives; ++a) {
            double p = (a == owner) ? 1.0 - spec.noise : stray_hold;
            if (unif(rng) < p) rec.archives.push_back(static_cast<std::uint32_t>(a));
        }
        records.push_back(std::move(rec));
    }

    // Lognormal response times, slow tail capped at 60 s; the dominant
    // archive is the fastest responder.
    std::map<std::uint32_t, LatencySampleSet> latency;
    for (std::size_t a = 0; a < spec.num_archives; ++a) {
        double median_ms = a == 0 ? 250.0 : 150.0 * std::pow(1.45, static_cast<double>(a));
        std::lognormal_distribution<double> dist(std::log(median_ms), 0.9);
        LatencySampleSet set;
        set.archive = static_cast<std::uint32_t>(a);
        set.samples_ms.reserve(spec.latency_samples);
        for (std::size_t s = 0; s < spec.latency_samples; ++s) {
            double ms = std::clamp(dist(rng), 5.0, 60000.0);
            set.samples_ms.push_back(static_cast<std::int64_t>(std::llround(ms)));
        }
        latency.emplace(set.archive, std::move(set));
    }

    return {roster, psl.str(), LabelMatrix(roster, std::move(records)),
            std::move(latency)};
}

void write_corpus(const SyntheticCorpus& corpus, const std::string& dir) {
    std::filesystem::create_directories(dir);
    corpus.roster->save(dir + "/roster.json");
    std::ofstream psl(dir + "/psl.dat");
    if (!psl) throw DataError("cannot write " + dir + "/psl.dat");
    psl << corpus.psl_source;
    psl.close();
    save_holdings(corpus.holdings, dir + "/holdings.tsv");
    save_latency_samples(corpus.latency, *corpus.roster, dir + "/latency.csv");
}

} // namespace memrouter
