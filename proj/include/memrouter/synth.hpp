#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "memrouter/holdings.hpp"
#include "memrouter/latency.hpp"

namespace memrouter {

/// Generator parameters for a synthetic aggregator cache. Holdings correlate
/// with planted registrable-domain suffixes and planted tokens, so per-archive
/// classifiers have learnable signal; `noise` controls how often that signal
/// lies (owner misses) and how often unrelated archives hold a URI.
struct SyntheticCorpusSpec {
    std::size_t num_archives = 9;     // first archive is dominant / always-poll
    std::size_t num_uris = 200000;
    double generic_fraction = 0.3;    // URIs with no owning archive
    double noise = 0.05;              // owner holds with 1 - noise
    double dominant_hold_owned = 0.85;
    double dominant_hold_generic = 0.9;
    std::size_t latency_samples = 1000;
    std::uint64_t seed = 42;
};

struct SyntheticCorpus {
    std::shared_ptr<const Roster> roster;
    std::string psl_source;
    LabelMatrix holdings;
    std::map<std::uint32_t, LatencySampleSet> latency;
};

/// Deterministic under spec.seed. Throws UsageError on infeasible specs
/// (fewer than 2 archives, noise outside [0,1), no URIs).
SyntheticCorpus gen_synthetic(const SyntheticCorpusSpec& spec);

/// Writes roster.json, psl.dat, holdings.tsv, latency.csv into `dir`.
void write_corpus(const SyntheticCorpus& corpus, const std::string& dir);

} // namespace memrouter
