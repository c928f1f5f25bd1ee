#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memrouter/archive.hpp"

namespace memrouter {

/// Observed response times for one archive, milliseconds, all > 0.
struct LatencySampleSet {
    std::uint32_t archive = 0;
    std::vector<std::int64_t> samples_ms;

    std::int64_t min_ms() const;
    std::int64_t max_ms() const;
    double avg_ms() const;
};

/// Loads the latency CSV (`archive,ms` header, one sample per row) keyed
/// by roster index. Rejects non-positive samples and unknown archives.
std::map<std::uint32_t, LatencySampleSet>
load_latency_samples(const std::string& path, const Roster& roster);

void save_latency_samples(const std::map<std::uint32_t, LatencySampleSet>& sets,
                          const Roster& roster, const std::string& path);

} // namespace memrouter
