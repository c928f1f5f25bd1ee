#include "memrouter/latency.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "memrouter/errors.hpp"

namespace memrouter {

std::int64_t LatencySampleSet::min_ms() const {
    return *std::min_element(samples_ms.begin(), samples_ms.end());
}

std::int64_t LatencySampleSet::max_ms() const {
    return *std::max_element(samples_ms.begin(), samples_ms.end());
}

double LatencySampleSet::avg_ms() const {
    return static_cast<double>(std::accumulate(samples_ms.begin(),
                                               samples_ms.end(), std::int64_t{0})) /
           static_cast<double>(samples_ms.size());
}

std::map<std::uint32_t, LatencySampleSet>
load_latency_samples(const std::string& path, const Roster& roster) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open latency CSV: " + path);

    std::map<std::uint32_t, LatencySampleSet> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line != "archive,ms")
                throw DataError(path + ": expected header 'archive,ms'");
            continue;
        }
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed row");
        std::string id = line.substr(0, comma);
        std::int64_t ms;
        try {
            ms = std::stoll(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad sample value");
        }
        if (ms <= 0)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": latency samples must be positive");
        std::uint32_t idx = roster.require(id);
        auto& set = out[idx];
        set.archive = idx;
        set.samples_ms.push_back(ms);
    }
    return out;
}

void save_latency_samples(const std::map<std::uint32_t, LatencySampleSet>& sets,
                          const Roster& roster, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write latency CSV: " + path);
    out << "archive,ms\n";
    for (const auto& [idx, set] : sets)
        for (auto ms : set.samples_ms)
            out << roster.at(idx).id << ',' << ms << '\n';
}

} // namespace memrouter
