#include "memrouter/holdings.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "memrouter/errors.hpp"
#include "memrouter/uri.hpp"

namespace memrouter {

bool HoldingsRecord::holds(std::uint32_t archive) const {
    return std::binary_search(archives.begin(), archives.end(), archive);
}

LabelMatrix::LabelMatrix(std::shared_ptr<const Roster> roster,
                         std::vector<HoldingsRecord> records)
    : roster_(std::move(roster)), records_(std::move(records)),
      positives_(roster_->size(), 0) {
    for (auto& r : records_) {
        for (auto a : r.archives) {
            if (a >= roster_->size())
                throw DataError("archive index out of roster range for " + r.uri);
            ++positives_[a];
        }
    }
}

LabelMatrix load_holdings(const std::string& path,
                          std::shared_ptr<const Roster> roster) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open holdings dump: " + path);

    std::vector<HoldingsRecord> records;
    std::unordered_map<std::string, std::size_t> index;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        auto tab = line.find('\t');
        std::string uri_raw = tab == std::string::npos ? line : line.substr(0, tab);
        std::string uri;
        try {
            uri = normalize_uri(uri_raw);
        } catch (const UsageError& e) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": malformed URI: " + uri_raw);
        }

        std::vector<std::uint32_t> archives;
        if (tab != std::string::npos) {
            std::string rest = line.substr(tab + 1);
            std::size_t pos = 0;
            while (pos <= rest.size() && !rest.empty()) {
                auto comma = rest.find(',', pos);
                std::string id = rest.substr(
                    pos, comma == std::string::npos ? std::string::npos : comma - pos);
                if (!id.empty()) {
                    auto idx = roster->index_of(id);
                    if (!idx)
                        throw DataError(path + ":" + std::to_string(lineno) +
                                        ": unknown archive id: " + id);
                    archives.push_back(*idx);
                }
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
        }
        std::sort(archives.begin(), archives.end());
        archives.erase(std::unique(archives.begin(), archives.end()), archives.end());

        auto it = index.find(uri);
        if (it == index.end()) {
            index.emplace(uri, records.size());
            records.push_back({std::move(uri), std::move(archives)});
        } else {
            // Dumps are accretive: duplicates union their archive sets.
            auto& existing = records[it->second].archives;
            std::vector<std::uint32_t> merged;
            std::set_union(existing.begin(), existing.end(), archives.begin(),
                           archives.end(), std::back_inserter(merged));
            existing = std::move(merged);
        }
    }
    return LabelMatrix(std::move(roster), std::move(records));
}

void save_holdings(const LabelMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write holdings dump: " + path);
    for (const auto& r : m.records()) {
        out << r.uri << '\t';
        for (std::size_t i = 0; i < r.archives.size(); ++i) {
            if (i) out << ',';
            out << m.roster().at(r.archives[i]).id;
        }
        out << '\n';
    }
}

std::map<std::size_t, std::pair<std::size_t, double>>
histogram_by_cardinality(const LabelMatrix& m) {
    std::map<std::size_t, std::pair<std::size_t, double>> hist;
    for (const auto& r : m.records()) ++hist[r.archives.size()].first;
    for (auto& [k, v] : hist)
        v.second = m.size() ? 100.0 * static_cast<double>(v.first) /
                                  static_cast<double>(m.size())
                            : 0.0;
    return hist;
}

SplitResult split(const LabelMatrix& m, SplitFractions f, std::uint64_t seed) {
    const double sum = f.train + f.calibrate + f.test;
    if (f.train < 0 || f.calibrate < 0 || f.test < 0 ||
        std::abs(sum - 1.0) > 1e-9)
        throw UsageError("split fractions must be non-negative and sum to 1.0");

    // Group record indices by exact archive-set signature.
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    std::vector<std::string> group_order;
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::string key;
        for (auto a : m.records()[i].archives) key += std::to_string(a) + ",";
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) group_order.push_back(key);
        it->second.push_back(i);
    }

    std::vector<int> assignment(m.size(), 0);
    std::mt19937_64 rng(seed);
    const double fr[3] = {f.train, f.calibrate, f.test};
    for (const auto& key : group_order) {
        auto& idxs = groups[key];
        std::shuffle(idxs.begin(), idxs.end(), rng);
        const std::size_t n = idxs.size();
        // Largest-remainder apportionment of n records across the 3 splits.
        std::size_t take[3];
        double rem[3];
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            double exact = fr[s] * static_cast<double>(n);
            take[s] = static_cast<std::size_t>(exact);
            rem[s] = exact - static_cast<double>(take[s]);
            assigned += take[s];
        }
        while (assigned < n) {
            int best = 0;
            for (int s = 1; s < 3; ++s)
                if (rem[s] > rem[best]) best = s;
            ++take[best];
            rem[best] = -1;
            ++assigned;
        }
        std::size_t cursor = 0;
        for (int s = 0; s < 3; ++s)
            for (std::size_t j = 0; j < take[s]; ++j)
                assignment[idxs[cursor++]] = s;
    }

    std::vector<HoldingsRecord> parts[3];
    for (std::size_t i = 0; i < m.size(); ++i)
        parts[assignment[i]].push_back(m.records()[i]);
    return SplitResult{LabelMatrix(m.roster_ptr(), std::move(parts[0])),
                       LabelMatrix(m.roster_ptr(), std::move(parts[1])),
                       LabelMatrix(m.roster_ptr(), std::move(parts[2]))};
}

double uri_overlap_fraction(const LabelMatrix& a, const LabelMatrix& b) {
    if (b.size() == 0) return 0.0;
    std::unordered_set<std::string> set_a;
    set_a.reserve(a.size());
    for (const auto& r : a.records()) set_a.insert(r.uri);
    std::size_t hits = 0;
    for (const auto& r : b.records())
        if (set_a.count(r.uri)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(b.size());
}

} // namespace memrouter
