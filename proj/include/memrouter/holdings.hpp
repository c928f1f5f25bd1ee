#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "memrouter/archive.hpp"

namespace memrouter {

/// One cached URI-R and the set of archives known to hold Mementos for it.
/// Archives are stored as sorted roster indices; the set may be empty.
struct HoldingsRecord {
    std::string uri;
    std::vector<std::uint32_t> archives;

    bool holds(std::uint32_t archive) const;
};

/// Ordered, immutable collection of holdings records sharing one roster.
class LabelMatrix {
public:
    LabelMatrix(std::shared_ptr<const Roster> roster,
                std::vector<HoldingsRecord> records);

    const Roster& roster() const { return *roster_; }
    std::shared_ptr<const Roster> roster_ptr() const { return roster_; }
    const std::vector<HoldingsRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    /// Number of records holding each archive, indexed by roster position.
    const std::vector<std::size_t>& positive_counts() const { return positives_; }

private:
    std::shared_ptr<const Roster> roster_;
    std::vector<HoldingsRecord> records_;
    std::vector<std::size_t> positives_;
};

/// Loads the tab-separated cache dump: `URI<TAB>comma-separated-archive-ids`,
/// `#` comment lines ignored, duplicate URIs union their archive sets.
/// Malformed lines and unknown archive ids abort with the line number.
LabelMatrix load_holdings(const std::string& path,
                          std::shared_ptr<const Roster> roster);

/// Writes the same dump format; load_holdings(save_holdings(m)) == m.
void save_holdings(const LabelMatrix& m, const std::string& path);

/// k -> (record count, percent of records) over |archives| per record.
std::map<std::size_t, std::pair<std::size_t, double>>
histogram_by_cardinality(const LabelMatrix& m);

struct SplitFractions {
    double train;
    double calibrate;
    double test;
};

struct SplitResult {
    LabelMatrix train;
    LabelMatrix calibrate;
    LabelMatrix test;
};

/// Deterministic stratified split: records are grouped by their exact
/// archive set, shuffled within each group under the seed, and apportioned
/// by largest remainder, so per-archive positive rates track the global
/// rates in every split. Throws UsageError if fractions do not sum to 1.
SplitResult split(const LabelMatrix& m, SplitFractions fractions,
                  std::uint64_t seed);

/// Fraction of `b` URIs that also occur in `a` (after normalization both
/// sides already carry). Used to police training/calibration disjointness.
double uri_overlap_fraction(const LabelMatrix& a, const LabelMatrix& b);

} // namespace memrouter
