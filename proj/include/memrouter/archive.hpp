#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace memrouter {

enum class Compliance { native, by_proxy };

std::string to_string(Compliance c);
Compliance compliance_from_string(const std::string& s);

struct ArchiveInfo {
    std::string id;        // short lowercase ascii, e.g. "archiveit"
    Compliance compliance = Compliance::native;
    bool included = true;  // participates in experiments / routing scopes
    bool always_poll = false;
};

/// The set of archives an aggregator covers. Immutable after construction.
/// Exactly one archive must be flagged always_poll (the dominant archive).
class Roster {
public:
    explicit Roster(std::vector<ArchiveInfo> archives);

    static Roster load(const std::string& path);
    void save(const std::string& path) const;
    std::string to_json_string() const;
    static Roster from_json_string(const std::string& text);

    std::size_t size() const { return archives_.size(); }
    const ArchiveInfo& at(std::uint32_t idx) const { return archives_.at(idx); }
    const std::vector<ArchiveInfo>& archives() const { return archives_; }

    std::optional<std::uint32_t> index_of(const std::string& id) const;
    std::uint32_t require(const std::string& id) const;
    std::uint32_t always_poll_index() const { return always_poll_; }

    /// Included archives, optionally restricted to natively compliant ones.
    std::vector<std::uint32_t> scope(bool compliant_only) const;

private:
    std::vector<ArchiveInfo> archives_;
    std::unordered_map<std::string, std::uint32_t> by_id_;
    std::uint32_t always_poll_ = 0;
};

} // namespace memrouter
