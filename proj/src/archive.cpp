#include "memrouter/archive.hpp"

#include <fstream>

#include <json.hpp>

#include "memrouter/errors.hpp"

namespace memrouter {

using nlohmann::json;

std::string to_string(Compliance c) {
    return c == Compliance::native ? "native" : "by_proxy";
}

Compliance compliance_from_string(const std::string& s) {
    if (s == "native") return Compliance::native;
    if (s == "by_proxy" || s == "by proxy") return Compliance::by_proxy;
    throw DataError("unknown compliance value: " + s);
}

Roster::Roster(std::vector<ArchiveInfo> archives) : archives_(std::move(archives)) {
    int always = 0;
    for (std::uint32_t i = 0; i < archives_.size(); ++i) {
        const auto& a = archives_[i];
        if (a.id.empty()) throw DataError("archive id must be nonempty");
        if (!by_id_.emplace(a.id, i).second)
            throw DataError("duplicate archive id in roster: " + a.id);
        if (a.always_poll) {
            always_poll_ = i;
            ++always;
        }
    }
    if (always != 1)
        throw DataError("roster must flag exactly one always_poll archive, found " +
                        std::to_string(always));
}

std::optional<std::uint32_t> Roster::index_of(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t Roster::require(const std::string& id) const {
    auto idx = index_of(id);
    if (!idx) throw DataError("unknown archive id: " + id);
    return *idx;
}

std::vector<std::uint32_t> Roster::scope(bool compliant_only) const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 0; i < archives_.size(); ++i) {
        const auto& a = archives_[i];
        if (!a.included) continue;
        if (compliant_only && a.compliance != Compliance::native) continue;
        out.push_back(i);
    }
    return out;
}

std::string Roster::to_json_string() const {
    json arr = json::array();
    for (const auto& a : archives_) {
        arr.push_back({{"id", a.id},
                       {"compliance", to_string(a.compliance)},
                       {"included", a.included},
                       {"always_poll", a.always_poll}});
    }
    return json{{"archives", arr}}.dump(2) + "\n";
}

Roster Roster::from_json_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("roster json parse error: ") + e.what());
    }
    std::vector<ArchiveInfo> archives;
    for (const auto& item : doc.at("archives")) {
        ArchiveInfo a;
        a.id = item.at("id").get<std::string>();
        a.compliance = compliance_from_string(item.at("compliance").get<std::string>());
        a.included = item.value("included", true);
        a.always_poll = item.value("always_poll", false);
        archives.push_back(std::move(a));
    }
    return Roster(std::move(archives));
}

Roster Roster::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open roster file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_string(text);
}

void Roster::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write roster file: " + path);
    out << to_json_string();
}

} // namespace memrouter
