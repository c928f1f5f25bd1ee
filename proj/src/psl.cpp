#include "memrouter/psl.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <vector>

#include "memrouter/errors.hpp"

namespace memrouter {

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

PslRules PslRules::parse(std::string_view text) {
    PslRules out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        std::string_view raw = text.substr(
            start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

        std::string line = trim(raw);
        if (line.empty() || line.rfind("//", 0) == 0) continue;
        // Rules end at the first whitespace per the dat format.
        line = lower(line.substr(0, line.find(' ')));

        Kind kind = Kind::normal;
        if (line[0] == '!') {
            kind = Kind::exception;
            line = line.substr(1);
        } else if (line.rfind("*.", 0) == 0) {
            kind = Kind::wildcard;
            line = line.substr(2);
        }
        if (line.empty()) throw DataError("empty PSL rule");
        out.rules_[line] = kind;
    }
    return out;
}

PslRules PslRules::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open PSL file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return parse(text);
}

std::string PslRules::suffix_of(std::string_view host) const {
    if (host.empty()) throw UsageError("psl_domain of empty host");
    std::string h = lower(std::string(host));
    if (!h.empty() && h.back() == '.') h.pop_back();

    // Label start offsets, leftmost first.
    std::vector<std::size_t> starts{0};
    for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i] == '.') starts.push_back(i + 1);

    // Longest candidate suffix first; exceptions checked before other kinds.
    for (std::size_t s : starts) {
        std::string cand = h.substr(s);
        auto it = rules_.find(cand);
        if (it != rules_.end() && it->second == Kind::exception) {
            auto dot = cand.find('.');
            return dot == std::string::npos ? cand : cand.substr(dot + 1);
        }
        if (it != rules_.end() && it->second == Kind::normal) return cand;
        auto dot = cand.find('.');
        if (dot != std::string::npos) {
            std::string tail = cand.substr(dot + 1);
            auto wit = rules_.find(tail);
            if (wit != rules_.end() && wit->second == Kind::wildcard) return tail;
        }
    }
    // Fall back to the TLD.
    auto dot = h.rfind('.');
    return dot == std::string::npos ? h : h.substr(dot + 1);
}

} // namespace memrouter
