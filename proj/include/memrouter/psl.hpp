#pragma once

#include <string>
#include <string_view>
#include <unordered_map>

namespace memrouter {

/// Public Suffix List rules in the publicsuffix.org dat format:
/// one rule per line, `//` comments, `*.` wildcard labels, `!` exceptions.
///
/// suffix_of() returns the concrete labels of the prevailing rule: for a
/// normal rule the rule itself, for a wildcard rule its literal tail
/// ("*.ck" yields "ck"), for an exception rule the rule minus its first
/// label ("!www.ck" yields "ck"). Hosts no rule matches yield their TLD.
class PslRules {
public:
    static PslRules parse(std::string_view text);
    static PslRules load(const std::string& path);

    std::string suffix_of(std::string_view host) const;

    std::size_t rule_count() const { return rules_.size(); }

private:
    enum class Kind { normal, wildcard, exception };
    // keyed by the rule's concrete labels (wildcard/exception markers stripped)
    std::unordered_map<std::string, Kind> rules_;
};

} // namespace memrouter
