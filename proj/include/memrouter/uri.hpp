#pragma once

#include <string>
#include <string_view>

namespace memrouter {

/// Decomposed absolute http(s) URI. `whole` is the normalized form the
/// other components were cut from.
struct UriParts {
    std::string whole;
    std::string host;
    std::string path;   // begins with "/" or is empty
    std::string query;  // without the leading "?", empty if absent
};

/// Canonical form used for deduplication and feature extraction:
/// lowercased scheme and host, default port stripped, fragment removed.
/// Throws UsageError for relative URIs or URIs without a host.
std::string normalize_uri(std::string_view uri);

/// Normalizes and splits. Throws UsageError on relative URI / missing host.
UriParts decompose(std::string_view uri);

} // namespace memrouter
