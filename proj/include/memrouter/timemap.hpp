#pragma once

#include <ctime>
#include <string>
#include <string_view>
#include <vector>

namespace memrouter {

struct Memento {
    std::string uri;      // URI-M
    std::time_t datetime; // archival datetime, UTC

    friend bool operator==(const Memento&, const Memento&) = default;
};

struct TimeMap {
    std::string original;          // URI-R
    std::string self_uri;          // URI-T, empty when the document has no self link
    std::vector<Memento> mementos; // document order when parsed
};

/// Strict RFC1123 HTTP-date, e.g. "Thu, 01 Jan 2015 00:00:00 GMT".
/// Other RFC7231 date forms are rejected. Throws DataError.
std::time_t parse_http_date(std::string_view s);
std::string format_http_date(std::time_t t);

/// Parses RFC7089 application/link-format TimeMap text. Requires an
/// `original` relation; keeps every link whose rel contains "memento".
/// Throws DataError on syntax errors or missing original.
TimeMap parse_timemap(std::string_view body);

/// Serializes a TimeMap back to application/link-format.
std::string to_link_format(const TimeMap& tm);

} // namespace memrouter
