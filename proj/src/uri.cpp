#include "memrouter/uri.hpp"

#include <algorithm>
#include <cctype>

#include "memrouter/errors.hpp"

namespace memrouter {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

struct SplitUri {
    std::string scheme;
    std::string authority;  // userinfo@host:port
    std::string path;
    std::string query;
};

SplitUri split_absolute(std::string_view uri) {
    auto colon = uri.find("://");
    if (colon == std::string_view::npos || colon == 0)
        throw UsageError("not an absolute URI: " + std::string(uri));
    SplitUri s;
    s.scheme = lower(uri.substr(0, colon));
    std::string_view rest = uri.substr(colon + 3);

    auto frag = rest.find('#');
    if (frag != std::string_view::npos) rest = rest.substr(0, frag);

    auto auth_end = rest.find_first_of("/?");
    s.authority = std::string(rest.substr(0, auth_end));
    if (s.authority.empty())
        throw UsageError("URI has no host: " + std::string(uri));
    if (auth_end == std::string_view::npos) return s;

    std::string_view tail = rest.substr(auth_end);
    auto q = tail.find('?');
    if (q == std::string_view::npos) {
        s.path = std::string(tail);
    } else {
        s.path = std::string(tail.substr(0, q));
        s.query = std::string(tail.substr(q + 1));
    }
    return s;
}

} // namespace

std::string normalize_uri(std::string_view uri) {
    SplitUri s = split_absolute(uri);

    // Only the host part of the authority is case-insensitive.
    std::string userinfo;
    std::string hostport = s.authority;
    if (auto at = hostport.rfind('@'); at != std::string::npos) {
        userinfo = hostport.substr(0, at + 1);
        hostport = hostport.substr(at + 1);
    }
    std::string host = hostport;
    std::string port;
    if (auto c = hostport.rfind(':'); c != std::string::npos &&
        hostport.find(']') == std::string::npos) {  // no IPv6 literal handling needed
        host = hostport.substr(0, c);
        port = hostport.substr(c + 1);
    }
    host = lower(host);
    if (host.empty()) throw UsageError("URI has no host: " + std::string(uri));

    bool default_port = (s.scheme == "http" && port == "80") ||
                        (s.scheme == "https" && port == "443");
    std::string out = s.scheme + "://" + userinfo + host;
    if (!port.empty() && !default_port) out += ":" + port;
    out += s.path;
    if (!s.query.empty()) out += "?" + s.query;
    return out;
}

UriParts decompose(std::string_view uri) {
    UriParts p;
    p.whole = normalize_uri(uri);
    SplitUri s = split_absolute(p.whole);
    std::string hostport = s.authority;
    if (auto at = hostport.rfind('@'); at != std::string::npos)
        hostport = hostport.substr(at + 1);
    if (auto c = hostport.rfind(':'); c != std::string::npos)
        hostport = hostport.substr(0, c);
    p.host = hostport;
    p.path = s.path;
    p.query = s.query;
    return p;
}

} // namespace memrouter
