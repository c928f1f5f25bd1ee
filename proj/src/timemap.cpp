#include "memrouter/timemap.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "memrouter/errors.hpp"

namespace memrouter {

namespace {

constexpr std::array<const char*, 7> kWeekdays = {"Sun", "Mon", "Tue", "Wed",
                                                  "Thu", "Fri", "Sat"};
constexpr std::array<const char*, 12> kMonths = {"Jan", "Feb", "Mar", "Apr",
                                                 "May", "Jun", "Jul", "Aug",
                                                 "Sep", "Oct", "Nov", "Dec"};

int month_index(std::string_view m) {
    for (int i = 0; i < 12; ++i)
        if (m == kMonths[i]) return i;
    return -1;
}

bool is_digits(std::string_view s) {
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return !s.empty();
}

} // namespace

std::time_t parse_http_date(std::string_view s) {
    // Fixed layout: "Sun, 06 Nov 1994 08:49:37 GMT" (29 chars).
    if (s.size() != 29)
        throw DataError("HTTP-date must be RFC1123, got: " + std::string(s));
    auto bad = [&]() -> std::time_t {
        throw DataError("malformed RFC1123 HTTP-date: " + std::string(s));
    };
    bool wk_ok = false;
    for (const char* w : kWeekdays)
        if (s.substr(0, 3) == w) wk_ok = true;
    if (!wk_ok) return bad();
    if (s.substr(3, 2) != ", ") return bad();
    if (!is_digits(s.substr(5, 2)) || s[7] != ' ') return bad();
    int mon = month_index(s.substr(8, 3));
    if (mon < 0 || s[11] != ' ') return bad();
    if (!is_digits(s.substr(12, 4)) || s[16] != ' ') return bad();
    if (!is_digits(s.substr(17, 2)) || s[19] != ':') return bad();
    if (!is_digits(s.substr(20, 2)) || s[22] != ':') return bad();
    if (!is_digits(s.substr(23, 2))) return bad();
    if (s.substr(25) != " GMT") return bad();

    std::tm tm{};
    tm.tm_mday = std::stoi(std::string(s.substr(5, 2)));
    tm.tm_mon = mon;
    tm.tm_year = std::stoi(std::string(s.substr(12, 4))) - 1900;
    tm.tm_hour = std::stoi(std::string(s.substr(17, 2)));
    tm.tm_min = std::stoi(std::string(s.substr(20, 2)));
    tm.tm_sec = std::stoi(std::string(s.substr(23, 2)));
    std::time_t t = timegm(&tm);
    if (t == -1) return bad();
    // Round-trip check rejects out-of-range fields and wrong weekday names.
    if (format_http_date(t) != s) return bad();
    return t;
}

std::string format_http_date(std::time_t t) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s, %02d %s %04d %02d:%02d:%02d GMT",
                  kWeekdays[tm.tm_wday], tm.tm_mday, kMonths[tm.tm_mon],
                  tm.tm_year + 1900, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

namespace {

// Minimal link-format scanner: <uri>; k="v"; k=token, <uri>...
struct LinkScanner {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() &&
               std::isspace(static_cast<unsigned char>(text[pos])))
            ++pos;
    }
    bool done() {
        skip_ws();
        return pos >= text.size();
    }
    char peek() { return text[pos]; }
    void expect(char c) {
        skip_ws();
        if (pos >= text.size() || text[pos] != c)
            throw DataError(std::string("link-format: expected '") + c +
                            "' at offset " + std::to_string(pos));
        ++pos;
    }

    std::string read_uri() {
        expect('<');
        auto end = text.find('>', pos);
        if (end == std::string_view::npos)
            throw DataError("link-format: unterminated <uri>");
        std::string uri(text.substr(pos, end - pos));
        pos = end + 1;
        return uri;
    }

    std::pair<std::string, std::string> read_param() {
        skip_ws();
        std::size_t start = pos;
        while (pos < text.size() && text[pos] != '=' && text[pos] != ';' &&
               text[pos] != ',')
            ++pos;
        std::string name(text.substr(start, pos - start));
        while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back())))
            name.pop_back();
        if (name.empty()) throw DataError("link-format: empty parameter name");
        if (pos >= text.size() || text[pos] != '=') return {name, ""};
        ++pos;
        skip_ws();
        if (pos < text.size() && text[pos] == '"') {
            ++pos;
            std::string value;
            while (pos < text.size() && text[pos] != '"') {
                if (text[pos] == '\\' && pos + 1 < text.size()) ++pos;
                value += text[pos++];
            }
            if (pos >= text.size())
                throw DataError("link-format: unterminated quoted string");
            ++pos;
            return {name, value};
        }
        start = pos;
        while (pos < text.size() && text[pos] != ';' && text[pos] != ',')
            ++pos;
        std::string value(text.substr(start, pos - start));
        while (!value.empty() && std::isspace(static_cast<unsigned char>(value.back())))
            value.pop_back();
        return {name, value};
    }
};

bool rel_contains(const std::string& rel, std::string_view needle) {
    std::istringstream in(rel);
    std::string word;
    while (in >> word)
        if (word == needle) return true;
    return false;
}

} // namespace

TimeMap parse_timemap(std::string_view body) {
    TimeMap tm;
    bool have_original = false;
    LinkScanner sc{body};
    while (!sc.done()) {
        std::string uri = sc.read_uri();
        std::string rel, datetime;
        while (true) {
            sc.skip_ws();
            if (sc.pos >= sc.text.size() || sc.peek() != ';') break;
            ++sc.pos;
            auto [name, value] = sc.read_param();
            if (name == "rel") rel = value;
            else if (name == "datetime") datetime = value;
        }
        if (rel_contains(rel, "original")) {
            tm.original = uri;
            have_original = true;
        }
        if (rel_contains(rel, "self")) tm.self_uri = uri;
        if (rel_contains(rel, "memento")) {
            if (datetime.empty())
                throw DataError("memento link without datetime: " + uri);
            tm.mementos.push_back({uri, parse_http_date(datetime)});
        }
        sc.skip_ws();
        if (sc.pos < sc.text.size()) {
            if (sc.peek() != ',')
                throw DataError("link-format: expected ',' between links at offset " +
                                std::to_string(sc.pos));
            ++sc.pos;
        }
    }
    if (!have_original)
        throw DataError("TimeMap has no link with rel=\"original\"");
    return tm;
}

std::string to_link_format(const TimeMap& tm) {
    std::ostringstream out;
    out << "<" << tm.original << ">; rel=\"original\"";
    if (!tm.self_uri.empty())
        out << ",\n<" << tm.self_uri
            << ">; rel=\"self\"; type=\"application/link-format\"";
    for (std::size_t i = 0; i < tm.mementos.size(); ++i) {
        const auto& m = tm.mementos[i];
        const char* rel = "memento";
        if (tm.mementos.size() == 1) rel = "first last memento";
        else if (i == 0) rel = "first memento";
        else if (i + 1 == tm.mementos.size()) rel = "last memento";
        out << ",\n<" << m.uri << ">; rel=\"" << rel << "\"; datetime=\""
            << format_http_date(m.datetime) << "\"";
    }
    out << "\n";
    return out.str();
}

} // namespace memrouter
