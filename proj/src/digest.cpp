#include "memrouter/digest.hpp"

#include <fstream>
#include <sstream>

#include "memrouter/errors.hpp"

namespace memrouter {

std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read file for digest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return content_digest(buf.str());
}

} // namespace memrouter
