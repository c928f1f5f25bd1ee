#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>

#include "memrouter/timemap.hpp"

namespace httplib {
class Server;
}

namespace memrouter {

/// Hermetic stand-in for a web archive: serves configured TimeMaps over
/// HTTP with injectable latency and failures, and counts every request so
/// tests can prove cache hits issue no archive traffic.
class MockArchive {
public:
    MockArchive();
    ~MockArchive();

    MockArchive(const MockArchive&) = delete;
    MockArchive& operator=(const MockArchive&) = delete;

    void set_timemap(const std::string& uri, TimeMap map);
    void set_latency_ms(int ms) { latency_ms_ = ms; }
    /// Next n requests answer 500 before any lookup.
    void fail_next(int n) { fail_next_ = n; }

    int port() const { return port_; }
    std::string base_url() const;
    std::string timemap_template() const;  // with {uri} slot

    std::uint64_t total_requests() const { return total_requests_; }
    std::uint64_t requests_for(const std::string& uri) const;

private:
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;

    mutable std::mutex mu_;
    std::unordered_map<std::string, std::string> bodies_;      // uri -> link format
    std::unordered_map<std::string, std::uint64_t> counters_;
    std::atomic<int> latency_ms_{0};
    std::atomic<int> fail_next_{0};
    std::atomic<std::uint64_t> total_requests_{0};
};

} // namespace memrouter
