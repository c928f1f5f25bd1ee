#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "memrouter/registry.hpp"
#include "memrouter/router.hpp"
#include "memrouter/timemap.hpp"

namespace httplib {
class Server;
}

namespace memrouter {

/// Where to reach one archive. Templates carry exactly one `{uri}` slot;
/// the request URI is substituted verbatim (aggregator-style path suffix).
struct ArchiveEndpoint {
    std::uint32_t archive = 0;
    std::string timegate_template;
    std::string timemap_template;
    int timeout_ms = 10000;
    int max_in_flight = 8;
};

enum class FetchStatus { hit, miss, timeout, failed, not_polled, cached };
std::string to_string(FetchStatus s);

struct ArchiveProvenance {
    std::uint32_t archive = 0;
    FetchStatus status = FetchStatus::not_polled;
    std::size_t mementos = 0;
    double elapsed_ms = 0.0;
};

/// Every in-scope archive appears exactly once with a terminal status, and
/// the registry version identifies the model snapshot the decision used.
struct Provenance {
    std::string registry_version;
    std::string strategy;
    bool cache_hit = false;
    std::vector<ArchiveProvenance> archives;
};

struct TimeMapResult {
    int status = 200;  // HTTP-style status class
    TimeMap map;
    Provenance provenance;
    std::string error;
};

struct TimeGateResult {
    int status = 200;
    Memento best{};
    std::vector<Memento> candidates;  // best per archive-merged map
    Provenance provenance;
    std::string error;
};

struct ServiceConfig {
    std::vector<ArchiveEndpoint> endpoints;
    RoutingStrategy timemap_strategy = RoutingStrategy::brute_force_all();
    RoutingStrategy timegate_strategy{
        StrategyKind::brute_force_compliant, 0.6, StrategyScope::compliant_only};
    std::int64_t cache_staleness_s = 7 * 86400;
    std::string host = "127.0.0.1";
    int port = 8080;

    static ServiceConfig from_json_string(const std::string& text,
                                          const Roster& roster);
    static ServiceConfig load(const std::string& path, const Roster& roster);
};

/// The aggregator: routes, fans out to archive TimeMap endpoints
/// concurrently, merges responses, caches them, and answers datetime
/// negotiation. The registry swaps atomically; every request works against
/// one consistent snapshot.
class AggregatorService {
public:
    AggregatorService(std::shared_ptr<const ModelRegistry> registry,
                      ServiceConfig config);
    ~AggregatorService();

    TimeMapResult get_timemap(const std::string& uri);
    TimeMapResult get_timemap(const std::string& uri, const RoutingStrategy& strategy);

    /// Missing accept_datetime means "now". Tie on |distance| prefers the
    /// earlier memento.
    TimeGateResult get_timegate(const std::string& uri,
                                std::optional<std::time_t> accept_datetime);
    TimeGateResult get_timegate(const std::string& uri,
                                std::optional<std::time_t> accept_datetime,
                                const RoutingStrategy& strategy);

    void swap_registry(std::shared_ptr<const ModelRegistry> next);
    std::shared_ptr<const ModelRegistry> registry_snapshot() const;

    void clear_cache();
    std::size_t cache_size() const;

    /// Blocking HTTP server exposing /timemap/link/{uri}, /timegate/{uri},
    /// /advice?uri=&tpr= and /health. start_async returns once listening.
    void start_async();
    void stop();
    int port() const { return config_.port; }

private:
    struct CacheEntry {
        TimeMap map;
        Provenance provenance;
        std::chrono::steady_clock::time_point fetched_at;
    };

    TimeMapResult fetch_and_merge(const std::string& uri,
                                  const RoutingStrategy& strategy,
                                  const std::shared_ptr<const ModelRegistry>& reg);

    // Caps concurrent outbound requests per archive at max_in_flight.
    struct Gate {
        std::mutex mu;
        std::condition_variable cv;
        int in_flight = 0;
    };

    ServiceConfig config_;
    std::unordered_map<std::uint32_t, ArchiveEndpoint> endpoints_;
    std::unordered_map<std::uint32_t, std::unique_ptr<Gate>> gates_;

    mutable std::mutex registry_mu_;
    std::shared_ptr<const ModelRegistry> registry_;

    mutable std::shared_mutex cache_mu_;
    std::unordered_map<std::string, CacheEntry> cache_;

    std::unique_ptr<httplib::Server> server_;
    std::unique_ptr<std::thread> server_thread_;
};

/// Picks the memento minimizing |datetime - target|; ties go to the earlier
/// memento. Returns nullopt for an empty list.
std::optional<Memento> closest_memento(const std::vector<Memento>& mementos,
                                       std::time_t target);

} // namespace memrouter
