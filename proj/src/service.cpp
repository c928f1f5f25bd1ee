#include "memrouter/service.hpp"

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <future>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "memrouter/errors.hpp"
#include "memrouter/uri.hpp"

namespace memrouter {

using nlohmann::json;

std::string to_string(FetchStatus s) {
    switch (s) {
        case FetchStatus::hit: return "hit";
        case FetchStatus::miss: return "miss";
        case FetchStatus::timeout: return "timeout";
        case FetchStatus::failed: return "failed";
        case FetchStatus::not_polled: return "not_polled";
        case FetchStatus::cached: return "cached";
    }
    return "?";
}

std::optional<Memento> closest_memento(const std::vector<Memento>& mementos,
                                       std::time_t target) {
    const Memento* best = nullptr;
    for (const auto& m : mementos) {
        if (!best) {
            best = &m;
            continue;
        }
        auto dist = [target](const Memento& x) {
            return x.datetime >= target ? x.datetime - target : target - x.datetime;
        };
        std::time_t dm = dist(m), db = dist(*best);
        if (dm < db || (dm == db && m.datetime < best->datetime)) best = &m;
    }
    if (!best) return std::nullopt;
    return *best;
}

namespace {

RoutingStrategy strategy_from_json(const json& doc) {
    std::string kind = doc.at("kind").get<std::string>();
    if (kind == "brute_force_all") return RoutingStrategy::brute_force_all();
    if (kind == "brute_force_compliant") return RoutingStrategy::brute_force_compliant();
    if (kind == "classifier") {
        StrategyScope scope = doc.value("scope", std::string("all")) == "compliant_only"
                                  ? StrategyScope::compliant_only
                                  : StrategyScope::all;
        return RoutingStrategy::classifier(doc.at("target_tpr").get<double>(), scope);
    }
    throw DataError("unknown routing strategy kind: " + kind);
}

void validate_template(const std::string& tmpl, const std::string& what) {
    auto first = tmpl.find("{uri}");
    if (first == std::string::npos || tmpl.find("{uri}", first + 1) != std::string::npos)
        throw DataError(what + " template needs exactly one {uri} slot: " + tmpl);
}

// (base, path) split of an expanded endpoint URL.
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme = url.find("://");
    if (scheme == std::string::npos) throw DataError("endpoint URL lacks scheme: " + url);
    auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

std::string expand(const std::string& tmpl, const std::string& uri) {
    std::string out = tmpl;
    out.replace(out.find("{uri}"), 5, uri);
    return out;
}

struct FetchOutcome {
    FetchStatus status = FetchStatus::failed;
    TimeMap map;
    double elapsed_ms = 0.0;
};

FetchOutcome fetch_timemap(const ArchiveEndpoint& ep, const std::string& uri) {
    FetchOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    auto [base, path] = split_url(expand(ep.timemap_template, uri));
    httplib::Client client(base);
    client.set_connection_timeout(0, ep.timeout_ms * 1000);
    client.set_read_timeout(ep.timeout_ms / 1000, (ep.timeout_ms % 1000) * 1000);
    auto res = client.Get(path);
    out.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    if (!res) {
        out.status = (res.error() == httplib::Error::ConnectionTimeout ||
                      res.error() == httplib::Error::Read)
                         ? FetchStatus::timeout
                         : FetchStatus::failed;
        return out;
    }
    if (res->status == 200) {
        try {
            out.map = parse_timemap(res->body);
            out.status = FetchStatus::hit;
        } catch (const std::exception&) {
            out.status = FetchStatus::failed;
        }
    } else if (res->status >= 500) {
        out.status = FetchStatus::failed;
    } else {
        out.status = FetchStatus::miss;
    }
    return out;
}

} // namespace

ServiceConfig ServiceConfig::from_json_string(const std::string& text,
                                              const Roster& roster) {
    json doc = json::parse(text);
    ServiceConfig cfg;
    for (const auto& e : doc.at("endpoints")) {
        ArchiveEndpoint ep;
        ep.archive = roster.require(e.at("archive").get<std::string>());
        ep.timegate_template = e.value("timegate_template", std::string());
        ep.timemap_template = e.at("timemap_template").get<std::string>();
        ep.timeout_ms = e.value("timeout_ms", 10000);
        ep.max_in_flight = e.value("max_in_flight", 8);
        cfg.endpoints.push_back(std::move(ep));
    }
    if (doc.contains("timemap_strategy"))
        cfg.timemap_strategy = strategy_from_json(doc.at("timemap_strategy"));
    if (doc.contains("timegate_strategy"))
        cfg.timegate_strategy = strategy_from_json(doc.at("timegate_strategy"));
    cfg.cache_staleness_s = doc.value("cache_staleness_s", cfg.cache_staleness_s);
    cfg.host = doc.value("host", cfg.host);
    cfg.port = doc.value("port", cfg.port);
    return cfg;
}

ServiceConfig ServiceConfig::load(const std::string& path, const Roster& roster) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read service config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_string(buf.str(), roster);
}

AggregatorService::AggregatorService(std::shared_ptr<const ModelRegistry> registry,
                                     ServiceConfig config)
    : config_(std::move(config)), registry_(std::move(registry)) {
    if (!registry_) throw UsageError("aggregator needs a model registry");
    for (const auto& ep : config_.endpoints) {
        if (ep.timeout_ms <= 0) throw DataError("endpoint timeout must be positive");
        validate_template(ep.timemap_template, "timemap");
        if (!ep.timegate_template.empty())
            validate_template(ep.timegate_template, "timegate");
        endpoints_[ep.archive] = ep;
        gates_[ep.archive] = std::make_unique<Gate>();
    }
}

AggregatorService::~AggregatorService() { stop(); }

std::shared_ptr<const ModelRegistry> AggregatorService::registry_snapshot() const {
    std::lock_guard lock(registry_mu_);
    return registry_;
}

void AggregatorService::swap_registry(std::shared_ptr<const ModelRegistry> next) {
    if (!next) throw UsageError("cannot swap in an empty registry");
    std::lock_guard lock(registry_mu_);
    registry_ = std::move(next);
}

void AggregatorService::clear_cache() {
    std::unique_lock lock(cache_mu_);
    cache_.clear();
}

std::size_t AggregatorService::cache_size() const {
    std::shared_lock lock(cache_mu_);
    return cache_.size();
}

TimeMapResult AggregatorService::fetch_and_merge(
    const std::string& uri, const RoutingStrategy& strategy,
    const std::shared_ptr<const ModelRegistry>& reg) {
    TimeMapResult result;
    result.provenance.registry_version = reg->version();
    result.provenance.strategy = strategy.name();

    RoutingDecision decision = route(uri, strategy, *reg);

    bool compliant_only = strategy.kind == StrategyKind::brute_force_compliant ||
                          (strategy.kind == StrategyKind::classifier &&
                           strategy.scope == StrategyScope::compliant_only);
    std::vector<std::uint32_t> in_scope = reg->roster().scope(compliant_only);

    // Concurrent fan-out: one task per polled archive, each bounded by its
    // own timeout, so the slowest archive (not the sum) sets user latency.
    std::vector<std::pair<std::uint32_t, std::future<FetchOutcome>>> tasks;
    for (std::uint32_t a : decision.polled) {
        auto ep = endpoints_.find(a);
        if (ep == endpoints_.end()) continue;
        Gate* gate = gates_.at(a).get();
        const ArchiveEndpoint endpoint = ep->second;
        tasks.emplace_back(a, std::async(std::launch::async, [gate, endpoint, uri] {
            {
                std::unique_lock lock(gate->mu);
                gate->cv.wait(lock, [&] {
                    return gate->in_flight < endpoint.max_in_flight;
                });
                ++gate->in_flight;
            }
            FetchOutcome out = fetch_timemap(endpoint, uri);
            {
                std::lock_guard lock(gate->mu);
                --gate->in_flight;
            }
            gate->cv.notify_one();
            return out;
        }));
    }

    std::unordered_map<std::uint32_t, FetchOutcome> outcomes;
    for (auto& [a, fut] : tasks) outcomes.emplace(a, fut.get());

    std::size_t polled = 0, succeeded = 0;
    std::vector<Memento> merged;
    for (std::uint32_t a : in_scope) {
        ArchiveProvenance p;
        p.archive = a;
        bool was_polled =
            std::binary_search(decision.polled.begin(), decision.polled.end(), a);
        if (!was_polled) {
            p.status = FetchStatus::not_polled;
        } else if (auto it = outcomes.find(a); it != outcomes.end()) {
            ++polled;
            p.status = it->second.status;
            p.elapsed_ms = it->second.elapsed_ms;
            p.mementos = it->second.map.mementos.size();
            if (p.status == FetchStatus::hit || p.status == FetchStatus::miss) {
                ++succeeded;
                merged.insert(merged.end(), it->second.map.mementos.begin(),
                              it->second.map.mementos.end());
            }
        } else {
            ++polled;
            p.status = FetchStatus::failed;  // no endpoint configured
        }
        result.provenance.archives.push_back(p);
    }

    if (polled > 0 && succeeded == 0) {
        result.status = 502;
        result.error = "all polled archives failed";
        return result;
    }

    std::sort(merged.begin(), merged.end(), [](const Memento& a, const Memento& b) {
        if (a.datetime != b.datetime) return a.datetime < b.datetime;
        return a.uri < b.uri;
    });
    merged.erase(std::unique(merged.begin(), merged.end(),
                             [](const Memento& a, const Memento& b) {
                                 return a.uri == b.uri && a.datetime == b.datetime;
                             }),
                 merged.end());

    result.map.original = uri;
    result.map.mementos = std::move(merged);
    return result;
}

TimeMapResult AggregatorService::get_timemap(const std::string& uri) {
    return get_timemap(uri, config_.timemap_strategy);
}

TimeMapResult AggregatorService::get_timemap(const std::string& uri,
                                             const RoutingStrategy& strategy) {
    std::string normalized;
    try {
        normalized = normalize_uri(uri);
    } catch (const UsageError& e) {
        TimeMapResult bad;
        bad.status = 400;
        bad.error = e.what();
        return bad;
    }

    const std::string cache_key = strategy.name() + " " + normalized;
    {
        std::shared_lock lock(cache_mu_);
        auto it = cache_.find(cache_key);
        if (it != cache_.end()) {
            auto age = std::chrono::steady_clock::now() - it->second.fetched_at;
            if (age < std::chrono::seconds(config_.cache_staleness_s)) {
                TimeMapResult hit;
                hit.map = it->second.map;
                hit.provenance = it->second.provenance;
                hit.provenance.cache_hit = true;
                for (auto& p : hit.provenance.archives) p.status = FetchStatus::cached;
                return hit;
            }
        }
    }

    TimeMapResult fresh;
    try {
        fresh = fetch_and_merge(normalized, strategy, registry_snapshot());
    } catch (const UsageError& e) {
        fresh.status = 400;
        fresh.error = e.what();
        return fresh;
    }
    if (fresh.status == 200) {
        std::unique_lock lock(cache_mu_);
        cache_[cache_key] = {fresh.map, fresh.provenance,
                             std::chrono::steady_clock::now()};
    }
    return fresh;
}

TimeGateResult AggregatorService::get_timegate(
    const std::string& uri, std::optional<std::time_t> accept_datetime) {
    return get_timegate(uri, accept_datetime, config_.timegate_strategy);
}

TimeGateResult AggregatorService::get_timegate(
    const std::string& uri, std::optional<std::time_t> accept_datetime,
    const RoutingStrategy& strategy) {
    TimeGateResult result;
    TimeMapResult tm = get_timemap(uri, strategy);
    result.provenance = tm.provenance;
    if (tm.status != 200) {
        result.status = tm.status;
        result.error = tm.error;
        return result;
    }
    std::time_t target = accept_datetime.value_or(std::time(nullptr));
    auto best = closest_memento(tm.map.mementos, target);
    if (!best) {
        result.status = 404;
        result.error = "no mementos found";
        return result;
    }
    result.best = *best;
    result.candidates = tm.map.mementos;
    return result;
}

void AggregatorService::start_async() {
    if (server_) throw UsageError("service already started");
    server_ = std::make_unique<httplib::Server>();

    server_->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        json doc = {{"status", "ok"},
                    {"registry_version", registry_snapshot()->version()},
                    {"cache_entries", cache_size()}};
        res.set_content(doc.dump(), "application/json");
    });

    server_->Get("/timemap/link/(.+)", [this](const httplib::Request& req,
                                              httplib::Response& res) {
        static constexpr std::string_view prefix = "/timemap/link/";
        std::string uri = req.target.substr(prefix.size());
        TimeMapResult r = get_timemap(uri);
        if (r.status != 200) {
            res.status = r.status;
            res.set_content(r.error, "text/plain");
            return;
        }
        res.set_header("X-Registry-Version", r.provenance.registry_version);
        res.set_content(to_link_format(r.map), "application/link-format");
    });

    server_->Get("/timegate/(.+)", [this](const httplib::Request& req,
                                          httplib::Response& res) {
        static constexpr std::string_view prefix = "/timegate/";
        std::string uri = req.target.substr(prefix.size());
        std::optional<std::time_t> accept;
        if (req.has_header("Accept-Datetime")) {
            try {
                accept = parse_http_date(req.get_header_value("Accept-Datetime"));
            } catch (const std::exception& e) {
                res.status = 400;
                res.set_content(e.what(), "text/plain");
                return;
            }
        }
        TimeGateResult r = get_timegate(uri, accept);
        if (r.status != 200) {
            res.status = r.status;
            res.set_content(r.error, "text/plain");
            return;
        }
        res.status = 302;
        res.set_header("Location", r.best.uri);
        res.set_header("Memento-Datetime", format_http_date(r.best.datetime));
        res.set_header("Vary", "accept-datetime");
        res.set_header("X-Registry-Version", r.provenance.registry_version);
    });

    server_->Get("/advice", [this](const httplib::Request& req,
                                   httplib::Response& res) {
        if (!req.has_param("uri")) {
            res.status = 400;
            res.set_content("missing uri parameter", "text/plain");
            return;
        }
        double tpr = 0.6;
        if (req.has_param("tpr")) {
            try {
                tpr = std::stod(req.get_param_value("tpr"));
            } catch (const std::exception&) {
                res.status = 400;
                res.set_content("bad tpr parameter", "text/plain");
                return;
            }
        }
        auto reg = registry_snapshot();
        json doc;
        try {
            RoutingDecision d = route(req.get_param_value("uri"),
                                      RoutingStrategy::classifier(tpr), *reg);
            doc["uri"] = d.uri;
            doc["registry_version"] = reg->version();
            doc["target_tpr"] = tpr;
            doc["poll"] = json::array();
            for (std::uint32_t a : d.polled)
                doc["poll"].push_back(reg->roster().at(a).id);
            doc["scores"] = json::array();
            for (const auto& s : d.scores)
                doc["scores"].push_back({{"archive", reg->roster().at(s.archive).id},
                                         {"score", s.score},
                                         {"threshold", s.threshold}});
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(e.what(), "text/plain");
            return;
        }
        res.set_content(doc.dump(2), "application/json");
    });

    if (config_.port == 0) {
        config_.port = server_->bind_to_any_port(config_.host);
        server_thread_ = std::make_unique<std::thread>(
            [this] { server_->listen_after_bind(); });
    } else {
        if (!server_->bind_to_port(config_.host, config_.port))
            throw DataError("cannot bind " + config_.host + ":" +
                            std::to_string(config_.port));
        server_thread_ = std::make_unique<std::thread>(
            [this] { server_->listen_after_bind(); });
    }
    server_->wait_until_ready();
}

void AggregatorService::stop() {
    if (server_) server_->stop();
    if (server_thread_ && server_thread_->joinable()) server_thread_->join();
    server_thread_.reset();
    server_.reset();
}

} // namespace memrouter
