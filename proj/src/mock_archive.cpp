#include "memrouter/mock_archive.hpp"

#include <chrono>

#include <httplib.h>

namespace memrouter {

MockArchive::MockArchive() : server_(std::make_unique<httplib::Server>()) {
    server_->Get("/timemap/link/(.+)", [this](const httplib::Request& req,
                                              httplib::Response& res) {
        // target carries the raw path+query, so request URIs with query
        // strings survive untouched.
        static constexpr std::string_view prefix = "/timemap/link/";
        std::string uri = req.target.substr(prefix.size());
        ++total_requests_;
        {
            std::lock_guard lock(mu_);
            ++counters_[uri];
        }
        if (latency_ms_ > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_.load()));
        if (fail_next_ > 0) {
            --fail_next_;
            res.status = 500;
            return;
        }
        std::lock_guard lock(mu_);
        auto it = bodies_.find(uri);
        if (it == bodies_.end()) {
            res.status = 404;
            return;
        }
        res.set_content(it->second, "application/link-format");
    });

    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

MockArchive::~MockArchive() {
    server_->stop();
    if (thread_.joinable()) thread_.join();
}

void MockArchive::set_timemap(const std::string& uri, TimeMap map) {
    std::lock_guard lock(mu_);
    bodies_[uri] = to_link_format(map);
}

std::string MockArchive::base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
}

std::string MockArchive::timemap_template() const {
    return base_url() + "/timemap/link/{uri}";
}

std::uint64_t MockArchive::requests_for(const std::string& uri) const {
    std::lock_guard lock(mu_);
    auto it = counters_.find(uri);
    return it == counters_.end() ? 0 : it->second;
}

} // namespace memrouter
