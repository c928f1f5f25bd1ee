#include "memrouter/router.hpp"

#include <algorithm>
#include <chrono>

#include "memrouter/errors.hpp"

namespace memrouter {

std::string RoutingStrategy::name() const {
    switch (kind) {
        case StrategyKind::brute_force_all: return "brute_force_all";
        case StrategyKind::brute_force_compliant: return "brute_force_compliant";
        case StrategyKind::classifier:
            return "classifier(tpr=" + std::to_string(target_tpr) + "," +
                   (scope == StrategyScope::all ? "all" : "compliant") + ")";
    }
    return "?";
}

RoutingDecision route(const std::string& uri, const RoutingStrategy& strategy,
                      const ModelRegistry& registry) {
    const auto t0 = std::chrono::steady_clock::now();
    RoutingDecision d;
    d.uri = uri;
    d.strategy = strategy;

    const Roster& roster = registry.roster();
    switch (strategy.kind) {
        case StrategyKind::brute_force_all:
            d.polled = roster.scope(false);
            break;
        case StrategyKind::brute_force_compliant:
            d.polled = roster.scope(true);
            break;
        case StrategyKind::classifier: {
            // One feature extraction, shared by every archive's model.
            FeatureVector v =
                registry.vocabulary().extract_and_vectorize(decompose(uri));
            const bool compliant_only = strategy.scope == StrategyScope::compliant_only;
            for (std::uint32_t a : roster.scope(compliant_only)) {
                if (roster.at(a).always_poll) {
                    d.polled.push_back(a);
                    continue;
                }
                auto it = registry.archives().find(a);
                if (it == registry.archives().end())
                    continue;  // no training data: absent from classifier scope
                auto threshold = registry.threshold_for(a, strategy.target_tpr);
                if (!threshold)
                    throw UsageError("registry has no operating point for TPR " +
                                     std::to_string(strategy.target_tpr));
                double s = score(it->second.model, v);
                d.scores.push_back({a, s, *threshold});
                if (s >= *threshold) d.polled.push_back(a);
            }
            std::sort(d.polled.begin(), d.polled.end());
            break;
        }
    }

    const auto t1 = std::chrono::steady_clock::now();
    d.latency_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
    return d;
}

std::vector<RoutingDecision> route_batch(const std::vector<std::string>& uris,
                                         const RoutingStrategy& strategy,
                                         const ModelRegistry& registry) {
    std::vector<RoutingDecision> out;
    out.reserve(uris.size());
    for (const auto& uri : uris) {
        try {
            out.push_back(route(uri, strategy, registry));
        } catch (const std::exception& e) {
            RoutingDecision d;
            d.uri = uri;
            d.strategy = strategy;
            d.error = true;
            d.error_message = e.what();
            out.push_back(std::move(d));
        }
    }
    return out;
}

} // namespace memrouter
