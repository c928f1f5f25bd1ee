#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memrouter/registry.hpp"

namespace memrouter {

enum class StrategyKind { brute_force_all, brute_force_compliant, classifier };
enum class StrategyScope { all, compliant_only };

struct RoutingStrategy {
    StrategyKind kind = StrategyKind::brute_force_all;
    double target_tpr = 0.6;                    // classifier only
    StrategyScope scope = StrategyScope::all;   // classifier only

    static RoutingStrategy brute_force_all() { return {StrategyKind::brute_force_all}; }
    static RoutingStrategy brute_force_compliant() {
        return {StrategyKind::brute_force_compliant};
    }
    static RoutingStrategy classifier(double tpr,
                                      StrategyScope scope = StrategyScope::all) {
        return {StrategyKind::classifier, tpr, scope};
    }

    std::string name() const;
};

struct ArchiveScore {
    std::uint32_t archive;
    double score;
    double threshold;
};

struct RoutingDecision {
    std::string uri;
    std::vector<std::uint32_t> polled;   // sorted roster indices
    std::vector<ArchiveScore> scores;    // classifier strategies only
    RoutingStrategy strategy;
    double latency_us = 0.0;
    bool error = false;
    std::string error_message;
};

/// Pure decision: no network, no registry mutation. Classifier strategies
/// extract features once, score every in-scope modeled archive against its
/// calibrated threshold, and always include the always-poll archive.
/// Throws UsageError for unparseable URIs or an uncalibrated target TPR.
RoutingDecision route(const std::string& uri, const RoutingStrategy& strategy,
                      const ModelRegistry& registry);

/// Elementwise route(); per-URI errors are collected in the decision's
/// error fields and the batch continues.
std::vector<RoutingDecision> route_batch(const std::vector<std::string>& uris,
                                         const RoutingStrategy& strategy,
                                         const ModelRegistry& registry);

} // namespace memrouter
