#include "memrouter/simeval.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "memrouter/digest.hpp"
#include "memrouter/errors.hpp"

namespace memrouter {

using nlohmann::json;

double LatencySampler::draw_ms(std::uint32_t archive, const std::string& uri) const {
    auto it = samples_.find(archive);
    if (it == samples_.end() || it->second.samples_ms.empty())
        throw DataError("no latency samples for archive index " +
                        std::to_string(archive));
    // Keyed generator: the draw depends only on (seed, archive, uri).
    std::string key = std::to_string(archive) + "|" + uri;
    std::mt19937_64 rng(seed_ ^ fnv1a64(key));
    std::uniform_int_distribution<std::size_t> pick(0, it->second.samples_ms.size() - 1);
    return static_cast<double>(it->second.samples_ms[pick(rng)]);
}

EvalReport evaluate(const LabelMatrix& eval_matrix, const ModelRegistry& registry,
                    const RoutingStrategy& strategy, const LatencySampler& sampler) {
    const Roster& roster = registry.roster();
    EvalReport report;
    report.strategy = strategy.name();
    report.seed = sampler.seed();
    report.eval_size = eval_matrix.size();
    report.confusion.assign(roster.size(), {});

    double sum_requests = 0.0, sum_recall = 0.0, sum_sum_t = 0.0, sum_max_t = 0.0;
    std::uint64_t complete = 0;
    std::map<std::pair<double, std::uint32_t>, std::uint64_t> scatter;

    for (const auto& rec : eval_matrix.records()) {
        RoutingDecision d = route(rec.uri, strategy, registry);
        if (d.error) throw DataError("routing failed for " + rec.uri + ": " + d.error_message);

        std::uint64_t tp = 0;
        for (std::uint32_t a : d.polled)
            if (rec.holds(a)) ++tp;

        // Full-roster confusion; archives outside the strategy's scope are
        // simply never polled.
        for (std::uint32_t a = 0; a < roster.size(); ++a) {
            bool polled = std::binary_search(d.polled.begin(), d.polled.end(), a);
            bool holds = rec.holds(a);
            auto& c = report.confusion[a];
            if (polled && holds) ++c.tp;
            else if (!polled && holds) ++c.fn;
            else if (polled) ++c.fp;
            else ++c.tn;
        }

        double sum_t = 0.0, max_t = 0.0;
        for (std::uint32_t a : d.polled) {
            double ms = sampler.draw_ms(a, rec.uri);
            sum_t += ms;
            max_t = std::max(max_t, ms);
        }

        report.total_requests += d.polled.size();
        sum_requests += static_cast<double>(d.polled.size());
        sum_sum_t += sum_t / 1000.0;
        sum_max_t += max_t / 1000.0;

        double recall = -1.0;
        if (!rec.archives.empty()) {
            recall = static_cast<double>(tp) / static_cast<double>(rec.archives.size());
            sum_recall += recall;
            ++report.recall_defined;
        }
        if (tp == rec.archives.size()) ++complete;
        ++scatter[{recall, static_cast<std::uint32_t>(d.polled.size())}];
    }

    const double n = static_cast<double>(eval_matrix.size());
    EvalRow row;
    row.target_tpr = strategy.kind == StrategyKind::classifier ? strategy.target_tpr : 1.0;
    row.scope = strategy.kind == StrategyKind::brute_force_compliant ||
                        (strategy.kind == StrategyKind::classifier &&
                         strategy.scope == StrategyScope::compliant_only)
                    ? "compliant"
                    : "all";
    row.avg_requests = n > 0 ? sum_requests / n : 0.0;
    row.avg_recall =
        report.recall_defined > 0 ? sum_recall / static_cast<double>(report.recall_defined) : 0.0;
    row.avg_sum_t_s = n > 0 ? sum_sum_t / n : 0.0;
    row.avg_max_t_s = n > 0 ? sum_max_t / n : 0.0;
    report.rows.push_back(row);
    report.complete_timemap_fraction = n > 0 ? static_cast<double>(complete) / n : 0.0;

    report.scatter.reserve(scatter.size());
    for (const auto& [key, count] : scatter)
        report.scatter.push_back({key.first, key.second, count});
    return report;
}

std::vector<EvalReport> evaluate(const LabelMatrix& eval_matrix,
                                 const ModelRegistry& registry,
                                 const std::vector<RoutingStrategy>& strategies,
                                 const LatencySampler& sampler) {
    std::vector<EvalReport> out;
    out.reserve(strategies.size());
    for (const auto& s : strategies)
        out.push_back(evaluate(eval_matrix, registry, s, sampler));
    return out;
}

std::vector<ArchiveConfusion> confusion(const LabelMatrix& eval_matrix,
                                        const std::vector<RoutingDecision>& decisions) {
    if (decisions.size() != eval_matrix.size())
        throw UsageError("confusion: one decision required per evaluation record");
    std::vector<ArchiveConfusion> out(eval_matrix.roster().size());
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const auto& rec = eval_matrix.records()[i];
        const auto& polled = decisions[i].polled;
        for (std::uint32_t a = 0; a < out.size(); ++a) {
            bool p = std::binary_search(polled.begin(), polled.end(), a);
            bool h = rec.holds(a);
            if (p && h) ++out[a].tp;
            else if (!p && h) ++out[a].fn;
            else if (p) ++out[a].fp;
            else ++out[a].tn;
        }
    }
    return out;
}

double request_reduction(const EvalReport& a, const EvalReport& b) {
    if (a.total_requests == 0) throw DataError("request_reduction: baseline sent zero requests");
    return 100.0 * (1.0 - static_cast<double>(b.total_requests) /
                              static_cast<double>(a.total_requests));
}

void export_scatter(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scatter CSV: " + path);
    out << "recall,requests,uri_count\n";
    out.precision(12);
    for (const auto& p : report.scatter)
        out << p.recall << ',' << p.requests << ',' << p.uri_count << '\n';
}

void export_report_csv(const std::vector<EvalReport>& reports,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report CSV: " + path);
    out << "tpr,scope,avg_requests,avg_recall,avg_sum_t,avg_max_t\n";
    out.precision(12);
    for (const auto& r : reports)
        for (const auto& row : r.rows)
            out << row.target_tpr << ',' << row.scope << ',' << row.avg_requests
                << ',' << row.avg_recall << ',' << row.avg_sum_t_s << ','
                << row.avg_max_t_s << '\n';
}

std::string EvalReport::to_json_string() const {
    json doc;
    doc["version"] = 1;
    doc["strategy"] = strategy;
    doc["seed"] = seed;
    doc["eval_size"] = eval_size;
    doc["recall_defined"] = recall_defined;
    doc["total_requests"] = total_requests;
    doc["complete_timemap_fraction"] = complete_timemap_fraction;
    doc["rows"] = json::array();
    for (const auto& r : rows)
        doc["rows"].push_back({{"target_tpr", r.target_tpr},
                               {"scope", r.scope},
                               {"avg_requests", r.avg_requests},
                               {"avg_recall", r.avg_recall},
                               {"avg_sum_t_s", r.avg_sum_t_s},
                               {"avg_max_t_s", r.avg_max_t_s}});
    doc["confusion"] = json::array();
    for (const auto& c : confusion)
        doc["confusion"].push_back(
            {{"tp", c.tp}, {"fn", c.fn}, {"tn", c.tn}, {"fp", c.fp}});
    doc["scatter"] = json::array();
    for (const auto& p : scatter)
        doc["scatter"].push_back(
            {{"recall", p.recall}, {"requests", p.requests}, {"uri_count", p.uri_count}});
    return doc.dump(2) + "\n";
}

EvalReport EvalReport::from_json_string(const std::string& text) {
    json doc = json::parse(text);
    if (doc.at("version").get<int>() != 1)
        throw DataError("unsupported evaluation report version");
    EvalReport r;
    r.strategy = doc.at("strategy").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.eval_size = doc.at("eval_size").get<std::uint64_t>();
    r.recall_defined = doc.at("recall_defined").get<std::uint64_t>();
    r.total_requests = doc.at("total_requests").get<std::uint64_t>();
    r.complete_timemap_fraction = doc.at("complete_timemap_fraction").get<double>();
    for (const auto& e : doc.at("rows"))
        r.rows.push_back({e.at("target_tpr").get<double>(),
                          e.at("scope").get<std::string>(),
                          e.at("avg_requests").get<double>(),
                          e.at("avg_recall").get<double>(),
                          e.at("avg_sum_t_s").get<double>(),
                          e.at("avg_max_t_s").get<double>()});
    for (const auto& e : doc.at("confusion"))
        r.confusion.push_back({e.at("tp").get<std::uint64_t>(),
                               e.at("fn").get<std::uint64_t>(),
                               e.at("tn").get<std::uint64_t>(),
                               e.at("fp").get<std::uint64_t>()});
    for (const auto& e : doc.at("scatter"))
        r.scatter.push_back({e.at("recall").get<double>(),
                             e.at("requests").get<std::uint32_t>(),
                             e.at("uri_count").get<std::uint64_t>()});
    return r;
}

void EvalReport::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write evaluation report: " + path);
    out << to_json_string();
}

EvalReport EvalReport::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read evaluation report: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_string(buf.str());
}

} // namespace memrouter
