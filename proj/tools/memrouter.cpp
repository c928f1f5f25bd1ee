#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "memrouter/calibrate.hpp"
#include "memrouter/digest.hpp"
#include "memrouter/errors.hpp"
#include "memrouter/pipeline.hpp"
#include "memrouter/registry.hpp"
#include "memrouter/router.hpp"
#include "memrouter/selection.hpp"
#include "memrouter/service.hpp"
#include "memrouter/simeval.hpp"
#include "memrouter/synth.hpp"

using namespace memrouter;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::shared_ptr<const Roster> load_roster(const std::string& path) {
    return std::make_shared<const Roster>(Roster::load(path));
}

RoutingStrategy parse_strategy(const std::string& name, double tpr,
                               const std::string& scope) {
    StrategyScope s = scope == "compliant_only" ? StrategyScope::compliant_only
                                                : StrategyScope::all;
    if (name == "brute_force_all") return RoutingStrategy::brute_force_all();
    if (name == "brute_force_compliant") return RoutingStrategy::brute_force_compliant();
    if (name == "classifier") return RoutingStrategy::classifier(tpr, s);
    throw UsageError("unknown strategy: " + name);
}

struct IngestCmd {
    std::string roster, holdings, out, format = "text";
    void run() const {
        auto r = load_roster(roster);
        LabelMatrix m = load_holdings(holdings, r);
        if (!out.empty()) save_holdings(m, out);
        auto hist = histogram_by_cardinality(m);
        if (format == "json") {
            json doc;
            doc["records"] = m.size();
            doc["archives"] = r->size();
            doc["positives"] = json::object();
            for (std::uint32_t a = 0; a < r->size(); ++a)
                doc["positives"][r->at(a).id] = m.positive_counts()[a];
            doc["cardinality"] = json::object();
            for (const auto& [k, v] : hist)
                doc["cardinality"][std::to_string(k)] = {{"count", v.first},
                                                         {"percent", v.second}};
            std::cout << doc.dump(2) << "\n";
        } else {
            std::cout << m.size() << " records over " << r->size() << " archives\n";
            for (const auto& [k, v] : hist)
                std::cout << "  held by " << k << ": " << v.first << " (" << v.second
                          << "%)\n";
        }
    }
};

struct StatsCmd {
    std::string roster, psl, holdings, family = "token", metric = "most_common", out;
    std::size_t top = 50;
    std::uint64_t seed = 0;
    void run() const {
        auto r = load_roster(roster);
        LabelMatrix m = load_holdings(holdings, r);
        PslRules rules = PslRules::load(psl);
        FeatureStatsStore stats = collect_stats(m, rules, {});
        Family fam = family == "psl"    ? Family::psl
                     : family == "gram" ? Family::gram
                                        : Family::token;
        RankedList list = rank(stats, fam, metric_from_string(metric), std::nullopt, seed);
        if (!out.empty()) export_ranked_csv(list, out);
        for (std::size_t i = 0; i < std::min(top, list.entries.size()); ++i)
            std::cout << list.entries[i].first << "\t" << list.entries[i].second << "\n";
    }
};

struct BuildVocabCmd {
    std::string roster, psl, holdings, out;
    std::size_t psl_count = 250, gram_count = 3000, token_count = 2000;
    std::string psl_metric = "most_common", gram_metric = "difference",
                token_metric = "entropy";
    int gram_n = 3;
    std::string gram_scope = "whole";
    std::uint64_t seed = 0;
    void run() const {
        auto r = load_roster(roster);
        LabelMatrix m = load_holdings(holdings, r);
        std::string psl_source = read_file(psl);
        FeatureConfig fc{{gram_n}, ngram_scope_from_string(gram_scope)};
        FeatureStatsStore stats = collect_stats(m, PslRules::parse(psl_source), fc);
        VocabPlan plan{{metric_from_string(psl_metric), psl_count},
                       {metric_from_string(gram_metric), gram_count},
                       {metric_from_string(token_metric), token_count},
                       seed};
        Vocabulary vocab = build_vocabulary(stats, plan, psl_source);
        write_atomic(out, vocab.to_json_string());
        std::cout << "vocabulary " << vocab.digest() << " dim " << vocab.total_dim()
                  << " -> " << out << "\n";
    }
};

struct TrainCmd {
    std::string roster, vocab, holdings, archive, algo = "logreg", out, trained_at;
    TrainConfig cfg;
    void run() const {
        auto r = load_roster(roster);
        LabelMatrix m = load_holdings(holdings, r);
        Vocabulary v = Vocabulary::load(vocab);
        TrainConfig tc = cfg;
        tc.trained_at = trained_at.empty() ? "unset" : trained_at;
        ArchiveModel model =
            train(m, v, r->require(archive), algo_from_string(algo), tc);
        write_atomic(out, model.to_json_string());
        std::cout << "model " << model.archive_id << "/" << algo << " -> " << out
                  << "\n";
    }
};

struct CalibrateCmd {
    std::string roster, vocab, training, calibration, out;
    std::vector<std::string> models;
    std::vector<double> targets{0.9, 0.8, 0.7, 0.6, 0.5};
    void run() const {
        auto r = load_roster(roster);
        Vocabulary v = Vocabulary::load(vocab);
        LabelMatrix train_m = load_holdings(training, r);
        LabelMatrix calib_m = load_holdings(calibration, r);
        std::vector<ArchiveModel> candidates;
        for (const auto& path : models)
            candidates.push_back(ArchiveModel::load(path, *r));
        ModelRegistry reg = calibrate_registry(candidates, train_m, calib_m, v, targets);
        write_atomic(out, reg.to_json_string());
        std::cout << "registry " << reg.version() << " -> " << out << "\n";
    }
};

struct RouteCmd {
    std::string registry, strategy = "classifier", scope = "all", input, format = "text";
    std::vector<std::string> uris;
    double tpr = 0.6;
    void run() const {
        ModelRegistry reg = ModelRegistry::load(registry);
        std::vector<std::string> all = uris;
        if (!input.empty()) {
            std::ifstream in(input);
            if (!in) throw DataError("cannot read " + input);
            std::string line;
            while (std::getline(in, line))
                if (!line.empty() && line[0] != '#') all.push_back(line);
        }
        if (all.empty()) throw UsageError("no URIs given (use positional args or --input)");
        auto decisions = route_batch(all, parse_strategy(strategy, tpr, scope), reg);
        if (format == "json") {
            json doc = json::array();
            for (const auto& d : decisions) {
                json e;
                e["uri"] = d.uri;
                e["error"] = d.error;
                if (d.error) {
                    e["message"] = d.error_message;
                } else {
                    e["poll"] = json::array();
                    for (auto a : d.polled) e["poll"].push_back(reg.roster().at(a).id);
                    e["latency_us"] = d.latency_us;
                }
                doc.push_back(e);
            }
            std::cout << doc.dump(2) << "\n";
        } else {
            for (const auto& d : decisions) {
                std::cout << d.uri << " -> ";
                if (d.error) {
                    std::cout << "error: " << d.error_message << "\n";
                    continue;
                }
                for (std::size_t i = 0; i < d.polled.size(); ++i)
                    std::cout << (i ? "," : "") << reg.roster().at(d.polled[i]).id;
                std::cout << "\n";
            }
        }
    }
};

struct EvaluateCmd {
    std::string registry, holdings, latency, out_dir = "eval-out", scope = "all";
    std::vector<double> targets{0.9, 0.8, 0.7, 0.6, 0.5};
    std::uint64_t seed = 99;
    void run() const {
        ModelRegistry reg = ModelRegistry::load(registry);
        LabelMatrix m = load_holdings(holdings, reg.roster_ptr());
        LatencySampler sampler(load_latency_samples(latency, reg.roster()), seed);
        std::vector<RoutingStrategy> strategies = {
            RoutingStrategy::brute_force_all(), RoutingStrategy::brute_force_compliant()};
        StrategyScope s = scope == "compliant_only" ? StrategyScope::compliant_only
                                                    : StrategyScope::all;
        for (double t : targets) strategies.push_back(RoutingStrategy::classifier(t, s));
        auto reports = evaluate(m, reg, strategies, sampler);
        std::filesystem::create_directories(out_dir);
        json doc = json::array();
        for (const auto& rep : reports) doc.push_back(json::parse(rep.to_json_string()));
        write_atomic(out_dir + "/eval.json", doc.dump(2) + "\n");
        export_report_csv(reports, out_dir + "/eval.csv");
        for (std::size_t i = 0; i < reports.size(); ++i)
            export_scatter(reports[i],
                           out_dir + "/scatter-" + std::to_string(i) + ".csv");
        std::cout << "reports -> " << out_dir << "\n";
    }
};

struct ExportRocCmd {
    std::string roster, vocab, calibration, out;
    std::vector<std::string> models;
    void run() const {
        auto r = load_roster(roster);
        Vocabulary v = Vocabulary::load(vocab);
        LabelMatrix calib = load_holdings(calibration, r);
        std::vector<FeatureVector> vectors = vectorize_matrix(calib, v);
        std::ofstream csv(out);
        if (!csv) throw DataError("cannot write " + out);
        csv << "archive,algorithm,threshold,tpr,fpr\n";
        csv.precision(12);
        for (const auto& path : models) {
            ArchiveModel model = ArchiveModel::load(path, *r);
            std::vector<double> scores = predict_batch(model, vectors);
            std::vector<std::pair<double, int>> scored(scores.size());
            for (std::size_t i = 0; i < scores.size(); ++i)
                scored[i] = {scores[i], calib.records()[i].holds(model.archive) ? 1 : 0};
            RocCurve curve = roc(scored);
            for (const auto& p : curve.points)
                csv << model.archive_id << ',' << to_string(model.algo) << ','
                    << p.threshold << ',' << p.tpr << ',' << p.fpr << '\n';
        }
    }
};

struct GenSyntheticCmd {
    std::string out;
    SyntheticCorpusSpec spec;
    void run() const {
        SyntheticCorpus corpus = gen_synthetic(spec);
        write_corpus(corpus, out);
        auto hist = histogram_by_cardinality(corpus.holdings);
        std::cout << "corpus: " << corpus.holdings.size() << " URIs, "
                  << corpus.roster->size() << " archives -> " << out << "\n";
        for (const auto& [k, v] : hist)
            std::cout << "  held by " << k << ": " << v.first << " (" << v.second
                      << "%)\n";
    }
};

struct PipelineCmd {
    std::string config;
    bool force = false;
    void run() const {
        PipelineConfig cfg = PipelineConfig::load(config);
        cfg.force = cfg.force || force;
        PipelineResult res = run_pipeline(cfg);
        json doc;
        doc["registry"] = res.registry_path;
        doc["report"] = res.report_path;
        doc["stages_run"] = res.stages_run;
        doc["stages_cached"] = res.stages_cached;
        std::cout << doc.dump(2) << "\n";
    }
};

struct RetrainCmd {
    std::string roster, psl, dump, calibration, out;
    std::vector<double> targets{0.9, 0.8, 0.7, 0.6, 0.5};
    std::uint64_t seed = 1;
    void run() const {
        auto r = load_roster(roster);
        std::string psl_source = read_file(psl);
        LabelMatrix dump_m = load_holdings(dump, r);
        LabelMatrix calib_m = load_holdings(calibration, r);
        TrainConfig tc;
        tc.seed = seed;
        tc.trained_at = "inputs:" + content_digest(file_digest(dump) + file_digest(psl));
        ModelRegistry reg =
            retrain(dump_m, calib_m, psl_source, {}, {}, tc, targets);
        write_atomic(out, reg.to_json_string());
        std::cout << "registry " << reg.version() << " -> " << out << "\n";
    }
};

struct ServeCmd {
    std::string config, registry;
    void run() const {
        auto reg = std::make_shared<const ModelRegistry>(ModelRegistry::load(registry));
        ServiceConfig cfg = ServiceConfig::load(config, reg->roster());
        AggregatorService service(reg, cfg);
        service.start_async();
        std::cout << "listening on " << cfg.host << ":" << service.port() << "\n";
        // Blocks until the process is signalled; httplib handles requests on
        // its own pool.
        for (;;) std::this_thread::sleep_for(std::chrono::hours(24));
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memento aggregator query-routing toolkit"};
    app.require_subcommand(1);

    IngestCmd ingest;
    auto* c_ing = app.add_subcommand("ingest", "Load and validate a holdings dump");
    c_ing->add_option("--roster", ingest.roster)->required();
    c_ing->add_option("--holdings", ingest.holdings)->required();
    c_ing->add_option("--out", ingest.out);
    c_ing->add_option("--format", ingest.format)->check(CLI::IsMember({"text", "json"}));

    StatsCmd stats;
    auto* c_st = app.add_subcommand("stats", "Rank candidate features");
    c_st->add_option("--roster", stats.roster)->required();
    c_st->add_option("--psl", stats.psl)->required();
    c_st->add_option("--holdings", stats.holdings)->required();
    c_st->add_option("--family", stats.family)->check(CLI::IsMember({"psl", "gram", "token"}));
    c_st->add_option("--metric", stats.metric);
    c_st->add_option("--top", stats.top);
    c_st->add_option("--seed", stats.seed);
    c_st->add_option("--out", stats.out);

    BuildVocabCmd vocab;
    auto* c_bv = app.add_subcommand("build-vocab", "Select the shared feature vocabulary");
    c_bv->add_option("--roster", vocab.roster)->required();
    c_bv->add_option("--psl", vocab.psl)->required();
    c_bv->add_option("--holdings", vocab.holdings)->required();
    c_bv->add_option("--out", vocab.out)->required();
    c_bv->add_option("--psl-count", vocab.psl_count);
    c_bv->add_option("--gram-count", vocab.gram_count);
    c_bv->add_option("--token-count", vocab.token_count);
    c_bv->add_option("--psl-metric", vocab.psl_metric);
    c_bv->add_option("--gram-metric", vocab.gram_metric);
    c_bv->add_option("--token-metric", vocab.token_metric);
    c_bv->add_option("--gram-n", vocab.gram_n);
    c_bv->add_option("--gram-scope", vocab.gram_scope)
        ->check(CLI::IsMember({"whole", "host", "path"}));
    c_bv->add_option("--seed", vocab.seed);

    TrainCmd train_cmd;
    auto* c_tr = app.add_subcommand("train", "Train one archive classifier");
    c_tr->add_option("--roster", train_cmd.roster)->required();
    c_tr->add_option("--vocab", train_cmd.vocab)->required();
    c_tr->add_option("--holdings", train_cmd.holdings)->required();
    c_tr->add_option("--archive", train_cmd.archive)->required();
    c_tr->add_option("--algo", train_cmd.algo)
        ->check(CLI::IsMember({"logreg", "mnb", "svm"}));
    c_tr->add_option("--out", train_cmd.out)->required();
    c_tr->add_option("--epochs", train_cmd.cfg.epochs);
    c_tr->add_option("--learning-rate", train_cmd.cfg.learning_rate);
    c_tr->add_option("--l2-lambda", train_cmd.cfg.l2_lambda);
    c_tr->add_option("--seed", train_cmd.cfg.seed);
    c_tr->add_option("--trained-at", train_cmd.trained_at);

    CalibrateCmd calib;
    auto* c_ca = app.add_subcommand("calibrate", "Calibrate candidate models into a registry");
    c_ca->add_option("--roster", calib.roster)->required();
    c_ca->add_option("--vocab", calib.vocab)->required();
    c_ca->add_option("--train", calib.training)->required();
    c_ca->add_option("--calibration", calib.calibration)->required();
    c_ca->add_option("--model", calib.models)->required();
    c_ca->add_option("--targets", calib.targets);
    c_ca->add_option("--out", calib.out)->required();

    RouteCmd route_cmd;
    auto* c_ro = app.add_subcommand("route", "Decide which archives to poll");
    c_ro->add_option("--registry", route_cmd.registry)->required();
    c_ro->add_option("--strategy", route_cmd.strategy)
        ->check(CLI::IsMember({"brute_force_all", "brute_force_compliant", "classifier"}));
    c_ro->add_option("--tpr", route_cmd.tpr);
    c_ro->add_option("--scope", route_cmd.scope)
        ->check(CLI::IsMember({"all", "compliant_only"}));
    c_ro->add_option("--input", route_cmd.input);
    c_ro->add_option("--format", route_cmd.format)->check(CLI::IsMember({"text", "json"}));
    c_ro->add_option("uris", route_cmd.uris);

    EvaluateCmd eval;
    auto* c_ev = app.add_subcommand("evaluate", "Simulate strategies over held-out holdings");
    c_ev->add_option("--registry", eval.registry)->required();
    c_ev->add_option("--holdings", eval.holdings)->required();
    c_ev->add_option("--latency", eval.latency)->required();
    c_ev->add_option("--out", eval.out_dir);
    c_ev->add_option("--targets", eval.targets);
    c_ev->add_option("--scope", eval.scope)->check(CLI::IsMember({"all", "compliant_only"}));
    c_ev->add_option("--seed", eval.seed);

    ExportRocCmd roc_cmd;
    auto* c_xr = app.add_subcommand("export-roc", "Write ROC sweeps for candidate models");
    c_xr->add_option("--roster", roc_cmd.roster)->required();
    c_xr->add_option("--vocab", roc_cmd.vocab)->required();
    c_xr->add_option("--calibration", roc_cmd.calibration)->required();
    c_xr->add_option("--model", roc_cmd.models)->required();
    c_xr->add_option("--out", roc_cmd.out)->required();

    GenSyntheticCmd synth;
    auto* c_gs = app.add_subcommand("gen-synthetic", "Generate a synthetic corpus");
    c_gs->add_option("--out", synth.out)->required();
    c_gs->add_option("--archives", synth.spec.num_archives);
    c_gs->add_option("--uris", synth.spec.num_uris);
    c_gs->add_option("--noise", synth.spec.noise);
    c_gs->add_option("--generic-fraction", synth.spec.generic_fraction);
    c_gs->add_option("--seed", synth.spec.seed);

    PipelineCmd pipe;
    auto* c_pl = app.add_subcommand("pipeline", "Run the end-to-end training pipeline");
    c_pl->add_option("--config", pipe.config)->required();
    c_pl->add_flag("--force", pipe.force);

    RetrainCmd retrain_cmd;
    auto* c_rt = app.add_subcommand("retrain", "Retrain a registry from a cache dump");
    c_rt->add_option("--roster", retrain_cmd.roster)->required();
    c_rt->add_option("--psl", retrain_cmd.psl)->required();
    c_rt->add_option("--dump", retrain_cmd.dump)->required();
    c_rt->add_option("--calibration", retrain_cmd.calibration)->required();
    c_rt->add_option("--out", retrain_cmd.out)->required();
    c_rt->add_option("--targets", retrain_cmd.targets);
    c_rt->add_option("--seed", retrain_cmd.seed);

    ServeCmd serve;
    auto* c_sv = app.add_subcommand("serve", "Run the aggregator HTTP service");
    c_sv->add_option("--config", serve.config)->required();
    c_sv->add_option("--registry", serve.registry)->required();

    try {
        app.parse(argc, argv);
        if (c_ing->parsed()) ingest.run();
        else if (c_st->parsed()) stats.run();
        else if (c_bv->parsed()) vocab.run();
        else if (c_tr->parsed()) train_cmd.run();
        else if (c_ca->parsed()) calib.run();
        else if (c_ro->parsed()) route_cmd.run();
        else if (c_ev->parsed()) eval.run();
        else if (c_xr->parsed()) roc_cmd.run();
        else if (c_gs->parsed()) synth.run();
        else if (c_pl->parsed()) pipe.run();
        else if (c_rt->parsed()) retrain_cmd.run();
        else if (c_sv->parsed()) serve.run();
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
