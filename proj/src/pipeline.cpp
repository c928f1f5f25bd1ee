#include "memrouter/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "memrouter/digest.hpp"
#include "memrouter/errors.hpp"

namespace memrouter {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string stamp_path(const PipelineConfig& cfg, const std::string& stage) {
    return cfg.out_dir + "/stamps/" + stage + ".stamp";
}

bool stage_fresh(const PipelineConfig& cfg, const std::string& stage,
                 const std::string& input_digest,
                 const std::vector<std::string>& artifacts) {
    if (cfg.force) return false;
    for (const auto& a : artifacts)
        if (!fs::exists(a)) return false;
    std::ifstream in(stamp_path(cfg, stage));
    if (!in) return false;
    std::string recorded;
    std::getline(in, recorded);
    return recorded == input_digest;
}

void record_stamp(const PipelineConfig& cfg, const std::string& stage,
                  const std::string& input_digest) {
    write_atomic(stamp_path(cfg, stage), input_digest + "\n");
}

json strategy_json(StrategyScope scope) {
    return scope == StrategyScope::all ? "all" : "compliant_only";
}

} // namespace

void write_atomic(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        if (!out) throw DataError("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string PipelineConfig::to_json_string() const {
    json doc;
    doc["roster"] = roster_path;
    doc["psl"] = psl_path;
    doc["holdings"] = holdings_path;
    doc["latency"] = latency_path;
    doc["out_dir"] = out_dir;
    doc["fractions"] = {{"train", fractions.train},
                        {"calibrate", fractions.calibrate},
                        {"test", fractions.test}};
    doc["split_seed"] = split_seed;
    doc["features"] = {{"gram_n", features.gram_sizes.empty() ? 3 : features.gram_sizes[0]},
                       {"gram_scope", to_string(features.gram_scope)}};
    doc["vocab_plan"] = {
        {"psl", {{"metric", to_string(vocab_plan.psl.metric)}, {"count", vocab_plan.psl.count}}},
        {"gram", {{"metric", to_string(vocab_plan.gram.metric)}, {"count", vocab_plan.gram.count}}},
        {"token", {{"metric", to_string(vocab_plan.token.metric)}, {"count", vocab_plan.token.count}}},
        {"seed", vocab_plan.seed}};
    doc["train"] = {{"epochs", train.epochs},
                    {"learning_rate", train.learning_rate},
                    {"l2_lambda", train.l2_lambda},
                    {"batch_size", train.batch_size},
                    {"seed", train.seed},
                    {"mnb_alpha", train.mnb_alpha},
                    {"class_weighting", train.class_weighting},
                    {"validation_fraction", train.validation_fraction},
                    {"trained_at", train.trained_at}};
    doc["targets"] = targets;
    doc["eval_scope"] = strategy_json(eval_scope);
    doc["latency_seed"] = latency_seed;
    return doc.dump(2) + "\n";
}

PipelineConfig PipelineConfig::from_json_string(const std::string& text) {
    json doc = json::parse(text);
    PipelineConfig cfg;
    cfg.roster_path = doc.at("roster").get<std::string>();
    cfg.psl_path = doc.at("psl").get<std::string>();
    cfg.holdings_path = doc.at("holdings").get<std::string>();
    cfg.latency_path = doc.at("latency").get<std::string>();
    cfg.out_dir = doc.at("out_dir").get<std::string>();
    if (doc.contains("fractions")) {
        const auto& f = doc.at("fractions");
        cfg.fractions = {f.at("train").get<double>(), f.at("calibrate").get<double>(),
                         f.at("test").get<double>()};
    }
    if (doc.contains("split_seed")) cfg.split_seed = doc.at("split_seed").get<std::uint64_t>();
    if (doc.contains("features")) {
        const auto& f = doc.at("features");
        cfg.features.gram_sizes = {f.at("gram_n").get<int>()};
        cfg.features.gram_scope = ngram_scope_from_string(f.at("gram_scope").get<std::string>());
    }
    if (doc.contains("vocab_plan")) {
        const auto& p = doc.at("vocab_plan");
        auto fam = [&](const char* key) {
            return FamilyPlan{metric_from_string(p.at(key).at("metric").get<std::string>()),
                              p.at(key).at("count").get<std::size_t>()};
        };
        cfg.vocab_plan.psl = fam("psl");
        cfg.vocab_plan.gram = fam("gram");
        cfg.vocab_plan.token = fam("token");
        cfg.vocab_plan.seed = p.value("seed", std::uint64_t{0});
    }
    if (doc.contains("train")) {
        const auto& t = doc.at("train");
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.l2_lambda = t.value("l2_lambda", cfg.train.l2_lambda);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.seed = t.value("seed", cfg.train.seed);
        cfg.train.mnb_alpha = t.value("mnb_alpha", cfg.train.mnb_alpha);
        cfg.train.class_weighting = t.value("class_weighting", cfg.train.class_weighting);
        cfg.train.validation_fraction =
            t.value("validation_fraction", cfg.train.validation_fraction);
        cfg.train.trained_at = t.value("trained_at", cfg.train.trained_at);
    }
    if (doc.contains("targets")) cfg.targets = doc.at("targets").get<std::vector<double>>();
    if (doc.contains("eval_scope"))
        cfg.eval_scope = doc.at("eval_scope").get<std::string>() == "compliant_only"
                             ? StrategyScope::compliant_only
                             : StrategyScope::all;
    if (doc.contains("latency_seed"))
        cfg.latency_seed = doc.at("latency_seed").get<std::uint64_t>();
    return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    return from_json_string(read_file(path));
}

ModelRegistry retrain(const LabelMatrix& dump, const LabelMatrix& calibration,
                      const std::string& psl_source, const FeatureConfig& features,
                      const VocabPlan& plan, const TrainConfig& train_cfg,
                      const std::vector<double>& targets) {
    PslRules psl = PslRules::parse(psl_source);
    FeatureStatsStore stats = collect_stats(dump, psl, features);
    Vocabulary vocab = build_vocabulary(stats, plan, psl_source);

    std::vector<FeatureVector> vectors = vectorize_matrix(dump, vocab);
    const Roster& roster = dump.roster();
    const std::uint32_t always = roster.always_poll_index();

    TrainConfig cfg = train_cfg;
    std::vector<ArchiveModel> candidates;
    for (std::uint32_t a = 0; a < roster.size(); ++a) {
        if (a == always) continue;  // polled unconditionally, no model
        std::size_t pos = dump.positive_counts()[a];
        if (pos == 0 || pos == dump.size()) continue;  // degenerate labels
        std::vector<std::uint8_t> labels(dump.size());
        for (std::size_t i = 0; i < dump.size(); ++i)
            labels[i] = dump.records()[i].holds(a) ? 1 : 0;
        for (Algo algo : {Algo::logreg, Algo::mnb, Algo::svm})
            candidates.push_back(
                train(vectors, labels, roster.at(a).id, a, algo, vocab, cfg));
    }
    return calibrate_registry(candidates, dump, calibration, vocab, targets);
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
    if (cfg.out_dir.empty()) throw UsageError("pipeline needs an output directory");
    fs::create_directories(cfg.out_dir);
    fs::create_directories(cfg.out_dir + "/stamps");

    PipelineResult res;
    res.train_path = cfg.out_dir + "/train.tsv";
    res.calibrate_path = cfg.out_dir + "/calibrate.tsv";
    res.test_path = cfg.out_dir + "/test.tsv";
    res.vocab_path = cfg.out_dir + "/vocab.json";
    res.registry_path = cfg.out_dir + "/registry.json";
    res.report_path = cfg.out_dir + "/eval.json";
    res.report_csv_path = cfg.out_dir + "/eval.csv";

    auto roster = std::make_shared<const Roster>(Roster::load(cfg.roster_path));
    const std::string psl_source = read_file(cfg.psl_path);

    // Stamps chain input digests, so editing any upstream input re-executes
    // exactly the stages that depend on it.
    std::ostringstream base;
    base << file_digest(cfg.roster_path) << file_digest(cfg.holdings_path)
         << cfg.split_seed << ',' << cfg.fractions.train << ','
         << cfg.fractions.calibrate << ',' << cfg.fractions.test;
    const std::string split_digest = content_digest(base.str());

    auto run_stage = [&](const std::string& stage, const std::string& digest,
                         const std::vector<std::string>& artifacts, auto&& body) {
        if (stage_fresh(cfg, stage, digest, artifacts)) {
            res.stages_cached.push_back(stage);
            return;
        }
        body();
        record_stamp(cfg, stage, digest);
        res.stages_run.push_back(stage);
    };

    run_stage("split", split_digest,
              {res.train_path, res.calibrate_path, res.test_path}, [&] {
                  LabelMatrix all = load_holdings(cfg.holdings_path, roster);
                  SplitResult parts = split(all, cfg.fractions, cfg.split_seed);
                  save_holdings(parts.train, res.train_path);
                  save_holdings(parts.calibrate, res.calibrate_path);
                  save_holdings(parts.test, res.test_path);
              });

    std::ostringstream vb;
    vb << split_digest << file_digest(cfg.psl_path)
       << (cfg.features.gram_sizes.empty() ? 3 : cfg.features.gram_sizes[0])
       << to_string(cfg.features.gram_scope) << to_string(cfg.vocab_plan.psl.metric)
       << cfg.vocab_plan.psl.count << to_string(cfg.vocab_plan.gram.metric)
       << cfg.vocab_plan.gram.count << to_string(cfg.vocab_plan.token.metric)
       << cfg.vocab_plan.token.count << cfg.vocab_plan.seed;
    const std::string vocab_digest = content_digest(vb.str());

    run_stage("vocab", vocab_digest, {res.vocab_path}, [&] {
        LabelMatrix training = load_holdings(res.train_path, roster);
        PslRules psl = PslRules::parse(psl_source);
        FeatureStatsStore stats = collect_stats(training, psl, cfg.features);
        Vocabulary vocab = build_vocabulary(stats, cfg.vocab_plan, psl_source);
        write_atomic(res.vocab_path, vocab.to_json_string());
    });

    std::ostringstream rb;
    rb << vocab_digest << cfg.train.epochs << ',' << cfg.train.learning_rate << ','
       << cfg.train.l2_lambda << ',' << cfg.train.batch_size << ',' << cfg.train.seed
       << ',' << cfg.train.mnb_alpha << ',' << cfg.train.class_weighting << ','
       << cfg.train.validation_fraction;
    for (double t : cfg.targets) rb << ',' << t;
    const std::string registry_digest = content_digest(rb.str());

    run_stage("registry", registry_digest, {res.registry_path}, [&] {
        LabelMatrix training = load_holdings(res.train_path, roster);
        LabelMatrix calibration = load_holdings(res.calibrate_path, roster);
        Vocabulary vocab = Vocabulary::load(res.vocab_path);

        std::vector<FeatureVector> vectors = vectorize_matrix(training, vocab);
        TrainConfig tc = cfg.train;
        if (tc.trained_at.empty() || tc.trained_at == "unset")
            tc.trained_at = "inputs:" + registry_digest;

        const std::uint32_t always = roster->always_poll_index();
        std::vector<ArchiveModel> candidates;
        for (std::uint32_t a = 0; a < roster->size(); ++a) {
            if (a == always) continue;
            std::size_t pos = training.positive_counts()[a];
            if (pos == 0 || pos == training.size()) continue;
            std::vector<std::uint8_t> labels(training.size());
            for (std::size_t i = 0; i < training.size(); ++i)
                labels[i] = training.records()[i].holds(a) ? 1 : 0;
            for (Algo algo : {Algo::logreg, Algo::mnb, Algo::svm})
                candidates.push_back(
                    train(vectors, labels, roster->at(a).id, a, algo, vocab, tc));
        }
        ModelRegistry registry =
            calibrate_registry(candidates, training, calibration, vocab, cfg.targets);
        write_atomic(res.registry_path, registry.to_json_string());
    });

    std::ostringstream eb;
    eb << registry_digest << file_digest(cfg.latency_path) << cfg.latency_seed
       << (cfg.eval_scope == StrategyScope::all ? "all" : "compliant_only");
    const std::string eval_digest = content_digest(eb.str());

    run_stage("eval", eval_digest, {res.report_path, res.report_csv_path}, [&] {
        LabelMatrix test = load_holdings(res.test_path, roster);
        ModelRegistry registry = ModelRegistry::load(res.registry_path);
        LatencySampler sampler(load_latency_samples(cfg.latency_path, *roster),
                               cfg.latency_seed);
        std::vector<RoutingStrategy> strategies = {
            RoutingStrategy::brute_force_all(),
            RoutingStrategy::brute_force_compliant()};
        for (double t : cfg.targets)
            strategies.push_back(RoutingStrategy::classifier(t, cfg.eval_scope));

        std::vector<EvalReport> reports = evaluate(test, registry, strategies, sampler);
        json doc = json::array();
        for (const auto& r : reports) doc.push_back(json::parse(r.to_json_string()));
        write_atomic(res.report_path, doc.dump(2) + "\n");

        std::string tmp_csv = res.report_csv_path + ".tmp";
        export_report_csv(reports, tmp_csv);
        fs::rename(tmp_csv, res.report_csv_path);
    });

    return res;
}

} // namespace memrouter
