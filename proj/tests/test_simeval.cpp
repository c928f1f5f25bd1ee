#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "memrouter/errors.hpp"
#include "memrouter/simeval.hpp"

using namespace memrouter;

namespace {

const char* kPsl = "com\n";

std::shared_ptr<const Roster> toy_roster() {
    return std::make_shared<const Roster>(std::vector<ArchiveInfo>{
        {"ia", Compliance::native, true, true},
        {"a1", Compliance::native, true, false},
        {"a2", Compliance::native, true, false},
        {"p1", Compliance::by_proxy, true, false},
        {"cold", Compliance::native, true, false},
    });
}

// Path token decides the holder: /aa -> a1, /bb -> a2, /cc -> p1.
LabelMatrix token_matrix(const std::shared_ptr<const Roster>& roster, int n,
                         const std::string& tag) {
    static const char* tokens[] = {"aa", "bb", "cc"};
    std::vector<HoldingsRecord> recs;
    for (int i = 0; i < n; ++i) {
        std::uint32_t holder = 1 + i % 3;
        recs.push_back({"http://h.example/" + std::string(tokens[i % 3]) + "/" +
                            tag + std::to_string(i),
                        {holder}});
    }
    return LabelMatrix(roster, recs);
}

ModelRegistry make_registry(const std::shared_ptr<const Roster>& roster) {
    Eigen::Matrix<double, kCountDim, 1> mean = Eigen::Matrix<double, kCountDim, 1>::Zero();
    Eigen::Matrix<double, kCountDim, 1> stdev = Eigen::Matrix<double, kCountDim, 1>::Ones();
    Vocabulary vocab({}, {}, 3, NgramScope::whole, {"aa", "bb", "cc"}, mean, stdev,
                     kPsl);
    LabelMatrix training = token_matrix(roster, 90, "t");
    LabelMatrix calibration = token_matrix(roster, 60, "c");
    TrainConfig cfg;
    cfg.trained_at = "inputs:test";
    std::vector<ArchiveModel> candidates;
    for (std::uint32_t archive : {1u, 2u, 3u})
        candidates.push_back(train(training, vocab, archive, Algo::mnb, cfg));
    return calibrate_registry(candidates, training, calibration, vocab, {0.9, 0.5});
}

// 30 records in 6 cycles of 5: aa:{a1}, bb:{a2}, cc:{p1}, aa:{ia,a1}, zz:{}.
LabelMatrix eval_matrix(const std::shared_ptr<const Roster>& roster) {
    std::vector<HoldingsRecord> recs;
    for (int i = 0; i < 30; ++i) {
        std::string tag = "/e" + std::to_string(i);
        switch (i % 5) {
            case 0: recs.push_back({"http://h.example/aa" + tag, {1}}); break;
            case 1: recs.push_back({"http://h.example/bb" + tag, {2}}); break;
            case 2: recs.push_back({"http://h.example/cc" + tag, {3}}); break;
            case 3: recs.push_back({"http://h.example/aa" + tag, {0, 1}}); break;
            case 4: recs.push_back({"http://h.example/zz" + tag, {}}); break;
        }
    }
    return LabelMatrix(roster, recs);
}

// One sample per archive makes the simulated times exact.
std::map<std::uint32_t, LatencySampleSet> fixed_latency() {
    std::map<std::uint32_t, LatencySampleSet> out;
    out[0] = {0, {100}};
    out[1] = {1, {200}};
    out[2] = {2, {300}};
    out[3] = {3, {400}};
    out[4] = {4, {50}};
    return out;
}

} // namespace

TEST_CASE("latency draws are keyed by archive, uri and seed") {
    std::map<std::uint32_t, LatencySampleSet> sets;
    sets[1] = {1, {10, 20, 30, 40, 50, 60, 70, 80}};
    LatencySampler s(sets, 7);

    double first = s.draw_ms(1, "http://h.example/x");
    for (int i = 0; i < 5; ++i) CHECK(s.draw_ms(1, "http://h.example/x") == first);
    CHECK(std::count(sets[1].samples_ms.begin(), sets[1].samples_ms.end(),
                     static_cast<std::int64_t>(first)) == 1);

    // distinct URIs and seeds decorrelate: over 64 draws at least one differs
    bool uri_varies = false, seed_varies = false;
    LatencySampler other(sets, 8);
    for (int i = 0; i < 64; ++i) {
        std::string uri = "http://h.example/u" + std::to_string(i);
        if (s.draw_ms(1, uri) != first) uri_varies = true;
        if (other.draw_ms(1, uri) != s.draw_ms(1, uri)) seed_varies = true;
    }
    CHECK(uri_varies);
    CHECK(seed_varies);

    CHECK(s.covers(1));
    CHECK(!s.covers(2));
    CHECK_THROWS_AS(s.draw_ms(2, "http://h.example/x"), DataError);
}

TEST_CASE("brute force evaluation matches hand-computed aggregates") {
    auto roster = toy_roster();
    ModelRegistry reg = make_registry(roster);
    LabelMatrix eval = eval_matrix(roster);
    LatencySampler sampler(fixed_latency(), 11);

    EvalReport r = evaluate(eval, reg, RoutingStrategy::brute_force_all(), sampler);
    CHECK(r.strategy == "brute_force_all");
    CHECK(r.eval_size == 30);
    CHECK(r.recall_defined == 24);
    CHECK(r.total_requests == 150);
    CHECK(r.complete_timemap_fraction == doctest::Approx(1.0));
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].target_tpr == 1.0);
    CHECK(r.rows[0].scope == "all");
    CHECK(r.rows[0].avg_requests == doctest::Approx(5.0));
    CHECK(r.rows[0].avg_recall == doctest::Approx(1.0));
    // every URI: sum = 100+200+300+400+50 ms, max = 400 ms
    CHECK(r.rows[0].avg_sum_t_s == doctest::Approx(1.05));
    CHECK(r.rows[0].avg_max_t_s == doctest::Approx(0.4));

    // archive "ia" is polled everywhere and holds 6 URIs
    CHECK(r.confusion[0].tp == 6);
    CHECK(r.confusion[0].fp == 24);
    CHECK(r.confusion[0].fn == 0);
    // "cold" never holds anything
    CHECK(r.confusion[4].fp == 30);
    CHECK(r.confusion[4].tp == 0);
}

TEST_CASE("classifier evaluation matches hand-computed aggregates") {
    auto roster = toy_roster();
    ModelRegistry reg = make_registry(roster);
    LabelMatrix eval = eval_matrix(roster);
    LatencySampler sampler(fixed_latency(), 11);

    EvalReport r = evaluate(eval, reg, RoutingStrategy::classifier(0.9), sampler);
    // per cycle: aa {ia,a1}, bb {ia,a2}, cc {ia,p1}, aa {ia,a1}, zz {ia}
    CHECK(r.total_requests == 54);
    CHECK(r.rows[0].avg_requests == doctest::Approx(1.8));
    CHECK(r.rows[0].avg_recall == doctest::Approx(1.0));
    CHECK(r.complete_timemap_fraction == doctest::Approx(1.0));
    CHECK(r.rows[0].target_tpr == 0.9);
    // sums per cycle: 0.3 + 0.4 + 0.5 + 0.3 + 0.1; maxes: 0.2+0.3+0.4+0.2+0.1
    CHECK(r.rows[0].avg_sum_t_s == doctest::Approx(1.6 / 5.0));
    CHECK(r.rows[0].avg_max_t_s == doctest::Approx(1.2 / 5.0));

    CHECK(r.confusion[1].tp == 12);
    CHECK(r.confusion[1].fn == 0);
    CHECK(r.confusion[1].fp == 0);
    CHECK(r.confusion[1].tn == 18);
    CHECK(r.confusion[0].fn == 0);  // always-poll archive misses nothing
    CHECK(r.confusion[4].tn == 30);
}

TEST_CASE("confusion identities hold for every archive") {
    auto roster = toy_roster();
    ModelRegistry reg = make_registry(roster);
    LabelMatrix eval = eval_matrix(roster);
    LatencySampler sampler(fixed_latency(), 11);

    for (auto strategy : {RoutingStrategy::brute_force_all(),
                          RoutingStrategy::brute_force_compliant(),
                          RoutingStrategy::classifier(0.9),
                          RoutingStrategy::classifier(0.5)}) {
        EvalReport r = evaluate(eval, reg, strategy, sampler);
        REQUIRE(r.confusion.size() == roster->size());
        std::uint64_t polled_total = 0;
        for (std::uint32_t a = 0; a < roster->size(); ++a) {
            const auto& c = r.confusion[a];
            CHECK(c.tp + c.fn == eval.positive_counts()[a]);
            CHECK(c.tp + c.fn + c.fp + c.tn == r.eval_size);
            polled_total += c.tp + c.fp;
        }
        CHECK(polled_total == r.total_requests);
        CHECK(r.rows[0].avg_max_t_s <= r.rows[0].avg_sum_t_s);
    }
}

TEST_CASE("request reduction between strategies") {
    auto roster = toy_roster();
    ModelRegistry reg = make_registry(roster);
    LabelMatrix eval = eval_matrix(roster);
    LatencySampler sampler(fixed_latency(), 11);

    EvalReport brute = evaluate(eval, reg, RoutingStrategy::brute_force_all(), sampler);
    EvalReport routed = evaluate(eval, reg, RoutingStrategy::classifier(0.9), sampler);
    CHECK(request_reduction(brute, routed) == doctest::Approx(100.0 * (1.0 - 54.0 / 150.0)));
    CHECK(request_reduction(brute, brute) == doctest::Approx(0.0));

    // published aggregator workload: 3186633 -> 916881 requests is a 71% drop
    EvalReport a, b;
    a.total_requests = 3186633;
    b.total_requests = 916881;
    CHECK(request_reduction(a, b) == doctest::Approx(71.227).epsilon(0.001));
    EvalReport zero;
    CHECK_THROWS_AS(request_reduction(zero, b), DataError);
}

TEST_CASE("scatter points partition the evaluation set") {
    auto roster = toy_roster();
    ModelRegistry reg = make_registry(roster);
    LabelMatrix eval = eval_matrix(roster);
    LatencySampler sampler(fixed_latency(), 11);

    EvalReport r = evaluate(eval, reg, RoutingStrategy::classifier(0.9), sampler);
    std::uint64_t total = 0;
    std::uint64_t undefined = 0;
    for (const auto& p : r.scatter) {
        total += p.uri_count;
        if (p.recall == -1.0) undefined += p.uri_count;
    }
    CHECK(total == r.eval_size);
    CHECK(undefined == r.eval_size - r.recall_defined);

    auto path = (std::filesystem::temp_directory_path() / "memrouter_scatter.csv").string();
    export_scatter(r, path);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "recall,requests,uri_count");
    std::size_t rows = 0;
    while (std::getline(in, row)) ++rows;
    CHECK(rows == r.scatter.size());
    std::filesystem::remove(path);
}

TEST_CASE("evaluation is deterministic and round-trips through JSON") {
    auto roster = toy_roster();
    ModelRegistry reg = make_registry(roster);
    LabelMatrix eval = eval_matrix(roster);
    std::map<std::uint32_t, LatencySampleSet> sets = fixed_latency();
    for (auto& [a, s] : sets) s.samples_ms = {10, 20, 30, 40, 50};
    LatencySampler sampler(sets, 99);

    EvalReport a = evaluate(eval, reg, RoutingStrategy::classifier(0.5), sampler);
    EvalReport b = evaluate(eval, reg, RoutingStrategy::classifier(0.5), sampler);
    CHECK(a.to_json_string() == b.to_json_string());

    EvalReport back = EvalReport::from_json_string(a.to_json_string());
    CHECK(back.to_json_string() == a.to_json_string());

    auto path = (std::filesystem::temp_directory_path() / "memrouter_eval.json").string();
    a.save(path);
    CHECK(EvalReport::load(path).to_json_string() == a.to_json_string());
    std::filesystem::remove(path);
}

TEST_CASE("strategies share the same keyed draws") {
    auto roster = toy_roster();
    ModelRegistry reg = make_registry(roster);
    LabelMatrix eval = eval_matrix(roster);
    std::map<std::uint32_t, LatencySampleSet> sets = fixed_latency();
    for (auto& [a, s] : sets) s.samples_ms = {10, 20, 30, 40, 50, 60, 70, 80};
    LatencySampler sampler(sets, 3);

    auto reports = evaluate(eval, reg,
                            {RoutingStrategy::brute_force_all(),
                             RoutingStrategy::classifier(0.9)},
                            sampler);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].strategy == "brute_force_all");
    CHECK(reports[1].strategy != reports[0].strategy);
    // the classifier polls a subset per URI, so its slowest response can
    // never exceed the brute-force one under shared draws
    CHECK(reports[1].rows[0].avg_max_t_s <= reports[0].rows[0].avg_max_t_s);
    CHECK(reports[1].rows[0].avg_sum_t_s <= reports[0].rows[0].avg_sum_t_s);
    CHECK(reports[1].total_requests <= reports[0].total_requests);
}

TEST_CASE("polled archives without latency samples are an error") {
    auto roster = toy_roster();
    ModelRegistry reg = make_registry(roster);
    LabelMatrix eval = eval_matrix(roster);
    auto sets = fixed_latency();
    sets.erase(4);  // "cold" has no observations
    LatencySampler sampler(sets, 11);

    CHECK_THROWS_AS(evaluate(eval, reg, RoutingStrategy::brute_force_all(), sampler),
                    DataError);
    // the classifier never polls the modelless archive, so it still works
    CHECK_NOTHROW(evaluate(eval, reg, RoutingStrategy::classifier(0.9), sampler));
}

TEST_CASE("confusion requires aligned decisions") {
    auto roster = toy_roster();
    LabelMatrix eval = eval_matrix(roster);
    CHECK_THROWS_AS(confusion(eval, {}), UsageError);
}

TEST_CASE("report table exports as CSV") {
    auto roster = toy_roster();
    ModelRegistry reg = make_registry(roster);
    LabelMatrix eval = eval_matrix(roster);
    LatencySampler sampler(fixed_latency(), 11);
    auto reports = evaluate(eval, reg,
                            {RoutingStrategy::brute_force_all(),
                             RoutingStrategy::classifier(0.9, StrategyScope::compliant_only)},
                            sampler);
    auto path = (std::filesystem::temp_directory_path() / "memrouter_table.csv").string();
    export_report_csv(reports, path);
    std::ifstream in(path);
    std::string header, row1, row2;
    std::getline(in, header);
    std::getline(in, row1);
    std::getline(in, row2);
    CHECK(header == "tpr,scope,avg_requests,avg_recall,avg_sum_t,avg_max_t");
    CHECK(row1.rfind("1,all,5,", 0) == 0);
    CHECK(row2.find(",compliant,") != std::string::npos);
    std::filesystem::remove(path);
}
