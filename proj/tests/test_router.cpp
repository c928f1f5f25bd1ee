#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "memrouter/errors.hpp"
#include "memrouter/router.hpp"

using namespace memrouter;

namespace {

const char* kPsl = "com\n";

std::shared_ptr<const Roster> toy_roster() {
    return std::make_shared<const Roster>(std::vector<ArchiveInfo>{
        {"ia", Compliance::native, true, true},
        {"a1", Compliance::native, true, false},
        {"a2", Compliance::native, true, false},
        {"p1", Compliance::by_proxy, true, false},
        {"cold", Compliance::native, true, false},  // never trained
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

ModelRegistry make_registry() {
    auto roster = toy_roster();
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

bool polls(const RoutingDecision& d, std::uint32_t a) {
    return std::find(d.polled.begin(), d.polled.end(), a) != d.polled.end();
}

} // namespace

TEST_CASE("strategy names identify kind, target and scope") {
    CHECK(RoutingStrategy::brute_force_all().name() == "brute_force_all");
    CHECK(RoutingStrategy::brute_force_compliant().name() == "brute_force_compliant");
    std::string n = RoutingStrategy::classifier(0.6, StrategyScope::compliant_only).name();
    CHECK(n.find("classifier(tpr=0.6") == 0);
    CHECK(n.find("compliant") != std::string::npos);
    CHECK(RoutingStrategy::classifier(0.6).name().find(",all)") != std::string::npos);
}

TEST_CASE("brute force polls the full scope without scoring") {
    ModelRegistry reg = make_registry();
    RoutingDecision all =
        route("http://h.example/aa/x", RoutingStrategy::brute_force_all(), reg);
    CHECK(all.polled == std::vector<std::uint32_t>{0, 1, 2, 3, 4});
    CHECK(all.scores.empty());
    CHECK(!all.error);
    CHECK(all.latency_us >= 0.0);

    RoutingDecision compliant =
        route("http://h.example/aa/x", RoutingStrategy::brute_force_compliant(), reg);
    CHECK(compliant.polled == std::vector<std::uint32_t>{0, 1, 2, 4});
}

TEST_CASE("classifier polls the matching archive plus always-poll") {
    ModelRegistry reg = make_registry();
    RoutingDecision d =
        route("http://h.example/aa/new", RoutingStrategy::classifier(0.9), reg);
    CHECK(d.polled == std::vector<std::uint32_t>{0, 1});
    // one score per modeled in-scope archive; "cold" has no model, "ia" no score
    REQUIRE(d.scores.size() == 3);
    for (const auto& s : d.scores) {
        CHECK(s.threshold == reg.threshold_for(s.archive, 0.9).value());
        CHECK((polls(d, s.archive) == (s.score >= s.threshold)));
    }
    CHECK(std::is_sorted(d.polled.begin(), d.polled.end()));

    RoutingDecision d2 =
        route("http://h.example/cc/new", RoutingStrategy::classifier(0.9), reg);
    CHECK(d2.polled == std::vector<std::uint32_t>{0, 3});
}

TEST_CASE("compliant-only scope drops proxy archives before scoring") {
    ModelRegistry reg = make_registry();
    RoutingDecision d = route("http://h.example/cc/new",
                              RoutingStrategy::classifier(0.9, StrategyScope::compliant_only),
                              reg);
    // the proxy archive that holds this URI is out of scope
    CHECK(d.polled == std::vector<std::uint32_t>{0});
    CHECK(d.scores.size() == 2);
    for (const auto& s : d.scores) CHECK(s.archive != 3);
}

TEST_CASE("unrecognized URIs fall back to the always-poll archive") {
    ModelRegistry reg = make_registry();
    RoutingDecision d =
        route("http://elsewhere.example/zz/q", RoutingStrategy::classifier(0.9), reg);
    CHECK(d.polled == std::vector<std::uint32_t>{0});
}

TEST_CASE("raising the target TPR can only widen the polled set") {
    ModelRegistry reg = make_registry();
    for (const char* uri :
         {"http://h.example/aa/new", "http://h.example/bb/new",
          "http://h.example/cc/new", "http://elsewhere.example/zz/q"}) {
        RoutingDecision lo = route(uri, RoutingStrategy::classifier(0.5), reg);
        RoutingDecision hi = route(uri, RoutingStrategy::classifier(0.9), reg);
        for (std::uint32_t a : lo.polled) CHECK(polls(hi, a));
    }
}

TEST_CASE("uncalibrated targets and bad URIs are usage errors") {
    ModelRegistry reg = make_registry();
    CHECK_THROWS_AS(route("http://h.example/aa/x", RoutingStrategy::classifier(0.7), reg),
                    UsageError);
    CHECK_THROWS_AS(route("not a uri", RoutingStrategy::classifier(0.9), reg),
                    UsageError);
    // brute force never touches models, so any calibration target works
    CHECK_NOTHROW(route("http://h.example/aa/x", RoutingStrategy::brute_force_all(), reg));
}

TEST_CASE("batch routing collects per-URI errors and continues") {
    ModelRegistry reg = make_registry();
    std::vector<std::string> uris = {"http://h.example/aa/x", "::not-a-uri::",
                                     "http://h.example/bb/x"};
    auto out = route_batch(uris, RoutingStrategy::classifier(0.9), reg);
    REQUIRE(out.size() == 3);
    CHECK(!out[0].error);
    CHECK(out[0].polled == std::vector<std::uint32_t>{0, 1});
    CHECK(out[1].error);
    CHECK(!out[1].error_message.empty());
    CHECK(out[1].polled.empty());
    CHECK(!out[2].error);
    CHECK(out[2].polled == std::vector<std::uint32_t>{0, 2});
}
