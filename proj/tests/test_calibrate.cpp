#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "memrouter/errors.hpp"
#include "memrouter/registry.hpp"

using namespace memrouter;

namespace {

const char* kPsl = "com\n";

Vocabulary two_token_vocab() {
    Eigen::Matrix<double, kCountDim, 1> mean = Eigen::Matrix<double, kCountDim, 1>::Zero();
    Eigen::Matrix<double, kCountDim, 1> stdev = Eigen::Matrix<double, kCountDim, 1>::Ones();
    return Vocabulary({}, {}, 3, NgramScope::whole, {"aa", "bb"}, mean, stdev, kPsl);
}

FeatureVector fv(std::vector<std::uint32_t> sparse) {
    FeatureVector v;
    v.dense.setZero();
    v.sparse = std::move(sparse);
    return v;
}

std::shared_ptr<const Roster> toy_roster() {
    return std::make_shared<const Roster>(std::vector<ArchiveInfo>{
        {"ia", Compliance::native, true, true},
        {"a1", Compliance::native, true, false},
        {"a2", Compliance::native, true, false},
    });
}

ArchiveModel linear_model(const Vocabulary& vocab, Algo algo, double w36,
                          double w37, double bias) {
    ArchiveModel m;
    m.archive_id = "a1";
    m.archive = 1;
    m.algo = algo;
    m.weights = Eigen::VectorXd::Zero(vocab.total_dim());
    m.weights[36] = w36;
    m.weights[37] = w37;
    m.bias = bias;
    m.vocab_digest = vocab.digest();
    return m;
}

// Records whose path token decides the holder: /aa -> a1, /bb -> a2.
LabelMatrix token_matrix(const std::shared_ptr<const Roster>& roster, int n,
                         const std::string& tag) {
    std::vector<HoldingsRecord> recs;
    for (int i = 0; i < n; ++i) {
        bool a1 = i % 2 == 0;
        recs.push_back({"http://h.example/" + std::string(a1 ? "aa" : "bb") + "/" +
                            tag + std::to_string(i),
                        {a1 ? 1u : 2u}});
    }
    return LabelMatrix(roster, recs);
}

} // namespace

TEST_CASE("six-point roc sweep matches a hand computation") {
    std::vector<std::pair<double, int>> scored = {
        {0.9, 1}, {0.8, 0}, {0.7, 1}, {0.6, 1}, {0.5, 0}, {0.4, 0}};
    RocCurve c = roc(scored);

    REQUIRE(c.points.size() == 8);
    CHECK(std::isinf(c.points[0].threshold));
    CHECK(c.points[0].tpr == 0.0);
    CHECK(c.points[0].fpr == 0.0);
    CHECK(c.points[1].threshold == 0.9);
    CHECK(c.points[1].tpr == doctest::Approx(1.0 / 3.0));
    CHECK(c.points[1].fpr == 0.0);
    CHECK(c.points[2].fpr == doctest::Approx(1.0 / 3.0));
    CHECK(c.points[3].tpr == doctest::Approx(2.0 / 3.0));
    CHECK(c.points[4].threshold == 0.6);
    CHECK(c.points[4].tpr == 1.0);
    CHECK(c.points[6].tpr == 1.0);
    CHECK(c.points[6].fpr == 1.0);
    // closing sentinel at threshold zero
    CHECK(c.points[7].threshold == 0.0);
    CHECK(c.points[7].tpr == 1.0);
    CHECK(c.points[7].fpr == 1.0);

    // trapezoids: 1/9 + 1/3 + 1/3
    CHECK(c.auc == doctest::Approx(7.0 / 9.0));

    CHECK(pick_threshold(c, 0.5).threshold == 0.7);
    CHECK(pick_threshold(c, 1.0).threshold == 0.6);
    CHECK(pick_threshold(c, 0.3).threshold == 0.9);
}

TEST_CASE("perfect separation yields unit auc and zero fpr") {
    RocCurve c = roc({{0.9, 1}, {0.8, 1}, {0.2, 0}, {0.1, 0}});
    CHECK(c.auc == doctest::Approx(1.0));
    RocPoint p = pick_threshold(c, 1.0);
    CHECK(p.threshold == 0.8);
    CHECK(p.fpr == 0.0);
}

TEST_CASE("random scores have auc near one half") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<double, int>> scored;
    for (int i = 0; i < 10000; ++i) scored.push_back({unif(rng), i % 2});
    CHECK(roc(scored).auc == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("auc is invariant under monotone score transforms") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<double, int>> a, b;
    for (int i = 0; i < 500; ++i) {
        double s = unif(rng);
        int y = unif(rng) < s ? 1 : 0;
        a.push_back({s, y});
        b.push_back({0.1 + s * s / 2.0, y});  // strictly increasing map
    }
    CHECK(roc(a).auc == doctest::Approx(roc(b).auc).epsilon(1e-12));
}

TEST_CASE("tied scores collapse to one sweep step") {
    RocCurve c = roc({{0.5, 1}, {0.5, 0}, {0.5, 1}, {0.5, 0}});
    REQUIRE(c.points.size() == 3);
    CHECK(c.points[1].threshold == 0.5);
    CHECK(c.points[1].tpr == 1.0);
    CHECK(c.points[1].fpr == 1.0);
    CHECK(c.auc == doctest::Approx(0.5));
}

TEST_CASE("roc rejects single-class labels, picker rejects bad targets") {
    CHECK_THROWS_AS(roc({{0.5, 1}, {0.6, 1}}), DataError);
    CHECK_THROWS_AS(roc({}), DataError);
    RocCurve c = roc({{0.9, 1}, {0.1, 0}});
    CHECK_THROWS_AS(pick_threshold(c, 0.0), UsageError);
    CHECK_THROWS_AS(pick_threshold(c, -0.5), UsageError);
    CHECK_THROWS_AS(pick_threshold(c, 1.1), UsageError);
}

TEST_CASE("picked thresholds loosen as the target grows") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::pair<double, int>> scored;
    for (int i = 0; i < 2000; ++i) {
        double s = unif(rng);
        scored.push_back({s, unif(rng) < s ? 1 : 0});
    }
    RocCurve c = roc(scored);
    double prev_threshold = std::numeric_limits<double>::infinity();
    double prev_tpr = -1.0;
    for (double target : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
        RocPoint p = pick_threshold(c, target);
        CHECK(p.tpr >= target);
        CHECK(p.threshold <= prev_threshold);
        CHECK(p.tpr >= prev_tpr);
        prev_threshold = p.threshold;
        prev_tpr = p.tpr;
    }
}

TEST_CASE("algorithm selection prefers the lower false-positive rate") {
    Vocabulary vocab = two_token_vocab();
    // column 36 marks positives, column 37 negatives
    std::vector<FeatureVector> X;
    std::vector<std::uint8_t> y;
    for (int i = 0; i < 40; ++i) {
        X.push_back(fv({i % 2 == 0 ? 36u : 37u}));
        y.push_back(i % 2 == 0 ? 1 : 0);
    }
    ArchiveModel sharp = linear_model(vocab, Algo::logreg, 4.0, -4.0, 0.0);
    ArchiveModel blunt = linear_model(vocab, Algo::svm, 0.0, 0.0, 0.0);

    auto [idx, op] = select_best_algorithm({sharp, blunt}, X, y, 0.9);
    CHECK(idx == 0);
    CHECK(op.algorithm == Algo::logreg);
    CHECK(op.achieved_fpr == 0.0);
    CHECK(op.achieved_tpr == 1.0);
    CHECK(op.calibration_size == 40);
    CHECK(op.calibration_positives == 20);

    auto [idx2, op2] = select_best_algorithm({blunt, sharp}, X, y, 0.9);
    CHECK(idx2 == 1);
    CHECK(op2.algorithm == Algo::logreg);

    // exact ties keep the earlier candidate
    ArchiveModel blunt2 = blunt;
    blunt2.algo = Algo::logreg;
    auto [idx3, op3] = select_best_algorithm({blunt2, blunt}, X, y, 0.9);
    CHECK(idx3 == 0);
    CHECK(op3.algorithm == Algo::logreg);

    CHECK_THROWS_AS(select_best_algorithm({}, X, y, 0.9), UsageError);
}

TEST_CASE("roc exports as CSV") {
    RocCurve c = roc({{0.9, 1}, {0.1, 0}});
    auto path = (std::filesystem::temp_directory_path() / "memrouter_roc.csv").string();
    export_roc_csv("a1", Algo::mnb, c, path);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "archive,algorithm,threshold,tpr,fpr");
    std::size_t rows = 0;
    while (std::getline(in, row)) {
        CHECK(row.rfind("a1,mnb,", 0) == 0);
        ++rows;
    }
    CHECK(rows == c.points.size());
    std::filesystem::remove(path);
}

TEST_CASE("registry calibration picks per-archive winners and thresholds") {
    auto roster = toy_roster();
    Vocabulary vocab = two_token_vocab();
    LabelMatrix training = token_matrix(roster, 60, "t");
    LabelMatrix calibration = token_matrix(roster, 40, "c");

    std::vector<ArchiveModel> candidates;
    TrainConfig cfg;
    cfg.trained_at = "inputs:test";
    for (std::uint32_t archive : {1u, 2u})
        for (Algo algo : {Algo::logreg, Algo::mnb, Algo::svm})
            candidates.push_back(train(training, vocab, archive, algo, cfg));

    std::vector<double> targets = {0.9, 0.5};
    ModelRegistry reg =
        calibrate_registry(candidates, training, calibration, vocab, targets);

    REQUIRE(reg.archives().size() == 2);
    for (const auto& [archive, ca] : reg.archives()) {
        REQUIRE(ca.points.size() == 2);
        for (const auto& op : ca.points) {
            CHECK(op.achieved_tpr >= op.target_tpr);
            CHECK(op.calibration_size == 40);
            // the tokens separate perfectly, so the winner has no false positives
            CHECK(op.achieved_fpr == 0.0);
        }
    }
    CHECK(reg.threshold_for(1, 0.9).has_value());
    CHECK(reg.threshold_for(1, 0.5).has_value());
    CHECK(!reg.threshold_for(1, 0.7).has_value());
    CHECK(!reg.threshold_for(0, 0.9).has_value());  // always-poll archive
    CHECK(!reg.version().empty());
}

TEST_CASE("registry round-trips and versions deterministically") {
    auto roster = toy_roster();
    Vocabulary vocab = two_token_vocab();
    LabelMatrix training = token_matrix(roster, 60, "t");
    LabelMatrix calibration = token_matrix(roster, 40, "c");
    TrainConfig cfg;
    cfg.trained_at = "inputs:test";
    std::vector<ArchiveModel> candidates = {train(training, vocab, 1, Algo::mnb, cfg)};

    ModelRegistry reg =
        calibrate_registry(candidates, training, calibration, vocab, {0.8});
    std::string text = reg.to_json_string();
    ModelRegistry back = ModelRegistry::from_json_string(text);
    CHECK(back.to_json_string() == text);
    CHECK(back.version() == reg.version());
    CHECK(back.threshold_for(1, 0.8) == reg.threshold_for(1, 0.8));

    // same inputs rebuild to the same version
    ModelRegistry again =
        calibrate_registry(candidates, training, calibration, vocab, {0.8});
    CHECK(again.version() == reg.version());
    // a different operating point changes it
    ModelRegistry shifted =
        calibrate_registry(candidates, training, calibration, vocab, {0.5});
    CHECK(shifted.version() != reg.version());

    CHECK_THROWS_AS(ModelRegistry::from_json_string("{}"), DataError);
    CHECK_THROWS_AS(ModelRegistry::from_json_string("not json"), DataError);
}

TEST_CASE("calibration rejects leakage and mismatched vocabularies") {
    auto roster = toy_roster();
    Vocabulary vocab = two_token_vocab();
    LabelMatrix training = token_matrix(roster, 60, "t");
    LabelMatrix calibration = token_matrix(roster, 40, "c");
    std::vector<ArchiveModel> candidates = {train(training, vocab, 1, Algo::mnb, {})};

    // calibrating on the training set itself is leakage
    CHECK_THROWS_AS(
        calibrate_registry(candidates, training, training, vocab, {0.8}), DataError);
    CHECK_THROWS_AS(
        calibrate_registry(candidates, training, calibration, vocab, {}), UsageError);

    std::vector<ArchiveModel> tampered = candidates;
    tampered[0].vocab_digest = "bogus";
    CHECK_THROWS_AS(
        calibrate_registry(tampered, training, calibration, vocab, {0.8}), DataError);

    // registry construction checks archive indices against the roster
    ArchiveModel stray = candidates[0];
    stray.archive = 9;
    std::map<std::uint32_t, CalibratedArchive> bad;
    bad.emplace(9u, CalibratedArchive{stray, {}});
    CHECK_THROWS_AS(ModelRegistry(roster, vocab, std::move(bad)), DataError);
}
