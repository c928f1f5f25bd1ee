#include "memrouter/registry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "memrouter/digest.hpp"
#include "memrouter/errors.hpp"

namespace memrouter {

using nlohmann::json;

ModelRegistry::ModelRegistry(std::shared_ptr<const Roster> roster, Vocabulary vocab,
                             std::map<std::uint32_t, CalibratedArchive> archives)
    : roster_(std::move(roster)), vocab_(std::move(vocab)),
      archives_(std::move(archives)) {
    for (const auto& [idx, ca] : archives_) {
        if (idx >= roster_->size())
            throw DataError("registry archive index out of roster range");
        if (ca.model.vocab_digest != vocab_.digest())
            throw DataError("model for '" + ca.model.archive_id +
                            "' was trained against a different vocabulary");
    }
    std::string body = vocab_.digest();
    for (const auto& [idx, ca] : archives_) {
        body += "|" + ca.model.archive_id + ":" + to_string(ca.model.algo);
        for (const auto& op : ca.points)
            body += "," + std::to_string(op.target_tpr) + "=" +
                    std::to_string(op.threshold);
    }
    version_ = content_digest(body);
}

std::optional<double> ModelRegistry::threshold_for(std::uint32_t archive,
                                                   double target_tpr) const {
    auto it = archives_.find(archive);
    if (it == archives_.end()) return std::nullopt;
    for (const auto& op : it->second.points)
        if (std::abs(op.target_tpr - target_tpr) < 1e-9) return op.threshold;
    return std::nullopt;
}

namespace {

json op_to_json(const OperatingPoint& op) {
    return {{"archive", op.archive_id},
            {"algorithm", to_string(op.algorithm)},
            {"target_tpr", op.target_tpr},
            {"threshold", op.threshold},
            {"achieved_tpr", op.achieved_tpr},
            {"achieved_fpr", op.achieved_fpr},
            {"calibration_size", op.calibration_size},
            {"calibration_positives", op.calibration_positives}};
}

OperatingPoint op_from_json(const json& j) {
    OperatingPoint op;
    op.archive_id = j.at("archive").get<std::string>();
    op.algorithm = algo_from_string(j.at("algorithm").get<std::string>());
    op.target_tpr = j.at("target_tpr").get<double>();
    op.threshold = j.at("threshold").get<double>();
    op.achieved_tpr = j.at("achieved_tpr").get<double>();
    op.achieved_fpr = j.at("achieved_fpr").get<double>();
    op.calibration_size = j.value("calibration_size", std::size_t{0});
    op.calibration_positives = j.value("calibration_positives", std::size_t{0});
    return op;
}

} // namespace

std::string ModelRegistry::to_json_string() const {
    json doc;
    doc["version"] = 1;
    doc["registry_version"] = version_;
    doc["roster"] = json::parse(roster_->to_json_string());
    doc["vocabulary"] = json::parse(vocab_.to_json_string());
    json archives = json::array();
    for (const auto& [idx, ca] : archives_) {
        json entry;
        entry["model"] = json::parse(ca.model.to_json_string());
        json points = json::array();
        for (const auto& op : ca.points) points.push_back(op_to_json(op));
        entry["operating_points"] = points;
        archives.push_back(std::move(entry));
    }
    doc["archives"] = std::move(archives);
    return doc.dump(2) + "\n";
}

ModelRegistry ModelRegistry::from_json_string(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("registry json parse error: ") + e.what());
    }
    if (doc.value("version", 0) != 1) throw DataError("unsupported registry version");
    auto roster = std::make_shared<Roster>(
        Roster::from_json_string(doc.at("roster").dump()));
    Vocabulary vocab = Vocabulary::from_json_string(doc.at("vocabulary").dump());
    std::map<std::uint32_t, CalibratedArchive> archives;
    for (const auto& entry : doc.at("archives")) {
        CalibratedArchive ca{
            ArchiveModel::from_json_string(entry.at("model").dump(), *roster), {}};
        for (const auto& jop : entry.at("operating_points"))
            ca.points.push_back(op_from_json(jop));
        archives.emplace(ca.model.archive, std::move(ca));
    }
    return ModelRegistry(std::move(roster), std::move(vocab), std::move(archives));
}

void ModelRegistry::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write registry: " + path);
    out << to_json_string();
}

ModelRegistry ModelRegistry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open registry: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json_string(text);
}

ModelRegistry calibrate_registry(const std::vector<ArchiveModel>& candidates,
                                 const LabelMatrix& training,
                                 const LabelMatrix& calibration,
                                 const Vocabulary& vocab,
                                 const std::vector<double>& targets) {
    if (targets.empty()) throw UsageError("calibrate_registry needs >= 1 target TPR");
    double overlap = uri_overlap_fraction(training, calibration);
    if (overlap > 0.001)
        throw DataError("calibration set overlaps training set (" +
                        std::to_string(overlap * 100.0) +
                        "%); thresholds would be overly optimistic");

    auto vectors = vectorize_matrix(calibration, vocab);

    // Group candidates per archive, keeping algorithm enum order stable.
    std::map<std::uint32_t, std::vector<ArchiveModel>> by_archive;
    for (const auto& m : candidates) {
        if (m.vocab_digest != vocab.digest())
            throw DataError("candidate model for '" + m.archive_id +
                            "' has a mismatched vocabulary digest");
        by_archive[m.archive].push_back(m);
    }

    std::map<std::uint32_t, CalibratedArchive> calibrated;
    for (auto& [archive, models] : by_archive) {
        std::sort(models.begin(), models.end(), [](const auto& a, const auto& b) {
            return static_cast<int>(a.algo) < static_cast<int>(b.algo);
        });
        std::vector<std::uint8_t> labels(calibration.size());
        for (std::size_t i = 0; i < calibration.size(); ++i)
            labels[i] = calibration.records()[i].holds(archive) ? 1 : 0;

        // Winner: lowest FPR averaged over the requested targets, among the
        // candidates that realize every target within kCalibrationTprSlack
        // (falling back to all candidates when none does).
        std::vector<std::vector<OperatingPoint>> all_points(models.size());
        std::vector<double> mean_fpr(models.size(), 0.0);
        std::vector<bool> realizable(models.size(), true);
        bool any_realizable = false;
        for (std::size_t c = 0; c < models.size(); ++c) {
            for (double t : targets) {
                auto [idx, op] = select_best_algorithm({models[c]}, vectors, labels, t);
                (void)idx;
                all_points[c].push_back(op);
                mean_fpr[c] += op.achieved_fpr;
                if (op.achieved_tpr - t > kCalibrationTprSlack) realizable[c] = false;
            }
            mean_fpr[c] /= static_cast<double>(targets.size());
            any_realizable = any_realizable || realizable[c];
        }
        std::size_t best = 0;
        double best_fpr = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < models.size(); ++c) {
            if (any_realizable && !realizable[c]) continue;
            if (mean_fpr[c] < best_fpr) {
                best_fpr = mean_fpr[c];
                best = c;
            }
        }
        calibrated.emplace(archive,
                           CalibratedArchive{models[best], all_points[best]});
    }
    return ModelRegistry(calibration.roster_ptr(), vocab, std::move(calibrated));
}

} // namespace memrouter
