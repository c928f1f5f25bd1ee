#include "memrouter/learn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "memrouter/errors.hpp"

namespace memrouter {

using nlohmann::json;

std::string to_string(Algo a) {
    switch (a) {
        case Algo::logreg: return "logreg";
        case Algo::mnb: return "mnb";
        case Algo::svm: return "svm";
    }
    return "logreg";
}

Algo algo_from_string(const std::string& s) {
    if (s == "logreg") return Algo::logreg;
    if (s == "mnb") return Algo::mnb;
    if (s == "svm") return Algo::svm;
    throw UsageError("unknown algorithm: " + s);
}

namespace {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    if (x > 30) return x;
    if (x < -30) return std::exp(x);
    return std::log1p(std::exp(x));
}

double raw_margin(const Eigen::VectorXd& w, double bias, const FeatureVector& v) {
    double m = w.head(kCountDim).dot(v.dense) + bias;
    for (auto j : v.sparse) m += w[j];
    return m;
}

std::vector<double> make_class_weights(const std::vector<std::uint8_t>& labels,
                                       bool balanced) {
    const double n = static_cast<double>(labels.size());
    double pos = 0;
    for (auto y : labels) pos += y;
    double w_pos = 1.0, w_neg = 1.0;
    if (balanced && pos > 0 && pos < n) {
        w_pos = n / (2.0 * pos);
        w_neg = n / (2.0 * (n - pos));
    }
    std::vector<double> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = labels[i] ? w_pos : w_neg;
    return out;
}

struct SgdProblem {
    const std::vector<FeatureVector>& X;
    const std::vector<std::uint8_t>& y;
    const std::vector<double>& cw;
    bool hinge; // svm vs logistic
};

// Per-example gradient factor d(loss)/d(margin).
double grad_factor(const SgdProblem& p, std::size_t i, double margin) {
    if (p.hinge) {
        double ypm = p.y[i] ? 1.0 : -1.0;
        return (ypm * margin < 1.0) ? -ypm * p.cw[i] : 0.0;
    }
    return (sigmoid(margin) - static_cast<double>(p.y[i])) * p.cw[i];
}

double dataset_loss(const SgdProblem& p, const std::vector<std::size_t>& idxs,
                    const Eigen::VectorXd& w, double bias, double l2) {
    double loss = 0;
    for (auto i : idxs) {
        double m = raw_margin(w, bias, p.X[i]);
        if (p.hinge) {
            double ypm = p.y[i] ? 1.0 : -1.0;
            loss += p.cw[i] * std::max(0.0, 1.0 - ypm * m);
        } else {
            loss += p.cw[i] * (softplus(m) - static_cast<double>(p.y[i]) * m);
        }
    }
    return loss + 0.5 * l2 * w.squaredNorm();
}

// SGD with the usual lazy L2 scaling trick: stored weights are w_raw,
// effective weights are scale * w_raw, so the per-step shrink touches
// only a scalar and updates stay O(active features).
void run_sgd(const SgdProblem& p, const TrainConfig& cfg, Eigen::VectorXd& w,
             double& bias, int& epochs_run) {
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> idxs(p.X.size());
    for (std::size_t i = 0; i < idxs.size(); ++i) idxs[i] = i;
    std::shuffle(idxs.begin(), idxs.end(), rng);

    std::size_t n_val = static_cast<std::size_t>(
        cfg.validation_fraction * static_cast<double>(idxs.size()));
    // Early stopping needs both classes in the carved-out slice.
    if (n_val < 8) n_val = 0;
    std::vector<std::size_t> val(idxs.begin(), idxs.begin() + n_val);
    std::vector<std::size_t> train(idxs.begin() + n_val, idxs.end());
    {
        bool has_pos = false, has_neg = false;
        for (auto i : val) (p.y[i] ? has_pos : has_neg) = true;
        if (!(has_pos && has_neg)) {
            train = idxs;
            val.clear();
        }
    }

    double scale = 1.0;
    double best_val = std::numeric_limits<double>::infinity();
    int worse_streak = 0;
    const std::size_t batch = std::max(1, cfg.batch_size);
    epochs_run = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        ++epochs_run;
        double lr = cfg.learning_rate / std::sqrt(static_cast<double>(epoch));
        std::shuffle(train.begin(), train.end(), rng);
        for (std::size_t start = 0; start < train.size(); start += batch) {
            std::size_t end = std::min(start + batch, train.size());
            double inv_b = 1.0 / static_cast<double>(end - start);
            // Shrink from L2 applies once per step.
            double shrink = 1.0 - lr * cfg.l2_lambda;
            if (shrink < 1e-3) shrink = 1e-3;
            double grad_bias = 0.0;
            std::vector<std::pair<std::size_t, double>> updates;
            for (std::size_t k = start; k < end; ++k) {
                std::size_t i = train[k];
                double m = scale * raw_margin(w, 0.0, p.X[i]) + bias;
                double g = grad_factor(p, i, m) * inv_b;
                if (g == 0.0) continue;
                grad_bias += g;
                for (int d = 0; d < kCountDim; ++d)
                    updates.emplace_back(d, g * p.X[i].dense[d]);
                for (auto j : p.X[i].sparse) updates.emplace_back(j, g);
            }
            scale *= shrink;
            for (auto& [d, g] : updates) w[d] -= lr * g / scale;
            bias -= lr * grad_bias;
            if (scale < 1e-6) {
                w *= scale;
                scale = 1.0;
            }
        }
        if (!val.empty()) {
            Eigen::VectorXd eff = w * scale;
            double vloss = dataset_loss(p, val, eff, bias, cfg.l2_lambda);
            if (vloss >= best_val) {
                if (++worse_streak >= 2) break;
            } else {
                best_val = vloss;
                worse_streak = 0;
            }
        }
    }
    w *= scale;
}

ArchiveModel train_mnb(const std::vector<FeatureVector>& X,
                       const std::vector<std::uint8_t>& y, ArchiveModel model,
                       std::uint32_t total_dim, const TrainConfig& cfg) {
    const std::uint32_t v_dim = total_dim - kCountDim;
    Eigen::VectorXd count_pos = Eigen::VectorXd::Zero(v_dim);
    Eigen::VectorXd count_neg = Eigen::VectorXd::Zero(v_dim);
    double n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        auto& c = y[i] ? count_pos : count_neg;
        (y[i] ? n_pos : n_neg) += 1.0;
        for (auto j : X[i].sparse) c[j - kCountDim] += 1.0;
    }
    const double a = cfg.mnb_alpha;
    const double t_pos = count_pos.sum() + a * v_dim;
    const double t_neg = count_neg.sum() + a * v_dim;
    model.log_theta_pos = ((count_pos.array() + a) / t_pos).log();
    model.log_theta_neg = ((count_neg.array() + a) / t_neg).log();
    model.log_prior_pos = std::log(n_pos / (n_pos + n_neg));
    model.log_prior_neg = std::log(n_neg / (n_pos + n_neg));

    // Log-odds form: binary-presence features make the posterior a
    // sigmoid of a sparse sum, uniform with the linear models.
    model.weights = Eigen::VectorXd::Zero(total_dim);
    model.weights.tail(v_dim) = model.log_theta_pos - model.log_theta_neg;
    model.bias = model.log_prior_pos - model.log_prior_neg;
    return model;
}

} // namespace

ArchiveModel train(const std::vector<FeatureVector>& vectors,
                   const std::vector<std::uint8_t>& labels,
                   const std::string& archive_id, std::uint32_t archive,
                   Algo algo, const Vocabulary& vocab, const TrainConfig& cfg) {
    if (vectors.size() != labels.size() || vectors.empty())
        throw UsageError("train: vectors and labels must be nonempty and aligned");
    std::size_t pos = 0;
    for (auto y : labels) pos += y;
    if (pos == 0 || pos == labels.size())
        throw DataError("archive '" + archive_id +
                        "' has a degenerate label distribution (" +
                        std::to_string(pos) + "/" + std::to_string(labels.size()) +
                        " positives); no classifier can be trained");

    ArchiveModel model;
    model.archive_id = archive_id;
    model.archive = archive;
    model.algo = algo;
    model.vocab_digest = vocab.digest();
    model.trained_at = cfg.trained_at.empty() ? "unset" : cfg.trained_at;
    model.config = cfg;
    model.train_examples = vectors.size();
    model.train_positives = pos;

    if (algo == Algo::mnb) return train_mnb(vectors, labels, model, vocab.total_dim(), cfg);

    auto cw = make_class_weights(labels, cfg.class_weighting);
    model.weights = Eigen::VectorXd::Zero(vocab.total_dim());
    model.bias = 0.0;
    SgdProblem problem{vectors, labels, cw, algo == Algo::svm};
    int epochs_run = 0;
    run_sgd(problem, cfg, model.weights, model.bias, epochs_run);
    model.config.epochs = epochs_run;
    return model;
}

ArchiveModel train(const LabelMatrix& matrix, const Vocabulary& vocab,
                   std::uint32_t archive, Algo algo, const TrainConfig& cfg) {
    auto vectors = vectorize_matrix(matrix, vocab);
    std::vector<std::uint8_t> labels(matrix.size());
    for (std::size_t i = 0; i < matrix.size(); ++i)
        labels[i] = matrix.records()[i].holds(archive) ? 1 : 0;
    return train(vectors, labels, matrix.roster().at(archive).id, archive, algo,
                 vocab, cfg);
}

double score(const ArchiveModel& model, const FeatureVector& v) {
    return sigmoid(raw_margin(model.weights, model.bias, v));
}

std::vector<double> predict_batch(const ArchiveModel& model,
                                  const std::vector<FeatureVector>& vectors) {
    std::vector<double> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) out.push_back(score(model, v));
    return out;
}

double logreg_loss(const Eigen::VectorXd& weights, double bias,
                   const std::vector<FeatureVector>& vectors,
                   const std::vector<std::uint8_t>& labels,
                   const std::vector<double>& example_weights, double l2_lambda) {
    double loss = 0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        double m = raw_margin(weights, bias, vectors[i]);
        loss += example_weights[i] *
                (softplus(m) - static_cast<double>(labels[i]) * m);
    }
    return loss + 0.5 * l2_lambda * weights.squaredNorm();
}

void logreg_gradient(const Eigen::VectorXd& weights, double bias,
                     const std::vector<FeatureVector>& vectors,
                     const std::vector<std::uint8_t>& labels,
                     const std::vector<double>& example_weights, double l2_lambda,
                     Eigen::VectorXd& grad_weights, double& grad_bias) {
    grad_weights = l2_lambda * weights;
    grad_bias = 0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        double m = raw_margin(weights, bias, vectors[i]);
        double g = (sigmoid(m) - static_cast<double>(labels[i])) * example_weights[i];
        grad_weights.head(kCountDim) += g * vectors[i].dense;
        for (auto j : vectors[i].sparse) grad_weights[j] += g;
        grad_bias += g;
    }
}

std::vector<FeatureVector> vectorize_matrix(const LabelMatrix& m,
                                            const Vocabulary& vocab) {
    std::vector<FeatureVector> out;
    out.reserve(m.size());
    for (const auto& r : m.records())
        out.push_back(vocab.extract_and_vectorize(decompose(r.uri)));
    return out;
}

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const json& j) {
    auto vals = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                             static_cast<long>(vals.size()));
}

} // namespace

std::string ArchiveModel::to_json_string() const {
    json doc;
    doc["version"] = 1;
    doc["archive"] = archive_id;
    doc["algorithm"] = to_string(algo);
    doc["vocab_digest"] = vocab_digest;
    doc["trained_at"] = trained_at;
    doc["bias"] = bias;
    doc["weights"] = vec_to_json(weights);
    if (algo == Algo::mnb) {
        doc["log_theta_pos"] = vec_to_json(log_theta_pos);
        doc["log_theta_neg"] = vec_to_json(log_theta_neg);
        doc["log_prior_pos"] = log_prior_pos;
        doc["log_prior_neg"] = log_prior_neg;
    }
    doc["metadata"] = {{"epochs", config.epochs},
                       {"learning_rate", config.learning_rate},
                       {"l2_lambda", config.l2_lambda},
                       {"batch_size", config.batch_size},
                       {"seed", config.seed},
                       {"mnb_alpha", config.mnb_alpha},
                       {"class_weighting", config.class_weighting},
                       {"train_examples", train_examples},
                       {"train_positives", train_positives}};
    return doc.dump(2) + "\n";
}

ArchiveModel ArchiveModel::from_json_string(const std::string& text,
                                            const Roster& roster) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model json parse error: ") + e.what());
    }
    if (doc.value("version", 0) != 1) throw DataError("unsupported model version");
    ArchiveModel m;
    m.archive_id = doc.at("archive").get<std::string>();
    m.archive = roster.require(m.archive_id);
    m.algo = algo_from_string(doc.at("algorithm").get<std::string>());
    m.vocab_digest = doc.at("vocab_digest").get<std::string>();
    m.trained_at = doc.value("trained_at", "unset");
    m.bias = doc.at("bias").get<double>();
    m.weights = vec_from_json(doc.at("weights"));
    if (m.algo == Algo::mnb) {
        m.log_theta_pos = vec_from_json(doc.at("log_theta_pos"));
        m.log_theta_neg = vec_from_json(doc.at("log_theta_neg"));
        m.log_prior_pos = doc.at("log_prior_pos").get<double>();
        m.log_prior_neg = doc.at("log_prior_neg").get<double>();
    }
    const auto& md = doc.at("metadata");
    m.config.epochs = md.value("epochs", 0);
    m.config.learning_rate = md.value("learning_rate", 0.0);
    m.config.l2_lambda = md.value("l2_lambda", 0.0);
    m.config.batch_size = md.value("batch_size", 1);
    m.config.seed = md.value("seed", std::uint64_t{0});
    m.config.mnb_alpha = md.value("mnb_alpha", 1.0);
    m.config.class_weighting = md.value("class_weighting", true);
    m.train_examples = md.value("train_examples", std::size_t{0});
    m.train_positives = md.value("train_positives", std::size_t{0});
    return m;
}

void ArchiveModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model: " + path);
    out << to_json_string();
}

ArchiveModel ArchiveModel::load(const std::string& path, const Roster& roster) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json_string(text, roster);
}

} // namespace memrouter
