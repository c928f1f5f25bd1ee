#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "memrouter/archive.hpp"
#include "memrouter/features.hpp"
#include "memrouter/holdings.hpp"

namespace memrouter {

enum class Algo { logreg, mnb, svm };
std::string to_string(Algo a);
Algo algo_from_string(const std::string& s);

struct TrainConfig {
    int epochs = 20;
    double learning_rate = 0.1;
    double l2_lambda = 1e-6;
    int batch_size = 1;
    std::uint64_t seed = 1;
    double mnb_alpha = 1.0;
    /// Inverse-prevalence example weighting; without it rare-archive
    /// models collapse to all-negative.
    bool class_weighting = true;
    /// Held-out slice of the training examples used for early stopping
    /// (stop when validation loss worsens twice in a row). 0 disables.
    double validation_fraction = 0.1;
    /// Recorded verbatim in the model file; deterministic pipelines pass
    /// a stamp derived from their inputs.
    std::string trained_at;
};

/// A trained per-archive binary classifier. For logreg/svm, `weights` has
/// vocabulary dimension and `bias` is the unregularized intercept; the
/// decision score is sigmoid(margin). For mnb the smoothed per-class
/// log-likelihood tables are kept and `weights`/`bias` hold the derived
/// log-odds form, so scoring is uniform across algorithms.
struct ArchiveModel {
    std::string archive_id;
    std::uint32_t archive = 0;
    Algo algo = Algo::logreg;

    Eigen::VectorXd weights;
    double bias = 0.0;

    // mnb only
    Eigen::VectorXd log_theta_pos;
    Eigen::VectorXd log_theta_neg;
    double log_prior_pos = 0.0;
    double log_prior_neg = 0.0;

    std::string vocab_digest;
    std::string trained_at;
    TrainConfig config;
    std::size_t train_examples = 0;
    std::size_t train_positives = 0;

    std::string to_json_string() const;
    static ArchiveModel from_json_string(const std::string& text, const Roster& roster);
    void save(const std::string& path) const;
    static ArchiveModel load(const std::string& path, const Roster& roster);
};

/// Trains one classifier from pre-vectorized examples. Labels are 0/1.
/// Throws DataError when the label distribution is degenerate.
ArchiveModel train(const std::vector<FeatureVector>& vectors,
                   const std::vector<std::uint8_t>& labels,
                   const std::string& archive_id, std::uint32_t archive,
                   Algo algo, const Vocabulary& vocab, const TrainConfig& cfg);

/// Convenience overload that vectorizes a LabelMatrix first.
ArchiveModel train(const LabelMatrix& matrix, const Vocabulary& vocab,
                   std::uint32_t archive, Algo algo, const TrainConfig& cfg);

/// Decision score in [0,1], monotone in the margin / posterior.
double score(const ArchiveModel& model, const FeatureVector& v);

std::vector<double> predict_batch(const ArchiveModel& model,
                                  const std::vector<FeatureVector>& vectors);

/// Full-batch L2-regularized logistic loss and gradient over the given
/// examples; the SGD path optimizes exactly this objective. Exposed so the
/// analytic gradient can be checked against finite differences.
double logreg_loss(const Eigen::VectorXd& weights, double bias,
                   const std::vector<FeatureVector>& vectors,
                   const std::vector<std::uint8_t>& labels,
                   const std::vector<double>& example_weights, double l2_lambda);

void logreg_gradient(const Eigen::VectorXd& weights, double bias,
                     const std::vector<FeatureVector>& vectors,
                     const std::vector<std::uint8_t>& labels,
                     const std::vector<double>& example_weights, double l2_lambda,
                     Eigen::VectorXd& grad_weights, double& grad_bias);

/// Vectorizes every record of a matrix once; shared by training,
/// calibration and evaluation paths.
std::vector<FeatureVector> vectorize_matrix(const LabelMatrix& m,
                                            const Vocabulary& vocab);

} // namespace memrouter
