#pragma once

#include <string>
#include <vector>

#include "phenoscreen/normalize.hpp"
#include "phenoscreen/types.hpp"

namespace phenoscreen {

enum class LabelKey { perturbation_id, functional_group };

LabelKey label_key_from_string(std::string_view s);
const char* to_string(LabelKey k);

// One transformer block's features over a fixed well set. All blocks of a
// sweep share the row set and label assignment; only embeddings differ.
struct BlockFeatureSet {
    int block_index = 1;
    EmbeddingTable features;
    LabelKey label_key = LabelKey::perturbation_id;

    // Label of a row under label_key (functional_group reads the extra column
    // of that name).
    const std::string& label(std::size_t row) const;
};

struct ProbeConfig {
    double C = 1.0;              // inverse L2 strength; penalty (1/(2C))*|W|^2
    double tol = 1e-4;           // gradient max-norm stopping threshold
    std::size_t max_iterations = 2000;
    std::size_t lbfgs_memory = 10;
};

struct ProbeModel {
    std::vector<double> weights;       // classes x dim, row-major
    std::vector<double> bias;          // classes
    std::vector<std::string> class_labels;
    ScalerTransform scaler;
    bool converged = false;
    std::size_t iterations_used = 0;
    std::size_t dim = 0;

    // Scales then argmaxes the linear scores; ties pick the smallest class index.
    std::vector<std::size_t> predict(const float* data, std::size_t n,
                                     std::size_t dim) const;
};

// Experiment-held-out split. Classes absent from the training side are dropped
// from both sides and counted.
struct SplitResult {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    std::vector<std::string> dropped_classes;
};

SplitResult split_by_experiment(const BlockFeatureSet& features,
                                const std::vector<std::string>& test_experiment_ids);

// Multinomial logistic regression with balanced class weights
// w_c = n/(k*n_c), minimized by L-BFGS from a zero start; the scaler is fitted
// on exactly the given rows. Labels index into class_labels.
ProbeModel train_logistic_probe(const float* data, std::size_t n, std::size_t dim,
                                const std::vector<std::size_t>& labels,
                                const std::vector<std::string>& class_labels,
                                const ProbeConfig& cfg = {});

// Mean per-class recall; every class must appear in `labels`.
double balanced_accuracy(const std::vector<std::size_t>& predictions,
                         const std::vector<std::size_t>& labels,
                         std::size_t n_classes);

struct BlockScore {
    int block_index = 0;
    double balanced_accuracy = 0.0;
    bool converged = false;
};

struct ProbeSweepResult {
    std::vector<BlockScore> per_block;
    int best_block = 0;
    double best_accuracy = 0.0;
};

// Trains one probe per block on the identical row partition; best block by
// highest balanced accuracy, ties to the smallest block index.
ProbeSweepResult sweep_blocks(const std::vector<BlockFeatureSet>& blocks,
                              const std::vector<std::string>& test_experiment_ids,
                              const ProbeConfig& cfg = {}, int threads = 0);

// Spearman rho over tag-matched scores; requires identical tag sets, >= 3 tags.
double correlate_probe_with_benchmarks(
    const std::vector<std::pair<std::string, double>>& probe_scores,
    const std::vector<std::pair<std::string, double>>& benchmark_scores);

// Loss and gradient of the penalized objective at the packed parameter vector
// [W row-major, b]; exposed for the finite-difference check.
double probe_objective(const float* data, std::size_t n, std::size_t dim,
                       const std::vector<std::size_t>& labels, std::size_t n_classes,
                       const std::vector<double>& sample_weights, double C,
                       const std::vector<double>& theta, std::vector<double>* grad);

}  // namespace phenoscreen
