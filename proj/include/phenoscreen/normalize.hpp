#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "phenoscreen/types.hpp"

namespace phenoscreen {

// Per-dimension standardization fitted on a training split.
struct ScalerTransform {
    std::vector<double> mean;
    std::vector<double> stddev;  // floored at 1e-8

    std::size_t dim() const { return mean.size(); }
};

// TVN: symmetric PCA whitening fitted on negative controls.
// whitening_matrix = V diag(1/sqrt(lambda + floor)) V^T, row-major D x D.
struct WhiteningTransform {
    std::vector<double> mean;
    std::vector<double> whitening_matrix;
    double eigenvalue_floor = 1e-6;

    std::size_t dim() const { return mean.size(); }
};

inline constexpr double kScalerStddevFloor = 1e-8;

// Population (1/n) moments; requires >= 2 rows.
ScalerTransform fit_standard_scaler(const float* data, std::size_t n, std::size_t dim);
ScalerTransform fit_standard_scaler(const EmbeddingTable& train_rows);

// (x - mean) / stddev per dimension, in place.
void apply_scaler(const ScalerTransform& t, float* data, std::size_t n, std::size_t dim,
                  int threads = 0);
void apply_scaler(const ScalerTransform& t, EmbeddingTable& rows, int threads = 0);

// Population covariance of the controls, eigendecomposition with the floor
// added to every eigenvalue before inversion; requires >= 2 control rows.
WhiteningTransform fit_tvn(const EmbeddingTable& neg_controls,
                           double eigenvalue_floor = 1e-6);

// x <- W (x - mean), in place.
void apply_tvn(const WhiteningTransform& t, EmbeddingTable& table, int threads = 0);

// Subtract each gene's arm-mean vector, re-normalize to unit norm. Every gene
// must carry an arm label; degenerate corrected vectors (norm < 1e-12) throw.
GeneAggregateSet arm_bias_correct(const GeneAggregateSet& aggregates,
                                  const ArmAnnotation& arms);

// Subtract the mean of the selected rows from every embedding, in place.
void shift_origin(EmbeddingTable& table, const std::vector<std::size_t>& control_rows,
                  int threads = 0);
// Convenience: selects rows with perturbation_type == negative_control.
void shift_origin_to_controls(EmbeddingTable& table, int threads = 0);

std::vector<std::size_t> negative_control_rows(const EmbeddingTable& table);

// JSON round trip: {"mean": [...], "stddev": [...]} and
// {"mean": [...], "matrix": [[...]], "floor": x}.
std::string to_json_string(const ScalerTransform& t);
std::string to_json_string(const WhiteningTransform& t);
ScalerTransform scaler_from_json(const std::string& text);
WhiteningTransform whitening_from_json(const std::string& text);

}  // namespace phenoscreen
