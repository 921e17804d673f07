#include "phenoscreen/normalize.hpp"

#include <Eigen/Dense>
#include <cmath>
#include "json.hpp"

#include "phenoscreen/error.hpp"
#include "phenoscreen/parallel.hpp"

namespace phenoscreen {

namespace {

using Json = nlohmann::json;

Eigen::MatrixXd to_matrix(const float* data, std::size_t n, std::size_t dim) {
    Eigen::MatrixXd m(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                data[i * dim + j];
        }
    }
    return m;
}

}  // namespace

ScalerTransform fit_standard_scaler(const float* data, std::size_t n, std::size_t dim) {
    if (n < 2) fail("too_few_rows", "standard scaler needs at least 2 rows");
    ScalerTransform t;
    t.mean.assign(dim, 0.0);
    t.stddev.assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) t.mean[j] += data[i * dim + j];
    }
    for (double& m : t.mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = data[i * dim + j] - t.mean[j];
            t.stddev[j] += d * d;
        }
    }
    for (double& s : t.stddev) {
        s = std::sqrt(s / static_cast<double>(n));
        if (s < kScalerStddevFloor) s = kScalerStddevFloor;
    }
    return t;
}

ScalerTransform fit_standard_scaler(const EmbeddingTable& train_rows) {
    return fit_standard_scaler(train_rows.embeddings.data(), train_rows.size(),
                               train_rows.dim);
}

void apply_scaler(const ScalerTransform& t, float* data, std::size_t n, std::size_t dim,
                  int threads) {
    if (t.dim() != dim) {
        fail("dimension_mismatch", "scaler of dimension " + std::to_string(t.dim()) +
                                       " applied to dimension " + std::to_string(dim));
    }
    parallel_for(std::size_t{0}, n, threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < dim; ++j) {
            data[i * dim + j] = static_cast<float>(
                (static_cast<double>(data[i * dim + j]) - t.mean[j]) / t.stddev[j]);
        }
    });
}

void apply_scaler(const ScalerTransform& t, EmbeddingTable& rows, int threads) {
    apply_scaler(t, rows.embeddings.data(), rows.size(), rows.dim, threads);
}

WhiteningTransform fit_tvn(const EmbeddingTable& neg_controls, double eigenvalue_floor) {
    const std::size_t n = neg_controls.size();
    const std::size_t dim = neg_controls.dim;
    if (n < 2) fail("too_few_rows", "TVN needs at least 2 negative-control rows");
    Eigen::MatrixXd x = to_matrix(neg_controls.embeddings.data(), n, dim);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
    if (!cov.allFinite()) fail("non_finite", "control covariance is not finite");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) fail("numeric", "eigendecomposition failed");
    const Eigen::VectorXd scale =
        (eig.eigenvalues().array() + eigenvalue_floor).rsqrt();
    const Eigen::MatrixXd w =
        eig.eigenvectors() * scale.asDiagonal() * eig.eigenvectors().transpose();
    WhiteningTransform t;
    t.eigenvalue_floor = eigenvalue_floor;
    t.mean.assign(mean.data(), mean.data() + dim);
    t.whitening_matrix.resize(dim * dim);
    for (std::size_t i = 0; i < dim; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            t.whitening_matrix[i * dim + j] =
                w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }
    return t;
}

void apply_tvn(const WhiteningTransform& t, EmbeddingTable& table, int threads) {
    const std::size_t dim = table.dim;
    if (t.dim() != dim) {
        fail("dimension_mismatch", "TVN of dimension " + std::to_string(t.dim()) +
                                       " applied to dimension " + std::to_string(dim));
    }
    parallel_for(std::size_t{0}, table.size(), threads, [&](std::size_t r) {
        const auto row = table.embedding(r);
        std::vector<double> centered(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            centered[j] = static_cast<double>(row[j]) - t.mean[j];
        }
        for (std::size_t i = 0; i < dim; ++i) {
            const double* wrow = t.whitening_matrix.data() + i * dim;
            double acc = 0.0;
            for (std::size_t j = 0; j < dim; ++j) acc += wrow[j] * centered[j];
            row[i] = static_cast<float>(acc);
        }
    });
}

GeneAggregateSet arm_bias_correct(const GeneAggregateSet& aggregates,
                                  const ArmAnnotation& arms) {
    const std::size_t dim = aggregates.dim;
    std::map<std::string, std::vector<double>> arm_sum;
    std::map<std::string, std::size_t> arm_count;
    std::vector<const std::string*> arm_of_gene(aggregates.size());
    for (std::size_t i = 0; i < aggregates.size(); ++i) {
        const auto it = arms.arm_of.find(aggregates.gene_ids[i]);
        if (it == arms.arm_of.end()) {
            fail("missing_arm", "gene '" + aggregates.gene_ids[i] + "' has no arm label");
        }
        arm_of_gene[i] = &it->second;
        auto& sum = arm_sum[it->second];
        sum.resize(dim, 0.0);
        const auto v = aggregates.vec(i);
        for (std::size_t j = 0; j < dim; ++j) sum[j] += v[j];
        ++arm_count[it->second];
    }
    for (auto& [arm, sum] : arm_sum) {
        const double n = static_cast<double>(arm_count[arm]);
        for (double& x : sum) x /= n;
    }
    GeneAggregateSet out;
    out.gene_ids = aggregates.gene_ids;
    out.dim = dim;
    out.vectors.resize(aggregates.vectors.size());
    for (std::size_t i = 0; i < aggregates.size(); ++i) {
        const auto& mean = arm_sum[*arm_of_gene[i]];
        const auto v = aggregates.vec(i);
        const auto o = out.vec(i);
        double norm2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            o[j] = v[j] - mean[j];
            norm2 += o[j] * o[j];
        }
        const double norm = std::sqrt(norm2);
        if (norm < 1e-12) {
            fail("degenerate_vector", "gene '" + aggregates.gene_ids[i] +
                                          "' is numerically zero after arm centering");
        }
        for (std::size_t j = 0; j < dim; ++j) o[j] /= norm;
    }
    return out;
}

std::vector<std::size_t> negative_control_rows(const EmbeddingTable& table) {
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (table.perturbation_type[r] == PerturbationType::negative_control) {
            rows.push_back(r);
        }
    }
    return rows;
}

void shift_origin(EmbeddingTable& table, const std::vector<std::size_t>& control_rows,
                  int threads) {
    if (control_rows.empty()) fail("empty_controls", "origin shift with no control rows");
    const std::size_t dim = table.dim;
    std::vector<double> mean(dim, 0.0);
    for (const std::size_t r : control_rows) {
        const auto v = table.embedding(r);
        for (std::size_t j = 0; j < dim; ++j) mean[j] += v[j];
    }
    for (double& m : mean) m /= static_cast<double>(control_rows.size());
    parallel_for(std::size_t{0}, table.size(), threads, [&](std::size_t r) {
        const auto v = table.embedding(r);
        for (std::size_t j = 0; j < dim; ++j) {
            v[j] = static_cast<float>(static_cast<double>(v[j]) - mean[j]);
        }
    });
}

void shift_origin_to_controls(EmbeddingTable& table, int threads) {
    shift_origin(table, negative_control_rows(table), threads);
}

namespace {

Json vector_to_json(const std::vector<double>& v) { return Json(v); }

std::vector<double> vector_from_json(const Json& j, const char* what) {
    if (!j.is_array()) fail("transform_parse", std::string(what) + " is not an array");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& x : j) {
        if (!x.is_number()) fail("transform_parse", std::string(what) + " holds a non-number");
        out.push_back(x.get<double>());
    }
    return out;
}

}  // namespace

std::string to_json_string(const ScalerTransform& t) {
    Json j;
    j["mean"] = vector_to_json(t.mean);
    j["stddev"] = vector_to_json(t.stddev);
    return j.dump(2) + "\n";
}

std::string to_json_string(const WhiteningTransform& t) {
    Json j;
    j["mean"] = vector_to_json(t.mean);
    j["floor"] = t.eigenvalue_floor;
    Json rows = Json::array();
    const std::size_t dim = t.dim();
    for (std::size_t i = 0; i < dim; ++i) {
        rows.push_back(Json(std::vector<double>(
            t.whitening_matrix.begin() + static_cast<std::ptrdiff_t>(i * dim),
            t.whitening_matrix.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim))));
    }
    j["matrix"] = std::move(rows);
    return j.dump(2) + "\n";
}

ScalerTransform scaler_from_json(const std::string& text) {
    const Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("mean") || !j.contains("stddev")) {
        fail("transform_parse", "malformed scaler document");
    }
    ScalerTransform t;
    t.mean = vector_from_json(j["mean"], "mean");
    t.stddev = vector_from_json(j["stddev"], "stddev");
    if (t.mean.size() != t.stddev.size()) {
        fail("transform_parse", "scaler mean/stddev lengths disagree");
    }
    return t;
}

WhiteningTransform whitening_from_json(const std::string& text) {
    const Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("mean") ||
        !j.contains("matrix") || !j.contains("floor")) {
        fail("transform_parse", "malformed whitening document");
    }
    WhiteningTransform t;
    t.mean = vector_from_json(j["mean"], "mean");
    t.eigenvalue_floor = j["floor"].get<double>();
    const Json& rows = j["matrix"];
    if (!rows.is_array() || rows.size() != t.mean.size()) {
        fail("transform_parse", "whitening matrix row count mismatch");
    }
    const std::size_t dim = t.mean.size();
    t.whitening_matrix.reserve(dim * dim);
    for (const auto& row : rows) {
        const auto r = vector_from_json(row, "matrix row");
        if (r.size() != dim) fail("transform_parse", "whitening matrix is not square");
        t.whitening_matrix.insert(t.whitening_matrix.end(), r.begin(), r.end());
    }
    return t;
}

}  // namespace phenoscreen
