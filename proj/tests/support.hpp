#pragma once

// Small builders shared by the unit tests.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "phenoscreen/rng.hpp"
#include "phenoscreen/types.hpp"

namespace test_support {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RowSpec {
    std::string well_id;
    std::string experiment = "E1";
    std::string position = "";  // defaults to well_id
    std::string perturbation = "P1";
    phenoscreen::PerturbationType type = phenoscreen::PerturbationType::gene_knockout_guide;
    std::string gene = "G1";
    double concentration = kNaN;
    std::vector<float> vec;
};

inline phenoscreen::EmbeddingTable make_table(const std::vector<RowSpec>& rows) {
    phenoscreen::EmbeddingTable t;
    for (const RowSpec& r : rows) {
        t.append_row(r.well_id, r.experiment, "P", r.position.empty() ? r.well_id : r.position,
                     r.perturbation, r.type, r.gene, r.concentration, "CT", r.vec);
    }
    return t;
}

inline std::vector<float> random_vec(phenoscreen::CounterRng& rng, std::size_t dim,
                                     double scale = 1.0) {
    std::vector<float> v(dim);
    for (float& x : v) x = static_cast<float>(scale * rng.next_normal());
    return v;
}

inline std::vector<std::vector<double>> to_double_rows(const phenoscreen::EmbeddingTable& t) {
    std::vector<std::vector<double>> rows(t.size(), std::vector<double>(t.dim));
    for (std::size_t r = 0; r < t.size(); ++r) {
        for (std::size_t j = 0; j < t.dim; ++j) {
            rows[r][j] = t.embeddings[r * t.dim + j];
        }
    }
    return rows;
}

}  // namespace test_support
