#include "phenoscreen/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "phenoscreen/error.hpp"

namespace phenoscreen {

const char* to_string(PerturbationType t) {
    switch (t) {
        case PerturbationType::gene_knockout_guide: return "gene_knockout_guide";
        case PerturbationType::sirna: return "sirna";
        case PerturbationType::compound: return "compound";
        case PerturbationType::negative_control: return "negative_control";
        case PerturbationType::positive_control: return "positive_control";
        case PerturbationType::unperturbed: return "unperturbed";
    }
    fail("internal", "unknown PerturbationType");
}

PerturbationType perturbation_type_from_string(std::string_view s) {
    if (s == "gene_knockout_guide") return PerturbationType::gene_knockout_guide;
    if (s == "sirna") return PerturbationType::sirna;
    if (s == "compound") return PerturbationType::compound;
    if (s == "negative_control") return PerturbationType::negative_control;
    if (s == "positive_control") return PerturbationType::positive_control;
    if (s == "unperturbed") return PerturbationType::unperturbed;
    fail("schema_mismatch", "unknown perturbation_type '" + std::string(s) + "'");
}

void EmbeddingTable::append_row(std::string well, std::string experiment,
                                std::string plate, std::string position,
                                std::string perturbation, PerturbationType type,
                                std::string gene, double conc, std::string cell,
                                std::span<const float> vec) {
    if (size() == 0 && embeddings.empty()) {
        dim = vec.size();
    } else if (vec.size() != dim) {
        fail("ragged_vectors", "appending row with dimension " +
                                   std::to_string(vec.size()) + " to table of dimension " +
                                   std::to_string(dim));
    }
    well_id.push_back(std::move(well));
    experiment_id.push_back(std::move(experiment));
    plate_id.push_back(std::move(plate));
    well_position.push_back(std::move(position));
    perturbation_id.push_back(std::move(perturbation));
    perturbation_type.push_back(type);
    gene_id.push_back(std::move(gene));
    concentration.push_back(conc);
    cell_type.push_back(std::move(cell));
    embeddings.insert(embeddings.end(), vec.begin(), vec.end());
}

EmbeddingTable EmbeddingTable::subset(const std::vector<std::size_t>& rows) const {
    EmbeddingTable out;
    out.dim = dim;
    out.well_id.reserve(rows.size());
    out.embeddings.reserve(rows.size() * dim);
    for (const std::size_t r : rows) {
        out.well_id.push_back(well_id[r]);
        out.experiment_id.push_back(experiment_id[r]);
        out.plate_id.push_back(plate_id[r]);
        out.well_position.push_back(well_position[r]);
        out.perturbation_id.push_back(perturbation_id[r]);
        out.perturbation_type.push_back(perturbation_type[r]);
        out.gene_id.push_back(gene_id[r]);
        out.concentration.push_back(concentration[r]);
        out.cell_type.push_back(cell_type[r]);
        const auto v = embedding(r);
        out.embeddings.insert(out.embeddings.end(), v.begin(), v.end());
    }
    for (const auto& [name, col] : extra) {
        auto& out_col = out.extra[name];
        out_col.reserve(rows.size());
        for (const std::size_t r : rows) out_col.push_back(col[r]);
    }
    return out;
}

void EmbeddingTable::validate() const {
    const std::size_t n = size();
    if (experiment_id.size() != n || plate_id.size() != n || well_position.size() != n ||
        perturbation_id.size() != n || perturbation_type.size() != n ||
        gene_id.size() != n || concentration.size() != n || cell_type.size() != n) {
        fail("schema_mismatch", "column lengths disagree");
    }
    if (n > 0 && dim == 0) fail("schema_mismatch", "table has rows but dimension 0");
    if (embeddings.size() != n * dim) {
        fail("ragged_vectors", "embedding storage has " + std::to_string(embeddings.size()) +
                                   " values, expected " + std::to_string(n * dim));
    }
    for (const auto& [name, col] : extra) {
        if (col.size() != n) {
            fail("schema_mismatch", "extra column '" + name + "' has " +
                                        std::to_string(col.size()) + " values, expected " +
                                        std::to_string(n));
        }
    }
    std::unordered_set<std::string_view> seen;
    seen.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        if (!seen.insert(well_id[r]).second) {
            fail("duplicate_well_id",
                 "duplicate well_id '" + well_id[r] + "' at row " + std::to_string(r));
        }
        const auto v = embedding(r);
        for (std::size_t j = 0; j < dim; ++j) {
            if (!std::isfinite(v[j])) {
                fail("non_finite", "non-finite embedding value at row " + std::to_string(r) +
                                       ", dimension " + std::to_string(j));
            }
        }
        const PerturbationType t = perturbation_type[r];
        if ((t == PerturbationType::gene_knockout_guide || t == PerturbationType::sirna) &&
            gene_id[r].empty()) {
            fail("missing_gene_id", "row " + std::to_string(r) + " has perturbation_type " +
                                        to_string(t) + " but no gene_id");
        }
        if (!std::isnan(concentration[r]) && !(concentration[r] > 0.0)) {
            fail("invalid_concentration",
                 "row " + std::to_string(r) + " has non-positive concentration");
        }
    }
}

namespace {

bool bits_equal(double a, double b) {
    return std::memcmp(&a, &b, sizeof(double)) == 0;
}

bool bits_equal(float a, float b) {
    return std::memcmp(&a, &b, sizeof(float)) == 0;
}

}  // namespace

bool tables_bitwise_equal(const EmbeddingTable& a, const EmbeddingTable& b) {
    if (a.size() != b.size() || a.dim != b.dim) return false;
    if (a.well_id != b.well_id || a.experiment_id != b.experiment_id ||
        a.plate_id != b.plate_id || a.well_position != b.well_position ||
        a.perturbation_id != b.perturbation_id ||
        a.perturbation_type != b.perturbation_type || a.gene_id != b.gene_id ||
        a.cell_type != b.cell_type || a.extra != b.extra) {
        return false;
    }
    for (std::size_t i = 0; i < a.concentration.size(); ++i) {
        const bool an = std::isnan(a.concentration[i]);
        const bool bn = std::isnan(b.concentration[i]);
        if (an != bn) return false;
        if (!an && !bits_equal(a.concentration[i], b.concentration[i])) return false;
    }
    for (std::size_t i = 0; i < a.embeddings.size(); ++i) {
        if (!bits_equal(a.embeddings[i], b.embeddings[i])) return false;
    }
    return true;
}

std::size_t GeneAggregateSet::find(std::string_view gene) const {
    const auto it = std::lower_bound(gene_ids.begin(), gene_ids.end(), gene);
    if (it == gene_ids.end() || *it != gene) return npos;
    return static_cast<std::size_t>(it - gene_ids.begin());
}

void GeneAggregateSet::validate() const {
    if (vectors.size() != gene_ids.size() * dim) {
        fail("schema_mismatch", "aggregate storage size mismatch");
    }
    if (!std::is_sorted(gene_ids.begin(), gene_ids.end())) {
        fail("schema_mismatch", "aggregate gene ids not sorted");
    }
    for (std::size_t i = 0; i < size(); ++i) {
        double norm2 = 0.0;
        for (const double x : vec(i)) norm2 += x * x;
        const double norm = std::sqrt(norm2);
        if (std::abs(norm - 1.0) > 1e-6) {
            fail("not_unit_norm", "aggregate for gene '" + gene_ids[i] +
                                      "' has norm " + std::to_string(norm));
        }
    }
}

std::size_t DatasetManifest::flag_index(std::string_view name) const {
    for (std::size_t i = 0; i < flag_names.size(); ++i) {
        if (flag_names[i] == name) return i;
    }
    return npos;
}

DatasetManifest DatasetManifest::subset(const std::vector<std::size_t>& rows) const {
    DatasetManifest out;
    out.flag_names = flag_names;
    const std::size_t nf = flag_names.size();
    out.flags.reserve(rows.size() * nf);
    for (const std::size_t r : rows) {
        out.well_id.push_back(well_id[r]);
        out.experiment_id.push_back(experiment_id[r]);
        out.perturbation_ids.push_back(perturbation_ids[r]);
        out.perturbation_type.push_back(perturbation_type[r]);
        out.perturbation_count.push_back(perturbation_count[r]);
        out.image_shape_tag.push_back(image_shape_tag[r]);
        for (std::size_t f = 0; f < nf; ++f) out.flags.push_back(flags[r * nf + f]);
    }
    return out;
}

void DatasetManifest::validate() const {
    const std::size_t n = size();
    if (experiment_id.size() != n || perturbation_ids.size() != n ||
        perturbation_type.size() != n || perturbation_count.size() != n ||
        image_shape_tag.size() != n || flags.size() != n * flag_names.size()) {
        fail("schema_mismatch", "manifest column lengths disagree");
    }
    std::unordered_set<std::string_view> seen;
    seen.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        if (!seen.insert(well_id[r]).second) {
            fail("duplicate_well_id",
                 "duplicate well_id '" + well_id[r] + "' at row " + std::to_string(r));
        }
        if (perturbation_count[r] < 0) {
            fail("invalid_count", "negative perturbation_count at row " + std::to_string(r));
        }
    }
}

}  // namespace phenoscreen
