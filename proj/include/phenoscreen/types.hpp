#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phenoscreen {

enum class PerturbationType {
    gene_knockout_guide,
    sirna,
    compound,
    negative_control,
    positive_control,
    unperturbed,
};

const char* to_string(PerturbationType t);
PerturbationType perturbation_type_from_string(std::string_view s);

// Separator joining the ids of a multi-perturbation well inside the
// perturbation_id column. A well is "single-perturbation" iff its id is
// non-empty and contains no separator.
inline constexpr char kPerturbationJoin = ';';

// Well-level embeddings plus metadata, column-major in memory. Embeddings are
// float32 (matching the on-disk encoding); every statistic downstream
// accumulates in double. Missing gene_id is the empty string; missing
// concentration is NaN.
struct EmbeddingTable {
    std::vector<std::string> well_id;
    std::vector<std::string> experiment_id;
    std::vector<std::string> plate_id;
    std::vector<std::string> well_position;
    std::vector<std::string> perturbation_id;
    std::vector<PerturbationType> perturbation_type;
    std::vector<std::string> gene_id;       // "" = absent
    std::vector<double> concentration;      // NaN = absent
    std::vector<std::string> cell_type;
    std::size_t dim = 0;
    std::vector<float> embeddings;          // size() * dim, row-major
    // Unknown metadata columns, preserved verbatim.
    std::map<std::string, std::vector<std::string>> extra;

    std::size_t size() const { return well_id.size(); }

    std::span<const float> embedding(std::size_t row) const {
        return {embeddings.data() + row * dim, dim};
    }
    std::span<float> embedding(std::size_t row) {
        return {embeddings.data() + row * dim, dim};
    }

    bool single_perturbation(std::size_t row) const {
        const std::string& p = perturbation_id[row];
        return !p.empty() && p.find(kPerturbationJoin) == std::string::npos;
    }

    void append_row(std::string well, std::string experiment, std::string plate,
                    std::string position, std::string perturbation,
                    PerturbationType type, std::string gene, double conc,
                    std::string cell, std::span<const float> vec);

    EmbeddingTable subset(const std::vector<std::size_t>& rows) const;

    // Enforces every invariant; throws Error naming the first offending row.
    void validate() const;
};

// Bitwise comparison (floats compared by bit pattern, so NaN == NaN).
bool tables_bitwise_equal(const EmbeddingTable& a, const EmbeddingTable& b);

// Unordered, deduplicated gene pairs from a public relationship database.
// Pairs are stored with first < second.
struct RelationshipDB {
    std::string name;
    std::set<std::pair<std::string, std::string>> pairs;

    bool insert(const std::string& a, const std::string& b) {
        return pairs.emplace(std::min(a, b), std::max(a, b)).second;
    }
    bool contains(const std::string& a, const std::string& b) const {
        return pairs.count({std::min(a, b), std::max(a, b)}) > 0;
    }
};

// gene_id -> chromosome arm label. Lookup must be total over the genes it is
// applied to; missing genes are an error at apply time.
struct ArmAnnotation {
    std::map<std::string, std::string> arm_of;
};

// gene_id -> unit-norm aggregate vector, genes in sorted order.
struct GeneAggregateSet {
    std::vector<std::string> gene_ids;  // ascending, unique
    std::size_t dim = 0;
    std::vector<double> vectors;        // gene_ids.size() * dim, row-major

    std::size_t size() const { return gene_ids.size(); }
    std::span<const double> vec(std::size_t i) const {
        return {vectors.data() + i * dim, dim};
    }
    std::span<double> vec(std::size_t i) {
        return {vectors.data() + i * dim, dim};
    }
    // Index of gene or npos.
    std::size_t find(std::string_view gene) const;

    void validate() const;
};

// Pre-inference well inventory consumed by the curation pipeline. One row per
// well; perturbation_ids lists the conditions applied to the well.
struct DatasetManifest {
    std::vector<std::string> well_id;
    std::vector<std::string> experiment_id;
    std::vector<std::vector<std::string>> perturbation_ids;
    std::vector<PerturbationType> perturbation_type;
    std::vector<std::int64_t> perturbation_count;
    std::vector<std::string> image_shape_tag;
    std::vector<std::string> flag_names;   // column order of `flags`
    std::vector<std::uint8_t> flags;       // size() * flag_names.size(), row-major

    std::size_t size() const { return well_id.size(); }
    bool flag(std::size_t row, std::size_t flag_idx) const {
        return flags[row * flag_names.size() + flag_idx] != 0;
    }
    std::size_t flag_index(std::string_view name) const;  // npos if absent

    DatasetManifest subset(const std::vector<std::size_t>& rows) const;
    void validate() const;
};

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

}  // namespace phenoscreen
