#pragma once

#include <functional>
#include <string>
#include <vector>

#include "phenoscreen/stats.hpp"
#include "phenoscreen/types.hpp"

namespace phenoscreen {

enum class GroupBy { guide, gene, compound_concentration };

GroupBy group_by_from_string(std::string_view s);
const char* to_string(GroupBy g);

struct ConsistencyEntry {
    std::string experiment_id;
    std::size_t n_replicates = 0;
    double s_bar = 0.0;
    double p_value = 1.0;
};

struct ConsistencyResult {
    std::string perturbation_id;  // group key under the chosen grouping
    std::vector<ConsistencyEntry> per_experiment;
    double combined_p = 1.0;
};

struct SkippedGroup {
    std::string perturbation_id;
    std::string experiment_id;
    std::string reason;
};

struct ConsistencyOutput {
    std::vector<ConsistencyResult> results;   // ordered by group key
    std::vector<SkippedGroup> skipped;
};

// Per-(group, experiment) mean pairwise similarity with a K-draw permutation
// null over all single-perturbation wells of the experiment, then per-group
// Cauchy combination across experiments. The table must already be normalized.
// Null draws derive from sub-streams of (seed, experiment_id, group key), so
// results are independent of threading.
ConsistencyOutput perturbation_consistency(const EmbeddingTable& table,
                                           const PermutationConfig& cfg,
                                           GroupBy group_by, int threads = 0);

struct ReplicatePairResult {
    std::string experiment_a;
    std::string experiment_b;
    std::size_t n_matched = 0;
    double ks = 0.0;
    double cvm = 0.0;
    std::uint64_t seed_used = 0;
};

struct ReplicateOutput {
    std::vector<ReplicatePairResult> per_pair;
    double median_ks = 0.0;
    double median_cvm = 0.0;
};

// Query distribution: cosine similarity of one matched well pair per
// perturbation (lexicographically first well_position on each side).
// Null: equal-count similarities of never-matching cross-experiment well
// pairs drawn without replacement from a per-pair sub-stream.
ReplicateOutput replicate_consistency(
    const EmbeddingTable& table,
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const PermutationConfig& cfg, int threads = 0);

// Spherical mean over all wells carrying each gene_id. Genes whose mean
// degenerates are excluded and reported through `excluded` when non-null.
GeneAggregateSet aggregate_gene_embeddings(const EmbeddingTable& table,
                                           std::vector<std::string>* excluded = nullptr);

struct RecallReport {
    std::string database_name;
    std::size_t n_known_pairs_in_universe = 0;
    std::size_t n_recalled = 0;
    double recall = 0.0;        // undefined_recall marks an empty denominator
    bool undefined_recall = false;
    double low_pct = 0.05;
    double high_pct = 0.95;
    std::size_t universe_size_genes = 0;
    double t_low = 0.0;
    double t_high = 0.0;
};

// All unordered-pair cosine similarities of the aggregate universe; empirical
// quantile thresholds (linear interpolation between order statistics); a known
// pair is recalled when its similarity is <= t_low or >= t_high.
RecallReport relationship_recall(const GeneAggregateSet& aggregates,
                                 const RelationshipDB& db, double low_pct = 0.05,
                                 double high_pct = 0.95, int threads = 0);

// Upper-triangle similarities (i < j) in canonical row-major pair order,
// computed in cache-blocked tiles. Stored as float32; each value is within
// 1e-6 of the exact double computation.
std::vector<float> all_pair_similarities(const GeneAggregateSet& aggregates,
                                         int threads = 0);

// Streamed variant: visit(i, j, similarity) for every i < j, canonical order.
void pairwise_similarity_matrix(
    const GeneAggregateSet& aggregates, int threads,
    const std::function<void(std::size_t, std::size_t, double)>& visit);

// Empirical quantile with linear interpolation between order statistics.
// Partially reorders `values`.
double empirical_quantile(std::vector<float>& values, double q);

double median(std::vector<double> values);

// Canonical JSON encodings shared by the CLI and the curation pipeline.
std::string consistency_to_json(const ConsistencyOutput& out, const std::string& model_tag,
                                const std::string& config_json);
// Returns the results array; fills model_tag_out when non-null.
std::vector<ConsistencyResult> consistency_from_json(const std::string& text,
                                                     std::string* model_tag_out = nullptr);

}  // namespace phenoscreen
