#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "phenoscreen/curate.hpp"
#include "phenoscreen/probe.hpp"
#include "phenoscreen/types.hpp"

namespace phenoscreen {

// Planted screen: well = B_e(mu_g + noise), B_e an affine batch transform,
// mu_g = effect_magnitude * unit direction (zero for null genes). Genes inside
// a related group share a direction component so every within-group pairwise
// cosine is >= 2*kGroupShare - 1 = 0.8 exactly.
struct SynthConfig {
    std::size_t n_genes = 200;
    std::size_t n_guides_per_gene = 2;
    std::size_t n_experiments = 4;
    std::size_t wells_per_guide_per_experiment = 2;
    std::size_t dim = 64;
    double frac_null_genes = 0.25;
    double effect_magnitude = 1.0;
    double noise_sigma = 0.25;
    double batch_shift_sigma = 0.0;
    double batch_rotation_strength = 0.0;  // 0 = identity, 1 = full random rotation
    std::size_t n_related_groups = 10;
    std::size_t genes_per_group = 4;
    std::size_t n_neg_controls_per_experiment = 20;
    std::uint64_t seed = 0;

    void validate() const;
};

inline constexpr double kGroupShare = 0.9;

struct SynthGroundTruth {
    std::vector<std::string> null_genes;
    RelationshipDB related_pairs;
    std::map<std::string, std::vector<double>> effect;          // gene -> magnitude*dir
    std::map<std::string, std::vector<double>> batch_rotation;  // experiment -> D x D
    std::map<std::string, std::vector<double>> batch_shift;     // experiment -> D
};

// Row order: experiments ascending; within an experiment all gene wells
// (gene, guide, well index ascending), then the negative controls.
std::pair<EmbeddingTable, SynthGroundTruth> generate_screen(const SynthConfig& cfg);

// Block-feature family with a planted separability peak. Classes reuse
// cfg.n_genes as the class count (one guide per class,
// cfg.wells_per_guide_per_experiment wells per class per experiment); block
// b's class signal is scaled by exp(-(b - peak)^2 / (2 * 1.2^2)); labels live
// in the functional_group column. Blocks share metadata; noise is independent
// per block.
std::vector<BlockFeatureSet> generate_block_family(const SynthConfig& cfg,
                                                   std::size_t n_blocks,
                                                   std::size_t peak_block);

// Planted curation manifest. Ground truth is computed by construction, never
// by running the pipeline: non-control kept rows are exact; control strata
// carry keep counts plus the post-step-3 pool (sorted by well_id) so a test
// can re-derive step 4's seeded selection independently.
struct CurationSynthConfig {
    std::size_t total_rows = 10000;
    std::uint64_t seed = 0;
};

struct CurationGroundTruth {
    std::set<std::string> kept_noncontrol_well_ids;
    // (category name, experiment) -> expected keep count ceil(rate * pool).
    std::map<std::pair<std::string, std::string>, std::size_t> control_keep_counts;
    // The same strata's surviving pools, well ids sorted ascending.
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> control_pools;
    std::vector<std::size_t> rows_after_step;  // five entries, steps 1..5
    std::vector<ModelConsistency> model_results;
    std::size_t uncovered_conditions = 0;
};

std::pair<DatasetManifest, CurationGroundTruth> generate_curation_manifest(
    const CurationSynthConfig& synth_cfg, const CurationConfig& curation_cfg);

// JSON document with the config echo, null genes, related pairs, and batch
// parameters; consumed by the synth CLI command.
std::string ground_truth_to_json(const SynthConfig& cfg, const SynthGroundTruth& truth);

}  // namespace phenoscreen
