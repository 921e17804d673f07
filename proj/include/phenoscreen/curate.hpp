#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phenoscreen/benchmarks.hpp"
#include "phenoscreen/types.hpp"

namespace phenoscreen {

struct CurationConfig {
    std::vector<std::string> required_quality_flags;
    // Image shape tags step 2 accepts; empty = accept every tag.
    std::vector<std::string> accepted_image_shape_tags;
    std::int64_t max_perturbations_per_well = 3;
    std::int64_t min_experiments = 3;
    std::int64_t min_wells = 20;
    double keep_rate_positive_controls = 0.10;
    double keep_rate_negative_controls = 0.30;
    double keep_rate_unperturbed = 0.10;
    double phenoprint_p_threshold = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

struct StepStats {
    std::string step_name;
    std::size_t rows_in = 0;
    std::size_t rows_out = 0;

    std::size_t rows_dropped() const { return rows_in - rows_out; }
};

struct CurationReport {
    std::vector<StepStats> steps;
    // Distinct perturbation ids step 5 found in no model's results.
    std::size_t uncovered_conditions = 0;
};

// Consistency results of one model, keyed for step 5's "in either" rule.
struct ModelConsistency {
    std::string model_tag;
    std::vector<ConsistencyResult> results;
};

DatasetManifest step1_quality_filter(const DatasetManifest& manifest,
                                     const CurationConfig& cfg);
DatasetManifest step2_metadata_filter(const DatasetManifest& manifest,
                                      const CurationConfig& cfg);
DatasetManifest step3_replication_filter(const DatasetManifest& manifest,
                                         const CurationConfig& cfg);
// Exact per-(category, experiment) subsampling of control/unperturbed rows:
// rows sorted by well_id, shuffled with the sub-stream
// (seed, "curate.step4", category, experiment), first ceil(rate*n) kept.
// Every other perturbation type is kept in full.
DatasetManifest step4_undersample(const DatasetManifest& manifest,
                                  const CurationConfig& cfg);
// Keeps a well when any of its conditions has combined_p < threshold in any
// model. Control and unperturbed wells are exempt (the statistic does not
// apply to them; step 4 set their keep rates).
DatasetManifest step5_phenoprint_filter(const DatasetManifest& manifest,
                                        const std::vector<ModelConsistency>& results,
                                        const CurationConfig& cfg,
                                        std::size_t* uncovered_conditions = nullptr);

std::pair<DatasetManifest, CurationReport> curate_pipeline(
    const DatasetManifest& manifest, const std::vector<ModelConsistency>& results,
    const CurationConfig& cfg);

}  // namespace phenoscreen
