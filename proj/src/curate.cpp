#include "phenoscreen/curate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "phenoscreen/error.hpp"
#include "phenoscreen/rng.hpp"

namespace phenoscreen {

void CurationConfig::validate() const {
    const auto rate_ok = [](double r) { return r > 0.0 && r <= 1.0; };
    if (!rate_ok(keep_rate_positive_controls) || !rate_ok(keep_rate_negative_controls) ||
        !rate_ok(keep_rate_unperturbed)) {
        fail("invalid_config", "keep rates must lie in (0, 1]");
    }
    if (!(phenoprint_p_threshold > 0.0 && phenoprint_p_threshold < 1.0)) {
        fail("invalid_config", "phenoprint_p_threshold must lie in (0, 1)");
    }
    if (max_perturbations_per_well < 1 || min_experiments < 1 || min_wells < 1) {
        fail("invalid_config", "count thresholds must be >= 1");
    }
}

DatasetManifest step1_quality_filter(const DatasetManifest& manifest,
                                     const CurationConfig& cfg) {
    std::vector<std::size_t> flag_idx;
    for (const auto& name : cfg.required_quality_flags) {
        const std::size_t idx = manifest.flag_index(name);
        if (idx == npos) {
            fail("missing_flag", "manifest carries no quality flag '" + name + "'");
        }
        flag_idx.push_back(idx);
    }
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < manifest.size(); ++r) {
        bool ok = true;
        for (const std::size_t f : flag_idx) ok = ok && manifest.flag(r, f);
        if (ok) keep.push_back(r);
    }
    return manifest.subset(keep);
}

DatasetManifest step2_metadata_filter(const DatasetManifest& manifest,
                                      const CurationConfig& cfg) {
    const std::set<std::string> accepted(cfg.accepted_image_shape_tags.begin(),
                                         cfg.accepted_image_shape_tags.end());
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < manifest.size(); ++r) {
        const bool missing_info = manifest.perturbation_ids[r].empty() &&
                                  manifest.perturbation_type[r] != PerturbationType::unperturbed;
        if (missing_info) continue;
        if (manifest.perturbation_count[r] > cfg.max_perturbations_per_well) continue;
        if (!accepted.empty() && !accepted.count(manifest.image_shape_tag[r])) continue;
        keep.push_back(r);
    }
    return manifest.subset(keep);
}

DatasetManifest step3_replication_filter(const DatasetManifest& manifest,
                                         const CurationConfig& cfg) {
    struct ConditionStats {
        std::set<std::string> experiments;
        std::size_t wells = 0;
    };
    std::unordered_map<std::string, ConditionStats> stats;
    for (std::size_t r = 0; r < manifest.size(); ++r) {
        for (const auto& id : manifest.perturbation_ids[r]) {
            auto& s = stats[id];
            s.experiments.insert(manifest.experiment_id[r]);
            ++s.wells;
        }
    }
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < manifest.size(); ++r) {
        bool ok = true;
        for (const auto& id : manifest.perturbation_ids[r]) {
            const auto& s = stats.at(id);
            if (s.experiments.size() < static_cast<std::size_t>(cfg.min_experiments) ||
                s.wells < static_cast<std::size_t>(cfg.min_wells)) {
                ok = false;
                break;
            }
        }
        if (ok) keep.push_back(r);
    }
    return manifest.subset(keep);
}

namespace {

double keep_rate_for(const CurationConfig& cfg, PerturbationType t) {
    switch (t) {
        case PerturbationType::positive_control: return cfg.keep_rate_positive_controls;
        case PerturbationType::negative_control: return cfg.keep_rate_negative_controls;
        case PerturbationType::unperturbed: return cfg.keep_rate_unperturbed;
        default: return 1.0;
    }
}

}  // namespace

DatasetManifest step4_undersample(const DatasetManifest& manifest,
                                  const CurationConfig& cfg) {
    // Strata: (undersampled category, experiment). Row sets are keyed by
    // sorted well_id so the selection is independent of manifest row order.
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> strata;
    std::vector<bool> keep(manifest.size(), false);
    for (std::size_t r = 0; r < manifest.size(); ++r) {
        const PerturbationType t = manifest.perturbation_type[r];
        const bool undersampled = t == PerturbationType::positive_control ||
                                  t == PerturbationType::negative_control ||
                                  t == PerturbationType::unperturbed;
        if (!undersampled) {
            keep[r] = true;
            continue;
        }
        strata[{to_string(t), manifest.experiment_id[r]}].push_back(r);
    }
    const CounterRng root = CounterRng(cfg.seed).substream("curate.step4");
    for (const auto& [key, rows_in_stratum] : strata) {
        const auto& [category, experiment] = key;
        std::vector<std::size_t> rows = rows_in_stratum;
        std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
            return manifest.well_id[a] < manifest.well_id[b];
        });
        CounterRng rng = root.substream(category).substream(experiment);
        rng.shuffle(rows);
        const double rate = keep_rate_for(cfg, perturbation_type_from_string(category));
        const std::size_t n_keep = static_cast<std::size_t>(
            std::ceil(rate * static_cast<double>(rows.size())));
        for (std::size_t i = 0; i < n_keep && i < rows.size(); ++i) keep[rows[i]] = true;
    }
    std::vector<std::size_t> kept_rows;
    for (std::size_t r = 0; r < manifest.size(); ++r) {
        if (keep[r]) kept_rows.push_back(r);
    }
    return manifest.subset(kept_rows);
}

DatasetManifest step5_phenoprint_filter(const DatasetManifest& manifest,
                                        const std::vector<ModelConsistency>& results,
                                        const CurationConfig& cfg,
                                        std::size_t* uncovered_conditions) {
    if (results.empty()) fail("empty_results", "step 5 needs at least one model's results");
    // Condition passes when combined_p < threshold in at least one model.
    std::unordered_map<std::string, bool> passes;
    for (const auto& model : results) {
        for (const auto& r : model.results) {
            auto [it, inserted] = passes.emplace(r.perturbation_id, false);
            it->second = it->second || (r.combined_p < cfg.phenoprint_p_threshold);
        }
    }
    std::unordered_set<std::string> uncovered;
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < manifest.size(); ++r) {
        const PerturbationType t = manifest.perturbation_type[r];
        if (t == PerturbationType::negative_control ||
            t == PerturbationType::positive_control ||
            t == PerturbationType::unperturbed) {
            keep.push_back(r);
            continue;
        }
        bool any_pass = false;
        for (const auto& id : manifest.perturbation_ids[r]) {
            const auto it = passes.find(id);
            if (it == passes.end()) {
                uncovered.insert(id);
            } else if (it->second) {
                any_pass = true;
            }
        }
        if (any_pass) keep.push_back(r);
    }
    if (uncovered_conditions) *uncovered_conditions = uncovered.size();
    return manifest.subset(keep);
}

std::pair<DatasetManifest, CurationReport> curate_pipeline(
    const DatasetManifest& manifest, const std::vector<ModelConsistency>& results,
    const CurationConfig& cfg) {
    cfg.validate();
    manifest.validate();
    CurationReport report;
    const auto record = [&](const char* name, std::size_t in, std::size_t out) {
        report.steps.push_back({name, in, out});
    };
    DatasetManifest m1 = step1_quality_filter(manifest, cfg);
    record("step1_quality_filter", manifest.size(), m1.size());
    DatasetManifest m2 = step2_metadata_filter(m1, cfg);
    record("step2_metadata_filter", m1.size(), m2.size());
    DatasetManifest m3 = step3_replication_filter(m2, cfg);
    record("step3_replication_filter", m2.size(), m3.size());
    DatasetManifest m4 = step4_undersample(m3, cfg);
    record("step4_undersample", m3.size(), m4.size());
    DatasetManifest m5 =
        step5_phenoprint_filter(m4, results, cfg, &report.uncovered_conditions);
    record("step5_phenoprint_filter", m4.size(), m5.size());
    return {std::move(m5), std::move(report)};
}

}  // namespace phenoscreen
