#include "phenoscreen/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "phenoscreen/error.hpp"
#include "phenoscreen/rng.hpp"

namespace phenoscreen {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kBlockProfileWidth = 1.2;

std::string zpad(const char* prefix, std::size_t index, int width) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, index);
    return buf;
}

std::size_t null_gene_count(const SynthConfig& cfg) {
    return static_cast<std::size_t>(
        std::llround(cfg.frac_null_genes * static_cast<double>(cfg.n_genes)));
}

std::vector<double> random_unit(CounterRng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& x : v) {
            x = rng.next_normal();
            norm2 += x * x;
        }
    } while (norm2 < 1e-12);
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
    return v;
}

// sqrt(w)*shared + sqrt(1-w)*u with u a unit vector orthogonal to shared, so
// two group members a, b satisfy cos(a, b) = w + (1-w)*<u_a, u_b> >= 2w - 1.
std::vector<double> blended_direction(CounterRng& rng, const std::vector<double>& shared,
                                      double w) {
    const std::size_t dim = shared.size();
    std::vector<double> u(dim);
    double norm2 = 0.0;
    do {
        u = random_unit(rng, dim);
        double dot = 0.0;
        for (std::size_t j = 0; j < dim; ++j) dot += u[j] * shared[j];
        norm2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            u[j] -= dot * shared[j];
            norm2 += u[j] * u[j];
        }
    } while (norm2 < 1e-12);
    const double a = std::sqrt(w);
    const double b = std::sqrt(1.0 - w) / std::sqrt(norm2);
    std::vector<double> dir(dim);
    for (std::size_t j = 0; j < dim; ++j) dir[j] = a * shared[j] + b * u[j];
    return dir;
}

Eigen::MatrixXd sign_fixed_q(const Eigen::MatrixXd& m) {
    const Eigen::Index d = m.rows();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

// Orthogonal factor of (1-alpha)*I + alpha*Q for a uniform random rotation Q;
// alpha = 0 yields the identity exactly, alpha = 1 a fully random rotation.
std::vector<double> batch_rotation_matrix(CounterRng& rng, std::size_t dim, double alpha) {
    const Eigen::Index d = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.next_normal();
    }
    const Eigen::MatrixXd q = sign_fixed_q(g);
    const Eigen::MatrixXd blend =
        (1.0 - alpha) * Eigen::MatrixXd::Identity(d, d) + alpha * q;
    const Eigen::MatrixXd rot = sign_fixed_q(blend);
    std::vector<double> out(dim * dim);
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            out[static_cast<std::size_t>(i) * dim + static_cast<std::size_t>(j)] = rot(i, j);
        }
    }
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (dim == 0) fail("invalid_config", "dim must be positive");
    if (n_genes == 0 || n_guides_per_gene == 0 || n_experiments == 0 ||
        wells_per_guide_per_experiment == 0) {
        fail("invalid_config", "gene, guide, experiment, and well counts must be positive");
    }
    if (!(frac_null_genes >= 0.0 && frac_null_genes <= 1.0)) {
        fail("invalid_config", "frac_null_genes must lie in [0, 1]");
    }
    if (effect_magnitude < 0.0 || noise_sigma < 0.0 || batch_shift_sigma < 0.0) {
        fail("invalid_config", "magnitudes must be non-negative");
    }
    if (!(batch_rotation_strength >= 0.0 && batch_rotation_strength <= 1.0)) {
        fail("invalid_config", "batch_rotation_strength must lie in [0, 1]");
    }
    if (n_related_groups > 0 && genes_per_group < 2) {
        fail("invalid_config", "related groups need at least two genes each");
    }
    const std::size_t n_signal = n_genes - null_gene_count(*this);
    if (n_related_groups * genes_per_group > n_signal) {
        fail("invalid_config", "related groups demand more signal genes than available");
    }
}

std::pair<EmbeddingTable, SynthGroundTruth> generate_screen(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t n_null = null_gene_count(cfg);
    const std::size_t n_signal = cfg.n_genes - n_null;
    const std::size_t n_grouped = cfg.n_related_groups * cfg.genes_per_group;
    const CounterRng root(cfg.seed);

    std::vector<std::string> gene_names(cfg.n_genes);
    for (std::size_t g = 0; g < cfg.n_genes; ++g) gene_names[g] = zpad("G", g, 5);

    SynthGroundTruth truth;
    truth.related_pairs.name = "planted";

    std::vector<std::vector<double>> shared(cfg.n_related_groups);
    for (std::size_t r = 0; r < cfg.n_related_groups; ++r) {
        CounterRng rng = root.substream("synth.group").substream(r);
        shared[r] = random_unit(rng, cfg.dim);
        for (std::size_t a = 0; a < cfg.genes_per_group; ++a) {
            for (std::size_t b = a + 1; b < cfg.genes_per_group; ++b) {
                truth.related_pairs.insert(gene_names[r * cfg.genes_per_group + a],
                                           gene_names[r * cfg.genes_per_group + b]);
            }
        }
    }

    std::vector<std::vector<double>> mu(cfg.n_genes);
    for (std::size_t g = 0; g < cfg.n_genes; ++g) {
        CounterRng rng = root.substream("synth.gene").substream(g);
        if (g >= n_signal) {
            mu[g].assign(cfg.dim, 0.0);
            truth.null_genes.push_back(gene_names[g]);
        } else {
            std::vector<double> dir =
                g < n_grouped
                    ? blended_direction(rng, shared[g / cfg.genes_per_group], kGroupShare)
                    : random_unit(rng, cfg.dim);
            mu[g].resize(cfg.dim);
            for (std::size_t j = 0; j < cfg.dim; ++j) {
                mu[g][j] = cfg.effect_magnitude * dir[j];
            }
        }
        truth.effect[gene_names[g]] = mu[g];
    }

    const bool rotate = cfg.batch_rotation_strength > 0.0;
    const bool shift = cfg.batch_shift_sigma > 0.0;
    std::vector<std::string> exp_names(cfg.n_experiments);
    std::vector<std::vector<double>> rot(cfg.n_experiments);
    std::vector<std::vector<double>> shf(cfg.n_experiments);
    for (std::size_t e = 0; e < cfg.n_experiments; ++e) {
        exp_names[e] = zpad("E", e, 2);
        CounterRng rng = root.substream("synth.batch").substream(e);
        if (rotate) {
            rot[e] = batch_rotation_matrix(rng, cfg.dim, cfg.batch_rotation_strength);
            truth.batch_rotation[exp_names[e]] = rot[e];
        }
        if (shift) {
            shf[e].resize(cfg.dim);
            for (double& s : shf[e]) s = cfg.batch_shift_sigma * rng.next_normal();
            truth.batch_shift[exp_names[e]] = shf[e];
        }
    }

    EmbeddingTable table;
    const std::size_t rows_per_exp =
        cfg.n_genes * cfg.n_guides_per_gene * cfg.wells_per_guide_per_experiment +
        cfg.n_neg_controls_per_experiment;
    table.well_id.reserve(rows_per_exp * cfg.n_experiments);
    table.embeddings.reserve(rows_per_exp * cfg.n_experiments * cfg.dim);

    std::vector<double> x(cfg.dim), y(cfg.dim);
    std::vector<float> fvec(cfg.dim);
    const auto emit = [&](std::size_t e, std::size_t& position, const std::string& pert,
                          PerturbationType type, const std::string& gene) {
        if (rotate) {
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>>
                R(rot[e].data(), static_cast<Eigen::Index>(cfg.dim),
                  static_cast<Eigen::Index>(cfg.dim));
            Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(cfg.dim)) =
                R * Eigen::Map<const Eigen::VectorXd>(x.data(),
                                                      static_cast<Eigen::Index>(cfg.dim));
        } else {
            y = x;
        }
        if (shift) {
            for (std::size_t j = 0; j < cfg.dim; ++j) y[j] += shf[e][j];
        }
        for (std::size_t j = 0; j < cfg.dim; ++j) fvec[j] = static_cast<float>(y[j]);
        const std::string pos = zpad("W", position++, 5);
        table.append_row(exp_names[e] + ":" + pos, exp_names[e], exp_names[e] + "_P1", pos,
                         pert, type, gene, kNaN, "SYNTH", fvec);
    };

    for (std::size_t e = 0; e < cfg.n_experiments; ++e) {
        std::size_t position = 0;
        for (std::size_t g = 0; g < cfg.n_genes; ++g) {
            for (std::size_t q = 0; q < cfg.n_guides_per_gene; ++q) {
                const std::string guide = gene_names[g] + zpad("_g", q, 2);
                for (std::size_t w = 0; w < cfg.wells_per_guide_per_experiment; ++w) {
                    CounterRng rng = root.substream("synth.well")
                                         .substream(e)
                                         .substream(g)
                                         .substream(q)
                                         .substream(w);
                    for (std::size_t j = 0; j < cfg.dim; ++j) {
                        x[j] = mu[g][j] + cfg.noise_sigma * rng.next_normal();
                    }
                    emit(e, position, guide, PerturbationType::gene_knockout_guide,
                         gene_names[g]);
                }
            }
        }
        for (std::size_t c = 0; c < cfg.n_neg_controls_per_experiment; ++c) {
            CounterRng rng = root.substream("synth.control").substream(e).substream(c);
            for (std::size_t j = 0; j < cfg.dim; ++j) {
                x[j] = cfg.noise_sigma * rng.next_normal();
            }
            emit(e, position, "NTC", PerturbationType::negative_control, "");
        }
    }
    return {std::move(table), std::move(truth)};
}

std::vector<BlockFeatureSet> generate_block_family(const SynthConfig& cfg,
                                                   std::size_t n_blocks,
                                                   std::size_t peak_block) {
    cfg.validate();
    if (n_blocks == 0 || peak_block < 1 || peak_block > n_blocks) {
        fail("invalid_config", "peak_block must lie in [1, n_blocks]");
    }
    const CounterRng root(cfg.seed);
    const std::size_t k = cfg.n_genes;  // one class per gene, one guide each

    std::vector<std::string> class_names(k);
    std::vector<std::vector<double>> mu(k);
    for (std::size_t c = 0; c < k; ++c) {
        class_names[c] = zpad("CLS", c, 3);
        CounterRng rng = root.substream("synth.block.class").substream(c);
        const std::vector<double> dir = random_unit(rng, cfg.dim);
        mu[c].resize(cfg.dim);
        for (std::size_t j = 0; j < cfg.dim; ++j) mu[c][j] = cfg.effect_magnitude * dir[j];
    }

    EmbeddingTable base;
    std::vector<std::string> labels;
    const std::vector<float> zeros(cfg.dim, 0.0f);
    for (std::size_t e = 0; e < cfg.n_experiments; ++e) {
        const std::string exp = zpad("E", e, 2);
        std::size_t position = 0;
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t w = 0; w < cfg.wells_per_guide_per_experiment; ++w) {
                const std::string pos = zpad("W", position++, 5);
                base.append_row(exp + ":" + pos, exp, exp + "_P1", pos,
                                class_names[c] + "_g00",
                                PerturbationType::gene_knockout_guide, class_names[c],
                                kNaN, "SYNTH", zeros);
                labels.push_back(class_names[c]);
            }
        }
    }
    base.extra["functional_group"] = labels;

    std::vector<BlockFeatureSet> blocks(n_blocks);
    for (std::size_t b = 1; b <= n_blocks; ++b) {
        const double delta = static_cast<double>(b) - static_cast<double>(peak_block);
        const double scale =
            std::exp(-0.5 * delta * delta / (kBlockProfileWidth * kBlockProfileWidth));
        BlockFeatureSet& fs = blocks[b - 1];
        fs.block_index = static_cast<int>(b);
        fs.label_key = LabelKey::functional_group;
        fs.features = base;
        std::size_t row = 0;
        for (std::size_t e = 0; e < cfg.n_experiments; ++e) {
            for (std::size_t c = 0; c < k; ++c) {
                for (std::size_t w = 0; w < cfg.wells_per_guide_per_experiment; ++w) {
                    CounterRng rng =
                        root.substream("synth.block.noise").substream(b).substream(row);
                    float* dst = fs.features.embeddings.data() + row * cfg.dim;
                    for (std::size_t j = 0; j < cfg.dim; ++j) {
                        dst[j] = static_cast<float>(scale * mu[c][j] +
                                                    cfg.noise_sigma * rng.next_normal());
                    }
                    ++row;
                }
            }
        }
    }
    return blocks;
}

namespace {

// Manifest assembly shared by every planted block.
struct ManifestBuilder {
    DatasetManifest m;
    std::map<std::string, std::size_t> position_of;
    std::string good_tag;
    std::string bad_tag;
    std::string fail_flag;  // empty when no flags are required

    std::string add_row(const std::string& exp, std::vector<std::string> ids,
                        PerturbationType type, bool flags_ok, bool shape_ok) {
        const std::string pos = zpad("W", position_of[exp]++, 5);
        const std::string well = exp + ":" + pos;
        m.well_id.push_back(well);
        m.experiment_id.push_back(exp);
        m.perturbation_type.push_back(type);
        m.perturbation_count.push_back(static_cast<std::int64_t>(ids.size()));
        m.perturbation_ids.push_back(std::move(ids));
        m.image_shape_tag.push_back(shape_ok ? good_tag : bad_tag);
        const std::size_t row = m.well_id.size() - 1;
        for (const std::string& f : m.flag_names) {
            std::uint8_t v = 1;
            if (!flags_ok && f == fail_flag) v = 0;
            if (f == "aux_pass") v = static_cast<std::uint8_t>(row % 2);
            m.flags.push_back(v);
        }
        return well;
    }
};

}  // namespace

std::pair<DatasetManifest, CurationGroundTruth> generate_curation_manifest(
    const CurationSynthConfig& synth_cfg, const CurationConfig& cfg) {
    cfg.validate();
    const std::size_t min_exp = static_cast<std::size_t>(cfg.min_experiments);
    const std::size_t min_wells = static_cast<std::size_t>(cfg.min_wells);
    if (min_exp < 2 || min_wells < min_exp) {
        fail("invalid_config",
             "planting needs min_experiments >= 2 and min_wells >= min_experiments");
    }
    if (cfg.max_perturbations_per_well < 2) {
        fail("invalid_config", "planting needs max_perturbations_per_well >= 2");
    }

    const std::size_t n_exp = min_exp + 1;
    std::vector<std::string> exps(n_exp);
    for (std::size_t e = 0; e < n_exp; ++e) exps[e] = zpad("E", e, 2);

    ManifestBuilder b;
    b.m.flag_names = cfg.required_quality_flags;
    b.m.flag_names.push_back("aux_pass");
    if (!cfg.required_quality_flags.empty()) b.fail_flag = cfg.required_quality_flags.front();
    b.good_tag = cfg.accepted_image_shape_tags.empty() ? "2160x2160"
                                                       : cfg.accepted_image_shape_tags.front();
    b.bad_tag = "corrupt_0";
    while (std::find(cfg.accepted_image_shape_tags.begin(),
                     cfg.accepted_image_shape_tags.end(),
                     b.bad_tag) != cfg.accepted_image_shape_tags.end()) {
        b.bad_tag += "_x";
    }
    const bool has_flags = !cfg.required_quality_flags.empty();
    const bool has_shape = !cfg.accepted_image_shape_tags.empty();

    CurationGroundTruth truth;
    std::size_t drop1 = 0, drop2 = 0, drop3 = 0, drop5 = 0;

    struct PlantedCond {
        std::string id;
        double p_a;
        double p_b;
    };
    std::vector<PlantedCond> covered;
    const double p_pass = cfg.phenoprint_p_threshold * 0.5;
    const double p_fail = 0.5 * (1.0 + cfg.phenoprint_p_threshold);

    const auto add_condition = [&](const std::string& id, std::size_t wells,
                                   std::size_t over_exps, bool record_kept) {
        for (std::size_t w = 0; w < wells; ++w) {
            const std::string well =
                b.add_row(exps[w % over_exps], {id},
                          PerturbationType::gene_knockout_guide, true, true);
            if (record_kept) truth.kept_noncontrol_well_ids.insert(well);
        }
    };

    // Pass with margin (covered by model A only).
    for (std::size_t i = 0; i < 8; ++i) {
        const std::string id = zpad("PASSA_", i, 3);
        add_condition(id, min_wells + 10, n_exp, true);
        covered.push_back({id, p_pass, p_fail});
    }
    // Exactly min_experiments experiments and min_wells wells; passes step 3 on
    // the boundary and step 5 through model B alone.
    for (std::size_t i = 0; i < 5; ++i) {
        const std::string id = zpad("BNDRY_", i, 3);
        add_condition(id, min_wells, min_exp, true);
        covered.push_back({id, p_fail, p_pass});
    }
    // One experiment short.
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string id = zpad("FEXPT_", i, 3);
        add_condition(id, min_wells + 5, min_exp - 1, false);
        drop3 += min_wells + 5;
        covered.push_back({id, p_pass, p_pass});
    }
    // One well short.
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string id = zpad("FWELL_", i, 3);
        add_condition(id, min_wells - 1, std::min(min_exp, min_wells - 1), false);
        drop3 += min_wells - 1;
        covered.push_back({id, p_pass, p_pass});
    }
    // Survives to step 5, fails it in both models; the first sits exactly on
    // the threshold (the rule is strict <).
    for (std::size_t i = 0; i < 5; ++i) {
        const std::string id = zpad("FAILP_", i, 3);
        add_condition(id, min_wells + 10, n_exp, false);
        drop5 += min_wells + 10;
        covered.push_back({id, i == 0 ? cfg.phenoprint_p_threshold : p_fail, p_fail});
    }
    // Absent from every model's results.
    for (std::size_t i = 0; i < 3; ++i) {
        add_condition(zpad("UNCOV_", i, 3), min_wells + 10, n_exp, false);
        drop5 += min_wells + 10;
    }
    truth.uncovered_conditions = 3;
    // Two conditions on one well, one of them passing.
    for (std::size_t i = 0; i < 6; ++i) {
        const std::string well =
            b.add_row(exps[i % n_exp], {"PASSA_000", "FAILP_001"},
                      PerturbationType::gene_knockout_guide, true, true);
        truth.kept_noncontrol_well_ids.insert(well);
    }

    if (has_flags) {
        for (std::size_t i = 0; i < 200; ++i) {
            b.add_row(exps[i % n_exp], {zpad("FLAGF_", i, 4)},
                      PerturbationType::gene_knockout_guide, false, true);
        }
        drop1 += 200;
    }
    if (has_shape) {
        for (std::size_t i = 0; i < 150; ++i) {
            b.add_row(exps[i % n_exp], {zpad("BADSH_", i, 4)},
                      PerturbationType::gene_knockout_guide, true, false);
        }
        drop2 += 150;
    }
    // Missing condition ids on a perturbed well.
    for (std::size_t i = 0; i < 100; ++i) {
        b.add_row(exps[i % n_exp], {}, PerturbationType::gene_knockout_guide, true, true);
    }
    drop2 += 100;
    // One condition too many.
    {
        const std::size_t over = static_cast<std::size_t>(cfg.max_perturbations_per_well) + 1;
        for (std::size_t i = 0; i < 50; ++i) {
            std::vector<std::string> ids(over);
            for (std::size_t j = 0; j < over; ++j) ids[j] = zpad("OVER_", i * over + j, 5);
            b.add_row(exps[i % n_exp], std::move(ids), PerturbationType::compound, true,
                      true);
        }
        drop2 += 50;
    }

    // Control strata, sized so every control condition clears step 3.
    std::size_t drop4 = 0;
    const auto add_stratum = [&](PerturbationType type, const std::string& id,
                                 std::size_t per_exp, double rate) {
        for (std::size_t e = 0; e < n_exp; ++e) {
            std::vector<std::string> pool;
            for (std::size_t c = 0; c < per_exp; ++c) {
                std::vector<std::string> ids;
                if (!id.empty()) ids.push_back(id);
                pool.push_back(b.add_row(exps[e], std::move(ids), type, true, true));
            }
            std::sort(pool.begin(), pool.end());
            const std::size_t n_keep = static_cast<std::size_t>(
                std::ceil(rate * static_cast<double>(pool.size())));
            const auto key = std::make_pair(std::string(to_string(type)), exps[e]);
            truth.control_keep_counts[key] = n_keep;
            drop4 += pool.size() - n_keep;
            truth.control_pools[key] = std::move(pool);
        }
    };
    add_stratum(PerturbationType::negative_control, "NTC", std::max<std::size_t>(40, min_wells),
                cfg.keep_rate_negative_controls);
    add_stratum(PerturbationType::positive_control, "PMA", std::max<std::size_t>(25, min_wells),
                cfg.keep_rate_positive_controls);
    add_stratum(PerturbationType::unperturbed, "", std::max<std::size_t>(30, min_wells),
                cfg.keep_rate_unperturbed);

    // Filler up to the requested row count, dropped at the earliest active step.
    if (b.m.size() > synth_cfg.total_rows) {
        fail("invalid_config", "total_rows too small for the planted blocks");
    }
    const std::size_t filler = synth_cfg.total_rows - b.m.size();
    for (std::size_t i = 0; i < filler; ++i) {
        if (has_flags) {
            b.add_row(exps[i % n_exp], {"FILLC"}, PerturbationType::gene_knockout_guide,
                      false, true);
        } else if (has_shape) {
            b.add_row(exps[i % n_exp], {"FILLC"}, PerturbationType::gene_knockout_guide,
                      true, false);
        } else {
            b.add_row(exps[i % n_exp], {}, PerturbationType::gene_knockout_guide, true,
                      true);
        }
    }
    if (has_flags) {
        drop1 += filler;
    } else {
        drop2 += filler;
    }

    const std::size_t total = synth_cfg.total_rows;
    truth.rows_after_step = {total - drop1, total - drop1 - drop2,
                             total - drop1 - drop2 - drop3,
                             total - drop1 - drop2 - drop3 - drop4,
                             total - drop1 - drop2 - drop3 - drop4 - drop5};

    ModelConsistency model_a{"model_a", {}};
    ModelConsistency model_b{"model_b", {}};
    for (const PlantedCond& c : covered) {
        model_a.results.push_back(
            {c.id, {{exps[0], 4, 0.42, c.p_a}}, c.p_a});
        model_b.results.push_back(
            {c.id, {{exps[0], 4, 0.37, c.p_b}}, c.p_b});
    }
    truth.model_results = {std::move(model_a), std::move(model_b)};

    // Reverse row order so no step can rely on rows arriving sorted.
    std::vector<std::size_t> reversed(b.m.size());
    for (std::size_t r = 0; r < reversed.size(); ++r) {
        reversed[r] = reversed.size() - 1 - r;
    }
    return {b.m.subset(reversed), std::move(truth)};
}

std::string ground_truth_to_json(const SynthConfig& cfg, const SynthGroundTruth& truth) {
    nlohmann::json j;
    j["command"] = "synth";
    j["config"] = {{"n_genes", cfg.n_genes},
                   {"n_guides_per_gene", cfg.n_guides_per_gene},
                   {"n_experiments", cfg.n_experiments},
                   {"wells_per_guide_per_experiment", cfg.wells_per_guide_per_experiment},
                   {"dim", cfg.dim},
                   {"frac_null_genes", cfg.frac_null_genes},
                   {"effect_magnitude", cfg.effect_magnitude},
                   {"noise_sigma", cfg.noise_sigma},
                   {"batch_shift_sigma", cfg.batch_shift_sigma},
                   {"batch_rotation_strength", cfg.batch_rotation_strength},
                   {"n_related_groups", cfg.n_related_groups},
                   {"genes_per_group", cfg.genes_per_group},
                   {"n_neg_controls_per_experiment", cfg.n_neg_controls_per_experiment},
                   {"seed", cfg.seed}};
    j["null_genes"] = truth.null_genes;
    auto& pairs = j["related_pairs"] = nlohmann::json::array();
    for (const auto& [a, bb] : truth.related_pairs.pairs) {
        pairs.push_back({a, bb});
    }
    j["effects"] = truth.effect;
    j["batch_shift"] = truth.batch_shift;
    auto& rots = j["batch_rotation"] = nlohmann::json::object();
    for (const auto& [exp, mat] : truth.batch_rotation) {
        const std::size_t d = static_cast<std::size_t>(
            std::llround(std::sqrt(static_cast<double>(mat.size()))));
        auto& rows = rots[exp] = nlohmann::json::array();
        for (std::size_t i = 0; i < d; ++i) {
            rows.push_back(std::vector<double>(mat.begin() + i * d, mat.begin() + (i + 1) * d));
        }
    }
    return j.dump(2) + "\n";
}

}  // namespace phenoscreen
