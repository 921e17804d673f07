#include "phenoscreen/benchmarks.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include "json.hpp"
#include <unordered_set>

#include "io_internal.hpp"
#include "phenoscreen/error.hpp"
#include "phenoscreen/parallel.hpp"
#include "phenoscreen/rng.hpp"

namespace phenoscreen {

namespace {

using Json = nlohmann::json;

std::string concentration_key(double conc) {
    return std::isnan(conc) ? "na" : format_double_exact(conc);
}

// Unit-normalized rows, float storage -> double, same arithmetic as
// mean_pairwise_similarity so group statistics and null statistics agree
// bit for bit.
std::vector<double> unit_rows(const EmbeddingTable& table,
                              const std::vector<std::size_t>& rows) {
    const std::size_t dim = table.dim;
    std::vector<double> out(rows.size() * dim);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto v = table.embedding(rows[k]);
        double norm2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) norm2 += double(v[j]) * double(v[j]);
        const double norm = std::sqrt(norm2);
        if (norm < 1e-12) {
            fail("zero_norm", "zero-norm embedding at row " + std::to_string(rows[k]));
        }
        for (std::size_t j = 0; j < dim; ++j) out[k * dim + j] = double(v[j]) / norm;
    }
    return out;
}

double norm_sum_statistic(const std::vector<double>& units, std::size_t dim,
                          const std::vector<std::size_t>& members,
                          std::vector<double>& acc) {
    acc.assign(dim, 0.0);
    for (const std::size_t m : members) {
        const double* u = units.data() + m * dim;
        for (std::size_t j = 0; j < dim; ++j) acc[j] += u[j];
    }
    double sum2 = 0.0;
    for (const double a : acc) sum2 += a * a;
    const double n = static_cast<double>(members.size());
    return std::clamp(sum2 / (n * n), -1.0, 1.0);
}

}  // namespace

GroupBy group_by_from_string(std::string_view s) {
    if (s == "guide") return GroupBy::guide;
    if (s == "gene") return GroupBy::gene;
    if (s == "compound_concentration") return GroupBy::compound_concentration;
    fail("invalid_group_by", "unknown group_by '" + std::string(s) + "'");
}

const char* to_string(GroupBy g) {
    switch (g) {
        case GroupBy::guide: return "guide";
        case GroupBy::gene: return "gene";
        case GroupBy::compound_concentration: return "compound_concentration";
    }
    fail("internal", "unknown GroupBy");
}

ConsistencyOutput perturbation_consistency(const EmbeddingTable& table,
                                           const PermutationConfig& cfg,
                                           GroupBy group_by, int threads) {
    if (table.size() == 0) fail("empty_table", "perturbation consistency of an empty table");
    if (cfg.K < 1) fail("invalid_config", "permutation K must be >= 1");

    // Eligible pool per experiment: every single-perturbation well.
    std::map<std::string, std::vector<std::size_t>> eligible;
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (table.single_perturbation(r)) eligible[table.experiment_id[r]].push_back(r);
    }
    // Groups within each experiment under the chosen key.
    std::map<std::string, std::map<std::string, std::vector<std::size_t>>> groups;
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (!table.single_perturbation(r)) continue;
        std::string key;
        switch (group_by) {
            case GroupBy::guide:
                key = table.perturbation_id[r];
                break;
            case GroupBy::gene:
                if (table.gene_id[r].empty()) continue;
                key = table.gene_id[r];
                break;
            case GroupBy::compound_concentration:
                key = table.perturbation_id[r] + "@" +
                      concentration_key(table.concentration[r]);
                break;
        }
        groups[table.experiment_id[r]][key].push_back(r);
    }

    struct Unit {
        const std::string* experiment;
        const std::string* key;
        const std::vector<std::size_t>* rows;     // table rows of the group
        std::vector<std::size_t> member_index;    // positions within the pool
        double s_bar = 0.0;
        double p_value = 1.0;
        bool skipped = false;
        std::string skip_reason;
    };
    std::vector<Unit> units;
    std::map<std::string, std::vector<double>> unit_vectors;  // per experiment
    std::map<std::string, std::map<std::size_t, std::size_t>> pool_index;
    for (const auto& [exp, rows] : eligible) {
        unit_vectors[exp] = unit_rows(table, rows);
        auto& index = pool_index[exp];
        for (std::size_t k = 0; k < rows.size(); ++k) index[rows[k]] = k;
    }
    for (const auto& [exp, keyed] : groups) {
        for (const auto& [key, rows] : keyed) {
            Unit u;
            u.experiment = &exp;
            u.key = &key;
            u.rows = &rows;
            const auto& index = pool_index[exp];
            for (const std::size_t r : rows) u.member_index.push_back(index.at(r));
            units.push_back(std::move(u));
        }
    }

    const CounterRng root = CounterRng(cfg.seed).substream("consistency");
    const std::size_t dim = table.dim;
    parallel_for(std::size_t{0}, units.size(), threads, [&](std::size_t ui) {
        Unit& u = units[ui];
        const std::vector<double>& pool = unit_vectors[*u.experiment];
        const std::size_t pool_n = pool.size() / dim;
        const std::size_t n = u.member_index.size();
        if (n < 2) {
            u.skipped = true;
            u.skip_reason = "fewer_than_2_replicates";
            return;
        }
        if (pool_n < n) {
            u.skipped = true;
            u.skip_reason = "too_few_eligible_wells";
            return;
        }
        std::vector<double> acc;
        u.s_bar = norm_sum_statistic(pool, dim, u.member_index, acc);
        CounterRng rng = root.substream(*u.experiment).substream(*u.key);
        std::vector<double> null_stats(cfg.K);
        for (std::uint64_t k = 0; k < cfg.K; ++k) {
            const auto draw = rng.sample_without_replacement(pool_n, n);
            null_stats[k] = norm_sum_statistic(pool, dim, draw, acc);
        }
        u.p_value = permutation_pvalue(u.s_bar, null_stats);
    });

    // Assemble by group key, experiments in ascending order within each group.
    std::map<std::string, ConsistencyResult> by_key;
    ConsistencyOutput out;
    for (const Unit& u : units) {
        if (u.skipped) {
            out.skipped.push_back({*u.key, *u.experiment, u.skip_reason});
            continue;
        }
        auto& res = by_key[*u.key];
        res.perturbation_id = *u.key;
        res.per_experiment.push_back(
            {*u.experiment, u.rows->size(), u.s_bar, u.p_value});
    }
    for (auto& [key, res] : by_key) {
        std::vector<double> ps;
        ps.reserve(res.per_experiment.size());
        for (const auto& e : res.per_experiment) ps.push_back(e.p_value);
        res.combined_p = cauchy_combine(ps);
        out.results.push_back(std::move(res));
    }
    return out;
}

ReplicateOutput replicate_consistency(
    const EmbeddingTable& table,
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const PermutationConfig& cfg, int threads) {
    if (pairs.empty()) fail("invalid_config", "no replicate pairs given");
    std::map<std::string, std::vector<std::size_t>> by_experiment;
    for (std::size_t r = 0; r < table.size(); ++r) {
        by_experiment[table.experiment_id[r]].push_back(r);
    }
    ReplicateOutput out;
    out.per_pair.resize(pairs.size());
    const CounterRng root = CounterRng(cfg.seed).substream("replicate");
    parallel_for(std::size_t{0}, pairs.size(), threads, [&](std::size_t pi) {
        const auto& [ea, eb] = pairs[pi];
        const auto ia = by_experiment.find(ea);
        const auto ib = by_experiment.find(eb);
        if (ia == by_experiment.end() || ib == by_experiment.end()) {
            fail("unknown_experiment", "replicate pair names absent experiment '" +
                                           (ia == by_experiment.end() ? ea : eb) + "'");
        }
        const std::vector<std::size_t>& rows_a = ia->second;
        const std::vector<std::size_t>& rows_b = ib->second;

        // Perturbation key -> wells, ordered by (well_position, well_id) so
        // "the lexicographically first well" is well defined.
        const auto keyed_wells = [&](const std::vector<std::size_t>& rows) {
            std::map<std::string, std::vector<std::size_t>> m;
            for (const std::size_t r : rows) {
                m[table.perturbation_id[r] + "|" + concentration_key(table.concentration[r])]
                    .push_back(r);
            }
            for (auto& [key, wells] : m) {
                std::sort(wells.begin(), wells.end(), [&](std::size_t x, std::size_t y) {
                    if (table.well_position[x] != table.well_position[y]) {
                        return table.well_position[x] < table.well_position[y];
                    }
                    return table.well_id[x] < table.well_id[y];
                });
            }
            return m;
        };
        const auto keyed_a = keyed_wells(rows_a);
        const auto keyed_b = keyed_wells(rows_b);

        std::vector<double> q;
        std::size_t matching_cross_pairs = 0;
        for (const auto& [key, wells_a] : keyed_a) {
            const auto it = keyed_b.find(key);
            if (it == keyed_b.end()) continue;
            matching_cross_pairs += wells_a.size() * it->second.size();
            q.push_back(cosine_similarity(table.embedding(wells_a.front()),
                                          table.embedding(it->second.front())));
        }
        const std::size_t n = q.size();
        if (n < 2) {
            fail("no_matching_perturbations",
                 "experiments '" + ea + "' and '" + eb + "' share " + std::to_string(n) +
                     " perturbations; at least 2 are required");
        }
        const std::size_t total_cross = rows_a.size() * rows_b.size();
        if (total_cross - matching_cross_pairs < n) {
            fail("null_pool_too_small",
                 "never-matching cross pairs (" +
                     std::to_string(total_cross - matching_cross_pairs) +
                     ") are fewer than the " + std::to_string(n) + " required");
        }

        // N distinct never-matching cross pairs, rejection-sampled over the
        // flat (row_a, row_b) index space.
        CounterRng rng = root.substream(ea).substream(eb);
        std::unordered_set<std::size_t> chosen;
        chosen.reserve(n * 2);
        std::vector<double> p0;
        p0.reserve(n);
        const auto pert_key = [&](std::size_t r) {
            return table.perturbation_id[r] + "|" + concentration_key(table.concentration[r]);
        };
        while (p0.size() < n) {
            const std::size_t flat = static_cast<std::size_t>(rng.bounded(total_cross));
            if (!chosen.insert(flat).second) continue;
            const std::size_t ra = rows_a[flat / rows_b.size()];
            const std::size_t rb = rows_b[flat % rows_b.size()];
            if (pert_key(ra) == pert_key(rb)) continue;
            p0.push_back(cosine_similarity(table.embedding(ra), table.embedding(rb)));
        }
        const TwoSampleStat stat = two_sample_stat(q, p0);
        out.per_pair[pi] = {ea, eb, n, stat.ks, stat.cvm, cfg.seed};
    });
    std::vector<double> all_ks, all_cvm;
    for (const auto& p : out.per_pair) {
        all_ks.push_back(p.ks);
        all_cvm.push_back(p.cvm);
    }
    out.median_ks = median(std::move(all_ks));
    out.median_cvm = median(std::move(all_cvm));
    return out;
}

GeneAggregateSet aggregate_gene_embeddings(const EmbeddingTable& table,
                                           std::vector<std::string>* excluded) {
    const std::size_t dim = table.dim;
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
    for (std::size_t r = 0; r < table.size(); ++r) {
        if (table.gene_id[r].empty()) continue;
        auto& [sum, count] = sums[table.gene_id[r]];
        sum.resize(dim, 0.0);
        const auto v = table.embedding(r);
        double norm2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) norm2 += double(v[j]) * double(v[j]);
        const double norm = std::sqrt(norm2);
        if (norm < 1e-12) {
            fail("zero_norm", "zero-norm embedding at row " + std::to_string(r));
        }
        for (std::size_t j = 0; j < dim; ++j) sum[j] += double(v[j]) / norm;
        ++count;
    }
    GeneAggregateSet out;
    out.dim = dim;
    if (excluded) excluded->clear();
    for (auto& [gene, entry] : sums) {
        auto& [sum, count] = entry;
        double norm2 = 0.0;
        for (double& x : sum) {
            x /= static_cast<double>(count);
            norm2 += x * x;
        }
        const double norm = std::sqrt(norm2);
        if (norm < 1e-12) {
            if (excluded) excluded->push_back(gene);
            continue;
        }
        for (double& x : sum) x /= norm;
        out.gene_ids.push_back(gene);
        out.vectors.insert(out.vectors.end(), sum.begin(), sum.end());
    }
    return out;
}

namespace {

constexpr std::size_t kSimilarityBand = 256;

// Canonical index of pair (i, i+1): pairs (i, j) for j > i are contiguous.
std::size_t pair_base(std::size_t i, std::size_t n) {
    return i * (n - 1) - i * (i - 1) / 2;
}

}  // namespace

std::vector<float> all_pair_similarities(const GeneAggregateSet& aggregates,
                                         int threads) {
    const std::size_t n = aggregates.size();
    const std::size_t dim = aggregates.dim;
    if (n < 2) fail("too_few_genes", "pairwise similarities need at least 2 genes");
    const std::size_t n_pairs = n * (n - 1) / 2;
    std::vector<float> sims(n_pairs);
    using ConstMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                    Eigen::Dynamic, Eigen::RowMajor>>;
    const ConstMap u(aggregates.vectors.data(), static_cast<Eigen::Index>(n),
                     static_cast<Eigen::Index>(dim));
    const std::size_t n_bands = (n + kSimilarityBand - 1) / kSimilarityBand;
    parallel_for(std::size_t{0}, n_bands, threads, [&](std::size_t band) {
        const std::size_t row0 = band * kSimilarityBand;
        const std::size_t rows = std::min(kSimilarityBand, n - row0);
        // Columns j >= row0 only; the strict upper triangle of the band is kept.
        const Eigen::MatrixXd tile =
            u.middleRows(static_cast<Eigen::Index>(row0), static_cast<Eigen::Index>(rows)) *
            u.bottomRows(static_cast<Eigen::Index>(n - row0)).transpose();
        for (std::size_t i = row0; i < row0 + rows; ++i) {
            float* dst = sims.data() + pair_base(i, n);
            const Eigen::Index ti = static_cast<Eigen::Index>(i - row0);
            for (std::size_t j = i + 1; j < n; ++j) {
                const double s = std::clamp(
                    tile(ti, static_cast<Eigen::Index>(j - row0)), -1.0, 1.0);
                dst[j - i - 1] = static_cast<float>(s);
            }
        }
    });
    return sims;
}

void pairwise_similarity_matrix(
    const GeneAggregateSet& aggregates, int threads,
    const std::function<void(std::size_t, std::size_t, double)>& visit) {
    (void)threads;  // emission order is canonical, so the walk is sequential
    const std::size_t n = aggregates.size();
    const std::size_t dim = aggregates.dim;
    if (n < 2) fail("too_few_genes", "pairwise similarities need at least 2 genes");
    using ConstMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                    Eigen::Dynamic, Eigen::RowMajor>>;
    const ConstMap u(aggregates.vectors.data(), static_cast<Eigen::Index>(n),
                     static_cast<Eigen::Index>(dim));
    for (std::size_t row0 = 0; row0 < n; row0 += kSimilarityBand) {
        const std::size_t rows = std::min(kSimilarityBand, n - row0);
        const Eigen::MatrixXd tile =
            u.middleRows(static_cast<Eigen::Index>(row0), static_cast<Eigen::Index>(rows)) *
            u.bottomRows(static_cast<Eigen::Index>(n - row0)).transpose();
        for (std::size_t i = row0; i < row0 + rows; ++i) {
            const Eigen::Index ti = static_cast<Eigen::Index>(i - row0);
            for (std::size_t j = i + 1; j < n; ++j) {
                visit(i, j, std::clamp(tile(ti, static_cast<Eigen::Index>(j - row0)),
                                       -1.0, 1.0));
            }
        }
    }
}

double empirical_quantile(std::vector<float>& values, double q) {
    if (values.empty()) fail("empty_input", "quantile of an empty sample");
    if (q < 0.0 || q > 1.0) fail("invalid_quantile", "quantile level outside [0,1]");
    const std::size_t m = values.size();
    const double h = static_cast<double>(m - 1) * q;
    const std::size_t k = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(k);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k),
                     values.end());
    const double xk = values[k];
    if (frac == 0.0 || k + 1 == m) return xk;
    const double xk1 = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(k + 1),
                                         values.end());
    return xk + frac * (xk1 - xk);
}

double median(std::vector<double> values) {
    if (values.empty()) fail("empty_input", "median of an empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size();
    if (m % 2 == 1) return values[m / 2];
    return 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

RecallReport relationship_recall(const GeneAggregateSet& aggregates,
                                 const RelationshipDB& db, double low_pct,
                                 double high_pct, int threads) {
    if (aggregates.size() < 2) fail("too_few_genes", "recall needs at least 2 genes");
    if (!(low_pct < high_pct)) fail("invalid_quantile", "low_pct must be below high_pct");
    RecallReport report;
    report.database_name = db.name;
    report.low_pct = low_pct;
    report.high_pct = high_pct;
    report.universe_size_genes = aggregates.size();
    std::vector<float> sims = all_pair_similarities(aggregates, threads);
    report.t_low = empirical_quantile(sims, low_pct);
    report.t_high = empirical_quantile(sims, high_pct);
    const std::size_t dim = aggregates.dim;
    for (const auto& [a, b] : db.pairs) {
        const std::size_t ia = aggregates.find(a);
        const std::size_t ib = aggregates.find(b);
        if (ia == npos || ib == npos) continue;
        ++report.n_known_pairs_in_universe;
        const auto va = aggregates.vec(ia);
        const auto vb = aggregates.vec(ib);
        double dot = 0.0;
        for (std::size_t j = 0; j < dim; ++j) dot += va[j] * vb[j];
        dot = std::clamp(dot, -1.0, 1.0);
        if (dot <= report.t_low || dot >= report.t_high) ++report.n_recalled;
    }
    if (report.n_known_pairs_in_universe == 0) {
        report.undefined_recall = true;
        report.recall = 0.0;
    } else {
        report.recall = static_cast<double>(report.n_recalled) /
                        static_cast<double>(report.n_known_pairs_in_universe);
    }
    return report;
}

std::string consistency_to_json(const ConsistencyOutput& out, const std::string& model_tag,
                                const std::string& config_json) {
    Json doc;
    doc["command"] = "consistency";
    doc["model_tag"] = model_tag;
    if (!config_json.empty()) {
        doc["config"] = Json::parse(config_json);
    }
    Json results = Json::array();
    for (const auto& r : out.results) {
        Json jr;
        jr["perturbation_id"] = r.perturbation_id;
        jr["combined_p"] = r.combined_p;
        Json per = Json::array();
        for (const auto& e : r.per_experiment) {
            Json je;
            je["experiment_id"] = e.experiment_id;
            je["n_replicates"] = e.n_replicates;
            je["s_bar"] = e.s_bar;
            je["p_value"] = e.p_value;
            per.push_back(std::move(je));
        }
        jr["per_experiment"] = std::move(per);
        results.push_back(std::move(jr));
    }
    doc["results"] = std::move(results);
    Json skipped = Json::array();
    for (const auto& s : out.skipped) {
        Json js;
        js["perturbation_id"] = s.perturbation_id;
        js["experiment_id"] = s.experiment_id;
        js["reason"] = s.reason;
        skipped.push_back(std::move(js));
    }
    doc["skipped"] = std::move(skipped);
    return doc.dump(2) + "\n";
}

std::vector<ConsistencyResult> consistency_from_json(const std::string& text,
                                                     std::string* model_tag_out) {
    const Json doc = Json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("results")) {
        fail("report_parse", "malformed consistency report");
    }
    if (model_tag_out) {
        *model_tag_out = doc.value("model_tag", std::string("model"));
    }
    std::vector<ConsistencyResult> results;
    for (const auto& jr : doc["results"]) {
        ConsistencyResult r;
        r.perturbation_id = jr.at("perturbation_id").get<std::string>();
        r.combined_p = jr.at("combined_p").get<double>();
        if (jr.contains("per_experiment")) {
            for (const auto& je : jr["per_experiment"]) {
                r.per_experiment.push_back({je.at("experiment_id").get<std::string>(),
                                            je.at("n_replicates").get<std::size_t>(),
                                            je.at("s_bar").get<double>(),
                                            je.at("p_value").get<double>()});
            }
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace phenoscreen
