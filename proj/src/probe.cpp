#include "phenoscreen/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "phenoscreen/error.hpp"
#include "phenoscreen/parallel.hpp"
#include "phenoscreen/stats.hpp"

namespace phenoscreen {

LabelKey label_key_from_string(std::string_view s) {
    if (s == "perturbation_id") return LabelKey::perturbation_id;
    if (s == "functional_group") return LabelKey::functional_group;
    fail("invalid_label_key", "unknown label_key '" + std::string(s) + "'");
}

const char* to_string(LabelKey k) {
    return k == LabelKey::perturbation_id ? "perturbation_id" : "functional_group";
}

const std::string& BlockFeatureSet::label(std::size_t row) const {
    if (label_key == LabelKey::perturbation_id) return features.perturbation_id[row];
    const auto it = features.extra.find("functional_group");
    if (it == features.extra.end()) {
        fail("missing_label_column", "features carry no functional_group column");
    }
    return it->second[row];
}

SplitResult split_by_experiment(const BlockFeatureSet& features,
                                const std::vector<std::string>& test_experiment_ids) {
    if (test_experiment_ids.empty()) fail("invalid_split", "no test experiments given");
    const std::set<std::string> test_set(test_experiment_ids.begin(),
                                         test_experiment_ids.end());
    std::set<std::string> present;
    for (const auto& e : features.features.experiment_id) present.insert(e);
    for (const auto& e : test_set) {
        if (!present.count(e)) {
            fail("unknown_experiment", "test experiment '" + e + "' is not in the table");
        }
    }
    SplitResult split;
    std::set<std::string> train_classes;
    for (std::size_t r = 0; r < features.features.size(); ++r) {
        if (test_set.count(features.features.experiment_id[r])) {
            split.test_rows.push_back(r);
        } else {
            split.train_rows.push_back(r);
            train_classes.insert(features.label(r));
        }
    }
    std::set<std::string> dropped;
    std::vector<std::size_t> kept_test;
    for (const std::size_t r : split.test_rows) {
        if (train_classes.count(features.label(r))) {
            kept_test.push_back(r);
        } else {
            dropped.insert(features.label(r));
        }
    }
    split.test_rows = std::move(kept_test);
    split.dropped_classes.assign(dropped.begin(), dropped.end());
    if (split.train_rows.empty() || split.test_rows.empty()) {
        fail("empty_split", "experiment split leaves an empty train or test side");
    }
    return split;
}

double probe_objective(const float* data, std::size_t n, std::size_t dim,
                       const std::vector<std::size_t>& labels, std::size_t n_classes,
                       const std::vector<double>& sample_weights, double C,
                       const std::vector<double>& theta, std::vector<double>* grad) {
    const std::size_t wsize = n_classes * dim;
    const double* w = theta.data();
    const double* b = theta.data() + wsize;
    if (grad) grad->assign(theta.size(), 0.0);
    double loss = 0.0;
    std::vector<double> z(n_classes);
    for (std::size_t i = 0; i < n; ++i) {
        const float* x = data + i * dim;
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double* wc = w + c * dim;
            double acc = b[c];
            for (std::size_t j = 0; j < dim; ++j) acc += wc[j] * double(x[j]);
            z[c] = acc;
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            z[c] = std::exp(z[c] - zmax);
            sum += z[c];
        }
        const double wi = sample_weights[labels[i]];
        loss -= wi * std::log(z[labels[i]] / sum);
        if (grad) {
            double* gw = grad->data();
            double* gb = grad->data() + wsize;
            for (std::size_t c = 0; c < n_classes; ++c) {
                const double gz = wi * (z[c] / sum - (c == labels[i] ? 1.0 : 0.0));
                gb[c] += gz;
                double* gwc = gw + c * dim;
                for (std::size_t j = 0; j < dim; ++j) gwc[j] += gz * double(x[j]);
            }
        }
    }
    double penalty = 0.0;
    for (std::size_t t = 0; t < wsize; ++t) penalty += w[t] * w[t];
    loss += penalty / (2.0 * C);
    if (grad) {
        for (std::size_t t = 0; t < wsize; ++t) (*grad)[t] += w[t] / C;
    }
    return loss;
}

namespace {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (const double x : v) m = std::max(m, std::abs(x));
    return m;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct LbfgsResult {
    bool converged = false;
    std::size_t iterations = 0;
};

// Limited-memory BFGS with a strong-Wolfe line search (c1 = 1e-4, c2 = 0.9).
template <typename Objective>
LbfgsResult lbfgs_minimize(std::vector<double>& theta, const Objective& fg,
                           std::size_t memory, double tol, std::size_t max_iters) {
    constexpr double kC1 = 1e-4;
    constexpr double kC2 = 0.9;
    const std::size_t dim = theta.size();
    std::vector<std::vector<double>> s_hist, y_hist;
    std::vector<double> rho_hist;
    std::vector<double> grad(dim), new_grad(dim), direction(dim), trial(dim);
    double f = fg(theta, &grad);
    if (!std::isfinite(f)) fail("non_finite", "objective is not finite at the start");
    LbfgsResult result;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        if (max_abs(grad) <= tol) {
            result.converged = true;
            break;
        }
        result.iterations = iter + 1;
        // Two-loop recursion.
        direction = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t h = s_hist.size(); h-- > 0;) {
            alpha[h] = rho_hist[h] * dot(s_hist[h], direction);
            for (std::size_t t = 0; t < dim; ++t) direction[t] -= alpha[h] * y_hist[h][t];
        }
        if (!s_hist.empty()) {
            const auto& s = s_hist.back();
            const auto& y = y_hist.back();
            const double gamma = dot(s, y) / dot(y, y);
            for (double& t : direction) t *= gamma;
        }
        for (std::size_t h = 0; h < s_hist.size(); ++h) {
            const double beta = rho_hist[h] * dot(y_hist[h], direction);
            for (std::size_t t = 0; t < dim; ++t) {
                direction[t] += (alpha[h] - beta) * s_hist[h][t];
            }
        }
        for (double& t : direction) t = -t;
        double dphi0 = dot(grad, direction);
        if (dphi0 >= 0.0) {
            // Curvature breakdown: fall back to steepest descent.
            for (std::size_t t = 0; t < dim; ++t) direction[t] = -grad[t];
            dphi0 = dot(grad, direction);
        }

        const auto phi = [&](double a, std::vector<double>* g) {
            for (std::size_t t = 0; t < dim; ++t) trial[t] = theta[t] + a * direction[t];
            return fg(trial, g);
        };
        const double phi0 = f;
        double alpha_step = s_hist.empty() ? std::min(1.0, 1.0 / max_abs(grad)) : 1.0;
        double alpha_prev = 0.0, phi_prev = phi0, dphi_prev = dphi0;
        double alpha_found = -1.0, phi_found = phi0;
        double lo = -1.0, hi = -1.0, phi_lo = 0.0;
        for (int ls = 0; ls < 25; ++ls) {
            const double phi_a = phi(alpha_step, &new_grad);
            const double dphi_a = dot(new_grad, direction);
            if (phi_a > phi0 + kC1 * alpha_step * dphi0 || (ls > 0 && phi_a >= phi_prev)) {
                lo = alpha_prev;
                phi_lo = phi_prev;
                hi = alpha_step;
                break;
            }
            if (std::abs(dphi_a) <= -kC2 * dphi0) {
                alpha_found = alpha_step;
                phi_found = phi_a;
                break;
            }
            if (dphi_a >= 0.0) {
                lo = alpha_step;
                phi_lo = phi_a;
                hi = alpha_prev;
                break;
            }
            alpha_prev = alpha_step;
            phi_prev = phi_a;
            dphi_prev = dphi_a;
            alpha_step = std::min(alpha_step * 2.0, 1e12);
        }
        (void)dphi_prev;
        if (alpha_found < 0.0 && lo >= 0.0) {
            // Zoom by bisection.
            for (int zi = 0; zi < 50; ++zi) {
                const double mid = 0.5 * (lo + hi);
                const double phi_m = phi(mid, &new_grad);
                const double dphi_m = dot(new_grad, direction);
                if (phi_m > phi0 + kC1 * mid * dphi0 || phi_m >= phi_lo) {
                    hi = mid;
                } else {
                    if (std::abs(dphi_m) <= -kC2 * dphi0) {
                        alpha_found = mid;
                        phi_found = phi_m;
                        break;
                    }
                    if (dphi_m * (hi - lo) >= 0.0) hi = lo;
                    lo = mid;
                    phi_lo = phi_m;
                }
                if (std::abs(hi - lo) <= 1e-16 * std::max(1.0, std::abs(lo))) {
                    if (phi_lo < phi0) {
                        alpha_found = lo;
                        phi_found = phi_lo;
                    }
                    break;
                }
            }
        }
        if (alpha_found <= 0.0) break;  // no admissible step; leave converged=false

        // Accept the step; refresh gradient at the accepted point.
        for (std::size_t t = 0; t < dim; ++t) trial[t] = theta[t] + alpha_found * direction[t];
        phi_found = fg(trial, &new_grad);
        std::vector<double> s(dim), y(dim);
        for (std::size_t t = 0; t < dim; ++t) {
            s[t] = trial[t] - theta[t];
            y[t] = new_grad[t] - grad[t];
        }
        const double sy = dot(s, y);
        if (sy > 1e-10 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > memory) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }
        theta = trial;
        grad = new_grad;
        f = phi_found;
    }
    if (!result.converged && max_abs(grad) <= tol) result.converged = true;
    return result;
}

}  // namespace

ProbeModel train_logistic_probe(const float* data, std::size_t n, std::size_t dim,
                                const std::vector<std::size_t>& labels,
                                const std::vector<std::string>& class_labels,
                                const ProbeConfig& cfg) {
    const std::size_t k = class_labels.size();
    if (k < 2) fail("single_class", "probe training needs at least 2 classes");
    if (labels.size() != n) fail("dimension_mismatch", "label count mismatch");
    std::vector<std::size_t> counts(k, 0);
    for (const std::size_t y : labels) {
        if (y >= k) fail("invalid_label", "label index out of range");
        ++counts[y];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            fail("empty_class", "class '" + class_labels[c] + "' has no training rows");
        }
    }
    ProbeModel model;
    model.class_labels = class_labels;
    model.dim = dim;
    model.scaler = fit_standard_scaler(data, n, dim);
    std::vector<float> x(data, data + n * dim);
    apply_scaler(model.scaler, x.data(), n, dim, 1);

    std::vector<double> class_weight(k);
    for (std::size_t c = 0; c < k; ++c) {
        class_weight[c] = static_cast<double>(n) /
                          (static_cast<double>(k) * static_cast<double>(counts[c]));
    }
    std::vector<double> theta(k * dim + k, 0.0);
    const auto objective = [&](const std::vector<double>& t, std::vector<double>* g) {
        return probe_objective(x.data(), n, dim, labels, k, class_weight, cfg.C, t, g);
    };
    const LbfgsResult r =
        lbfgs_minimize(theta, objective, cfg.lbfgs_memory, cfg.tol, cfg.max_iterations);
    model.converged = r.converged;
    model.iterations_used = r.iterations;
    model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(k * dim));
    model.bias.assign(theta.begin() + static_cast<std::ptrdiff_t>(k * dim), theta.end());
    for (const double v : theta) {
        if (!std::isfinite(v)) fail("non_finite", "probe parameters are not finite");
    }
    return model;
}

std::vector<std::size_t> ProbeModel::predict(const float* data, std::size_t n,
                                             std::size_t d) const {
    if (d != dim) fail("dimension_mismatch", "probe applied to mismatched dimension");
    const std::size_t k = class_labels.size();
    std::vector<std::size_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float* x = data + i * d;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_c = 0;
        for (std::size_t c = 0; c < k; ++c) {
            const double* wc = weights.data() + c * d;
            double acc = bias[c];
            for (std::size_t j = 0; j < d; ++j) {
                acc += wc[j] * ((double(x[j]) - scaler.mean[j]) / scaler.stddev[j]);
            }
            if (acc > best) {
                best = acc;
                best_c = c;
            }
        }
        out[i] = best_c;
    }
    return out;
}

double balanced_accuracy(const std::vector<std::size_t>& predictions,
                         const std::vector<std::size_t>& labels,
                         std::size_t n_classes) {
    if (predictions.size() != labels.size()) {
        fail("dimension_mismatch", "prediction/label count mismatch");
    }
    if (labels.empty()) fail("empty_input", "balanced accuracy of an empty set");
    std::vector<std::size_t> count(n_classes, 0), correct(n_classes, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::size_t y = labels[i];
        if (y >= n_classes) fail("invalid_label", "label index out of range");
        ++count[y];
        if (predictions[i] == y) ++correct[y];
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (count[c] == 0) {
            fail("missing_class", "class " + std::to_string(c) + " is not observed");
        }
        sum += static_cast<double>(correct[c]) / static_cast<double>(count[c]);
    }
    return sum / static_cast<double>(n_classes);
}

ProbeSweepResult sweep_blocks(const std::vector<BlockFeatureSet>& blocks,
                              const std::vector<std::string>& test_experiment_ids,
                              const ProbeConfig& cfg, int threads) {
    if (blocks.empty()) fail("empty_input", "block sweep with no blocks");
    std::set<int> seen_blocks;
    for (const auto& b : blocks) {
        if (!seen_blocks.insert(b.block_index).second) {
            fail("duplicate_block", "block index " + std::to_string(b.block_index) +
                                        " appears twice");
        }
        if (b.features.size() != blocks[0].features.size()) {
            fail("schema_mismatch", "blocks disagree on row count");
        }
    }
    for (std::size_t r = 0; r < blocks[0].features.size(); ++r) {
        for (const auto& b : blocks) {
            if (b.label(r) != blocks[0].label(r) ||
                b.features.experiment_id[r] != blocks[0].features.experiment_id[r]) {
                fail("schema_mismatch", "blocks disagree on label assignment at row " +
                                            std::to_string(r));
            }
        }
    }
    const SplitResult split = split_by_experiment(blocks[0], test_experiment_ids);
    std::set<std::string> class_set;
    for (const std::size_t r : split.train_rows) class_set.insert(blocks[0].label(r));
    const std::vector<std::string> class_labels(class_set.begin(), class_set.end());
    std::map<std::string, std::size_t> class_index;
    for (std::size_t c = 0; c < class_labels.size(); ++c) class_index[class_labels[c]] = c;
    std::vector<std::size_t> train_y, test_y;
    for (const std::size_t r : split.train_rows) {
        train_y.push_back(class_index.at(blocks[0].label(r)));
    }
    for (const std::size_t r : split.test_rows) {
        test_y.push_back(class_index.at(blocks[0].label(r)));
    }

    ProbeSweepResult result;
    result.per_block.resize(blocks.size());
    parallel_for(std::size_t{0}, blocks.size(), threads, [&](std::size_t bi) {
        const BlockFeatureSet& block = blocks[bi];
        const std::size_t dim = block.features.dim;
        std::vector<float> train_x(split.train_rows.size() * dim);
        for (std::size_t i = 0; i < split.train_rows.size(); ++i) {
            const auto v = block.features.embedding(split.train_rows[i]);
            std::copy(v.begin(), v.end(), train_x.begin() + static_cast<std::ptrdiff_t>(i * dim));
        }
        std::vector<float> test_x(split.test_rows.size() * dim);
        for (std::size_t i = 0; i < split.test_rows.size(); ++i) {
            const auto v = block.features.embedding(split.test_rows[i]);
            std::copy(v.begin(), v.end(), test_x.begin() + static_cast<std::ptrdiff_t>(i * dim));
        }
        const ProbeModel model = train_logistic_probe(
            train_x.data(), split.train_rows.size(), dim, train_y, class_labels, cfg);
        const auto preds = model.predict(test_x.data(), split.test_rows.size(), dim);
        result.per_block[bi] = {block.block_index,
                                balanced_accuracy(preds, test_y, class_labels.size()),
                                model.converged};
    });
    result.best_block = result.per_block[0].block_index;
    result.best_accuracy = result.per_block[0].balanced_accuracy;
    for (const auto& score : result.per_block) {
        const bool better = score.balanced_accuracy > result.best_accuracy ||
                            (score.balanced_accuracy == result.best_accuracy &&
                             score.block_index < result.best_block);
        if (better) {
            result.best_block = score.block_index;
            result.best_accuracy = score.balanced_accuracy;
        }
    }
    return result;
}

double correlate_probe_with_benchmarks(
    const std::vector<std::pair<std::string, double>>& probe_scores,
    const std::vector<std::pair<std::string, double>>& benchmark_scores) {
    if (probe_scores.size() != benchmark_scores.size() || probe_scores.size() < 3) {
        fail("tag_mismatch", "score lists need identical tag sets of at least 3 tags");
    }
    std::map<std::string, double> bench;
    for (const auto& [tag, v] : benchmark_scores) bench[tag] = v;
    std::map<std::string, double> probe;
    for (const auto& [tag, v] : probe_scores) probe[tag] = v;
    if (bench.size() != benchmark_scores.size() || probe.size() != probe_scores.size()) {
        fail("tag_mismatch", "duplicate model tags");
    }
    std::vector<double> x, y;
    for (const auto& [tag, v] : probe) {
        const auto it = bench.find(tag);
        if (it == bench.end()) fail("tag_mismatch", "tag '" + tag + "' has no benchmark score");
        x.push_back(v);
        y.push_back(it->second);
    }
    return spearman_rho(x, y);
}

}  // namespace phenoscreen
