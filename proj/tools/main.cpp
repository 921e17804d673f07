// phenoscreen: reproducible pipeline runs around the evaluation library.
//
// Every subcommand reads an optional [command]-sectioned config file, accepts
// flag overrides (flags win), writes its reports under --output-dir, and logs
// to stderr. Stochastic commands refuse to run without --seed. Report JSON is
// canonical (sorted keys) and embeds the resolved config; thread count and log
// level are execution details and stay out of reports so reruns at different
// thread counts stay byte-identical.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "phenoscreen/benchmarks.hpp"
#include "phenoscreen/curate.hpp"
#include "phenoscreen/error.hpp"
#include "phenoscreen/normalize.hpp"
#include "phenoscreen/probe.hpp"
#include "phenoscreen/stats.hpp"
#include "phenoscreen/synth.hpp"
#include "phenoscreen/table_io.hpp"
#include "phenoscreen/types.hpp"

namespace {

using nlohmann::json;
namespace ps = phenoscreen;
namespace fs = std::filesystem;

int g_log_threshold = 1;  // debug=0 info=1 warn=2 error=3

void set_log_level(const std::string& level) {
    if (level == "debug") g_log_threshold = 0;
    else if (level == "info") g_log_threshold = 1;
    else if (level == "warn") g_log_threshold = 2;
    else g_log_threshold = 3;
}

void logmsg(int level, const char* tag, const std::string& msg) {
    if (level < g_log_threshold) return;
    std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}
void log_info(const std::string& msg) { logmsg(1, "info", msg); }

struct CommonOpts {
    std::string output_dir = ".";
    std::uint64_t seed = 0;
    int threads = 0;
    std::string format = "columnar";
    std::string log_level = "info";
};

void add_common(CLI::App* cmd, CommonOpts& o, bool seed_required) {
    cmd->fallthrough();
    cmd->add_option("--output-dir", o.output_dir, "directory for written artifacts")
        ->capture_default_str();
    auto* seed = cmd->add_option("--seed", o.seed, "random seed");
    if (seed_required) seed->required();
    cmd->add_option("--threads", o.threads, "worker threads, 0 = all hardware threads")
        ->capture_default_str();
    cmd->add_option("--format", o.format, "table file format")
        ->check(CLI::IsMember({"columnar", "csv"}))
        ->capture_default_str();
    cmd->add_option("--log-level", o.log_level, "stderr verbosity")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}))
        ->capture_default_str();
}

ps::FileFormat fmt(const CommonOpts& o) { return ps::format_from_string(o.format); }

std::string table_name(const std::string& base, const CommonOpts& o) {
    return base + (fmt(o) == ps::FileFormat::columnar ? ".h5" : ".csv");
}

fs::path out_path(const CommonOpts& o, const std::string& name) {
    fs::create_directories(o.output_dir);
    return fs::path(o.output_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) ps::fail("io", "cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) ps::fail("io", "short write to '" + path.string() + "'");
}

void require_exists(const std::string& path, const char* what) {
    if (!fs::exists(path)) {
        ps::fail("missing_input",
                 std::string(what) + " path '" + path + "' does not exist");
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (const char c : s) {
        if (c == '"') q += "\"\"";
        q += c;
    }
    return q + "\"";
}

std::string num(double x) { return json(x).dump(); }

// ---------------------------------------------------------------- normalize

struct NormalizeOpts {
    std::string input;
    std::string method = "tvn";
    double eigenvalue_floor = 1e-6;
    bool shift_origin = false;
};

int cmd_normalize(const CommonOpts& g, const NormalizeOpts& o) {
    require_exists(o.input, "input");
    ps::EmbeddingTable table = ps::load_embedding_table(o.input, fmt(g));
    const std::vector<std::size_t> controls = ps::negative_control_rows(table);
    log_info("loaded " + std::to_string(table.size()) + " rows, " +
             std::to_string(controls.size()) + " negative controls");

    std::string transform_json;
    if (o.method == "scaler") {
        const ps::ScalerTransform t = ps::fit_standard_scaler(table.subset(controls));
        ps::apply_scaler(t, table, g.threads);
        transform_json = ps::to_json_string(t);
    } else {
        const ps::WhiteningTransform t =
            ps::fit_tvn(table.subset(controls), o.eigenvalue_floor);
        ps::apply_tvn(t, table, g.threads);
        transform_json = ps::to_json_string(t);
    }
    if (o.shift_origin) ps::shift_origin_to_controls(table, g.threads);

    const std::string table_file = table_name("normalized", g);
    ps::save_embedding_table(table, out_path(g, table_file).string(), fmt(g));
    write_text(out_path(g, "transform.json"), transform_json);

    json report;
    report["command"] = "normalize";
    report["config"] = {{"input", o.input},
                        {"method", o.method},
                        {"eigenvalue_floor", o.eigenvalue_floor},
                        {"shift_origin", o.shift_origin},
                        {"format", g.format}};
    report["n_rows"] = table.size();
    report["n_negative_controls"] = controls.size();
    report["outputs"] = {{"table", table_file}, {"transform", "transform.json"}};
    write_text(out_path(g, "normalize.json"), report.dump(2) + "\n");
    log_info("wrote " + table_file + ", transform.json, normalize.json");
    return 0;
}

// -------------------------------------------------------------- consistency

struct ConsistencyOpts {
    std::string input;
    std::string group_by = "guide";
    std::uint64_t k = 1000;
    std::string model_tag = "model";
};

int cmd_consistency(const CommonOpts& g, const ConsistencyOpts& o) {
    require_exists(o.input, "input");
    ps::EmbeddingTable table = ps::load_embedding_table(o.input, fmt(g));
    const ps::GroupBy group_by = ps::group_by_from_string(o.group_by);
    const ps::PermutationConfig pc{o.k, g.seed};
    const ps::ConsistencyOutput out =
        ps::perturbation_consistency(table, pc, group_by, g.threads);
    log_info(std::to_string(out.results.size()) + " groups scored, " +
             std::to_string(out.skipped.size()) + " skipped");

    const json config = {{"input", o.input},      {"group_by", o.group_by},
                         {"k", o.k},              {"model_tag", o.model_tag},
                         {"seed", g.seed},        {"format", g.format}};
    write_text(out_path(g, "consistency.json"),
               ps::consistency_to_json(out, o.model_tag, config.dump()));

    std::string csv = "perturbation_id,experiment_id,n_replicates,s_bar,p_value,combined_p\n";
    for (const auto& r : out.results) {
        for (const auto& e : r.per_experiment) {
            csv += csv_field(r.perturbation_id) + "," + csv_field(e.experiment_id) + "," +
                   std::to_string(e.n_replicates) + "," + num(e.s_bar) + "," +
                   num(e.p_value) + ",\n";
        }
        csv += csv_field(r.perturbation_id) + ",combined,,,," + num(r.combined_p) + "\n";
    }
    write_text(out_path(g, "consistency.csv"), csv);
    return 0;
}

// ---------------------------------------------------------------- replicate

struct ReplicateOpts {
    std::string input;
    std::string pairs;  // "A:B,C:D"; empty = all unordered experiment pairs
};

std::vector<std::pair<std::string, std::string>> resolve_pairs(
    const ps::EmbeddingTable& table, const std::string& spec) {
    std::vector<std::pair<std::string, std::string>> pairs;
    if (spec.empty()) {
        const std::set<std::string> ids(table.experiment_id.begin(),
                                        table.experiment_id.end());
        const std::vector<std::string> sorted(ids.begin(), ids.end());
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            for (std::size_t j = i + 1; j < sorted.size(); ++j) {
                pairs.emplace_back(sorted[i], sorted[j]);
            }
        }
        return pairs;
    }
    std::size_t start = 0;
    while (start <= spec.size()) {
        std::size_t end = spec.find(',', start);
        if (end == std::string::npos) end = spec.size();
        const std::string item = spec.substr(start, end - start);
        const std::size_t colon = item.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == item.size()) {
            ps::fail("invalid_config", "pair '" + item + "' is not of the form A:B");
        }
        pairs.emplace_back(item.substr(0, colon), item.substr(colon + 1));
        start = end + 1;
    }
    return pairs;
}

int cmd_replicate(const CommonOpts& g, const ReplicateOpts& o) {
    require_exists(o.input, "input");
    ps::EmbeddingTable table = ps::load_embedding_table(o.input, fmt(g));
    const auto pairs = resolve_pairs(table, o.pairs);
    const ps::ReplicateOutput out =
        ps::replicate_consistency(table, pairs, {1000, g.seed}, g.threads);
    log_info(std::to_string(out.per_pair.size()) + " experiment pairs scored");

    json resolved_pairs = json::array();
    for (const auto& [a, b] : pairs) resolved_pairs.push_back({a, b});
    json report;
    report["command"] = "replicate";
    report["config"] = {{"input", o.input},
                        {"pairs", resolved_pairs},
                        {"seed", g.seed},
                        {"format", g.format}};
    auto& per_pair = report["per_pair"] = json::array();
    for (const auto& p : out.per_pair) {
        per_pair.push_back({{"experiment_a", p.experiment_a},
                            {"experiment_b", p.experiment_b},
                            {"n_matched", p.n_matched},
                            {"ks", p.ks},
                            {"cvm", p.cvm},
                            {"seed_used", p.seed_used}});
    }
    report["median_ks"] = out.median_ks;
    report["median_cvm"] = out.median_cvm;
    write_text(out_path(g, "replicate.json"), report.dump(2) + "\n");

    std::string csv = "experiment_a,experiment_b,n_matched,ks,cvm\n";
    for (const auto& p : out.per_pair) {
        csv += csv_field(p.experiment_a) + "," + csv_field(p.experiment_b) + "," +
               std::to_string(p.n_matched) + "," + num(p.ks) + "," + num(p.cvm) + "\n";
    }
    csv += "median,,," + num(out.median_ks) + "," + num(out.median_cvm) + "\n";
    write_text(out_path(g, "replicate.csv"), csv);
    return 0;
}

// ------------------------------------------------------------------- recall

struct RecallOpts {
    std::string input;
    std::string relationships;
    std::string database_name;
    std::string arm_annotation;
    double low_pct = 0.05;
    double high_pct = 0.95;
};

int cmd_recall(const CommonOpts& g, const RecallOpts& o) {
    require_exists(o.input, "input");
    require_exists(o.relationships, "relationships");
    ps::EmbeddingTable table = ps::load_embedding_table(o.input, fmt(g));
    std::vector<std::string> excluded;
    ps::GeneAggregateSet aggregates = ps::aggregate_gene_embeddings(table, &excluded);
    if (!o.arm_annotation.empty()) {
        require_exists(o.arm_annotation, "arm annotation");
        aggregates =
            ps::arm_bias_correct(aggregates, ps::load_arm_annotation(o.arm_annotation));
    }
    const std::string name = o.database_name.empty()
                                 ? fs::path(o.relationships).stem().string()
                                 : o.database_name;
    ps::RelationshipLoadStats stats;
    const ps::RelationshipDB db = ps::load_relationship_db(o.relationships, name, &stats);
    log_info(std::to_string(aggregates.size()) + " gene aggregates, " +
             std::to_string(db.pairs.size()) + " known pairs loaded");
    const ps::RecallReport rep =
        ps::relationship_recall(aggregates, db, o.low_pct, o.high_pct, g.threads);

    json report;
    report["command"] = "recall";
    report["config"] = {{"input", o.input},
                        {"relationships", o.relationships},
                        {"database_name", name},
                        {"arm_annotation", o.arm_annotation},
                        {"low_pct", o.low_pct},
                        {"high_pct", o.high_pct},
                        {"format", g.format}};
    report["excluded_genes"] = excluded;
    report["reports"] = json::array();
    report["reports"].push_back(
        {{"database_name", rep.database_name},
         {"n_known_pairs_in_universe", rep.n_known_pairs_in_universe},
         {"n_recalled", rep.n_recalled},
         {"recall", rep.undefined_recall ? json() : json(rep.recall)},
         {"low_pct", rep.low_pct},
         {"high_pct", rep.high_pct},
         {"universe_size_genes", rep.universe_size_genes},
         {"t_low", rep.t_low},
         {"t_high", rep.t_high}});
    write_text(out_path(g, "recall.json"), report.dump(2) + "\n");

    std::string csv =
        "database_name,universe_size_genes,n_known_pairs_in_universe,n_recalled,recall,"
        "t_low,t_high\n";
    csv += csv_field(rep.database_name) + "," + std::to_string(rep.universe_size_genes) +
           "," + std::to_string(rep.n_known_pairs_in_universe) + "," +
           std::to_string(rep.n_recalled) + "," +
           (rep.undefined_recall ? "" : num(rep.recall)) + "," + num(rep.t_low) + "," +
           num(rep.t_high) + "\n";
    write_text(out_path(g, "recall.csv"), csv);
    return 0;
}

// -------------------------------------------------------------------- probe

struct ProbeOpts {
    std::vector<std::string> blocks;
    std::vector<std::string> test_experiments;
    std::string label_key = "perturbation_id";
    double C = 1.0;
    double tol = 1e-4;
    std::size_t max_iterations = 2000;
};

int cmd_probe(const CommonOpts& g, const ProbeOpts& o) {
    std::vector<ps::BlockFeatureSet> blocks;
    blocks.reserve(o.blocks.size());
    for (std::size_t i = 0; i < o.blocks.size(); ++i) {
        require_exists(o.blocks[i], "block");
        ps::BlockFeatureSet fs_block;
        fs_block.block_index = static_cast<int>(i + 1);
        fs_block.label_key = ps::label_key_from_string(o.label_key);
        fs_block.features = ps::load_embedding_table(o.blocks[i], fmt(g));
        blocks.push_back(std::move(fs_block));
    }
    ps::ProbeConfig cfg;
    cfg.C = o.C;
    cfg.tol = o.tol;
    cfg.max_iterations = o.max_iterations;
    const ps::ProbeSweepResult sweep =
        ps::sweep_blocks(blocks, o.test_experiments, cfg, g.threads);
    log_info("best block " + std::to_string(sweep.best_block) + " at balanced accuracy " +
             num(sweep.best_accuracy));

    json report;
    report["command"] = "probe";
    report["config"] = {{"blocks", o.blocks},
                        {"test_experiments", o.test_experiments},
                        {"label_key", o.label_key},
                        {"C", o.C},
                        {"tol", o.tol},
                        {"max_iterations", o.max_iterations},
                        {"format", g.format}};
    auto& per_block = report["per_block"] = json::array();
    for (const auto& b : sweep.per_block) {
        per_block.push_back({{"block_index", b.block_index},
                             {"balanced_accuracy", b.balanced_accuracy},
                             {"converged", b.converged}});
    }
    report["best_block"] = sweep.best_block;
    report["best_accuracy"] = sweep.best_accuracy;
    write_text(out_path(g, "probe.json"), report.dump(2) + "\n");

    std::string csv = "block_index,balanced_accuracy\n";
    for (const auto& b : sweep.per_block) {
        csv += std::to_string(b.block_index) + "," + num(b.balanced_accuracy) + "\n";
    }
    write_text(out_path(g, "probe.csv"), csv);
    return 0;
}

// ------------------------------------------------------------------- curate

struct CurateOpts {
    std::string manifest;
    std::vector<std::string> consistency_files;
    std::vector<std::string> required_flags;
    std::vector<std::string> shape_tags;
    std::int64_t max_perturbations = 3;
    std::int64_t min_experiments = 3;
    std::int64_t min_wells = 20;
    double keep_positive = 0.10;
    double keep_negative = 0.30;
    double keep_unperturbed = 0.10;
    double p_threshold = 0.01;
};

int cmd_curate(const CommonOpts& g, const CurateOpts& o) {
    require_exists(o.manifest, "manifest");
    const ps::DatasetManifest manifest = ps::load_manifest(o.manifest, fmt(g));
    std::vector<ps::ModelConsistency> models;
    for (const std::string& path : o.consistency_files) {
        require_exists(path, "consistency report");
        std::ifstream in(path, std::ios::binary);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        ps::ModelConsistency m;
        m.results = ps::consistency_from_json(text, &m.model_tag);
        models.push_back(std::move(m));
    }

    ps::CurationConfig cfg;
    cfg.required_quality_flags = o.required_flags;
    cfg.accepted_image_shape_tags = o.shape_tags;
    cfg.max_perturbations_per_well = o.max_perturbations;
    cfg.min_experiments = o.min_experiments;
    cfg.min_wells = o.min_wells;
    cfg.keep_rate_positive_controls = o.keep_positive;
    cfg.keep_rate_negative_controls = o.keep_negative;
    cfg.keep_rate_unperturbed = o.keep_unperturbed;
    cfg.phenoprint_p_threshold = o.p_threshold;
    cfg.seed = g.seed;

    const auto [curated, rep] = ps::curate_pipeline(manifest, models, cfg);
    const std::string manifest_file = table_name("curated_manifest", g);
    ps::save_manifest(curated, out_path(g, manifest_file).string(), fmt(g));

    json report;
    report["command"] = "curate";
    report["config"] = {{"manifest", o.manifest},
                        {"consistency_files", o.consistency_files},
                        {"required_quality_flags", o.required_flags},
                        {"accepted_image_shape_tags", o.shape_tags},
                        {"max_perturbations_per_well", o.max_perturbations},
                        {"min_experiments", o.min_experiments},
                        {"min_wells", o.min_wells},
                        {"keep_rate_positive_controls", o.keep_positive},
                        {"keep_rate_negative_controls", o.keep_negative},
                        {"keep_rate_unperturbed", o.keep_unperturbed},
                        {"phenoprint_p_threshold", o.p_threshold},
                        {"seed", g.seed},
                        {"format", g.format}};
    auto& steps = report["steps"] = json::array();
    for (const auto& s : rep.steps) {
        steps.push_back({{"step_name", s.step_name},
                         {"rows_in", s.rows_in},
                         {"rows_out", s.rows_out},
                         {"rows_dropped", s.rows_dropped()}});
    }
    report["uncovered_conditions"] = rep.uncovered_conditions;
    report["outputs"] = {{"manifest", manifest_file}};
    write_text(out_path(g, "curation_report.json"), report.dump(2) + "\n");
    log_info("kept " + std::to_string(curated.size()) + " of " +
             std::to_string(manifest.size()) + " rows");
    return 0;
}

// -------------------------------------------------------------------- synth

struct SynthOpts {
    ps::SynthConfig cfg;
    std::size_t manifest_rows = 10000;
};

int cmd_synth(const CommonOpts& g, SynthOpts& o) {
    o.cfg.seed = g.seed;
    // generate everything before the first write: config errors must not
    // leave partial output families behind
    auto [table, truth] = ps::generate_screen(o.cfg);
    ps::CurationConfig ccfg;
    ccfg.required_quality_flags = {"qc_pass"};
    ccfg.accepted_image_shape_tags = {"2160x2160"};
    ccfg.seed = g.seed;
    const auto [manifest, ctruth] =
        ps::generate_curation_manifest({o.manifest_rows, g.seed}, ccfg);

    const std::string screen_file = table_name("screen", g);
    ps::save_embedding_table(table, out_path(g, screen_file).string(), fmt(g));
    write_text(out_path(g, "ground_truth.json"), ps::ground_truth_to_json(o.cfg, truth));

    std::string edges = "# planted related gene pairs\n";
    for (const auto& [a, b] : truth.related_pairs.pairs) {
        edges += a + "\t" + b + "\n";
    }
    write_text(out_path(g, "planted_pairs.tsv"), edges);

    const std::string manifest_file = table_name("curation_manifest", g);
    ps::save_manifest(manifest, out_path(g, manifest_file).string(), fmt(g));

    for (const auto& model : ctruth.model_results) {
        const json config = {{"source", "synth"}, {"seed", g.seed}};
        const ps::ConsistencyOutput out{model.results, {}};
        write_text(out_path(g, model.model_tag + ".consistency.json"),
                   ps::consistency_to_json(out, model.model_tag, config.dump()));
    }

    json ct;
    ct["kept_noncontrol_well_ids"] =
        std::vector<std::string>(ctruth.kept_noncontrol_well_ids.begin(),
                                 ctruth.kept_noncontrol_well_ids.end());
    auto& counts = ct["control_keep_counts"] = json::array();
    for (const auto& [key, keep] : ctruth.control_keep_counts) {
        counts.push_back(
            {{"category", key.first}, {"experiment", key.second}, {"keep", keep}});
    }
    ct["rows_after_step"] = ctruth.rows_after_step;
    ct["uncovered_conditions"] = ctruth.uncovered_conditions;
    ct["curation_config"] = {{"required_quality_flags", ccfg.required_quality_flags},
                             {"accepted_image_shape_tags", ccfg.accepted_image_shape_tags},
                             {"seed", g.seed}};
    write_text(out_path(g, "curation_truth.json"), ct.dump(2) + "\n");
    log_info("wrote " + screen_file + " (" + std::to_string(table.size()) + " wells), " +
             manifest_file + " (" + std::to_string(manifest.size()) + " rows)");
    return 0;
}

void emit_error(const std::string& code, const std::string& message) {
    json err;
    err["error"] = {{"code", code}, {"message", message}};
    std::fprintf(stdout, "%s\n", err.dump().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"post-inference evaluation and curation for high-content screening embeddings"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "config file; one [command] section per subcommand, flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);

    std::function<int()> run;

    auto* normalize = app.add_subcommand("normalize", "fit + apply embedding normalization");
    static CommonOpts ng;
    static NormalizeOpts no;
    add_common(normalize, ng, false);
    normalize->add_option("--input", no.input, "embedding table")->required();
    normalize->add_option("--method", no.method, "scaler | tvn")
        ->check(CLI::IsMember({"scaler", "tvn"}))
        ->capture_default_str();
    normalize->add_option("--eigenvalue-floor", no.eigenvalue_floor)->capture_default_str();
    normalize->add_flag("--shift-origin", no.shift_origin,
                        "recenter on the negative-control mean after the transform");
    normalize->callback([&] { run = [&] { set_log_level(ng.log_level); return cmd_normalize(ng, no); }; });

    auto* consistency =
        app.add_subcommand("consistency", "perturbation-consistency permutation test");
    static CommonOpts cg;
    static ConsistencyOpts co;
    add_common(consistency, cg, true);
    consistency->add_option("--input", co.input, "normalized embedding table")->required();
    consistency->add_option("--group-by", co.group_by,
                            "guide | gene | compound_concentration")
        ->check(CLI::IsMember({"guide", "gene", "compound_concentration"}))
        ->capture_default_str();
    consistency->add_option("--k", co.k, "permutation null draws")->capture_default_str();
    consistency->add_option("--model-tag", co.model_tag, "label recorded in the report")
        ->capture_default_str();
    consistency->callback([&] { run = [&] { set_log_level(cg.log_level); return cmd_consistency(cg, co); }; });

    auto* replicate =
        app.add_subcommand("replicate", "replicate-consistency KS/CVM across experiments");
    static CommonOpts rg;
    static ReplicateOpts ro;
    add_common(replicate, rg, true);
    replicate->add_option("--input", ro.input, "normalized embedding table")->required();
    replicate->add_option("--pairs", ro.pairs,
                          "experiment pairs A:B,C:D (default: all unordered pairs)");
    replicate->callback([&] { run = [&] { set_log_level(rg.log_level); return cmd_replicate(rg, ro); }; });

    auto* recall = app.add_subcommand("recall", "known-relationship recall over gene aggregates");
    static CommonOpts eg;
    static RecallOpts eo;
    add_common(recall, eg, false);
    recall->add_option("--input", eo.input, "normalized embedding table")->required();
    recall->add_option("--relationships", eo.relationships, "gene pair edge list")->required();
    recall->add_option("--database-name", eo.database_name, "name recorded in the report");
    recall->add_option("--arm-annotation", eo.arm_annotation,
                       "gene -> chromosome arm map; enables arm-bias correction");
    recall->add_option("--low-pct", eo.low_pct)->capture_default_str();
    recall->add_option("--high-pct", eo.high_pct)->capture_default_str();
    recall->callback([&] { run = [&] { set_log_level(eg.log_level); return cmd_recall(eg, eo); }; });

    auto* probe = app.add_subcommand("probe", "linear-probe sweep over block features");
    static CommonOpts pg;
    static ProbeOpts po;
    add_common(probe, pg, false);
    probe->add_option("--block", po.blocks,
                      "block feature table, repeatable; order assigns block indices 1..N")
        ->required();
    probe->add_option("--test-experiment", po.test_experiments,
                      "held-out experiment id, repeatable")
        ->required();
    probe->add_option("--label-key", po.label_key, "perturbation_id | functional_group")
        ->check(CLI::IsMember({"perturbation_id", "functional_group"}))
        ->capture_default_str();
    probe->add_option("--C", po.C, "inverse L2 strength")->capture_default_str();
    probe->add_option("--tol", po.tol)->capture_default_str();
    probe->add_option("--max-iterations", po.max_iterations)->capture_default_str();
    probe->callback([&] { run = [&] { set_log_level(pg.log_level); return cmd_probe(pg, po); }; });

    auto* curate = app.add_subcommand("curate", "training-set curation pipeline");
    static CommonOpts ug;
    static CurateOpts uo;
    add_common(curate, ug, true);
    curate->add_option("--manifest", uo.manifest, "dataset manifest")->required();
    curate->add_option("--consistency", uo.consistency_files,
                       "consistency report JSON, repeatable (one per model)")
        ->required();
    curate->add_option("--required-flag", uo.required_flags,
                       "quality flag that must be true, repeatable");
    curate->add_option("--accepted-shape-tag", uo.shape_tags,
                       "accepted image shape tag, repeatable; none = accept all");
    curate->add_option("--max-perturbations", uo.max_perturbations)->capture_default_str();
    curate->add_option("--min-experiments", uo.min_experiments)->capture_default_str();
    curate->add_option("--min-wells", uo.min_wells)->capture_default_str();
    curate->add_option("--keep-rate-positive", uo.keep_positive)->capture_default_str();
    curate->add_option("--keep-rate-negative", uo.keep_negative)->capture_default_str();
    curate->add_option("--keep-rate-unperturbed", uo.keep_unperturbed)->capture_default_str();
    curate->add_option("--p-threshold", uo.p_threshold)->capture_default_str();
    curate->callback([&] { run = [&] { set_log_level(ug.log_level); return cmd_curate(ug, uo); }; });

    auto* synth = app.add_subcommand("synth", "planted-ground-truth synthetic screen");
    static CommonOpts sg;
    static SynthOpts so;
    add_common(synth, sg, true);
    synth->add_option("--n-genes", so.cfg.n_genes)->capture_default_str();
    synth->add_option("--n-guides-per-gene", so.cfg.n_guides_per_gene)->capture_default_str();
    synth->add_option("--n-experiments", so.cfg.n_experiments)->capture_default_str();
    synth->add_option("--wells-per-guide-per-experiment", so.cfg.wells_per_guide_per_experiment)
        ->capture_default_str();
    synth->add_option("--dim", so.cfg.dim)->capture_default_str();
    synth->add_option("--frac-null-genes", so.cfg.frac_null_genes)->capture_default_str();
    synth->add_option("--effect-magnitude", so.cfg.effect_magnitude)->capture_default_str();
    synth->add_option("--noise-sigma", so.cfg.noise_sigma)->capture_default_str();
    synth->add_option("--batch-shift-sigma", so.cfg.batch_shift_sigma)->capture_default_str();
    synth->add_option("--batch-rotation-strength", so.cfg.batch_rotation_strength)
        ->capture_default_str();
    synth->add_option("--n-related-groups", so.cfg.n_related_groups)->capture_default_str();
    synth->add_option("--genes-per-group", so.cfg.genes_per_group)->capture_default_str();
    synth->add_option("--n-neg-controls-per-experiment", so.cfg.n_neg_controls_per_experiment)
        ->capture_default_str();
    synth->add_option("--manifest-rows", so.manifest_rows,
                      "row count of the planted curation manifest")
        ->capture_default_str();
    synth->callback([&] { run = [&] { set_log_level(sg.log_level); return cmd_synth(sg, so); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() != 0) emit_error("cli", e.what());
        return app.exit(e);
    }

    try {
        return run ? run() : 1;
    } catch (const phenoscreen::Error& e) {
        emit_error(e.code(), e.what());
        return 1;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 1;
    }
}
