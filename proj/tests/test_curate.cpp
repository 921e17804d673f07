#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

#include "phenoscreen/curate.hpp"
#include "phenoscreen/error.hpp"
#include "phenoscreen/types.hpp"

using namespace phenoscreen;

namespace {

struct MRow {
    std::string well_id;
    std::string experiment = "E1";
    std::vector<std::string> ids = {"P1"};
    PerturbationType type = PerturbationType::gene_knockout_guide;
    std::string shape = "2160x2160";
    std::vector<std::uint8_t> flags = {};
};

DatasetManifest make_manifest(const std::vector<std::string>& flag_names,
                              const std::vector<MRow>& rows) {
    DatasetManifest m;
    m.flag_names = flag_names;
    for (const MRow& r : rows) {
        m.well_id.push_back(r.well_id);
        m.experiment_id.push_back(r.experiment);
        m.perturbation_count.push_back(static_cast<std::int64_t>(r.ids.size()));
        m.perturbation_ids.push_back(r.ids);
        m.perturbation_type.push_back(r.type);
        m.image_shape_tag.push_back(r.shape);
        std::vector<std::uint8_t> f = r.flags;
        f.resize(flag_names.size(), 1);
        m.flags.insert(m.flags.end(), f.begin(), f.end());
    }
    m.validate();
    return m;
}

ModelConsistency model_with(const std::string& tag,
                            const std::vector<std::pair<std::string, double>>& ps) {
    ModelConsistency m;
    m.model_tag = tag;
    for (const auto& [id, p] : ps) {
        ConsistencyResult r;
        r.perturbation_id = id;
        r.combined_p = p;
        m.results.push_back(std::move(r));
    }
    return m;
}

std::set<std::string> id_set(const DatasetManifest& m) {
    return {m.well_id.begin(), m.well_id.end()};
}

CurationConfig base_config() {
    CurationConfig cfg;
    cfg.required_quality_flags = {"qc"};
    cfg.accepted_image_shape_tags = {"2160x2160"};
    return cfg;
}

}  // namespace

TEST_CASE("step 1 keeps a manifest whose required flags are all set") {
    const DatasetManifest m = make_manifest(
        {"qc", "focus"},
        {{.well_id = "a"}, {.well_id = "b"}, {.well_id = "c"}});
    CurationConfig cfg = base_config();
    cfg.required_quality_flags = {"qc", "focus"};
    const DatasetManifest out = step1_quality_filter(m, cfg);
    CHECK(out.size() == 3);
    CHECK(out.well_id == m.well_id);
}

TEST_CASE("step 1 drops rows failing any required flag, ignores others") {
    const DatasetManifest m = make_manifest(
        {"qc", "aux"},
        {{.well_id = "a", .flags = {1, 1}},
         {.well_id = "b", .flags = {0, 1}},
         {.well_id = "c", .flags = {1, 0}}});
    CurationConfig cfg = base_config();
    cfg.required_quality_flags = {"qc"};
    const DatasetManifest out = step1_quality_filter(m, cfg);
    CHECK(id_set(out) == std::set<std::string>{"a", "c"});
    CHECK_THROWS_AS(
        step1_quality_filter(m, [] {
            CurationConfig c;
            c.required_quality_flags = {"nonexistent"};
            return c;
        }()),
        Error);
}

TEST_CASE("step 2 enforces perturbation count, ids, and image shape") {
    const DatasetManifest m = make_manifest(
        {"qc"},
        {{.well_id = "ok"},
         {.well_id = "four", .ids = {"A", "B", "C", "D"}, .type = PerturbationType::compound},
         {.well_id = "three", .ids = {"A", "B", "C"}, .type = PerturbationType::compound},
         {.well_id = "noid", .ids = {}},
         {.well_id = "blank", .ids = {}, .type = PerturbationType::unperturbed},
         {.well_id = "shape", .shape = "1080x1080"}});
    const DatasetManifest out = step2_metadata_filter(m, base_config());
    CHECK(id_set(out) == std::set<std::string>{"ok", "three", "blank"});

    // empty accepted-tag list admits every shape
    CurationConfig open = base_config();
    open.accepted_image_shape_tags = {};
    CHECK(id_set(step2_metadata_filter(m, open)) ==
          std::set<std::string>{"ok", "three", "blank", "shape"});
}

TEST_CASE("step 3 thresholds: 2 experiments is too few, 3 passes at 20 wells") {
    std::vector<MRow> rows;
    // SPARSE: 50 wells but only 2 experiments
    for (int w = 0; w < 50; ++w)
        rows.push_back({.well_id = "s" + std::to_string(w),
                        .experiment = w % 2 ? "E1" : "E2",
                        .ids = {"SPARSE"}});
    // EDGE: exactly 3 experiments and exactly 20 wells
    for (int w = 0; w < 20; ++w)
        rows.push_back({.well_id = "e" + std::to_string(w),
                        .experiment = "E" + std::to_string(1 + w % 3),
                        .ids = {"EDGE"}});
    // THIN: 3 experiments but 19 wells
    for (int w = 0; w < 19; ++w)
        rows.push_back({.well_id = "t" + std::to_string(w),
                        .experiment = "E" + std::to_string(1 + w % 3),
                        .ids = {"THIN"}});
    const DatasetManifest m = make_manifest({"qc"}, rows);
    const DatasetManifest out = step3_replication_filter(m, base_config());
    std::set<std::string> kept_conditions;
    for (const auto& ids : out.perturbation_ids)
        for (const auto& id : ids) kept_conditions.insert(id);
    CHECK(kept_conditions == std::set<std::string>{"EDGE"});
    CHECK(out.size() == 20);
}

TEST_CASE("step 3 drops a well when any of its conditions is under-replicated") {
    std::vector<MRow> rows;
    for (int w = 0; w < 25; ++w)
        rows.push_back({.well_id = "g" + std::to_string(w),
                        .experiment = "E" + std::to_string(1 + w % 3),
                        .ids = {"GOOD"}});
    rows.push_back({.well_id = "combo",
                    .experiment = "E1",
                    .ids = {"GOOD", "RARE"},
                    .type = PerturbationType::compound});
    const DatasetManifest m = make_manifest({"qc"}, rows);
    const DatasetManifest out = step3_replication_filter(m, base_config());
    CHECK(id_set(out).count("combo") == 0);
    CHECK(out.size() == 25);
}

TEST_CASE("step 4 keeps exactly ceil(rate * n) controls per experiment") {
    std::vector<MRow> rows;
    for (int w = 0; w < 100; ++w)
        rows.push_back({.well_id = "n" + std::to_string(w),
                        .ids = {"NTC"},
                        .type = PerturbationType::negative_control});
    for (int w = 0; w < 7; ++w)
        rows.push_back({.well_id = "u" + std::to_string(w),
                        .ids = {},
                        .type = PerturbationType::unperturbed});
    for (int w = 0; w < 9; ++w)
        rows.push_back({.well_id = "k" + std::to_string(w), .ids = {"KO"}});
    const DatasetManifest m = make_manifest({"qc"}, rows);
    CurationConfig cfg = base_config();
    cfg.keep_rate_negative_controls = 0.30;
    cfg.keep_rate_unperturbed = 0.10;
    const DatasetManifest out = step4_undersample(m, cfg);
    std::size_t ntc = 0, unp = 0, ko = 0;
    for (std::size_t r = 0; r < out.size(); ++r) {
        switch (out.perturbation_type[r]) {
            case PerturbationType::negative_control: ++ntc; break;
            case PerturbationType::unperturbed: ++unp; break;
            default: ++ko;
        }
    }
    CHECK(ntc == 30);  // ceil(0.3 * 100)
    CHECK(unp == 1);   // ceil(0.1 * 7)
    CHECK(ko == 9);    // untouched
}

TEST_CASE("step 4 with no rows of a category is a no-op for it") {
    std::vector<MRow> rows;
    for (int w = 0; w < 12; ++w)
        rows.push_back({.well_id = "k" + std::to_string(w), .ids = {"KO"}});
    const DatasetManifest m = make_manifest({"qc"}, rows);
    CurationConfig cfg = base_config();
    cfg.keep_rate_positive_controls = 0.10;
    const DatasetManifest out = step4_undersample(m, cfg);
    CHECK(out.size() == 12);
    CHECK(out.well_id == m.well_id);
}

TEST_CASE("step 4 is deterministic and independent of row order") {
    std::vector<MRow> rows;
    for (int w = 0; w < 40; ++w)
        rows.push_back({.well_id = "n" + std::to_string(w),
                        .experiment = w % 2 ? "E1" : "E2",
                        .ids = {"NTC"},
                        .type = PerturbationType::negative_control});
    const DatasetManifest m = make_manifest({"qc"}, rows);
    CurationConfig cfg = base_config();
    cfg.seed = 77;
    const DatasetManifest a = step4_undersample(m, cfg);
    const DatasetManifest b = step4_undersample(m, cfg);
    CHECK(a.well_id == b.well_id);

    std::vector<std::size_t> perm(m.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
    const DatasetManifest reversed = m.subset(perm);
    const DatasetManifest c = step4_undersample(reversed, cfg);
    CHECK(id_set(a) == id_set(c));

    CurationConfig other = cfg;
    other.seed = 78;
    const DatasetManifest d = step4_undersample(m, other);
    CHECK(id_set(a) != id_set(d));
}

TEST_CASE("step 5 keeps a condition significant in either model") {
    const DatasetManifest m = make_manifest(
        {"qc"},
        {{.well_id = "either", .ids = {"C1"}},
         {.well_id = "neither", .ids = {"C2"}},
         {.well_id = "ctrl", .ids = {"NTC"}, .type = PerturbationType::negative_control}});
    CurationConfig cfg = base_config();
    cfg.phenoprint_p_threshold = 0.01;
    const std::vector<ModelConsistency> models = {
        model_with("model_a", {{"C1", 0.005}, {"C2", 0.02}}),
        model_with("model_b", {{"C1", 0.5}, {"C2", 0.02}})};
    std::size_t uncovered = 99;
    const DatasetManifest out = step5_phenoprint_filter(m, models, cfg, &uncovered);
    CHECK(id_set(out) == std::set<std::string>{"either", "ctrl"});
    CHECK(uncovered == 0);
}

TEST_CASE("step 5 threshold is strictly less-than") {
    const DatasetManifest m =
        make_manifest({"qc"}, {{.well_id = "at", .ids = {"C1"}},
                               {.well_id = "below", .ids = {"C2"}}});
    CurationConfig cfg = base_config();
    cfg.phenoprint_p_threshold = 0.01;
    const auto models = std::vector<ModelConsistency>{
        model_with("m", {{"C1", 0.01}, {"C2", 0.009999}})};
    const DatasetManifest out = step5_phenoprint_filter(m, models, cfg, nullptr);
    CHECK(id_set(out) == std::set<std::string>{"below"});
}

TEST_CASE("step 5 keeps multi-condition wells when one condition passes") {
    const DatasetManifest m = make_manifest(
        {"qc"},
        {{.well_id = "combo", .ids = {"PASS", "FAIL"}, .type = PerturbationType::compound},
         {.well_id = "lost", .ids = {"FAIL", "UNKNOWN"}, .type = PerturbationType::compound}});
    CurationConfig cfg = base_config();
    const auto models =
        std::vector<ModelConsistency>{model_with("m", {{"PASS", 0.001}, {"FAIL", 0.9}})};
    std::size_t uncovered = 0;
    const DatasetManifest out = step5_phenoprint_filter(m, models, cfg, &uncovered);
    CHECK(id_set(out) == std::set<std::string>{"combo"});
    CHECK(uncovered == 1);  // UNKNOWN

    CHECK_THROWS_AS(step5_phenoprint_filter(m, {}, cfg, nullptr), Error);
}

TEST_CASE("pipeline conserves row counts across steps") {
    std::vector<MRow> rows;
    for (int w = 0; w < 60; ++w) {
        MRow r;
        r.well_id = "w" + std::to_string(w);
        r.experiment = "E" + std::to_string(1 + w % 3);
        r.ids = {"COND" + std::to_string(w % 2)};
        r.flags = {static_cast<std::uint8_t>(w % 5 != 0)};
        rows.push_back(r);
    }
    for (int w = 0; w < 20; ++w)
        rows.push_back({.well_id = "ntc" + std::to_string(w),
                        .experiment = "E" + std::to_string(1 + w % 3),
                        .ids = {"NTC"},
                        .type = PerturbationType::negative_control});
    const DatasetManifest m = make_manifest({"qc"}, rows);
    CurationConfig cfg = base_config();
    cfg.min_experiments = 3;
    cfg.min_wells = 20;
    const auto models = std::vector<ModelConsistency>{
        model_with("m", {{"COND0", 0.001}, {"COND1", 0.5}})};
    const auto [curated, report] = curate_pipeline(m, models, cfg);
    REQUIRE(report.steps.size() == 5);
    CHECK(report.steps[0].step_name == "step1_quality_filter");
    CHECK(report.steps[0].rows_in == m.size());
    for (std::size_t s = 1; s < 5; ++s)
        CHECK(report.steps[s].rows_in == report.steps[s - 1].rows_out);
    CHECK(report.steps[4].rows_out == curated.size());
    for (const auto& s : report.steps) CHECK(s.rows_dropped() == s.rows_in - s.rows_out);
}

TEST_CASE("pipeline on an empty manifest reports zero everywhere") {
    DatasetManifest m;
    m.flag_names = {"qc"};
    const auto models = std::vector<ModelConsistency>{model_with("m", {})};
    const auto [curated, report] = curate_pipeline(m, models, base_config());
    CHECK(curated.size() == 0);
    for (const auto& s : report.steps) {
        CHECK(s.rows_in == 0);
        CHECK(s.rows_out == 0);
    }
    CHECK(report.uncovered_conditions == 0);
}

TEST_CASE("config validation rejects out-of-range rates and thresholds") {
    CurationConfig cfg = base_config();
    cfg.keep_rate_negative_controls = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = base_config();
    cfg.keep_rate_unperturbed = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = base_config();
    cfg.phenoprint_p_threshold = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = base_config();
    cfg.min_wells = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    base_config().validate();
}
