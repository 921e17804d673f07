#include <cstdio>
#include <unistd.h>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

#ifndef PHENOSCREEN_CLI
#error "PHENOSCREEN_CLI must point at the built binary"
#endif

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct CliDir {
    fs::path path;
    CliDir() {
        path = fs::temp_directory_path() /
               ("phenoscreen_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(next()));
        fs::create_directories(path);
    }
    ~CliDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
    static int next() {
        static int c = 0;
        return c++;
    }
};

int run(const std::string& args, const std::string& capture_file = "") {
    std::string cmd = std::string(PHENOSCREEN_CLI) + " " + args;
    if (!capture_file.empty()) cmd += " > " + capture_file + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

Json load_json(const std::string& path) { return Json::parse(slurp(path)); }

}  // namespace

TEST_CASE("synth -> normalize -> recall recovers the planted relationships") {
    CliDir dir;
    const std::string synth_dir = dir / "synth";
    CHECK(run("synth --seed 5 --n-genes 40 --n-guides-per-gene 2 --n-experiments 3"
              " --wells-per-guide-per-experiment 2 --dim 24 --frac-null-genes 0.2"
              " --effect-magnitude 1.0 --noise-sigma 0.3 --n-related-groups 4"
              " --genes-per-group 3 --n-neg-controls-per-experiment 12"
              " --manifest-rows 2500 --output-dir " + synth_dir) == 0);
    CHECK(fs::exists(synth_dir + "/screen.h5"));
    CHECK(fs::exists(synth_dir + "/ground_truth.json"));
    CHECK(fs::exists(synth_dir + "/planted_pairs.tsv"));
    CHECK(fs::exists(synth_dir + "/curation_manifest.h5"));
    CHECK(fs::exists(synth_dir + "/curation_truth.json"));

    const std::string norm_dir = dir / "norm";
    CHECK(run("normalize --input " + synth_dir + "/screen.h5 --method tvn --output-dir " +
              norm_dir) == 0);
    const Json norm_report = load_json(norm_dir + "/normalize.json");
    CHECK(norm_report.at("config").at("method") == "tvn");

    const std::string recall_dir = dir / "recall";
    CHECK(run("recall --input " + norm_dir + "/normalized.h5 --relationships " +
              synth_dir + "/planted_pairs.tsv --output-dir " + recall_dir) == 0);
    const Json recall = load_json(recall_dir + "/recall.json").at("reports").at(0);
    CHECK(recall.at("recall").get<double>() >= 0.9);
    CHECK(recall.at("n_known_pairs_in_universe").get<int>() == 4 * 3);
    CHECK(recall.at("database_name") == "planted_pairs");
}

TEST_CASE("reports are byte-identical across reruns and thread counts") {
    CliDir dir;
    const std::string synth_dir = dir / "synth";
    REQUIRE(run("synth --seed 11 --n-genes 20 --n-experiments 2 --dim 12"
                " --n-related-groups 2 --genes-per-group 3 --manifest-rows 2500"
                " --output-dir " + synth_dir) == 0);
    const std::string c1 = dir / "c1";
    const std::string c2 = dir / "c2";
    const std::string base = "consistency --input " + synth_dir +
                             "/screen.h5 --group-by gene --k 100 --seed 7 --output-dir ";
    CHECK(run(base + c1 + " --threads 1") == 0);
    CHECK(run(base + c2 + " --threads 4") == 0);
    CHECK(slurp(c1 + "/consistency.json") == slurp(c2 + "/consistency.json"));
    CHECK(slurp(c1 + "/consistency.csv") == slurp(c2 + "/consistency.csv"));

    const std::string r1 = dir / "r1";
    const std::string r2 = dir / "r2";
    const std::string rep = "replicate --input " + synth_dir +
                            "/screen.h5 --seed 13 --output-dir ";
    CHECK(run(rep + r1 + " --threads 1") == 0);
    CHECK(run(rep + r2 + " --threads 4") == 0);
    CHECK(slurp(r1 + "/replicate.json") == slurp(r2 + "/replicate.json"));
}

TEST_CASE("missing input produces an error object naming the path") {
    CliDir dir;
    const std::string out = dir / "stdout.json";
    const int code = run("consistency --input " + (dir / "absent.h5") +
                             " --seed 1 --output-dir " + (dir / "x"),
                         out);
    CHECK(code != 0);
    const Json err = load_json(out);
    REQUIRE(err.contains("error"));
    CHECK(err.at("error").at("code") == "missing_input");
    const std::string message = err.at("error").at("message").get<std::string>();
    CHECK(message.find("absent.h5") != std::string::npos);
}

TEST_CASE("missing required --seed is a CLI error") {
    CliDir dir;
    const std::string out = dir / "stdout.json";
    const int code =
        run("synth --n-genes 10 --output-dir " + (dir / "x"), out);
    CHECK(code != 0);
    const Json err = load_json(out);
    CHECK(err.at("error").at("code") == "cli");
}

TEST_CASE("probe command finds the planted peak block") {
    CliDir dir;
    // Two same-seed screens differing only in noise stand in for two blocks;
    // block 1 carries the cleaner signal.
    const std::string clean_dir = dir / "clean";
    const std::string noisy_dir = dir / "noisy";
    REQUIRE(run("synth --seed 21 --n-genes 8 --n-guides-per-gene 1 --n-experiments 2"
                " --wells-per-guide-per-experiment 6 --dim 10 --frac-null-genes 0"
                " --noise-sigma 0.15 --n-related-groups 0 --genes-per-group 1"
                " --n-neg-controls-per-experiment 2 --manifest-rows 2500 --output-dir " +
                clean_dir) == 0);
    REQUIRE(run("synth --seed 21 --n-genes 8 --n-guides-per-gene 1 --n-experiments 2"
                " --wells-per-guide-per-experiment 6 --dim 10 --frac-null-genes 0"
                " --noise-sigma 3.0 --n-related-groups 0 --genes-per-group 1"
                " --n-neg-controls-per-experiment 2 --manifest-rows 2500 --output-dir " +
                noisy_dir) == 0);
    const std::string probe_dir = dir / "probe";
    CHECK(run("probe --block " + clean_dir + "/screen.h5 --block " + noisy_dir +
              "/screen.h5 --test-experiment E01 --label-key perturbation_id"
              " --output-dir " + probe_dir) == 0);
    const Json report = load_json(probe_dir + "/probe.json");
    CHECK(report.at("best_block").get<int>() == 1);
    REQUIRE(report.at("per_block").size() == 2);
    CHECK(report.at("per_block")[0].at("balanced_accuracy").get<double>() >
          report.at("per_block")[1].at("balanced_accuracy").get<double>());
    const std::string csv = slurp(probe_dir + "/probe.csv");
    CHECK(csv.rfind("block_index,balanced_accuracy", 0) == 0);
}

TEST_CASE("curate command reproduces the planted ground truth end to end") {
    CliDir dir;
    const std::string synth_dir = dir / "synth";
    REQUIRE(run("synth --seed 31 --n-genes 10 --n-experiments 2 --dim 8"
                " --n-related-groups 2 --genes-per-group 2 --manifest-rows 3000"
                " --output-dir " + synth_dir) == 0);
    const std::string curate_dir = dir / "curated";
    CHECK(run("curate --manifest " + synth_dir + "/curation_manifest.h5" +
              " --consistency " + synth_dir + "/model_a.consistency.json" +
              " --consistency " + synth_dir + "/model_b.consistency.json" +
              " --required-flag qc_pass --accepted-shape-tag 2160x2160 --seed 31"
              " --output-dir " + curate_dir) == 0);
    const Json report = load_json(curate_dir + "/curation_report.json");
    const Json truth = load_json(synth_dir + "/curation_truth.json");
    REQUIRE(report.at("steps").size() == 5);
    for (std::size_t s = 0; s < 5; ++s) {
        CHECK(report.at("steps")[s].at("rows_out").get<std::size_t>() ==
              truth.at("rows_after_step")[s].get<std::size_t>());
    }
    CHECK(report.at("uncovered_conditions") == truth.at("uncovered_conditions"));
    CHECK(fs::exists(curate_dir + "/curated_manifest.h5"));
}

TEST_CASE("config file supplies defaults that flags override") {
    CliDir dir;
    const std::string synth_dir = dir / "synth";
    REQUIRE(run("synth --seed 41 --n-genes 16 --n-experiments 2 --dim 8"
                " --n-related-groups 2 --genes-per-group 2 --manifest-rows 2500"
                " --output-dir " + synth_dir) == 0);
    const std::string cfg_path = dir / "run.ini";
    {
        std::ofstream cfg(cfg_path);
        cfg << "[consistency]\n";
        cfg << "input = " << synth_dir << "/screen.h5\n";
        cfg << "group-by = gene\n";
        cfg << "k = 50\n";
        cfg << "seed = 9\n";
    }
    const std::string from_cfg = dir / "fromcfg";
    CHECK(run("consistency --config " + cfg_path + " --output-dir " + from_cfg) == 0);
    const Json a = load_json(from_cfg + "/consistency.json");
    CHECK(a.at("config").at("k").get<int>() == 50);

    const std::string overridden = dir / "override";
    CHECK(run("consistency --config " + cfg_path + " --k 25 --output-dir " + overridden) ==
          0);
    const Json b = load_json(overridden + "/consistency.json");
    CHECK(b.at("config").at("k").get<int>() == 25);

    // unknown keys are rejected
    const std::string bad_path = dir / "bad.ini";
    {
        std::ofstream cfg(bad_path);
        cfg << "[consistency]\nbogus_key = 1\n";
    }
    CHECK(run("consistency --config " + bad_path + " --input " + synth_dir +
                  "/screen.h5 --seed 1 --output-dir " + (dir / "y"),
              dir / "err.json") != 0);
}

TEST_CASE("csv format round trip through the CLI") {
    CliDir dir;
    const std::string synth_dir = dir / "synth";
    REQUIRE(run("synth --seed 51 --n-genes 12 --n-experiments 2 --dim 6"
                " --n-related-groups 2 --genes-per-group 2 --manifest-rows 2500"
                " --format csv --output-dir " + synth_dir) == 0);
    CHECK(fs::exists(synth_dir + "/screen.csv"));
    const std::string norm_dir = dir / "norm";
    CHECK(run("normalize --input " + synth_dir + "/screen.csv --method scaler"
              " --format csv --output-dir " + norm_dir) == 0);
    CHECK(fs::exists(norm_dir + "/normalized.csv"));
    CHECK(fs::exists(norm_dir + "/transform.json"));
}
