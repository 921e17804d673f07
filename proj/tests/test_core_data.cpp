#include <cmath>
#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "phenoscreen/error.hpp"
#include "phenoscreen/rng.hpp"
#include "phenoscreen/table_io.hpp"
#include "phenoscreen/types.hpp"

using namespace phenoscreen;
using test_support::kNaN;
using test_support::make_table;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("phenoscreen_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

EmbeddingTable random_table(std::size_t n, std::size_t dim, std::uint64_t seed) {
    CounterRng rng(seed);
    EmbeddingTable t;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> v(dim);
        for (float& x : v) x = static_cast<float>(rng.next_normal());
        const std::string id = "W" + std::to_string(i);
        const bool compound = rng.bounded(4) == 0;
        t.append_row(id, "E" + std::to_string(i % 3), "P1", id,
                     compound ? "CMP" + std::to_string(i % 17) : "G" + std::to_string(i % 29) + "_g1",
                     compound ? PerturbationType::compound : PerturbationType::gene_knockout_guide,
                     compound ? "" : "G" + std::to_string(i % 29),
                     compound ? 0.1 * static_cast<double>(1 + rng.bounded(50)) : kNaN, "HUVEC", v);
    }
    t.extra["note"] = std::vector<std::string>(n, "x");
    t.extra["note"][0] = "first, with comma and \"quotes\"";
    return t;
}

}  // namespace

TEST_CASE("append_row and basic invariants") {
    EmbeddingTable t = make_table({{.well_id = "a", .vec = {1, 2, 3, 4}},
                                   {.well_id = "b", .vec = {5, 6, 7, 8}}});
    CHECK(t.size() == 2);
    CHECK(t.dim == 4);
    CHECK(t.embedding(1)[0] == 5.0f);
    CHECK_THROWS_AS(t.append_row("c", "E1", "P", "c", "P1",
                                 PerturbationType::gene_knockout_guide, "G1", kNaN, "CT",
                                 std::vector<float>{1.0f, 2.0f}),
                    Error);
    t.validate();
}

TEST_CASE("validate catches each invariant violation with the row index") {
    // non-finite embedding value in row 2
    EmbeddingTable nan_table = make_table({{.well_id = "a", .vec = {1, 1}},
                                           {.well_id = "b", .vec = {1, 1}},
                                           {.well_id = "c", .vec = {1, 1}}});
    nan_table.embeddings[2 * 2] = std::nanf("");
    CHECK_THROWS_WITH_AS(nan_table.validate(),
                         doctest::Contains("row 2"), Error);

    EmbeddingTable dup = make_table({{.well_id = "same", .vec = {1.0f}},
                                     {.well_id = "same", .vec = {2.0f}}});
    CHECK_THROWS_AS(dup.validate(), Error);

    // gene_knockout_guide requires a gene_id
    EmbeddingTable nogene =
        make_table({{.well_id = "a", .gene = "", .vec = {1.0f}}});
    CHECK_THROWS_AS(nogene.validate(), Error);

    // concentration must be NaN or > 0
    EmbeddingTable badconc = make_table(
        {{.well_id = "a",
          .perturbation = "CMP",
          .type = PerturbationType::compound,
          .gene = "",
          .concentration = 0.0,
          .vec = {1.0f}}});
    CHECK_THROWS_AS(badconc.validate(), Error);
}

TEST_CASE("single_perturbation flags multi-condition and empty ids") {
    EmbeddingTable t = make_table({{.well_id = "a", .perturbation = "P1", .vec = {1.0f}},
                                   {.well_id = "b", .perturbation = "P1;P2", .vec = {1.0f}},
                                   {.well_id = "c",
                                    .perturbation = "",
                                    .type = PerturbationType::unperturbed,
                                    .gene = "",
                                    .vec = {1.0f}}});
    CHECK(t.single_perturbation(0));
    CHECK_FALSE(t.single_perturbation(1));
    CHECK_FALSE(t.single_perturbation(2));
}

TEST_CASE("subset preserves all columns including extras") {
    EmbeddingTable t = random_table(10, 3, 1);
    const EmbeddingTable s = t.subset({7, 2});
    CHECK(s.size() == 2);
    CHECK(s.well_id[0] == t.well_id[7]);
    CHECK(s.well_id[1] == t.well_id[2]);
    CHECK(s.extra.at("note")[1] == t.extra.at("note")[2]);
    CHECK(s.embedding(0)[2] == t.embedding(7)[2]);
}

TEST_CASE("perturbation type names round-trip") {
    for (PerturbationType t :
         {PerturbationType::gene_knockout_guide, PerturbationType::sirna,
          PerturbationType::compound, PerturbationType::negative_control,
          PerturbationType::positive_control, PerturbationType::unperturbed}) {
        CHECK(perturbation_type_from_string(to_string(t)) == t);
    }
    CHECK_THROWS_AS(perturbation_type_from_string("weird"), Error);
}

TEST_CASE("CSV: 3-row file with D=4 loads with 3 rows and D=4") {
    TempDir dir;
    const std::string path = dir.file("t.csv");
    std::ofstream out(path);
    out << "well_id,experiment_id,plate_id,well_position,perturbation_id,"
           "perturbation_type,gene_id,concentration,cell_type,f0,f1,f2,f3\n";
    out << "w1,E1,P1,A01,G1_g1,gene_knockout_guide,G1,,CT,1,2,3,4\n";
    out << "w2,E1,P1,A02,CMP,compound,,0.5,CT,5,6,7,8\n";
    out << "w3,E1,P1,A03,,unperturbed,,,CT,9,10,11,12\n";
    out.close();
    const EmbeddingTable t = load_embedding_table(path, FileFormat::csv);
    CHECK(t.size() == 3);
    CHECK(t.dim == 4);
    CHECK(std::isnan(t.concentration[0]));
    CHECK(t.concentration[1] == doctest::Approx(0.5));
    CHECK(t.embedding(2)[3] == 12.0f);
}

TEST_CASE("round-trips are bitwise for both formats") {
    TempDir dir;
    for (const FileFormat format : {FileFormat::columnar, FileFormat::csv}) {
        const std::string ext = format == FileFormat::columnar ? ".h5" : ".csv";
        // empty table
        EmbeddingTable empty;
        empty.dim = 3;
        save_embedding_table(empty, dir.file("empty" + ext), format);
        CHECK(load_embedding_table(dir.file("empty" + ext), format).size() == 0);
        // 1 row
        const EmbeddingTable one = random_table(1, 6, 2);
        save_embedding_table(one, dir.file("one" + ext), format);
        CHECK(tables_bitwise_equal(one, load_embedding_table(dir.file("one" + ext), format)));
        // 10k random rows
        const EmbeddingTable big = random_table(10000, 8, 3);
        save_embedding_table(big, dir.file("big" + ext), format);
        CHECK(tables_bitwise_equal(big, load_embedding_table(dir.file("big" + ext), format)));
    }
}

TEST_CASE("CSV quoting survives commas, quotes, and newlines") {
    TempDir dir;
    EmbeddingTable t = make_table({{.well_id = "has,comma", .vec = {1.0f}},
                                   {.well_id = "has\"quote", .vec = {2.0f}},
                                   {.well_id = "has\nnewline", .vec = {3.0f}}});
    const std::string path = dir.file("q.csv");
    save_embedding_table(t, path, FileFormat::csv);
    CHECK(tables_bitwise_equal(t, load_embedding_table(path, FileFormat::csv)));
}

TEST_CASE("CSV rejects schema drift") {
    TempDir dir;
    const std::string path = dir.file("bad.csv");
    std::ofstream out(path);
    out << "well_id,experiment_id,plate_id,well_position,perturbation_id,"
           "perturbation_type,gene_id,concentration,cell_type,f0,f2\n";  // f1 missing
    out << "w,E,P,A,p,unperturbed,,,CT,1,2\n";
    out.close();
    CHECK_THROWS_AS(load_embedding_table(path, FileFormat::csv), Error);
    CHECK_THROWS_AS(load_embedding_table(dir.file("absent.csv"), FileFormat::csv), Error);
}

TEST_CASE("columnar file reports non-finite rows on load") {
    TempDir dir;
    EmbeddingTable t = random_table(4, 3, 9);
    t.embeddings[1 * 3 + 2] = std::numeric_limits<float>::infinity();
    const std::string path = dir.file("inf.h5");
    CHECK_THROWS_AS(save_embedding_table(t, path, FileFormat::columnar), Error);
}

TEST_CASE("relationship db loading dedups and drops self-pairs") {
    TempDir dir;
    {
        const std::string path = dir.file("r1.tsv");
        std::ofstream out(path);
        out << "# comment\nA B\nB\tA\n";
        out.close();
        RelationshipLoadStats stats;
        const RelationshipDB db = load_relationship_db(path, "r1", &stats);
        CHECK(db.pairs.size() == 1);
        CHECK(db.contains("B", "A"));
        CHECK(stats.duplicates_dropped == 1);
    }
    {
        const std::string path = dir.file("r2.tsv");
        std::ofstream out(path);
        out << "A A\n";
        out.close();
        RelationshipLoadStats stats;
        const RelationshipDB db = load_relationship_db(path, "r2", &stats);
        CHECK(db.pairs.empty());
        CHECK(stats.self_pairs_dropped == 1);
    }
    {
        // 100 random edges, 10 of them duplicates -> 90 pairs
        const std::string path = dir.file("r3.tsv");
        std::ofstream out(path);
        for (int i = 0; i < 90; ++i) out << "g" << i << " h" << i << "\n";
        for (int i = 0; i < 10; ++i) out << "h" << i << " g" << i << "\n";
        out.close();
        const RelationshipDB db = load_relationship_db(path, "r3", nullptr);
        CHECK(db.pairs.size() == 90);
    }
    {
        const std::string path = dir.file("bad.tsv");
        std::ofstream out(path);
        out << "only_one_token\n";
        out.close();
        CHECK_THROWS_AS(load_relationship_db(path, "bad", nullptr), Error);
    }
}

TEST_CASE("arm annotation loads gene -> arm pairs") {
    TempDir dir;
    const std::string path = dir.file("arms.tsv");
    std::ofstream out(path);
    out << "# gene arm\nG1 1p\nG2 1q\n";
    out.close();
    const ArmAnnotation arms = load_arm_annotation(path);
    CHECK(arms.arm_of.size() == 2);
    CHECK(arms.arm_of.at("G2") == "1q");
}

TEST_CASE("manifest round-trips in both formats") {
    DatasetManifest m;
    m.flag_names = {"qc", "focus"};
    const auto add = [&](const std::string& id, std::vector<std::string> ids,
                         PerturbationType type, std::uint8_t f0, std::uint8_t f1) {
        m.well_id.push_back(id);
        m.experiment_id.push_back("E1");
        m.perturbation_count.push_back(static_cast<std::int64_t>(ids.size()));
        m.perturbation_ids.push_back(std::move(ids));
        m.perturbation_type.push_back(type);
        m.image_shape_tag.push_back("2160x2160");
        m.flags.push_back(f0);
        m.flags.push_back(f1);
    };
    add("w1", {"A"}, PerturbationType::gene_knockout_guide, 1, 0);
    add("w2", {"A", "B"}, PerturbationType::compound, 0, 1);
    add("w3", {}, PerturbationType::unperturbed, 1, 1);
    m.validate();

    TempDir dir;
    for (const FileFormat format : {FileFormat::columnar, FileFormat::csv}) {
        const std::string path =
            dir.file(format == FileFormat::columnar ? "m.h5" : "m.csv");
        save_manifest(m, path, format);
        const DatasetManifest back = load_manifest(path, format);
        CHECK(back.size() == 3);
        CHECK(back.flag_names == m.flag_names);
        CHECK(back.perturbation_ids[1] == std::vector<std::string>{"A", "B"});
        CHECK(back.perturbation_ids[2].empty());
        CHECK(back.flags == m.flags);
        CHECK(back.perturbation_count == m.perturbation_count);
    }
}

TEST_CASE("format names parse") {
    CHECK(format_from_string("columnar") == FileFormat::columnar);
    CHECK(format_from_string("csv") == FileFormat::csv);
    CHECK_THROWS_AS(format_from_string("parquet"), Error);
}
