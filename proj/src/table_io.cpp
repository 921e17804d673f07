#include "phenoscreen/table_io.hpp"

#include <sstream>

#include "io_internal.hpp"
#include "phenoscreen/error.hpp"

namespace phenoscreen {

FileFormat format_from_string(std::string_view s) {
    if (s == "columnar") return FileFormat::columnar;
    if (s == "csv") return FileFormat::csv;
    fail("invalid_format", "unknown format '" + std::string(s) + "'");
}

const char* to_string(FileFormat f) {
    return f == FileFormat::columnar ? "columnar" : "csv";
}

EmbeddingTable load_embedding_table(const std::string& path, FileFormat format) {
    return format == FileFormat::columnar ? load_embedding_table_hdf5(path)
                                          : load_embedding_table_csv(path);
}

void save_embedding_table(const EmbeddingTable& table, const std::string& path,
                          FileFormat format) {
    table.validate();
    if (format == FileFormat::columnar) {
        save_embedding_table_hdf5(table, path);
    } else {
        save_embedding_table_csv(table, path);
    }
}

DatasetManifest load_manifest(const std::string& path, FileFormat format) {
    return format == FileFormat::columnar ? load_manifest_hdf5(path)
                                          : load_manifest_csv(path);
}

void save_manifest(const DatasetManifest& manifest, const std::string& path,
                   FileFormat format) {
    manifest.validate();
    if (format == FileFormat::columnar) {
        save_manifest_hdf5(manifest, path);
    } else {
        save_manifest_csv(manifest, path);
    }
}

RelationshipDB load_relationship_db(const std::string& path, const std::string& name,
                                    RelationshipLoadStats* stats) {
    RelationshipDB db;
    db.name = name;
    RelationshipLoadStats local;
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        const std::string body = hash == std::string::npos ? line : line.substr(0, hash);
        std::istringstream fields(body);
        std::string a, b, rest;
        if (!(fields >> a)) continue;  // blank or comment-only line
        if (!(fields >> b) || (fields >> rest)) {
            fail("malformed_line", "line " + std::to_string(line_no) + " of " + path +
                                       " does not hold exactly two gene ids");
        }
        ++local.lines_read;
        if (a == b) {
            ++local.self_pairs_dropped;
            continue;
        }
        if (!db.insert(a, b)) ++local.duplicates_dropped;
    }
    if (stats) *stats = local;
    return db;
}

ArmAnnotation load_arm_annotation(const std::string& path) {
    ArmAnnotation arms;
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        const std::string body = hash == std::string::npos ? line : line.substr(0, hash);
        std::istringstream fields(body);
        std::string gene, arm, rest;
        if (!(fields >> gene)) continue;
        if (!(fields >> arm) || (fields >> rest)) {
            fail("malformed_line", "line " + std::to_string(line_no) + " of " + path +
                                       " does not hold exactly gene and arm");
        }
        arms.arm_of[gene] = arm;
    }
    return arms;
}

}  // namespace phenoscreen
