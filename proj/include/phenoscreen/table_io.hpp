#pragma once

#include <string>

#include "phenoscreen/types.hpp"

namespace phenoscreen {

enum class FileFormat { columnar, csv };

FileFormat format_from_string(std::string_view s);
const char* to_string(FileFormat f);

// Columnar container: an HDF5 file with one dataset per column at the root
// (UTF-8 variable-length strings; concentration float64 with NaN for null;
// gene_id's null encoded as the empty string), the embedding as a 2-D float32
// dataset of shape [n, D], and extra string columns under the "extra" group.
// CSV: the same scalar columns, f0..f{D-1} for the embedding, extra columns
// last in name order; empty concentration field = null.
EmbeddingTable load_embedding_table(const std::string& path, FileFormat format);
void save_embedding_table(const EmbeddingTable& table, const std::string& path,
                          FileFormat format);

// Two-column whitespace/tab-separated gene pair list; '#' comments ignored.
// Self-pairs are dropped and counted, duplicates deduplicated.
struct RelationshipLoadStats {
    std::size_t lines_read = 0;
    std::size_t self_pairs_dropped = 0;
    std::size_t duplicates_dropped = 0;
};
RelationshipDB load_relationship_db(const std::string& path, const std::string& name,
                                    RelationshipLoadStats* stats = nullptr);

// Two-column gene_id -> arm label file, same comment rules.
ArmAnnotation load_arm_annotation(const std::string& path);

// Manifest container mirrors the embedding-table layout: scalar datasets at
// the root (perturbation_ids joined by ';'), flags as a 2-D uint8 dataset
// plus a flag_names dataset. CSV flag columns are prefixed "flag_".
DatasetManifest load_manifest(const std::string& path, FileFormat format);
void save_manifest(const DatasetManifest& manifest, const std::string& path,
                   FileFormat format);

}  // namespace phenoscreen
