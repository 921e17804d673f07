#pragma once

#include <string>
#include <vector>

#include "phenoscreen/types.hpp"

namespace phenoscreen {

EmbeddingTable load_embedding_table_hdf5(const std::string& path);
void save_embedding_table_hdf5(const EmbeddingTable& table, const std::string& path);
DatasetManifest load_manifest_hdf5(const std::string& path);
void save_manifest_hdf5(const DatasetManifest& manifest, const std::string& path);

EmbeddingTable load_embedding_table_csv(const std::string& path);
void save_embedding_table_csv(const EmbeddingTable& table, const std::string& path);
DatasetManifest load_manifest_csv(const std::string& path);
void save_manifest_csv(const DatasetManifest& manifest, const std::string& path);

// Shortest decimal text that parses back to the same value.
std::string format_float_exact(float v);
std::string format_double_exact(double v);

// RFC-4180-style records: fields split on commas, '"' quoting with doubled
// escapes, quoted fields may span lines. Trailing \r is stripped.
std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& path);
std::string csv_escape(const std::string& field);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace phenoscreen
