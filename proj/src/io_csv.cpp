#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "io_internal.hpp"
#include "phenoscreen/error.hpp"
#include "phenoscreen/table_io.hpp"

namespace phenoscreen {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("io", "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) fail("io", "read failure on " + path);
    return std::move(buf).str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail("io", "cannot create " + path);
    out << content;
    out.flush();
    if (!out) fail("io", "write failure on " + path);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (const char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    const auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    const auto end_row = [&] {
        // A line holding nothing but an unquoted empty field is blank, not a row.
        const bool blank = row.empty() && field.empty() && !field_was_quoted;
        end_field();
        if (blank) {
            row.clear();
            return;
        }
        rows.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty() && !field_was_quoted) {
            in_quotes = true;
            field_was_quoted = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_row();
        } else {
            field += c;
        }
    }
    if (in_quotes) fail("csv_parse", "unterminated quoted field in " + path);
    if (!field.empty() || field_was_quoted || !row.empty()) {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        end_row();
    }
    return rows;
}

namespace {

template <typename T, int MinPrec, int MaxPrec>
std::string shortest_exact(T v) {
    char buf[64];
    for (int prec = MinPrec; prec <= MaxPrec; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, static_cast<double>(v));
        T back{};
        const auto r = std::from_chars(buf, buf + std::strlen(buf), back);
        if (r.ec == std::errc() && back == v) break;
    }
    return buf;
}

double parse_double_field(const std::string& s, std::size_t row, const char* col) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        fail("csv_parse", std::string("cannot parse '") + s + "' as a number in column " +
                              col + ", row " + std::to_string(row));
    }
    return v;
}

float parse_float_field(const std::string& s, std::size_t row, const char* col) {
    float v = 0.0f;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        fail("csv_parse", std::string("cannot parse '") + s + "' as a number in column " +
                              col + ", row " + std::to_string(row));
    }
    return v;
}

const char* const kScalarColumns[] = {
    "well_id",      "experiment_id",     "plate_id", "well_position",
    "perturbation_id", "perturbation_type", "gene_id",  "concentration",
    "cell_type",
};

}  // namespace

std::string format_float_exact(float v) {
    if (std::isnan(v)) return "nan";
    return shortest_exact<float, 6, 9>(v);
}

std::string format_double_exact(double v) {
    if (std::isnan(v)) return "nan";
    return shortest_exact<double, 15, 17>(v);
}

void save_embedding_table_csv(const EmbeddingTable& table, const std::string& path) {
    std::string out;
    out.reserve(64 + table.size() * (48 + table.dim * 12));
    for (std::size_t c = 0; c < std::size(kScalarColumns); ++c) {
        if (c > 0) out += ',';
        out += kScalarColumns[c];
    }
    for (std::size_t j = 0; j < table.dim; ++j) {
        out += ",f";
        out += std::to_string(j);
    }
    for (const auto& [name, col] : table.extra) {
        (void)col;
        out += ',';
        out += csv_escape(name);
    }
    out += '\n';
    for (std::size_t r = 0; r < table.size(); ++r) {
        out += csv_escape(table.well_id[r]);
        out += ',';
        out += csv_escape(table.experiment_id[r]);
        out += ',';
        out += csv_escape(table.plate_id[r]);
        out += ',';
        out += csv_escape(table.well_position[r]);
        out += ',';
        out += csv_escape(table.perturbation_id[r]);
        out += ',';
        out += to_string(table.perturbation_type[r]);
        out += ',';
        out += csv_escape(table.gene_id[r]);
        out += ',';
        if (!std::isnan(table.concentration[r])) {
            out += format_double_exact(table.concentration[r]);
        }
        out += ',';
        out += csv_escape(table.cell_type[r]);
        const auto v = table.embedding(r);
        for (std::size_t j = 0; j < table.dim; ++j) {
            out += ',';
            out += format_float_exact(v[j]);
        }
        for (const auto& [name, col] : table.extra) {
            (void)name;
            out += ',';
            out += csv_escape(col[r]);
        }
        out += '\n';
    }
    write_text_file(path, out);
}

EmbeddingTable load_embedding_table_csv(const std::string& path) {
    const auto rows = parse_csv(read_text_file(path), path);
    if (rows.empty()) fail("csv_parse", "empty file " + path);
    const auto& header = rows[0];
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!col.emplace(header[i], i).second) {
            fail("schema_mismatch", "duplicate column '" + header[i] + "' in " + path);
        }
    }
    for (const char* name : kScalarColumns) {
        if (!col.count(name)) {
            fail("schema_mismatch", "missing column '" + std::string(name) + "' in " + path);
        }
    }
    // Embedding columns f0..f{D-1}; any other unknown column is extra metadata.
    std::size_t dim = 0;
    std::vector<std::size_t> fcol;
    std::vector<std::string> extra_names;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& h = header[i];
        bool is_f = h.size() >= 2 && h[0] == 'f';
        if (is_f) {
            for (std::size_t k = 1; k < h.size(); ++k) {
                if (h[k] < '0' || h[k] > '9') {
                    is_f = false;
                    break;
                }
            }
        }
        if (is_f) {
            ++dim;
        } else {
            bool known = false;
            for (const char* name : kScalarColumns) known = known || h == name;
            if (!known) extra_names.push_back(h);
        }
    }
    fcol.resize(dim, npos);
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string& h = header[i];
        if (h.size() < 2 || h[0] != 'f') continue;
        std::size_t idx = 0;
        const auto r = std::from_chars(h.data() + 1, h.data() + h.size(), idx);
        if (r.ec != std::errc() || r.ptr != h.data() + h.size()) continue;
        if (idx >= dim || fcol[idx] != npos) {
            fail("schema_mismatch", "embedding columns are not exactly f0..f" +
                                        std::to_string(dim - 1) + " in " + path);
        }
        fcol[idx] = i;
    }
    EmbeddingTable t;
    t.dim = dim;
    for (const auto& name : extra_names) t.extra[name];
    std::vector<float> vec(dim);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& fields = rows[r];
        const std::size_t row_idx = r - 1;
        if (fields.size() != header.size()) {
            fail("csv_parse", "row " + std::to_string(row_idx) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(header.size()) + " in " + path);
        }
        const std::string& conc_s = fields[col["concentration"]];
        const double conc = conc_s.empty()
                                ? std::nan("")
                                : parse_double_field(conc_s, row_idx, "concentration");
        for (std::size_t j = 0; j < dim; ++j) {
            vec[j] = parse_float_field(fields[fcol[j]], row_idx, "embedding");
        }
        t.append_row(fields[col["well_id"]], fields[col["experiment_id"]],
                     fields[col["plate_id"]], fields[col["well_position"]],
                     fields[col["perturbation_id"]],
                     perturbation_type_from_string(fields[col["perturbation_type"]]),
                     fields[col["gene_id"]], conc, fields[col["cell_type"]], vec);
        for (const auto& name : extra_names) {
            t.extra[name].push_back(fields[col[name]]);
        }
    }
    t.validate();
    return t;
}

void save_manifest_csv(const DatasetManifest& m, const std::string& path) {
    std::string out =
        "well_id,experiment_id,perturbation_ids,perturbation_type,perturbation_count,"
        "image_shape_tag";
    for (const auto& name : m.flag_names) {
        out += ",flag_";
        out += csv_escape(name);
    }
    out += '\n';
    for (std::size_t r = 0; r < m.size(); ++r) {
        out += csv_escape(m.well_id[r]);
        out += ',';
        out += csv_escape(m.experiment_id[r]);
        out += ',';
        std::string joined;
        for (std::size_t k = 0; k < m.perturbation_ids[r].size(); ++k) {
            if (k > 0) joined += kPerturbationJoin;
            joined += m.perturbation_ids[r][k];
        }
        out += csv_escape(joined);
        out += ',';
        out += to_string(m.perturbation_type[r]);
        out += ',';
        out += std::to_string(m.perturbation_count[r]);
        out += ',';
        out += csv_escape(m.image_shape_tag[r]);
        for (std::size_t f = 0; f < m.flag_names.size(); ++f) {
            out += m.flag(r, f) ? ",1" : ",0";
        }
        out += '\n';
    }
    write_text_file(path, out);
}

DatasetManifest load_manifest_csv(const std::string& path) {
    const auto rows = parse_csv(read_text_file(path), path);
    if (rows.empty()) fail("csv_parse", "empty file " + path);
    const auto& header = rows[0];
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
    for (const char* name : {"well_id", "experiment_id", "perturbation_ids",
                             "perturbation_type", "perturbation_count",
                             "image_shape_tag"}) {
        if (!col.count(name)) {
            fail("schema_mismatch", "missing column '" + std::string(name) + "' in " + path);
        }
    }
    DatasetManifest m;
    std::vector<std::size_t> flag_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i].rfind("flag_", 0) == 0) {
            m.flag_names.push_back(header[i].substr(5));
            flag_cols.push_back(i);
        }
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& fields = rows[r];
        const std::size_t row_idx = r - 1;
        if (fields.size() != header.size()) {
            fail("csv_parse", "row " + std::to_string(row_idx) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(header.size()) + " in " + path);
        }
        m.well_id.push_back(fields[col["well_id"]]);
        m.experiment_id.push_back(fields[col["experiment_id"]]);
        const std::string& joined = fields[col["perturbation_ids"]];
        std::vector<std::string> ids;
        if (!joined.empty()) {
            std::size_t start = 0;
            while (true) {
                const std::size_t sep = joined.find(kPerturbationJoin, start);
                if (sep == std::string::npos) {
                    ids.push_back(joined.substr(start));
                    break;
                }
                ids.push_back(joined.substr(start, sep - start));
                start = sep + 1;
            }
        }
        m.perturbation_ids.push_back(std::move(ids));
        m.perturbation_type.push_back(
            perturbation_type_from_string(fields[col["perturbation_type"]]));
        const std::string& count_s = fields[col["perturbation_count"]];
        std::int64_t count = 0;
        const auto res = std::from_chars(count_s.data(), count_s.data() + count_s.size(),
                                         count);
        if (res.ec != std::errc() || res.ptr != count_s.data() + count_s.size()) {
            fail("csv_parse", "cannot parse perturbation_count '" + count_s + "' at row " +
                                  std::to_string(row_idx) + " in " + path);
        }
        m.perturbation_count.push_back(count);
        m.image_shape_tag.push_back(fields[col["image_shape_tag"]]);
        for (const std::size_t fc : flag_cols) {
            const std::string& v = fields[fc];
            if (v != "0" && v != "1") {
                fail("csv_parse", "flag value '" + v + "' is not 0/1 at row " +
                                      std::to_string(row_idx) + " in " + path);
            }
            m.flags.push_back(v == "1" ? 1 : 0);
        }
    }
    m.validate();
    return m;
}

}  // namespace phenoscreen
