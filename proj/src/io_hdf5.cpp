// Columnar container backend: HDF5, one dataset per column.

#include <hdf5.h>

#include <cstring>
#include <string>
#include <vector>

#include "phenoscreen/error.hpp"
#include "phenoscreen/table_io.hpp"

namespace phenoscreen {

namespace {

// HDF5 prints its own error stack to stderr on failure; suppress it for the
// duration of an I/O call and report through Error instead.
struct SilenceHdf5 {
    H5E_auto2_t old_func = nullptr;
    void* old_data = nullptr;
    SilenceHdf5() {
        H5Eget_auto2(H5E_DEFAULT, &old_func, &old_data);
        H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
    }
    ~SilenceHdf5() { H5Eset_auto2(H5E_DEFAULT, old_func, old_data); }
};

struct Handle {
    hid_t id = H5I_INVALID_HID;
    herr_t (*closer)(hid_t) = nullptr;
    Handle(hid_t i, herr_t (*c)(hid_t)) : id(i), closer(c) {}
    Handle(Handle&& o) noexcept : id(o.id), closer(o.closer) { o.id = H5I_INVALID_HID; }
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() {
        if (id >= 0 && closer) closer(id);
    }
    operator hid_t() const { return id; }
    bool ok() const { return id >= 0; }
};

Handle make_string_type() {
    Handle t(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(t, H5T_VARIABLE);
    H5Tset_cset(t, H5T_CSET_UTF8);
    return t;
}

// HDF5 stamps object headers with modification times by default; disable so
// identical inputs produce byte-identical files.
Handle no_track_times(hid_t cls) {
    Handle p(H5Pcreate(cls), H5Pclose);
    H5Pset_obj_track_times(p, false);
    return p;
}

void write_string_column(hid_t loc, const char* name,
                         const std::vector<std::string>& values) {
    const Handle type = make_string_type();
    const hsize_t n = values.size();
    const Handle space(H5Screate_simple(1, &n, nullptr), H5Sclose);
    const Handle dcpl = no_track_times(H5P_DATASET_CREATE);
    const Handle ds(H5Dcreate2(loc, name, type, space, H5P_DEFAULT, dcpl, H5P_DEFAULT),
                    H5Dclose);
    if (!ds.ok()) fail("io", std::string("cannot create dataset '") + name + "'");
    if (n > 0) {
        std::vector<const char*> ptrs(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) ptrs[i] = values[i].c_str();
        if (H5Dwrite(ds, type, H5S_ALL, H5S_ALL, H5P_DEFAULT, ptrs.data()) < 0) {
            fail("io", std::string("cannot write dataset '") + name + "'");
        }
    }
}

std::vector<std::string> read_string_column(hid_t loc, const char* name,
                                            const std::string& path) {
    const Handle ds(H5Dopen2(loc, name, H5P_DEFAULT), H5Dclose);
    if (!ds.ok()) {
        fail("schema_mismatch", "missing column '" + std::string(name) + "' in " + path);
    }
    const Handle space(H5Dget_space(ds), H5Sclose);
    hsize_t n = 0;
    if (H5Sget_simple_extent_ndims(space) != 1) {
        fail("schema_mismatch", "column '" + std::string(name) + "' is not 1-D in " + path);
    }
    H5Sget_simple_extent_dims(space, &n, nullptr);
    std::vector<std::string> out(n);
    if (n == 0) return out;
    const Handle type = make_string_type();
    std::vector<char*> ptrs(n, nullptr);
    if (H5Dread(ds, type, H5S_ALL, H5S_ALL, H5P_DEFAULT, ptrs.data()) < 0) {
        fail("io", "cannot read column '" + std::string(name) + "' from " + path);
    }
    for (hsize_t i = 0; i < n; ++i) out[i] = ptrs[i] ? ptrs[i] : "";
    H5Dvlen_reclaim(type, space, H5P_DEFAULT, ptrs.data());
    return out;
}

template <typename T>
void write_numeric_column(hid_t loc, const char* name, hid_t type,
                          const std::vector<T>& values) {
    const hsize_t n = values.size();
    const Handle space(H5Screate_simple(1, &n, nullptr), H5Sclose);
    const Handle dcpl = no_track_times(H5P_DATASET_CREATE);
    const Handle ds(H5Dcreate2(loc, name, type, space, H5P_DEFAULT, dcpl, H5P_DEFAULT),
                    H5Dclose);
    if (!ds.ok()) fail("io", std::string("cannot create dataset '") + name + "'");
    if (n > 0 && H5Dwrite(ds, type, H5S_ALL, H5S_ALL, H5P_DEFAULT, values.data()) < 0) {
        fail("io", std::string("cannot write dataset '") + name + "'");
    }
}

template <typename T>
std::vector<T> read_numeric_column(hid_t loc, const char* name, hid_t type,
                                   const std::string& path) {
    const Handle ds(H5Dopen2(loc, name, H5P_DEFAULT), H5Dclose);
    if (!ds.ok()) {
        fail("schema_mismatch", "missing column '" + std::string(name) + "' in " + path);
    }
    const Handle space(H5Dget_space(ds), H5Sclose);
    hsize_t n = 0;
    if (H5Sget_simple_extent_ndims(space) != 1) {
        fail("schema_mismatch", "column '" + std::string(name) + "' is not 1-D in " + path);
    }
    H5Sget_simple_extent_dims(space, &n, nullptr);
    std::vector<T> out(n);
    if (n > 0 && H5Dread(ds, type, H5S_ALL, H5S_ALL, H5P_DEFAULT, out.data()) < 0) {
        fail("io", "cannot read column '" + std::string(name) + "' from " + path);
    }
    return out;
}

template <typename T>
void write_matrix(hid_t loc, const char* name, hid_t type, const std::vector<T>& data,
                  std::size_t rows, std::size_t cols) {
    const hsize_t dims[2] = {rows, cols};
    const Handle space(H5Screate_simple(2, dims, nullptr), H5Sclose);
    const Handle dcpl = no_track_times(H5P_DATASET_CREATE);
    const Handle ds(H5Dcreate2(loc, name, type, space, H5P_DEFAULT, dcpl, H5P_DEFAULT),
                    H5Dclose);
    if (!ds.ok()) fail("io", std::string("cannot create dataset '") + name + "'");
    if (rows * cols > 0 &&
        H5Dwrite(ds, type, H5S_ALL, H5S_ALL, H5P_DEFAULT, data.data()) < 0) {
        fail("io", std::string("cannot write dataset '") + name + "'");
    }
}

template <typename T>
std::vector<T> read_matrix(hid_t loc, const char* name, hid_t type, std::size_t* rows,
                           std::size_t* cols, const std::string& path) {
    const Handle ds(H5Dopen2(loc, name, H5P_DEFAULT), H5Dclose);
    if (!ds.ok()) {
        fail("schema_mismatch", "missing dataset '" + std::string(name) + "' in " + path);
    }
    const Handle space(H5Dget_space(ds), H5Sclose);
    if (H5Sget_simple_extent_ndims(space) != 2) {
        fail("schema_mismatch", "dataset '" + std::string(name) + "' is not 2-D in " + path);
    }
    hsize_t dims[2] = {0, 0};
    H5Sget_simple_extent_dims(space, dims, nullptr);
    *rows = dims[0];
    *cols = dims[1];
    std::vector<T> out(dims[0] * dims[1]);
    if (!out.empty() && H5Dread(ds, type, H5S_ALL, H5S_ALL, H5P_DEFAULT, out.data()) < 0) {
        fail("io", "cannot read dataset '" + std::string(name) + "' from " + path);
    }
    return out;
}

std::vector<std::string> list_group_members(hid_t loc, const char* group_name) {
    std::vector<std::string> names;
    if (H5Lexists(loc, group_name, H5P_DEFAULT) <= 0) return names;
    const Handle grp(H5Gopen2(loc, group_name, H5P_DEFAULT), H5Gclose);
    if (!grp.ok()) return names;
    H5G_info_t info;
    H5Gget_info(grp, &info);
    for (hsize_t i = 0; i < info.nlinks; ++i) {
        const ssize_t len = H5Lget_name_by_idx(grp, ".", H5_INDEX_NAME, H5_ITER_INC, i,
                                               nullptr, 0, H5P_DEFAULT);
        std::string name(static_cast<std::size_t>(len), '\0');
        H5Lget_name_by_idx(grp, ".", H5_INDEX_NAME, H5_ITER_INC, i, name.data(),
                           name.size() + 1, H5P_DEFAULT);
        names.push_back(std::move(name));
    }
    return names;
}

}  // namespace

void save_embedding_table_hdf5(const EmbeddingTable& table, const std::string& path) {
    const SilenceHdf5 quiet;
    const Handle fcpl = no_track_times(H5P_FILE_CREATE);
    const Handle file(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, fcpl, H5P_DEFAULT),
                      H5Fclose);
    if (!file.ok()) fail("io", "cannot create file " + path);
    std::vector<std::string> type_names(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
        type_names[i] = to_string(table.perturbation_type[i]);
    }
    write_string_column(file, "well_id", table.well_id);
    write_string_column(file, "experiment_id", table.experiment_id);
    write_string_column(file, "plate_id", table.plate_id);
    write_string_column(file, "well_position", table.well_position);
    write_string_column(file, "perturbation_id", table.perturbation_id);
    write_string_column(file, "perturbation_type", type_names);
    write_string_column(file, "gene_id", table.gene_id);
    write_numeric_column(file, "concentration", H5T_NATIVE_DOUBLE, table.concentration);
    write_string_column(file, "cell_type", table.cell_type);
    write_matrix(file, "embedding", H5T_NATIVE_FLOAT, table.embeddings, table.size(),
                 table.dim);
    if (!table.extra.empty()) {
        const Handle gcpl = no_track_times(H5P_GROUP_CREATE);
        const Handle grp(H5Gcreate2(file, "extra", H5P_DEFAULT, gcpl, H5P_DEFAULT),
                         H5Gclose);
        for (const auto& [name, col] : table.extra) {
            write_string_column(grp, name.c_str(), col);
        }
    }
    if (H5Fflush(file, H5F_SCOPE_GLOBAL) < 0) fail("io", "cannot flush " + path);
}

EmbeddingTable load_embedding_table_hdf5(const std::string& path) {
    const SilenceHdf5 quiet;
    const Handle file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
    if (!file.ok()) fail("io", "cannot open " + path);
    EmbeddingTable t;
    t.well_id = read_string_column(file, "well_id", path);
    t.experiment_id = read_string_column(file, "experiment_id", path);
    t.plate_id = read_string_column(file, "plate_id", path);
    t.well_position = read_string_column(file, "well_position", path);
    t.perturbation_id = read_string_column(file, "perturbation_id", path);
    const auto type_names = read_string_column(file, "perturbation_type", path);
    t.perturbation_type.reserve(type_names.size());
    for (const auto& s : type_names) {
        t.perturbation_type.push_back(perturbation_type_from_string(s));
    }
    t.gene_id = read_string_column(file, "gene_id", path);
    t.concentration = read_numeric_column<double>(file, "concentration",
                                                  H5T_NATIVE_DOUBLE, path);
    t.cell_type = read_string_column(file, "cell_type", path);
    std::size_t rows = 0;
    t.embeddings = read_matrix<float>(file, "embedding", H5T_NATIVE_FLOAT, &rows, &t.dim,
                                      path);
    if (rows != t.size()) {
        fail("schema_mismatch", "embedding row count " + std::to_string(rows) +
                                    " does not match metadata rows " +
                                    std::to_string(t.size()) + " in " + path);
    }
    for (const auto& name : list_group_members(file, "extra")) {
        const Handle grp(H5Gopen2(file, "extra", H5P_DEFAULT), H5Gclose);
        t.extra[name] = read_string_column(grp, name.c_str(), path);
    }
    t.validate();
    return t;
}

void save_manifest_hdf5(const DatasetManifest& m, const std::string& path) {
    const SilenceHdf5 quiet;
    const Handle fcpl = no_track_times(H5P_FILE_CREATE);
    const Handle file(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, fcpl, H5P_DEFAULT),
                      H5Fclose);
    if (!file.ok()) fail("io", "cannot create file " + path);
    std::vector<std::string> joined(m.size());
    std::vector<std::string> type_names(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::string s;
        for (std::size_t k = 0; k < m.perturbation_ids[i].size(); ++k) {
            if (k > 0) s += kPerturbationJoin;
            s += m.perturbation_ids[i][k];
        }
        joined[i] = std::move(s);
        type_names[i] = to_string(m.perturbation_type[i]);
    }
    write_string_column(file, "well_id", m.well_id);
    write_string_column(file, "experiment_id", m.experiment_id);
    write_string_column(file, "perturbation_ids", joined);
    write_string_column(file, "perturbation_type", type_names);
    write_numeric_column(file, "perturbation_count", H5T_NATIVE_INT64,
                         m.perturbation_count);
    write_string_column(file, "image_shape_tag", m.image_shape_tag);
    write_string_column(file, "flag_names", m.flag_names);
    write_matrix(file, "flags", H5T_NATIVE_UINT8, m.flags, m.size(), m.flag_names.size());
    if (H5Fflush(file, H5F_SCOPE_GLOBAL) < 0) fail("io", "cannot flush " + path);
}

DatasetManifest load_manifest_hdf5(const std::string& path) {
    const SilenceHdf5 quiet;
    const Handle file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
    if (!file.ok()) fail("io", "cannot open " + path);
    DatasetManifest m;
    m.well_id = read_string_column(file, "well_id", path);
    m.experiment_id = read_string_column(file, "experiment_id", path);
    const auto joined = read_string_column(file, "perturbation_ids", path);
    m.perturbation_ids.reserve(joined.size());
    for (const auto& s : joined) {
        std::vector<std::string> ids;
        std::size_t start = 0;
        if (!s.empty()) {
            while (true) {
                const std::size_t sep = s.find(kPerturbationJoin, start);
                if (sep == std::string::npos) {
                    ids.push_back(s.substr(start));
                    break;
                }
                ids.push_back(s.substr(start, sep - start));
                start = sep + 1;
            }
        }
        m.perturbation_ids.push_back(std::move(ids));
    }
    const auto type_names = read_string_column(file, "perturbation_type", path);
    m.perturbation_type.reserve(type_names.size());
    for (const auto& s : type_names) {
        m.perturbation_type.push_back(perturbation_type_from_string(s));
    }
    m.perturbation_count = read_numeric_column<std::int64_t>(file, "perturbation_count",
                                                             H5T_NATIVE_INT64, path);
    m.image_shape_tag = read_string_column(file, "image_shape_tag", path);
    m.flag_names = read_string_column(file, "flag_names", path);
    std::size_t rows = 0, cols = 0;
    m.flags = read_matrix<std::uint8_t>(file, "flags", H5T_NATIVE_UINT8, &rows, &cols,
                                        path);
    if (rows != m.size() || cols != m.flag_names.size()) {
        fail("schema_mismatch", "flag matrix shape mismatch in " + path);
    }
    m.validate();
    return m;
}

}  // namespace phenoscreen
