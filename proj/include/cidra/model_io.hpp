// Model (de)serialisation.
//
// Binary layout (little-endian, version 1):
//   "CIDR" magic, u32 version, u32 M, u32 p, f64 T_s, f64 soc, f64 temp,
//   then row-major f64 blocks: A (MxM), B (M), C (pxM), D (p), res0 (p).
// A human-readable sidecar "<model>.labels" carries the output labels plus
// deterministic metadata; it is required for reading a model back.
#pragma once

#include <bit>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cidra/errors.hpp"
#include "cidra/realisation.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are defined little-endian; big-endian hosts are unsupported");

namespace cidra {

constexpr char model_magic[4] = {'C', 'I', 'D', 'R'};
constexpr std::uint32_t model_version = 1;

namespace detail {

inline void write_raw(std::ofstream& os, const void* data, size_t bytes) {
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}
inline void read_raw(std::ifstream& is, void* data, size_t bytes, const char* what) {
    is.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (!is) throw validation_error(std::string("model file truncated while reading ") + what);
}

inline void write_matrix(std::ofstream& os, const Eigen::MatrixXd& m) {
    for (long r = 0; r < m.rows(); ++r)
        for (long c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            write_raw(os, &v, sizeof v);
        }
}
inline Eigen::MatrixXd read_matrix(std::ifstream& is, long rows, long cols, const char* what) {
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r)
        for (long c = 0; c < cols; ++c) {
            double v;
            read_raw(is, &v, sizeof v, what);
            m(r, c) = v;
        }
    return m;
}

inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline void write_model(const StateSpaceModel& model, const std::string& path) {
    const auto M = static_cast<std::uint32_t>(model.order());
    const auto p = static_cast<std::uint32_t>(model.outputs());
    if (model.labels.size() != p)
        throw validation_error("write_model: label count disagrees with output count");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw validation_error("cannot open model file for writing: " + path);
    detail::write_raw(os, model_magic, 4);
    detail::write_raw(os, &model_version, sizeof model_version);
    detail::write_raw(os, &M, sizeof M);
    detail::write_raw(os, &p, sizeof p);
    detail::write_raw(os, &model.T_s, sizeof model.T_s);
    detail::write_raw(os, &model.soc, sizeof model.soc);
    detail::write_raw(os, &model.temp, sizeof model.temp);
    detail::write_matrix(os, model.A);
    detail::write_matrix(os, model.B);
    detail::write_matrix(os, model.C);
    detail::write_matrix(os, model.D);
    detail::write_matrix(os, model.res0);
    if (!os) throw validation_error("write failure on model file: " + path);
    os.close();

    std::ofstream ls(path + ".labels", std::ios::trunc);
    if (!ls) throw validation_error("cannot open label sidecar for writing: " + path + ".labels");
    ls << "# cidra model sidecar v1\n";
    ls << "# order " << M << "\n";
    ls << "# outputs " << p << "\n";
    ls << "# ts_s " << detail::fmt_g17(model.T_s) << "\n";
    ls << "# soc " << detail::fmt_g17(model.soc) << "\n";
    ls << "# temp_k " << detail::fmt_g17(model.temp) << "\n";
    ls << "# recon_error " << detail::fmt_g17(model.recon_error) << "\n";
    for (const auto& lab : model.labels) ls << lab.str() << "\n";
    if (!ls) throw validation_error("write failure on label sidecar: " + path + ".labels");
}

inline StateSpaceModel read_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw validation_error("cannot open model file: " + path);
    char magic[4];
    detail::read_raw(is, magic, 4, "magic");
    if (std::memcmp(magic, model_magic, 4) != 0)
        throw validation_error("not a cidra model file (bad magic): " + path);
    std::uint32_t version = 0, M = 0, p = 0;
    detail::read_raw(is, &version, sizeof version, "version");
    if (version != model_version)
        throw validation_error("unsupported model file version " + std::to_string(version));
    detail::read_raw(is, &M, sizeof M, "order");
    detail::read_raw(is, &p, sizeof p, "output count");
    if (M == 0 || p == 0 || M > 100000 || p > 100000)
        throw validation_error("model file header holds implausible dimensions");
    StateSpaceModel model;
    detail::read_raw(is, &model.T_s, sizeof model.T_s, "T_s");
    detail::read_raw(is, &model.soc, sizeof model.soc, "soc");
    detail::read_raw(is, &model.temp, sizeof model.temp, "temperature");
    model.A = detail::read_matrix(is, M, M, "A");
    model.B = detail::read_matrix(is, M, 1, "B");
    model.C = detail::read_matrix(is, p, M, "C");
    model.D = detail::read_matrix(is, p, 1, "D").col(0);
    model.res0 = detail::read_matrix(is, p, 1, "res0").col(0);

    std::ifstream ls(path + ".labels");
    if (!ls) throw validation_error("missing label sidecar: " + path + ".labels");
    std::string line;
    while (std::getline(ls, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') {
            // Metadata not stored in the binary rides in comments.
            const std::string key = "# recon_error ";
            if (line.rfind(key, 0) == 0) model.recon_error = std::stod(line.substr(key.size()));
            continue;
        }
        model.labels.push_back(parse_output_label(line));
    }
    if (model.labels.size() != p)
        throw validation_error("label sidecar row count disagrees with model output count");
    return model;
}

// Deterministic per-setpoint file name inside a model directory.
inline std::string model_file_name(double soc, double temp) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "model_soc%.4f_t%.2f.cidra", soc, temp);
    return buf;
}

inline std::vector<std::string> write_model_grid(const ModelGrid& grid, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    for (const auto& m : grid.models) {
        const std::string name = model_file_name(m.soc, m.temp);
        write_model(m, (std::filesystem::path(dir) / name).string());
        files.push_back(name);
    }
    return files;
}

inline ModelGrid read_model_grid(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".cidra")
            files.push_back(e.path().string());
    if (files.empty()) throw validation_error("no .cidra model files in directory: " + dir);
    std::sort(files.begin(), files.end());

    std::map<std::pair<double, double>, StateSpaceModel> by_point;
    std::vector<double> socs, temps;
    for (const auto& f : files) {
        StateSpaceModel m = read_model(f);
        socs.push_back(m.soc);
        temps.push_back(m.temp);
        if (!by_point.emplace(std::make_pair(m.soc, m.temp), std::move(m)).second)
            throw validation_error("duplicate setpoint in model directory: " + f);
    }
    auto uniq = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(socs);
    uniq(temps);
    if (by_point.size() != socs.size() * temps.size())
        throw validation_error("model directory does not hold a full soc x temperature tensor");

    ModelGrid grid;
    grid.socs = socs;
    grid.temps = temps;
    // Copy the reference metadata up front: the loop below moves models out
    // of the map, which would hollow out a reference into it.
    const long ref_order = by_point.begin()->second.order();
    const long ref_outputs = by_point.begin()->second.outputs();
    const double ref_ts = by_point.begin()->second.T_s;
    const std::vector<OutputLabel> ref_labels = by_point.begin()->second.labels;
    for (double s : socs)
        for (double t : temps) {
            auto it = by_point.find({s, t});
            StateSpaceModel& m = it->second;
            if (m.order() != ref_order || m.outputs() != ref_outputs ||
                m.T_s != ref_ts || !(m.labels == ref_labels))
                throw validation_error("models in directory disagree on order/outputs/T_s/labels");
            grid.models.push_back(std::move(m));
        }
    return grid;
}

}  // namespace cidra
