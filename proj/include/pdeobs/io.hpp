#pragma once

// CSV serialization. Every floating-point value is written with 17
// significant digits so that files round-trip exactly.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "gains.hpp"
#include "grid.hpp"
#include "kernel_field.hpp"

namespace pdeobs::io {

inline std::string fmt17(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::string& header) : out_(path, std::ios::binary) {
        if (!out_) throw config_error("cannot open " + path + " for writing");
        out_ << header << '\n';
    }

    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

    void close() {
        out_.flush();
        if (!out_) throw numerical_error("write failed");
    }

private:
    static std::string cell(double x) { return fmt17(x); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(std::string_view s) { return std::string(s); }
    static std::string cell(const char* s) { return s; }

    std::ofstream out_;
};

// t,r,value,label
inline void write_states(const std::string& path, const std::vector<StateField>& states) {
    CsvWriter w(path, "t,r,value,label");
    for (const auto& f : states)
        for (std::size_t i = 0; i < f.size(); ++i)
            w.row(f.time, f.grid.node(i), f[i], to_string(f.label));
    w.close();
}

// t,norm_c_tilde,norm_w_tilde,W
inline void write_norms(const std::string& path, const std::vector<double>& t,
                        const std::vector<double>& nc, const std::vector<double>& nw,
                        const std::vector<double>& W) {
    CsvWriter w(path, "t,norm_c_tilde,norm_w_tilde,W");
    for (std::size_t k = 0; k < t.size(); ++k) w.row(t[k], nc[k], nw[k], W[k]);
    w.close();
}

// t,r,s,p with rows ordered by t, then r, then s >= r. With an oracle the
// columns p_direct and abs_diff are appended.
inline void write_kernel(const std::string& path, const KernelField& p,
                         const KernelField* oracle = nullptr) {
    CsvWriter w(path, oracle ? "t,r,s,p,p_direct,abs_diff" : "t,r,s,p");
    const auto& g = p.grid();
    for (std::size_t k = 0; k < p.time_count(); ++k)
        for (std::size_t i = 0; i < g.size(); ++i)
            for (std::size_t j = i; j < g.size(); ++j) {
                const double v = p(i, j, k);
                if (oracle) {
                    const double o = (*oracle)(i, j, 0);
                    w.row(p.times()[k], g.node(i), g.node(j), v, o, std::abs(v - o));
                } else {
                    w.row(p.times()[k], g.node(i), g.node(j), v);
                }
            }
    w.close();
}

// t,r,p1 and t,p10
inline void write_gains(const std::string& p1_path, const std::string& p10_path,
                        const ObserverGains& g) {
    CsvWriter a(p1_path, "t,r,p1");
    for (std::size_t k = 0; k < g.times.size(); ++k)
        for (std::size_t i = 0; i < g.grid.size(); ++i) a.row(g.times[k], g.grid.node(i), g.p1[k][i]);
    a.close();
    CsvWriter b(p10_path, "t,p10");
    for (std::size_t k = 0; k < g.times.size(); ++k) b.row(g.times[k], g.p10[k]);
    b.close();
}

// Reads a file produced by write_kernel (oracle columns are ignored).
inline KernelField read_kernel(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot read kernel file " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,r,s,p", 0) != 0)
        throw config_error(path + ": line 1: expected header starting with t,r,s,p");
    struct Row {
        double t, r, s, p;
    };
    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        double v[4];
        for (double& x : v) {
            if (!std::getline(ss, cell, ','))
                throw config_error(path + ": line " + std::to_string(lineno) + ": too few columns");
            char* end = nullptr;
            x = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0' || !std::isfinite(x))
                throw config_error(path + ": line " + std::to_string(lineno) + ": bad number '" +
                                   cell + "'");
        }
        rows.push_back({v[0], v[1], v[2], v[3]});
    }
    if (rows.empty()) throw config_error(path + ": no data rows");
    std::vector<double> times{rows.front().t};
    for (const auto& r : rows)
        if (r.t != times.back()) times.push_back(r.t);
    if (rows.size() % times.size() != 0) throw shape_error(path + ": ragged time layers");
    const std::size_t per = rows.size() / times.size();
    std::size_t nodes = 1;
    while (KernelField::tri_size(nodes) < per) ++nodes;
    if (KernelField::tri_size(nodes) != per || nodes < 3)
        throw shape_error(path + ": layer of " + std::to_string(per) + " rows is not triangular");
    KernelField p(SpatialGrid(nodes - 1), times);
    std::size_t q = 0;
    for (std::size_t k = 0; k < times.size(); ++k)
        for (std::size_t i = 0; i < nodes; ++i)
            for (std::size_t j = i; j < nodes; ++j, ++q) {
                const Row& r = rows[q];
                if (r.t != times[k] || std::abs(r.r - p.grid().node(i)) > 1e-12 ||
                    std::abs(r.s - p.grid().node(j)) > 1e-12)
                    throw shape_error(path + ": line " + std::to_string(q + 2) +
                                      ": row does not match the expected (t, r, s) ordering");
                p.at(i, j, k) = r.p;
            }
    return p;
}

}  // namespace pdeobs::io
