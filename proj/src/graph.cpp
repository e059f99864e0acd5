#include "mcigle/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace mcigle {

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) {
        throw NumericError("format_double: conversion failed");
    }
    return std::string(buf, ptr);
}

void normalize_and_validate(MultimodalGraph& g) {
    if (g.num_nodes <= 0) {
        throw InputError("graph: num_nodes must be positive");
    }
    if (g.features_vis.rows() != g.num_nodes || g.features_txt.rows() != g.num_nodes) {
        throw InputError("graph: modality feature rows must equal num_nodes");
    }
    if (static_cast<int>(g.labels.size()) != g.num_nodes) {
        throw InputError("graph: label count must equal num_nodes");
    }
    require_finite(g.features_vis, "graph: features_vis");
    require_finite(g.features_txt, "graph: features_txt");
    for (auto& [i, j] : g.edges) {
        if (i == j) {
            throw InputError("graph: self-loop at node " + std::to_string(i));
        }
        if (i < 0 || j < 0 || i >= g.num_nodes || j >= g.num_nodes) {
            throw InputError("graph: edge index out of range");
        }
        if (i > j) {
            std::swap(i, j);
        }
    }
    std::sort(g.edges.begin(), g.edges.end());
    if (std::adjacent_find(g.edges.begin(), g.edges.end()) != g.edges.end()) {
        throw InputError("graph: duplicate edge");
    }
    for (int label : g.labels) {
        if (label < 0) {
            throw InputError("graph: negative class label");
        }
    }
}

std::vector<std::vector<int>> neighborhoods_with_self(const MultimodalGraph& g) {
    std::vector<std::vector<int>> nbrs(g.num_nodes);
    for (int u = 0; u < g.num_nodes; ++u) {
        nbrs[u].push_back(u);
    }
    for (const auto& [i, j] : g.edges) {
        nbrs[i].push_back(j);
        nbrs[j].push_back(i);
    }
    for (auto& list : nbrs) {
        std::sort(list.begin(), list.end());
    }
    return nbrs;
}

void save_graph(std::ostream& out, const MultimodalGraph& g) {
    out << g.num_nodes << ' ' << g.features_vis.cols() << ' ' << g.features_txt.cols()
        << ' ' << g.edges.size() << '\n';
    for (const auto& [i, j] : g.edges) {
        out << i << ' ' << j << '\n';
    }
    auto write_rows = [&out](const Matrix& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                if (c > 0) out << ' ';
                out << format_double(m(r, c));
            }
            out << '\n';
        }
    };
    write_rows(g.features_vis);
    write_rows(g.features_txt);
    for (int u = 0; u < g.num_nodes; ++u) {
        if (u > 0) out << ' ';
        out << g.labels[u];
    }
    out << '\n';
}

void save_graph(const std::filesystem::path& path, const MultimodalGraph& g) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open for writing: " + path.string());
    }
    save_graph(out, g);
    if (!out) {
        throw InputError("write failed: " + path.string());
    }
}

MultimodalGraph load_graph(std::istream& in) {
    MultimodalGraph g;
    Eigen::Index d_v = 0, d_t = 0;
    std::size_t num_edges = 0;
    if (!(in >> g.num_nodes >> d_v >> d_t >> num_edges)) {
        throw InputError("graph: malformed header");
    }
    if (g.num_nodes <= 0 || d_v < 0 || d_t < 0) {
        throw InputError("graph: invalid header values");
    }
    g.edges.resize(num_edges);
    for (auto& [i, j] : g.edges) {
        if (!(in >> i >> j)) {
            throw InputError("graph: malformed edge line");
        }
    }
    auto read_rows = [&in, &g](Eigen::Index cols, const char* what) {
        Matrix m(g.num_nodes, cols);
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                if (!(in >> m(r, c))) {
                    throw InputError(std::string("graph: malformed ") + what + " row");
                }
            }
        }
        return m;
    };
    g.features_vis = read_rows(d_v, "visual feature");
    g.features_txt = read_rows(d_t, "textual feature");
    g.labels.resize(g.num_nodes);
    for (int& label : g.labels) {
        if (!(in >> label)) {
            throw InputError("graph: malformed label row");
        }
    }
    normalize_and_validate(g);
    return g;
}

MultimodalGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open for reading: " + path.string());
    }
    return load_graph(in);
}

}  // namespace mcigle
