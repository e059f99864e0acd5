#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mcigle/numeric_core.hpp"

namespace mcigle {

// A node set observed in two modalities over one shared edge set. Edges are
// undirected, stored as (i, j) with i < j, sorted and deduplicated.
struct MultimodalGraph {
    int num_nodes = 0;
    std::vector<std::pair<int, int>> edges;
    Matrix features_vis;      // num_nodes x d_v
    Matrix features_txt;      // num_nodes x d_t
    std::vector<int> labels;  // length num_nodes, global class indices
};

// Normalizes edge orientation, sorts, and checks all structural invariants.
// Throws InputError on self-loops, duplicates, range violations, or feature
// matrices whose row count differs from num_nodes.
void normalize_and_validate(MultimodalGraph& g);

// Neighbor lists including the node itself, ascending order.
std::vector<std::vector<int>> neighborhoods_with_self(const MultimodalGraph& g);

// Line-oriented text format:
//   line 1: n d_v d_t num_edges
//   num_edges lines: i j
//   n lines: d_v visual feature values
//   n lines: d_t textual feature values
//   final line: n labels
// Doubles are written in shortest round-trip form; load(save(g)) is exact.
void save_graph(std::ostream& out, const MultimodalGraph& g);
void save_graph(const std::filesystem::path& path, const MultimodalGraph& g);
MultimodalGraph load_graph(std::istream& in);
MultimodalGraph load_graph(const std::filesystem::path& path);

// Shortest round-trip decimal form of a double (also used by the CSV writers).
std::string format_double(double value);

}  // namespace mcigle
