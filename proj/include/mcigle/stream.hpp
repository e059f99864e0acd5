#pragma once

#include <cstdint>
#include <vector>

#include "mcigle/config.hpp"
#include "mcigle/graph.hpp"

namespace mcigle {

// One phase of the class-incremental stream.
struct PhaseData {
    MultimodalGraph train;
    MultimodalGraph test;
    std::vector<int> class_ids;  // global indices introduced this phase
};

// Deterministic sub-seed derivation so independent generation steps do not
// share random streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

// Synthetic stream: each class is a graph community (dense intra-class,
// sparse inter-class edges); textual features are Gaussian around a class
// mean except coordinate 0, which carries a class-dependent sinusoid; visual
// features are a fixed linear image of the textual ones plus noise.
std::vector<PhaseData> generate_stream(const ProtocolConfig& cfg);

}  // namespace mcigle
