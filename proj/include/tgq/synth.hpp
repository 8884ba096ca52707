#pragma once

#include <cstdint>
#include <vector>

#include "tgq/tensor.hpp"

namespace tgq {

// Two-population token generator: a majority of background tokens with rare
// large channel spikes, and a minority of weak boundary-response tokens.
// The spike population drives the shared range; the boundary population is
// what a shared-range quantizer crushes into the zero bin.
struct SynthSpec {
    long tokens = 128;
    long channels = 64;
    double boundary_frac = 0.25;   // floor(tokens * frac), at least 1
    double cue_scale = 0.1;        // boundary response std
    double background_scale = 1.0;
    double spike_magnitude = 50.0; // in units of background_scale
    double spike_prob = 0.05;      // per background token
    bool signed_spikes = false;    // default spikes are positive
    std::uint64_t seed = 42;

    void validate() const;
    long boundary_tokens() const;
};

struct SynthResult {
    Tensor x;                        // (tokens, channels)
    std::vector<bool> is_boundary;   // per token
    std::vector<long> spike_channel; // per token, -1 when no spike
};

// Background tokens come first, boundary tokens last. Identical specs give
// identical tensors.
SynthResult generate_synth(const SynthSpec& spec);

} // namespace tgq
