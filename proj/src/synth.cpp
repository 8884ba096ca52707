#include "tgq/synth.hpp"

#include <cmath>

#include "tgq/errors.hpp"
#include "tgq/rng.hpp"

namespace tgq {

void SynthSpec::validate() const {
    if (tokens < 1 || channels < 1)
        throw ConfigError("SynthSpec: tokens and channels must be positive");
    if (!(boundary_frac > 0.0 && boundary_frac < 1.0))
        throw ConfigError("SynthSpec: boundary_frac must lie in (0, 1)");
    if (!(cue_scale > 0.0) || !(background_scale > 0.0))
        throw ConfigError("SynthSpec: scales must be > 0");
    if (!(spike_magnitude >= 1.0))
        throw ConfigError("SynthSpec: spike_magnitude must be >= 1");
    if (!(spike_prob >= 0.0 && spike_prob <= 1.0))
        throw ConfigError("SynthSpec: spike_prob must lie in [0, 1]");
    if (boundary_tokens() >= tokens)
        throw ConfigError("SynthSpec: no background tokens left");
}

long SynthSpec::boundary_tokens() const {
    const long n = static_cast<long>(std::floor(boundary_frac * static_cast<double>(tokens)));
    return std::max<long>(n, 1);
}

SynthResult generate_synth(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    const long n_bdry = spec.boundary_tokens();
    const long n_bg = spec.tokens - n_bdry;

    SynthResult out;
    out.x = Tensor::zeros({static_cast<std::size_t>(spec.tokens), static_cast<std::size_t>(spec.channels)});
    out.is_boundary.assign(static_cast<std::size_t>(spec.tokens), false);
    out.spike_channel.assign(static_cast<std::size_t>(spec.tokens), -1);
    auto v = out.x.f32();

    for (long t = 0; t < spec.tokens; ++t) {
        const bool boundary = t >= n_bg;
        out.is_boundary[static_cast<std::size_t>(t)] = boundary;
        const double scale = boundary ? spec.cue_scale : spec.background_scale;
        for (long j = 0; j < spec.channels; ++j)
            v[static_cast<std::size_t>(t * spec.channels + j)] =
                static_cast<float>(scale * rng.next_normal());
        if (!boundary) {
            // At most one spike per token, replacing one channel value.
            if (rng.next_unit() < spec.spike_prob) {
                const long j = static_cast<long>(rng.next_below(static_cast<std::uint64_t>(spec.channels)));
                double mag = spec.spike_magnitude * spec.background_scale;
                if (spec.signed_spikes && rng.next_unit() < 0.5) mag = -mag;
                v[static_cast<std::size_t>(t * spec.channels + j)] = static_cast<float>(mag);
                out.spike_channel[static_cast<std::size_t>(t)] = j;
            }
        }
    }
    return out;
}

} // namespace tgq
