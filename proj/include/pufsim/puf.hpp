#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pufsim/rng.hpp"

namespace pufsim {

enum class PufKind { Apuf, Xor, Cdc };

std::string_view to_string(PufKind kind) noexcept;
/// Accepts "apuf", "xor", "cdc" (case-insensitive). Throws InvalidInput.
PufKind parse_kind(std::string_view text);

/// Raw challenge bits c_1..c_n, one byte per bit, each 0 or 1.
struct Challenge {
    std::vector<std::uint8_t> bits;

    std::size_t size() const noexcept { return bits.size(); }
    friend bool operator==(const Challenge&, const Challenge&) = default;
};

/// Parity-product features phi(i) = prod_{j>=i} (2c_j - 1), each +1 or -1.
struct TransformedChallenge {
    std::vector<std::int8_t> phi;

    std::size_t size() const noexcept { return phi.size(); }
    friend bool operator==(const TransformedChallenge&, const TransformedChallenge&) = default;
};

using Response = std::uint8_t;

/// One arbiter chain under the additive delay model.
struct ArbiterComponent {
    std::vector<double> weights;
    double bias = 0.0;

    std::size_t stages() const noexcept { return weights.size(); }
    friend bool operator==(const ArbiterComponent&, const ArbiterComponent&) = default;
};

struct ComponentEval {
    double latent;
    Response bit;
};

/// An APUF, k-XOR-PUF or CDC-k-XPUF. Immutable once sampled.
///
/// XOR components all read the same n-bit challenge. CDC components read a
/// concatenated n*k-bit challenge, component j owning bits [j*n, (j+1)*n).
struct PufInstance {
    PufKind kind = PufKind::Apuf;
    std::size_t stages = 0;
    std::vector<ArbiterComponent> components;
    double noisiness = 0.0;
    std::uint64_t seed = 0;

    std::size_t component_count() const noexcept { return components.size(); }
    std::size_t challenge_width() const noexcept
    {
        return kind == PufKind::Cdc ? stages * components.size() : stages;
    }
    friend bool operator==(const PufInstance&, const PufInstance&) = default;
};

TransformedChallenge transform_challenge(const Challenge& c);
/// Same transform over a raw bit slice, written into `out` (same length).
void transform_bits(std::span<const std::uint8_t> bits, std::span<std::int8_t> out);

/// latent = v + <w, phi> + noise_draw; bit is 1 iff latent > 0.
ComponentEval eval_component(const ArbiterComponent& comp, const TransformedChallenge& phi,
                             double noise_draw = 0.0);

/// Clean latent straight from challenge bits, without materialising phi.
double component_latent(const ArbiterComponent& comp, std::span<const std::uint8_t> bits) noexcept;

/// Noise-free response.
Response eval_puf(const PufInstance& p, const Challenge& c);
/// Noisy response: one independent normal draw per component from `noise`.
Response eval_puf(const PufInstance& p, const Challenge& c, Rng& noise);
/// Bit-span variants used for bulk evaluation.
Response eval_puf_bits(const PufInstance& p, std::span<const std::uint8_t> bits);
Response eval_puf_bits(const PufInstance& p, std::span<const std::uint8_t> bits, Rng& noise);

/// Weights and biases i.i.d. standard normal from Rng(seed). Draw order:
/// component 0 weights w(1)..w(n), then its bias, then component 1, ...
PufInstance sample_instance(PufKind kind, std::size_t stages, std::size_t components,
                            double noisiness, std::uint64_t seed);

/// Per-component noise standard deviation: noisiness * sqrt(n + 1).
double noise_std(const PufInstance& p) noexcept;

/// Text serialisation. Weights are written with 17 significant digits so a
/// round trip is exact.
void write_instance(std::ostream& out, const PufInstance& p);
PufInstance read_instance(std::istream& in);
void save_instance(const PufInstance& p, const std::string& path);
PufInstance load_instance(const std::string& path);

} // namespace pufsim
