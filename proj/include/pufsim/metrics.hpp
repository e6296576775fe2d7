#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pufsim/crp.hpp"
#include "pufsim/puf.hpp"

namespace pufsim::metrics {

/// Response bits indexed [device][challenge][repeat].
class ResponseMatrix {
public:
    ResponseMatrix() = default;
    ResponseMatrix(std::size_t devices, std::size_t challenges, std::size_t repeats)
        : devices_(devices), challenges_(challenges), repeats_(repeats), bits_(devices * challenges * repeats, 0)
    {
    }

    std::size_t devices() const noexcept { return devices_; }
    std::size_t challenges() const noexcept { return challenges_; }
    std::size_t repeats() const noexcept { return repeats_; }

    Response& at(std::size_t d, std::size_t c, std::size_t r) noexcept
    {
        return bits_[(d * challenges_ + c) * repeats_ + r];
    }
    Response at(std::size_t d, std::size_t c, std::size_t r) const noexcept
    {
        return bits_[(d * challenges_ + c) * repeats_ + r];
    }

    /// The bits of one device for one repeat, in challenge order.
    std::vector<Response> device_bits(std::size_t d, std::size_t repeat = 0) const;

    friend bool operator==(const ResponseMatrix&, const ResponseMatrix&) = default;

private:
    std::size_t devices_ = 0;
    std::size_t challenges_ = 0;
    std::size_t repeats_ = 0;
    std::vector<Response> bits_;
};

/// H = -log2 max(p, 1 - p), p the fraction of ones.
double randomness(std::span<const Response> bits);

/// S = 1 + (1/N_c) sum_k log2 max(q_k, 1 - q_k), q_k the fraction of ones
/// across the repeats of challenge k.
double steadiness(const ResponseMatrix& m, std::size_t device);

enum class PairCounting {
    /// Each unordered device pair counted once; complementary pair gives 1.
    Unordered,
    /// Each ordered pair (j, m), j != m; twice the unordered value.
    Ordered,
};

/// HU = 4 / (N_r * N^2) * sum_i sum_{pairs j,m} (b_{j,i} xor b_{m,i}),
/// evaluated on one repeat of every device.
double hori_uniqueness(const ResponseMatrix& m, std::size_t repeat = 0,
                       PairCounting counting = PairCounting::Unordered);

/// Evaluates every (device, challenge, repeat) with an independent noise
/// draw. `noisiness` replaces each instance's own setting; 0 gives clean
/// responses. Device d draws from Rng(derive_seed(noise_seed, {d})).
ResponseMatrix collect_matrix(const std::vector<PufInstance>& instances, const ChallengeSet& challenges,
                              std::size_t repeats, double noisiness, std::uint64_t noise_seed = 0);

struct MetricReport {
    std::vector<double> randomness;
    std::vector<double> steadiness;
    double uniqueness = 0.0;
    double mean_randomness = 0.0;
    double mean_steadiness = 0.0;
    bool has_uniqueness = false;
};

/// All three metrics; uniqueness only when there are at least two devices.
MetricReport evaluate(const ResponseMatrix& m, PairCounting counting = PairCounting::Unordered);

/// Dataset text format with device and repeat columns:
///
///     pufsim-matrix 1
///     width <w>
///     devices <N>
///     challenges <N_c>
///     repeats <N_a>
///     records
///     <challenge bits> <response> <device> <repeat>
///
/// Challenges are numbered in order of first appearance. Every
/// (device, challenge, repeat) cell must appear exactly once.
struct LabelledMatrix {
    ChallengeSet challenges;
    ResponseMatrix responses;
};

void write_matrix(std::ostream& out, const LabelledMatrix& m);
LabelledMatrix read_matrix(std::istream& in);

} // namespace pufsim::metrics
