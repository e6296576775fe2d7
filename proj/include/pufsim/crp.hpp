#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pufsim/puf.hpp"

namespace pufsim {

/// C_{i+1} = (a * C_i + g) mod 2^width. a, g and c0 are reduced mod 2^width.
struct LcgConfig {
    static constexpr std::uint64_t kDefaultMultiplier = 6364136223846793005ULL;
    static constexpr std::uint64_t kDefaultIncrement = 1442695040888963407ULL;

    std::uint64_t a = kDefaultMultiplier;
    std::uint64_t g = kDefaultIncrement;
    std::uint64_t c0 = 0;
    std::size_t width = 64;

    /// Throws InvalidInput unless width >= 1 and a is odd.
    void validate() const;
    /// a = 1 (mod 4) and g odd: the sequence visits every residue mod 2^width.
    bool full_period() const noexcept;
    friend bool operator==(const LcgConfig&, const LcgConfig&) = default;
};

/// One LCG step for widths up to 64 bits.
std::uint64_t lcg_next(const LcgConfig& cfg, std::uint64_t c);

/// Arbitrary-width LCG state held as little-endian 64-bit limbs.
class LcgStream {
public:
    explicit LcgStream(const LcgConfig& cfg);

    void advance();
    const std::vector<std::uint64_t>& state() const noexcept { return state_; }

private:
    LcgConfig cfg_;
    std::vector<std::uint64_t> state_;
    std::uint64_t a_;
    std::uint64_t g_;
};

/// Public, invertible bit mixer on width-bit integers (little-endian limbs).
///
/// Each limb gets the SplitMix64 finaliser (xor-shift / odd-multiply rounds,
/// shifts scaled to the limb width), chained low-to-high and then
/// high-to-low so every output bit depends on every input bit.
void mix_bits(std::span<std::uint64_t> limbs, std::size_t width) noexcept;
std::uint64_t mix_word(std::uint64_t x, std::size_t width) noexcept;

/// Bit-packed challenge list, one row of `width` bits per challenge.
class ChallengeSet {
public:
    ChallengeSet() = default;
    explicit ChallengeSet(std::size_t width) : width_(width), words_((width + 63) / 64) {}

    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return words_ ? data_.size() / words_ : 0; }
    std::size_t words_per_row() const noexcept { return words_; }

    void push_back(std::span<const std::uint64_t> limbs);
    void push_back(const Challenge& c);
    void reserve(std::size_t n) { data_.reserve(n * words_); }

    bool bit(std::size_t row, std::size_t i) const noexcept
    {
        return (data_[row * words_ + i / 64] >> (i % 64)) & 1U;
    }
    std::span<const std::uint64_t> row(std::size_t r) const noexcept
    {
        return {data_.data() + r * words_, words_};
    }
    Challenge operator[](std::size_t row) const;
    /// Unpacks row `r` into `out` (size == width).
    void unpack(std::size_t r, std::span<std::uint8_t> out) const noexcept;

    friend bool operator==(const ChallengeSet&, const ChallengeSet&) = default;

private:
    std::size_t width_ = 0;
    std::size_t words_ = 0;
    std::vector<std::uint64_t> data_;
};

/// Generates `count` distinct challenges of `cfg.width` bits. Challenge i is
/// the little-endian expansion of C_i (C_1 = first successor of c0), passed
/// through mix_bits first when `decorrelate` is set. Duplicate states are
/// dropped; a repeated state means the stream has cycled, which raises
/// InsufficientSpace, as does count > 2^width.
ChallengeSet generate_challenges(const LcgConfig& cfg, std::size_t count, bool decorrelate);

/// Contiguous index ranges [begin, end) into the record list.
struct Split {
    std::size_t train_begin = 0, train_end = 0;
    std::size_t validation_begin = 0, validation_end = 0;
    std::size_t test_begin = 0, test_end = 0;

    std::size_t train_size() const noexcept { return train_end - train_begin; }
    std::size_t validation_size() const noexcept { return validation_end - validation_begin; }
    std::size_t test_size() const noexcept { return test_end - test_begin; }
    friend bool operator==(const Split&, const Split&) = default;
};

/// 90/10 train/test; 1% of the train part carved off as validation.
/// Order: train, then validation, then test.
Split make_split(std::size_t records);

struct Provenance {
    PufKind kind = PufKind::Apuf;
    std::size_t stages = 0;
    std::size_t components = 0;
    std::uint64_t instance_seed = 0;
    double noisiness = 0.0;
    bool noisy = false;
    std::uint64_t noise_seed = 0;
    LcgConfig lcg;
    bool decorrelate = true;

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct CrpDataset {
    ChallengeSet challenges;
    std::vector<Response> responses;
    Split split;
    Provenance provenance;

    std::size_t size() const noexcept { return responses.size(); }
    std::size_t challenge_width() const noexcept { return challenges.width(); }
    friend bool operator==(const CrpDataset&, const CrpDataset&) = default;
};

/// Evaluates every challenge on `p`. With `with_noise`, responses are noisy
/// draws from Rng(noise_seed); otherwise they are the clean responses.
CrpDataset build_dataset(const PufInstance& p, const ChallengeSet& challenges, bool with_noise,
                         std::uint64_t noise_seed = 0);

/// Challenges from the LCG stream (width taken from `p`) plus responses,
/// with the generator settings recorded in the provenance.
CrpDataset generate_dataset(const PufInstance& p, const LcgConfig& lcg, std::size_t count, bool decorrelate,
                            bool with_noise, std::uint64_t noise_seed = 0);

/// Text format:
///
///     pufsim-crp 1
///     width <w>
///     count <N>
///     split <train> <validation> <test>
///     provenance kind=<k> stages=<n> components=<k> instance_seed=<s> noisiness=<x>
///                noisy=<0|1> noise_seed=<s> lcg_a=<a> lcg_g=<g> lcg_c0=<c0> decorrelate=<0|1>
///     records
///     <c_1 c_2 ... c_w as 0/1 characters> <response>
///     ...
///
/// (the provenance is one line.)
void write_dataset_text(std::ostream& out, const CrpDataset& d);
CrpDataset read_dataset_text(std::istream& in);

/// Binary format, little-endian throughout:
///
///     offset  size  field
///     0       8     magic "PUFCRPB\0"
///     8       4     version (1)
///     12      4     challenge width w
///     16      8     record count N
///     24      8     train size
///     32      8     validation size
///     40      8     test size
///     48      4     provenance length L
///     52      L     provenance line (same text as the text format, no newline)
///     52+L    N*ceil(w/8)  challenges, ceil(w/8) bytes per record, bit i of
///                          the challenge at byte i/8, bit position i%8
///     ...     ceil(N/8)    responses, record r at byte r/8, bit position r%8
void write_dataset_binary(std::ostream& out, const CrpDataset& d);
CrpDataset read_dataset_binary(std::istream& in);

/// Dispatch on extension: ".bin" is binary, anything else text.
void save_dataset(const CrpDataset& d, const std::string& path);
/// Sniffs the magic bytes to pick the reader.
CrpDataset load_dataset(const std::string& path);

std::string format_provenance(const Provenance& p);
Provenance parse_provenance(const std::string& line);

} // namespace pufsim
