#include "pufsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "pufsim/errors.hpp"

namespace pufsim::metrics {

std::vector<Response> ResponseMatrix::device_bits(std::size_t d, std::size_t repeat) const
{
    std::vector<Response> out(challenges_);
    for (std::size_t c = 0; c < challenges_; ++c)
        out[c] = at(d, c, repeat);
    return out;
}

double randomness(std::span<const Response> bits)
{
    if (bits.empty())
        throw InvalidInput("randomness of an empty response set");
    const auto ones = static_cast<double>(std::count(bits.begin(), bits.end(), Response{1}));
    const double p = ones / static_cast<double>(bits.size());
    // -log2(1) is -0.0; report +0.
    return 0.0 - std::log2(std::max(p, 1.0 - p));
}

double steadiness(const ResponseMatrix& m, std::size_t device)
{
    if (m.repeats() < 1 || m.challenges() < 1)
        throw InvalidInput("steadiness needs at least one challenge and one repeat");
    if (device >= m.devices())
        throw InvalidInput("device index out of range");
    double total = 0.0;
    for (std::size_t c = 0; c < m.challenges(); ++c) {
        std::size_t ones = 0;
        for (std::size_t r = 0; r < m.repeats(); ++r)
            ones += m.at(device, c, r);
        const double q = static_cast<double>(ones) / static_cast<double>(m.repeats());
        total += std::log2(std::max(q, 1.0 - q));
    }
    return 1.0 + total / static_cast<double>(m.challenges());
}

double hori_uniqueness(const ResponseMatrix& m, std::size_t repeat, PairCounting counting)
{
    if (m.devices() < 2)
        throw InvalidInput("uniqueness needs at least two devices");
    if (m.challenges() < 1)
        throw InvalidInput("uniqueness needs at least one response bit");
    if (repeat >= m.repeats())
        throw InvalidInput("repeat index out of range");
    const std::size_t n = m.devices();
    // For one bit position, the number of differing unordered pairs is ones * zeros.
    double pairs = 0.0;
    for (std::size_t c = 0; c < m.challenges(); ++c) {
        std::size_t ones = 0;
        for (std::size_t d = 0; d < n; ++d)
            ones += m.at(d, c, repeat);
        pairs += static_cast<double>(ones) * static_cast<double>(n - ones);
    }
    if (counting == PairCounting::Ordered)
        pairs *= 2.0;
    const double nd = static_cast<double>(n);
    return 4.0 * pairs / (static_cast<double>(m.challenges()) * nd * nd);
}

ResponseMatrix collect_matrix(const std::vector<PufInstance>& instances, const ChallengeSet& challenges,
                              std::size_t repeats, double noisiness, std::uint64_t noise_seed)
{
    if (instances.empty())
        throw InvalidInput("no devices to collect from");
    if (repeats < 1)
        throw InvalidInput("repeats must be at least 1");
    const PufInstance& first = instances.front();
    for (const auto& p : instances)
        if (p.kind != first.kind || p.stages != first.stages || p.component_count() != first.component_count())
            throw InvalidInput("all devices must share one shape");
    if (challenges.width() != first.challenge_width())
        throw InvalidInput("challenge width does not match the devices");

    ResponseMatrix m(instances.size(), challenges.size(), repeats);
    std::vector<std::uint8_t> bits(challenges.width());
    for (std::size_t d = 0; d < instances.size(); ++d) {
        PufInstance device = instances[d];
        device.noisiness = noisiness;
        Rng noise(derive_seed(noise_seed, {d}));
        for (std::size_t c = 0; c < challenges.size(); ++c) {
            challenges.unpack(c, bits);
            if (noisiness > 0.0) {
                for (std::size_t r = 0; r < repeats; ++r)
                    m.at(d, c, r) = eval_puf_bits(device, bits, noise);
            } else {
                const Response clean = eval_puf_bits(device, bits);
                for (std::size_t r = 0; r < repeats; ++r)
                    m.at(d, c, r) = clean;
            }
        }
    }
    return m;
}

MetricReport evaluate(const ResponseMatrix& m, PairCounting counting)
{
    MetricReport rep;
    for (std::size_t d = 0; d < m.devices(); ++d) {
        rep.randomness.push_back(randomness(m.device_bits(d)));
        rep.steadiness.push_back(steadiness(m, d));
    }
    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    rep.mean_randomness = mean(rep.randomness);
    rep.mean_steadiness = mean(rep.steadiness);
    if (m.devices() >= 2) {
        rep.uniqueness = hori_uniqueness(m, 0, counting);
        rep.has_uniqueness = true;
    }
    return rep;
}

void write_matrix(std::ostream& out, const LabelledMatrix& lm)
{
    const auto& m = lm.responses;
    const auto& cs = lm.challenges;
    if (cs.size() != m.challenges())
        throw InvalidInput("challenge list and matrix disagree on the challenge count");
    out << "pufsim-matrix 1\n"
        << "width " << cs.width() << '\n'
        << "devices " << m.devices() << '\n'
        << "challenges " << m.challenges() << '\n'
        << "repeats " << m.repeats() << '\n'
        << "records\n";
    std::string bits(cs.width(), '0');
    for (std::size_t d = 0; d < m.devices(); ++d)
        for (std::size_t c = 0; c < m.challenges(); ++c) {
            for (std::size_t i = 0; i < cs.width(); ++i)
                bits[i] = cs.bit(c, i) ? '1' : '0';
            for (std::size_t r = 0; r < m.repeats(); ++r)
                out << bits << ' ' << int(m.at(d, c, r)) << ' ' << d << ' ' << r << '\n';
        }
}

LabelledMatrix read_matrix(std::istream& in)
{
    std::string line;
    std::size_t line_no = 0;
    auto header = [&](const std::string& key) -> std::size_t {
        if (!std::getline(in, line))
            throw ParseError("matrix: unexpected end of file at line " + std::to_string(line_no + 1));
        ++line_no;
        std::istringstream ls(line);
        std::string k;
        std::size_t v = 0;
        if (!(ls >> k) || k != key || !(ls >> v))
            throw ParseError("matrix line " + std::to_string(line_no) + ": expected '" + key + " <integer>'");
        return v;
    };
    if (!std::getline(in, line) || line != "pufsim-matrix 1")
        throw ParseError("matrix line 1: expected 'pufsim-matrix 1'");
    ++line_no;
    const std::size_t width = header("width");
    const std::size_t devices = header("devices");
    const std::size_t challenges = header("challenges");
    const std::size_t repeats = header("repeats");
    if (!std::getline(in, line) || line != "records")
        throw ParseError("matrix line " + std::to_string(line_no + 1) + ": expected 'records'");
    ++line_no;
    if (width < 1 || devices < 1 || challenges < 1 || repeats < 1)
        throw SchemaError("matrix: all dimensions must be positive");

    LabelledMatrix lm{ChallengeSet(width), ResponseMatrix(devices, challenges, repeats)};
    std::map<std::string, std::size_t> index;
    std::vector<std::uint8_t> seen(devices * challenges * repeats, 0);
    Challenge c;
    c.bits.resize(width);
    const std::size_t total = devices * challenges * repeats;
    for (std::size_t rec = 0; rec < total; ++rec) {
        if (!std::getline(in, line))
            throw ParseError("matrix: truncated at line " + std::to_string(line_no + 1));
        ++line_no;
        std::istringstream ls(line);
        std::string bits;
        int resp = -1;
        long long dev = -1, rep = -1;
        if (!(ls >> bits >> resp >> dev >> rep))
            throw ParseError("matrix line " + std::to_string(line_no) +
                             ": expected '<challenge> <response> <device> <repeat>'");
        if (bits.size() != width)
            throw SchemaError("matrix line " + std::to_string(line_no) + ": challenge width mismatch");
        if (resp != 0 && resp != 1)
            throw ParseError("matrix line " + std::to_string(line_no) + ": response must be 0 or 1");
        if (dev < 0 || static_cast<std::size_t>(dev) >= devices || rep < 0 ||
            static_cast<std::size_t>(rep) >= repeats)
            throw SchemaError("matrix line " + std::to_string(line_no) + ": device or repeat index out of range");
        auto [it, inserted] = index.emplace(bits, index.size());
        if (inserted) {
            if (it->second >= challenges)
                throw SchemaError("matrix line " + std::to_string(line_no) + ": more distinct challenges than declared");
            for (std::size_t i = 0; i < width; ++i) {
                if (bits[i] != '0' && bits[i] != '1')
                    throw ParseError("matrix line " + std::to_string(line_no) + ": challenge bit must be 0 or 1");
                c.bits[i] = static_cast<std::uint8_t>(bits[i] - '0');
            }
            lm.challenges.push_back(c);
        }
        const std::size_t cell = (static_cast<std::size_t>(dev) * challenges + it->second) * repeats +
                                 static_cast<std::size_t>(rep);
        if (seen[cell]++)
            throw SchemaError("matrix line " + std::to_string(line_no) + ": duplicate cell");
        lm.responses.at(static_cast<std::size_t>(dev), it->second, static_cast<std::size_t>(rep)) =
            static_cast<Response>(resp);
    }
    return lm;
}

} // namespace pufsim::metrics
