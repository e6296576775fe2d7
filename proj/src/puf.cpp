#include "pufsim/puf.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "pufsim/errors.hpp"
#include "pufsim/io.hpp"

namespace pufsim {

namespace {

constexpr std::string_view kInstanceMagic = "pufsim-instance";
constexpr int kInstanceVersion = 1;

std::span<const std::uint8_t> component_slice(const PufInstance& p, std::span<const std::uint8_t> bits,
                                              std::size_t j) noexcept
{
    if (p.kind == PufKind::Cdc)
        return bits.subspan(j * p.stages, p.stages);
    return bits;
}

void check_width(const PufInstance& p, std::size_t width)
{
    if (width != p.challenge_width())
        throw InvalidInput("challenge width " + std::to_string(width) + " does not match instance width " +
                           std::to_string(p.challenge_width()));
}

} // namespace

std::string_view to_string(PufKind kind) noexcept
{
    switch (kind) {
    case PufKind::Apuf:
        return "apuf";
    case PufKind::Xor:
        return "xor";
    case PufKind::Cdc:
        return "cdc";
    }
    return "?";
}

PufKind parse_kind(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "apuf")
        return PufKind::Apuf;
    if (lower == "xor")
        return PufKind::Xor;
    if (lower == "cdc")
        return PufKind::Cdc;
    throw InvalidInput("unknown PUF kind '" + std::string(text) + "' (expected apuf, xor or cdc)");
}

void transform_bits(std::span<const std::uint8_t> bits, std::span<std::int8_t> out)
{
    if (bits.empty())
        throw InvalidInput("empty challenge");
    if (out.size() != bits.size())
        throw InvalidInput("transform output length mismatch");
    std::int8_t acc = 1;
    for (std::size_t i = bits.size(); i-- > 0;) {
        if (bits[i] > 1)
            throw InvalidInput("challenge bit out of range");
        acc = static_cast<std::int8_t>(bits[i] ? acc : -acc);
        out[i] = acc;
    }
}

TransformedChallenge transform_challenge(const Challenge& c)
{
    TransformedChallenge t;
    t.phi.resize(c.size());
    transform_bits(c.bits, t.phi);
    return t;
}

ComponentEval eval_component(const ArbiterComponent& comp, const TransformedChallenge& phi, double noise_draw)
{
    if (phi.size() != comp.stages())
        throw InvalidInput("transformed challenge length " + std::to_string(phi.size()) +
                           " does not match stage count " + std::to_string(comp.stages()));
    double latent = comp.bias;
    for (std::size_t i = 0; i < phi.size(); ++i)
        latent += comp.weights[i] * phi.phi[i];
    latent += noise_draw;
    return {latent, static_cast<Response>(latent > 0.0 ? 1 : 0)};
}

double component_latent(const ArbiterComponent& comp, std::span<const std::uint8_t> bits) noexcept
{
    // Same summation order as eval_component (i ascending), so both paths agree bit for bit.
    const std::size_t n = comp.stages();
    thread_local std::vector<std::int8_t> phi;
    phi.resize(n);
    std::int8_t acc = 1;
    for (std::size_t i = n; i-- > 0;) {
        acc = static_cast<std::int8_t>(bits[i] ? acc : -acc);
        phi[i] = acc;
    }
    double latent = comp.bias;
    for (std::size_t i = 0; i < n; ++i)
        latent += comp.weights[i] * phi[i];
    return latent;
}

Response eval_puf_bits(const PufInstance& p, std::span<const std::uint8_t> bits)
{
    check_width(p, bits.size());
    Response r = 0;
    for (std::size_t j = 0; j < p.components.size(); ++j)
        r ^= component_latent(p.components[j], component_slice(p, bits, j)) > 0.0 ? 1 : 0;
    return r;
}

Response eval_puf_bits(const PufInstance& p, std::span<const std::uint8_t> bits, Rng& noise)
{
    check_width(p, bits.size());
    const double sigma = noise_std(p);
    Response r = 0;
    for (std::size_t j = 0; j < p.components.size(); ++j) {
        const double draw = sigma > 0.0 ? sigma * noise.normal() : 0.0;
        r ^= component_latent(p.components[j], component_slice(p, bits, j)) + draw > 0.0 ? 1 : 0;
    }
    return r;
}

Response eval_puf(const PufInstance& p, const Challenge& c)
{
    return eval_puf_bits(p, c.bits);
}

Response eval_puf(const PufInstance& p, const Challenge& c, Rng& noise)
{
    return eval_puf_bits(p, c.bits, noise);
}

PufInstance sample_instance(PufKind kind, std::size_t stages, std::size_t components, double noisiness,
                            std::uint64_t seed)
{
    if (stages < 1)
        throw InvalidInput("stage count must be at least 1");
    if (components < 1)
        throw InvalidInput("component count must be at least 1");
    if (kind == PufKind::Apuf && components != 1)
        throw InvalidInput("an APUF has exactly one component");
    if (!(noisiness >= 0.0) || !std::isfinite(noisiness))
        throw InvalidInput("noisiness must be a finite value >= 0");

    PufInstance p;
    p.kind = kind;
    p.stages = stages;
    p.noisiness = noisiness;
    p.seed = seed;
    p.components.resize(components);
    Rng rng(seed);
    for (auto& comp : p.components) {
        comp.weights.resize(stages);
        for (double& w : comp.weights)
            w = rng.normal();
        comp.bias = rng.normal();
    }
    return p;
}

double noise_std(const PufInstance& p) noexcept
{
    return p.noisiness * std::sqrt(static_cast<double>(p.stages) + 1.0);
}

void write_instance(std::ostream& out, const PufInstance& p)
{
    out << kInstanceMagic << ' ' << kInstanceVersion << '\n'
        << "kind " << to_string(p.kind) << '\n'
        << "stages " << p.stages << '\n'
        << "components " << p.components.size() << '\n'
        << "noisiness " << format_exact(p.noisiness) << '\n'
        << "seed " << p.seed << '\n'
        << "rng " << Rng::kName << '\n';
    for (const auto& comp : p.components) {
        out << "component " << format_exact(comp.bias);
        for (double w : comp.weights)
            out << ' ' << format_exact(w);
        out << '\n';
    }
}

PufInstance read_instance(std::istream& in)
{
    std::size_t line_no = 0;
    std::string line;
    auto next_line = [&](std::string_view expect_key) {
        if (!std::getline(in, line))
            throw ParseError("instance: unexpected end of file at line " + std::to_string(line_no + 1) +
                             " (expected '" + std::string(expect_key) + "')");
        ++line_no;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key != expect_key)
            throw ParseError("instance line " + std::to_string(line_no) + ": expected '" +
                             std::string(expect_key) + "', got '" + key + "'");
        std::string rest;
        std::getline(ls >> std::ws, rest);
        return rest;
    };
    auto parse_uint = [&](const std::string& text) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(text, &used);
            if (used != text.size())
                throw std::invalid_argument(text);
            return static_cast<std::uint64_t>(v);
        } catch (const std::exception&) {
            throw ParseError("instance line " + std::to_string(line_no) + ": bad integer '" + text + "'");
        }
    };
    auto parse_double = [&](const std::string& text) {
        try {
            std::size_t used = 0;
            const double v = std::stod(text, &used);
            if (used != text.size())
                throw std::invalid_argument(text);
            return v;
        } catch (const std::exception&) {
            throw ParseError("instance line " + std::to_string(line_no) + ": bad number '" + text + "'");
        }
    };

    const std::string version = next_line(kInstanceMagic);
    if (version != std::to_string(kInstanceVersion))
        throw ParseError("instance: unsupported format version '" + version + "'");

    PufInstance p;
    try {
        p.kind = parse_kind(next_line("kind"));
    } catch (const InvalidInput& e) {
        throw ParseError("instance line " + std::to_string(line_no) + ": " + e.what());
    }
    p.stages = parse_uint(next_line("stages"));
    const std::size_t k = parse_uint(next_line("components"));
    p.noisiness = parse_double(next_line("noisiness"));
    p.seed = parse_uint(next_line("seed"));
    next_line("rng");
    if (p.stages < 1 || k < 1 || (p.kind == PufKind::Apuf && k != 1))
        throw SchemaError("instance: invalid shape");

    p.components.resize(k);
    for (auto& comp : p.components) {
        std::istringstream ls(next_line("component"));
        std::string tok;
        std::vector<double> values;
        while (ls >> tok)
            values.push_back(parse_double(tok));
        if (values.size() != p.stages + 1)
            throw SchemaError("instance line " + std::to_string(line_no) + ": expected " +
                              std::to_string(p.stages + 1) + " values, got " + std::to_string(values.size()));
        comp.bias = values[0];
        comp.weights.assign(values.begin() + 1, values.end());
    }
    return p;
}

void save_instance(const PufInstance& p, const std::string& path)
{
    std::ostringstream out;
    write_instance(out, p);
    write_file_atomic(path, out.str());
}

PufInstance load_instance(const std::string& path)
{
    std::istringstream in(read_file(path));
    return read_instance(in);
}

} // namespace pufsim
