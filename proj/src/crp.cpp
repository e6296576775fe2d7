#include "pufsim/crp.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "pufsim/errors.hpp"
#include "pufsim/io.hpp"

namespace pufsim {

namespace {

constexpr std::string_view kTextMagic = "pufsim-crp";
constexpr std::array<char, 8> kBinaryMagic = {'P', 'U', 'F', 'C', 'R', 'P', 'B', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

constexpr std::uint64_t low_mask(std::size_t bits) noexcept
{
    return bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1;
}

struct LimbHash {
    std::size_t operator()(const std::vector<std::uint64_t>& v) const noexcept
    {
        std::uint64_t h = 0x243f6a8885a308d3ULL;
        for (std::uint64_t w : v) {
            std::uint64_t s = h ^ w;
            h = splitmix64(s);
        }
        return static_cast<std::size_t>(h);
    }
};

} // namespace

void LcgConfig::validate() const
{
    if (width < 1)
        throw InvalidInput("LCG width must be at least 1 bit");
    if ((a & 1U) == 0)
        throw InvalidInput("LCG multiplier must be odd");
}

bool LcgConfig::full_period() const noexcept
{
    const std::uint64_t mask = low_mask(width);
    const std::uint64_t am = a & mask;
    const std::uint64_t gm = g & mask;
    if ((gm & 1U) == 0)
        return false;
    return width == 1 ? (am & 1U) == 1 : (am & 3U) == 1;
}

std::uint64_t lcg_next(const LcgConfig& cfg, std::uint64_t c)
{
    if (cfg.width > 64)
        throw InvalidInput("lcg_next handles widths up to 64 bits; use LcgStream");
    const std::uint64_t mask = low_mask(cfg.width);
    // Unsigned wrap-around is arithmetic mod 2^64, and 2^width divides 2^64.
    return (cfg.a * c + cfg.g) & mask;
}

LcgStream::LcgStream(const LcgConfig& cfg)
    : cfg_(cfg), state_((cfg.width + 63) / 64, 0), a_(cfg.a & low_mask(cfg.width)), g_(cfg.g & low_mask(cfg.width))
{
    cfg_.validate();
    state_[0] = cfg.c0 & low_mask(cfg.width);
}

void LcgStream::advance()
{
    unsigned __int128 carry = g_;
    for (auto& limb : state_) {
        const unsigned __int128 t = static_cast<unsigned __int128>(a_) * limb + carry;
        limb = static_cast<std::uint64_t>(t);
        carry = t >> 64;
    }
    const std::size_t top_bits = cfg_.width - 64 * (state_.size() - 1);
    state_.back() &= low_mask(top_bits);
}

std::uint64_t mix_word(std::uint64_t x, std::size_t width) noexcept
{
    const std::uint64_t mask = low_mask(width);
    const std::size_t s1 = std::max<std::size_t>(1, width * 30 / 64);
    const std::size_t s2 = std::max<std::size_t>(1, width * 27 / 64);
    const std::size_t s3 = std::max<std::size_t>(1, width * 31 / 64);
    x &= mask;
    x ^= x >> s1;
    x = (x * 0xbf58476d1ce4e5b9ULL) & mask;
    x ^= x >> s2;
    x = (x * 0x94d049bb133111ebULL) & mask;
    x ^= x >> s3;
    return x;
}

void mix_bits(std::span<std::uint64_t> limbs, std::size_t width) noexcept
{
    const std::size_t n = limbs.size();
    auto limb_width = [&](std::size_t i) { return i + 1 < n ? std::size_t{64} : width - 64 * (n - 1); };
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0)
            limbs[i] ^= limbs[i - 1] & low_mask(limb_width(i));
        limbs[i] = mix_word(limbs[i], limb_width(i));
    }
    for (std::size_t i = n - 1; i-- > 0;)
        limbs[i] = mix_word(limbs[i] ^ limbs[i + 1], 64);
}

void ChallengeSet::push_back(std::span<const std::uint64_t> limbs)
{
    if (limbs.size() != words_)
        throw InvalidInput("challenge limb count mismatch");
    data_.insert(data_.end(), limbs.begin(), limbs.end());
    if (words_ > 0)
        data_.back() &= low_mask(width_ - 64 * (words_ - 1));
}

void ChallengeSet::push_back(const Challenge& c)
{
    if (c.size() != width_)
        throw InvalidInput("challenge width " + std::to_string(c.size()) + " does not match set width " +
                           std::to_string(width_));
    std::vector<std::uint64_t> limbs(words_, 0);
    for (std::size_t i = 0; i < width_; ++i) {
        if (c.bits[i] > 1)
            throw InvalidInput("challenge bit out of range");
        limbs[i / 64] |= std::uint64_t{c.bits[i]} << (i % 64);
    }
    push_back(limbs);
}

Challenge ChallengeSet::operator[](std::size_t r) const
{
    Challenge c;
    c.bits.resize(width_);
    unpack(r, c.bits);
    return c;
}

void ChallengeSet::unpack(std::size_t r, std::span<std::uint8_t> out) const noexcept
{
    const std::uint64_t* row = data_.data() + r * words_;
    for (std::size_t i = 0; i < width_; ++i)
        out[i] = static_cast<std::uint8_t>((row[i / 64] >> (i % 64)) & 1U);
}

ChallengeSet generate_challenges(const LcgConfig& cfg, std::size_t count, bool decorrelate)
{
    cfg.validate();
    if (count < 1)
        throw InvalidInput("challenge count must be at least 1");
    if (cfg.width < 64 && count > (std::uint64_t{1} << cfg.width))
        throw InsufficientSpace("requested " + std::to_string(count) + " distinct challenges but a " +
                                std::to_string(cfg.width) + "-bit space holds only " +
                                std::to_string(std::uint64_t{1} << cfg.width));

    ChallengeSet out(cfg.width);
    out.reserve(count);
    LcgStream stream(cfg);
    // A full-period stream cannot repeat within 2^width steps, and the mixer
    // is a bijection, so only other configurations need the seen-set.
    const bool track = !cfg.full_period();
    std::unordered_set<std::vector<std::uint64_t>, LimbHash> seen;
    std::vector<std::uint64_t> limbs;
    while (out.size() < count) {
        stream.advance();
        if (track && !seen.insert(stream.state()).second)
            throw InsufficientSpace("LCG stream cycled after " + std::to_string(out.size()) +
                                    " distinct challenges; " + std::to_string(count) + " requested");
        limbs = stream.state();
        if (decorrelate)
            mix_bits(limbs, cfg.width);
        out.push_back(limbs);
    }
    return out;
}

Split make_split(std::size_t records)
{
    const std::size_t test = (records + 5) / 10;
    const std::size_t rest = records - test;
    std::size_t validation = (rest + 50) / 100;
    if (validation == 0 && rest >= 2)
        validation = 1;
    Split s;
    s.train_begin = 0;
    s.train_end = rest - validation;
    s.validation_begin = s.train_end;
    s.validation_end = rest;
    s.test_begin = rest;
    s.test_end = records;
    return s;
}

CrpDataset build_dataset(const PufInstance& p, const ChallengeSet& challenges, bool with_noise,
                         std::uint64_t noise_seed)
{
    if (challenges.width() != p.challenge_width())
        throw InvalidInput("challenge width " + std::to_string(challenges.width()) +
                           " does not match instance width " + std::to_string(p.challenge_width()));
    CrpDataset d;
    d.challenges = challenges;
    d.responses.resize(challenges.size());
    std::vector<std::uint8_t> bits(challenges.width());
    Rng noise(noise_seed);
    for (std::size_t i = 0; i < challenges.size(); ++i) {
        challenges.unpack(i, bits);
        d.responses[i] = with_noise ? eval_puf_bits(p, bits, noise) : eval_puf_bits(p, bits);
    }
    d.split = make_split(d.size());
    d.provenance.kind = p.kind;
    d.provenance.stages = p.stages;
    d.provenance.components = p.component_count();
    d.provenance.instance_seed = p.seed;
    d.provenance.noisiness = p.noisiness;
    d.provenance.noisy = with_noise;
    d.provenance.noise_seed = with_noise ? noise_seed : 0;
    d.provenance.lcg.width = challenges.width();
    return d;
}

CrpDataset generate_dataset(const PufInstance& p, const LcgConfig& lcg, std::size_t count, bool decorrelate,
                            bool with_noise, std::uint64_t noise_seed)
{
    LcgConfig cfg = lcg;
    cfg.width = p.challenge_width();
    CrpDataset d = build_dataset(p, generate_challenges(cfg, count, decorrelate), with_noise, noise_seed);
    d.provenance.lcg = cfg;
    d.provenance.decorrelate = decorrelate;
    return d;
}

std::string format_provenance(const Provenance& p)
{
    std::ostringstream out;
    out << "kind=" << to_string(p.kind) << " stages=" << p.stages << " components=" << p.components
        << " instance_seed=" << p.instance_seed << " noisiness=" << format_exact(p.noisiness)
        << " noisy=" << (p.noisy ? 1 : 0) << " noise_seed=" << p.noise_seed << " lcg_a=" << p.lcg.a
        << " lcg_g=" << p.lcg.g << " lcg_c0=" << p.lcg.c0 << " decorrelate=" << (p.decorrelate ? 1 : 0);
    return out.str();
}

Provenance parse_provenance(const std::string& line)
{
    std::map<std::string, std::string> fields;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw ParseError("provenance: token '" + tok + "' is not key=value");
        fields[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    auto get = [&](const char* key) -> const std::string& {
        auto it = fields.find(key);
        if (it == fields.end())
            throw ParseError(std::string("provenance: missing field '") + key + "'");
        return it->second;
    };
    auto to_u64 = [&](const char* key) {
        const std::string& v = get(key);
        try {
            std::size_t used = 0;
            const auto x = std::stoull(v, &used);
            if (used != v.size())
                throw std::invalid_argument(v);
            return static_cast<std::uint64_t>(x);
        } catch (const std::exception&) {
            throw ParseError(std::string("provenance: bad integer for '") + key + "': " + v);
        }
    };
    auto to_flag = [&](const char* key) {
        const std::uint64_t v = to_u64(key);
        if (v > 1)
            throw ParseError(std::string("provenance: '") + key + "' must be 0 or 1");
        return v == 1;
    };

    Provenance p;
    try {
        p.kind = parse_kind(get("kind"));
    } catch (const InvalidInput& e) {
        throw ParseError(std::string("provenance: ") + e.what());
    }
    p.stages = to_u64("stages");
    p.components = to_u64("components");
    p.instance_seed = to_u64("instance_seed");
    try {
        p.noisiness = std::stod(get("noisiness"));
    } catch (const std::exception&) {
        throw ParseError("provenance: bad noisiness");
    }
    p.noisy = to_flag("noisy");
    p.noise_seed = to_u64("noise_seed");
    p.lcg.a = to_u64("lcg_a");
    p.lcg.g = to_u64("lcg_g");
    p.lcg.c0 = to_u64("lcg_c0");
    p.decorrelate = to_flag("decorrelate");
    return p;
}

namespace {

void check_consistency(const CrpDataset& d)
{
    const auto& p = d.provenance;
    const std::size_t expected = p.kind == PufKind::Cdc ? p.stages * p.components : p.stages;
    if (expected != d.challenge_width())
        throw SchemaError("dataset width " + std::to_string(d.challenge_width()) +
                          " is inconsistent with provenance shape (" + std::string(to_string(p.kind)) + ", n=" +
                          std::to_string(p.stages) + ", k=" + std::to_string(p.components) + ")");
    const Split& s = d.split;
    if (s.train_begin != 0 || s.train_end != s.validation_begin || s.validation_end != s.test_begin ||
        s.test_end != d.size())
        throw SchemaError("dataset split does not partition the records");
}

Split split_from_sizes(std::size_t train, std::size_t validation, std::size_t test)
{
    Split s;
    s.train_end = train;
    s.validation_begin = train;
    s.validation_end = train + validation;
    s.test_begin = s.validation_end;
    s.test_end = s.validation_end + test;
    return s;
}

} // namespace

void write_dataset_text(std::ostream& out, const CrpDataset& d)
{
    out << kTextMagic << ' ' << kFormatVersion << '\n'
        << "width " << d.challenge_width() << '\n'
        << "count " << d.size() << '\n'
        << "split " << d.split.train_size() << ' ' << d.split.validation_size() << ' ' << d.split.test_size()
        << '\n'
        << "provenance " << format_provenance(d.provenance) << '\n'
        << "records\n";
    std::string line(d.challenge_width() + 2, '0');
    line[d.challenge_width()] = ' ';
    for (std::size_t r = 0; r < d.size(); ++r) {
        for (std::size_t i = 0; i < d.challenge_width(); ++i)
            line[i] = d.challenges.bit(r, i) ? '1' : '0';
        line.back() = d.responses[r] ? '1' : '0';
        out << line << '\n';
    }
}

CrpDataset read_dataset_text(std::istream& in)
{
    std::size_t line_no = 0;
    std::string line;
    auto header = [&](std::string_view key) {
        if (!std::getline(in, line))
            throw ParseError("dataset: unexpected end of file at line " + std::to_string(line_no + 1) +
                             ", expected '" + std::string(key) + "'");
        ++line_no;
        if (line.rfind(key, 0) != 0)
            throw ParseError("dataset line " + std::to_string(line_no) + ": expected '" + std::string(key) + "'");
        std::string rest = line.substr(key.size());
        rest.erase(0, rest.find_first_not_of(' '));
        return rest;
    };
    auto numbers = [&](const std::string& text, std::size_t expect) {
        std::istringstream ls(text);
        std::vector<std::uint64_t> v;
        std::string tok;
        while (ls >> tok) {
            if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
                throw ParseError("dataset line " + std::to_string(line_no) + ": bad integer '" + tok + "'");
            v.push_back(std::stoull(tok));
        }
        if (v.size() != expect)
            throw ParseError("dataset line " + std::to_string(line_no) + ": expected " + std::to_string(expect) +
                             " integers");
        return v;
    };

    if (header(kTextMagic) != std::to_string(kFormatVersion))
        throw ParseError("dataset: unsupported format version");
    const std::size_t width = numbers(header("width"), 1)[0];
    const std::size_t count = numbers(header("count"), 1)[0];
    const auto sizes = numbers(header("split"), 3);
    CrpDataset d;
    d.provenance = parse_provenance(header("provenance"));
    d.provenance.lcg.width = width;
    header("records");
    if (width < 1)
        throw SchemaError("dataset: width must be at least 1");
    if (sizes[0] + sizes[1] + sizes[2] != count)
        throw SchemaError("dataset: split sizes do not sum to the record count");

    d.challenges = ChallengeSet(width);
    d.challenges.reserve(count);
    d.responses.reserve(count);
    Challenge c;
    c.bits.resize(width);
    for (std::size_t r = 0; r < count; ++r) {
        if (!std::getline(in, line))
            throw ParseError("dataset: truncated at line " + std::to_string(line_no + 1) + " (record " +
                             std::to_string(r) + " of " + std::to_string(count) + ")");
        ++line_no;
        const auto sep = line.find(' ');
        if (sep == std::string::npos || sep + 2 != line.size())
            throw ParseError("dataset line " + std::to_string(line_no) + ": expected '<challenge> <response>'");
        if (sep != width)
            throw SchemaError("dataset line " + std::to_string(line_no) + ": challenge has " + std::to_string(sep) +
                              " bits, header says " + std::to_string(width));
        for (std::size_t i = 0; i < width; ++i) {
            const char ch = line[i];
            if (ch != '0' && ch != '1')
                throw ParseError("dataset line " + std::to_string(line_no) + ", column " + std::to_string(i + 1) +
                                 ": challenge bit must be 0 or 1");
            c.bits[i] = static_cast<std::uint8_t>(ch - '0');
        }
        const char resp = line.back();
        if (resp != '0' && resp != '1')
            throw ParseError("dataset line " + std::to_string(line_no) + ": response must be 0 or 1");
        d.challenges.push_back(c);
        d.responses.push_back(static_cast<Response>(resp - '0'));
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty())
            throw ParseError("dataset line " + std::to_string(line_no) + ": trailing data after " +
                             std::to_string(count) + " records");
    }
    d.split = split_from_sizes(sizes[0], sizes[1], sizes[2]);
    check_consistency(d);
    return d;
}

namespace {

template <typename T>
void put_le(std::string& buf, T value)
{
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

class ByteReader {
public:
    explicit ByteReader(std::istream& in) : in_(in) {}

    void read(char* dst, std::size_t n, const char* what)
    {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw ParseError("dataset: truncated binary file at byte offset " +
                             std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())) + " while reading " +
                             what);
        offset_ += n;
    }

    template <typename T>
    T le(const char* what)
    {
        std::array<unsigned char, sizeof(T)> b{};
        read(reinterpret_cast<char*>(b.data()), b.size(), what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= std::uint64_t{b[i]} << (8 * i);
        return static_cast<T>(v);
    }

    std::size_t offset() const noexcept { return offset_; }

private:
    std::istream& in_;
    std::size_t offset_ = 0;
};

} // namespace

void write_dataset_binary(std::ostream& out, const CrpDataset& d)
{
    std::string buf(kBinaryMagic.begin(), kBinaryMagic.end());
    put_le<std::uint32_t>(buf, kFormatVersion);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(d.challenge_width()));
    put_le<std::uint64_t>(buf, d.size());
    put_le<std::uint64_t>(buf, d.split.train_size());
    put_le<std::uint64_t>(buf, d.split.validation_size());
    put_le<std::uint64_t>(buf, d.split.test_size());
    const std::string prov = format_provenance(d.provenance);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(prov.size()));
    buf += prov;

    const std::size_t row_bytes = (d.challenge_width() + 7) / 8;
    for (std::size_t r = 0; r < d.size(); ++r) {
        const auto limbs = d.challenges.row(r);
        for (std::size_t b = 0; b < row_bytes; ++b)
            buf.push_back(static_cast<char>((limbs[b / 8] >> (8 * (b % 8))) & 0xFF));
    }
    std::string packed((d.size() + 7) / 8, '\0');
    for (std::size_t r = 0; r < d.size(); ++r)
        if (d.responses[r])
            packed[r / 8] = static_cast<char>(packed[r / 8] | (1 << (r % 8)));
    buf += packed;
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

CrpDataset read_dataset_binary(std::istream& in)
{
    ByteReader rd(in);
    std::array<char, 8> magic{};
    rd.read(magic.data(), magic.size(), "magic");
    if (magic != kBinaryMagic)
        throw ParseError("dataset: bad magic at byte offset 0");
    const auto version = rd.le<std::uint32_t>("version");
    if (version != kFormatVersion)
        throw ParseError("dataset: unsupported binary version " + std::to_string(version));
    const std::size_t width = rd.le<std::uint32_t>("width");
    const std::size_t count = rd.le<std::uint64_t>("count");
    const std::size_t train = rd.le<std::uint64_t>("train size");
    const std::size_t validation = rd.le<std::uint64_t>("validation size");
    const std::size_t test = rd.le<std::uint64_t>("test size");
    const std::size_t prov_len = rd.le<std::uint32_t>("provenance length");
    if (width < 1)
        throw SchemaError("dataset: width must be at least 1");
    if (train + validation + test != count)
        throw SchemaError("dataset: split sizes do not sum to the record count");
    if (prov_len > (1U << 20))
        throw ParseError("dataset: provenance block too large at byte offset " + std::to_string(rd.offset()));
    std::string prov(prov_len, '\0');
    rd.read(prov.data(), prov_len, "provenance");

    CrpDataset d;
    d.provenance = parse_provenance(prov);
    d.provenance.lcg.width = width;
    d.challenges = ChallengeSet(width);
    d.challenges.reserve(count);
    const std::size_t row_bytes = (width + 7) / 8;
    std::vector<unsigned char> row(row_bytes);
    std::vector<std::uint64_t> limbs(d.challenges.words_per_row());
    const std::uint64_t top_mask = width % 64 == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << (width % 64)) - 1;
    for (std::size_t r = 0; r < count; ++r) {
        rd.read(reinterpret_cast<char*>(row.data()), row_bytes, "challenge records");
        std::fill(limbs.begin(), limbs.end(), 0);
        for (std::size_t b = 0; b < row_bytes; ++b)
            limbs[b / 8] |= std::uint64_t{row[b]} << (8 * (b % 8));
        if ((limbs.back() & ~top_mask) != 0)
            throw SchemaError("dataset: record " + std::to_string(r) + " has bits beyond width " +
                              std::to_string(width));
        d.challenges.push_back(limbs);
    }
    std::vector<unsigned char> packed((count + 7) / 8);
    rd.read(reinterpret_cast<char*>(packed.data()), packed.size(), "responses");
    d.responses.resize(count);
    for (std::size_t r = 0; r < count; ++r)
        d.responses[r] = static_cast<Response>((packed[r / 8] >> (r % 8)) & 1U);
    d.split = split_from_sizes(train, validation, test);
    check_consistency(d);
    return d;
}

void save_dataset(const CrpDataset& d, const std::string& path)
{
    std::ostringstream out;
    const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
    if (binary)
        write_dataset_binary(out, d);
    else
        write_dataset_text(out, d);
    write_file_atomic(path, out.str());
}

CrpDataset load_dataset(const std::string& path)
{
    std::string bytes = read_file(path);
    const bool binary =
        bytes.size() >= kBinaryMagic.size() && std::equal(kBinaryMagic.begin(), kBinaryMagic.end(), bytes.begin());
    std::istringstream in(std::move(bytes));
    return binary ? read_dataset_binary(in) : read_dataset_text(in);
}

} // namespace pufsim
