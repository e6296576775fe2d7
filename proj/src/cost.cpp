#include "pufsim/cost.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

#include "pufsim/errors.hpp"

namespace pufsim::cost {

std::string CostReport::hardware() const
{
    return std::to_string(muxes) + "+" + std::to_string(arbiters);
}

namespace {

std::string kind_label(PufKind kind, std::size_t k)
{
    switch (kind) {
    case PufKind::Apuf:
        return "APUF";
    case PufKind::Xor:
        return std::to_string(k) + "-XOR-PUF";
    case PufKind::Cdc:
        return "CDC-" + std::to_string(k) + "-XPUF";
    }
    return "?";
}

} // namespace

CostReport cost(PufKind kind, std::size_t stages, std::size_t components)
{
    if (stages < 1 || components < 1)
        throw InvalidInput("cost needs n >= 1 and k >= 1");
    if (kind == PufKind::Apuf && components != 1)
        throw InvalidInput("an APUF has exactly one component");
    CostReport r;
    r.label = kind_label(kind, components);
    r.components = components;
    r.stages = stages;
    r.muxes = 2 * stages * components;
    r.arbiters = components;
    r.transmission_bits = kind == PufKind::Cdc ? stages * components : stages;
    r.crp_space_log2 = r.transmission_bits;
    return r;
}

std::vector<CostReport> compare(std::vector<CostReport> reports)
{
    if (reports.empty())
        throw InvalidInput("nothing to compare");
    std::stable_sort(reports.begin(), reports.end(), [](const CostReport& a, const CostReport& b) {
        if (a.transmission_bits != b.transmission_bits)
            return a.transmission_bits < b.transmission_bits;
        return a.muxes < b.muxes;
    });
    return reports;
}

namespace {

constexpr std::uint64_t K = 1000;
constexpr std::uint64_t M = 1000 * 1000;

constexpr std::array<ReferenceDesign, 14> kReference = {{
    {PufKind::Xor, 4, 64, 512, 4, 64, 64, 100 * K, false},
    {PufKind::Xor, 5, 64, 640, 5, 64, 64, 200 * K, false},
    {PufKind::Xor, 9, 64, 1152, 9, 64, 64, 40 * M, false},
    {PufKind::Cdc, 4, 64, 512, 4, 256, 256, 80 * K, false},
    {PufKind::Cdc, 5, 64, 640, 5, 320, 320, 4500 * K, false},
    {PufKind::Cdc, 6, 64, 768, 6, 384, 384, 100 * M, false},
    {PufKind::Cdc, 6, 8, 96, 6, 48, 48, 190 * K, false},
    {PufKind::Cdc, 7, 8, 112, 7, 56, 56, 1800 * K, false},
    {PufKind::Cdc, 7, 24, 336, 7, 168, 168, 35 * M, false},
    {PufKind::Cdc, 8, 8, 128, 8, 64, 64, 2300 * K, false},
    {PufKind::Cdc, 8, 16, 256, 8, 128, 128, 60 * M, false},
    {PufKind::Cdc, 8, 24, 384, 8, 192, 192, 100 * M, true},
    {PufKind::Cdc, 9, 16, 288, 9, 144, 144, 100 * M, true},
    {PufKind::Cdc, 10, 8, 160, 10, 80, 80, 100 * M, true},
}};

const std::array<CostReport, 2> kInterpose = {{
    {"(1,7)-IPUF", 8, 64, 519, 8, 64, 64, 6 * M, false},
    {"(7,7)-IPUF", 14, 64, 903, 8, 64, 64, 6 * M, false},
}};

} // namespace

std::span<const ReferenceDesign> reference_designs() noexcept
{
    return kReference;
}

std::span<const CostReport> interpose_reference() noexcept
{
    return kInterpose;
}

CostReport to_report(const ReferenceDesign& row)
{
    CostReport r;
    r.label = kind_label(row.kind, row.components);
    r.components = row.components;
    r.stages = row.stages;
    r.muxes = row.muxes;
    r.arbiters = row.arbiters;
    r.transmission_bits = row.transmission_bits;
    r.crp_space_log2 = row.crp_space_log2;
    r.required_crps = row.required_crps;
    r.required_crps_lower_bound = row.required_crps_lower_bound;
    return r;
}

std::string format_crps(std::uint64_t crps, bool lower_bound)
{
    char buf[32];
    if (crps >= M && crps % (M / 10) == 0)
        std::snprintf(buf, sizeof buf, "%gm", static_cast<double>(crps) / M);
    else if (crps >= K && crps % (K / 10) == 0)
        std::snprintf(buf, sizeof buf, "%gk", static_cast<double>(crps) / K);
    else
        std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(crps));
    return lower_bound ? std::string("over ") + buf : std::string(buf);
}

std::string format_table(std::span<const CostReport> reports)
{
    const std::array<std::string, 7> head = {"Components", "Stages",    "PUF Type", "MUXs+Arbiters",
                                             "Tx bits",    "CRP space", "CRPs to crack"};
    std::vector<std::array<std::string, 7>> rows;
    for (const auto& r : reports)
        rows.push_back({std::to_string(r.components), std::to_string(r.stages), r.label, r.hardware(),
                        std::to_string(r.transmission_bits), "2^" + std::to_string(r.crp_space_log2),
                        r.required_crps ? format_crps(*r.required_crps, r.required_crps_lower_bound) : "-"});
    std::array<std::size_t, 7> width{};
    for (std::size_t c = 0; c < head.size(); ++c) {
        width[c] = head[c].size();
        for (const auto& row : rows)
            width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    auto emit = [&](const std::array<std::string, 7>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            out << cells[c];
            if (c + 1 < cells.size())
                out << std::string(width[c] - cells[c].size() + 2, ' ');
        }
        out << '\n';
    };
    emit(head);
    std::size_t total = 0;
    for (std::size_t w : width)
        total += w + 2;
    out << std::string(total - 2, '-') << '\n';
    for (const auto& row : rows)
        emit(row);
    return out.str();
}

} // namespace pufsim::cost
