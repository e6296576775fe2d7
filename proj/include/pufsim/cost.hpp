#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pufsim/puf.hpp"

namespace pufsim::cost {

struct CostReport {
    std::string label;
    std::size_t components = 0;
    std::size_t stages = 0;
    std::size_t muxes = 0;
    std::size_t arbiters = 0;
    std::size_t transmission_bits = 0;
    std::size_t crp_space_log2 = 0;
    /// From a campaign or from published reference data.
    std::optional<std::uint64_t> required_crps;
    /// True when required_crps is a lower bound ("over ...").
    bool required_crps_lower_bound = false;

    /// "512+4".
    std::string hardware() const;
    friend bool operator==(const CostReport&, const CostReport&) = default;
};

/// Two MUXs per stage per component, one arbiter per component. CDC
/// challenges carry n*k bits; APUF/XOR challenges n bits. The CRP space
/// exponent equals the transmitted bit count.
CostReport cost(PufKind kind, std::size_t stages, std::size_t components);

/// Stable sort by (transmission_bits, muxes).
std::vector<CostReport> compare(std::vector<CostReport> reports);

struct ReferenceDesign {
    PufKind kind;
    std::size_t components;
    std::size_t stages;
    std::size_t muxes;
    std::size_t arbiters;
    std::size_t transmission_bits;
    std::size_t crp_space_log2;
    std::uint64_t required_crps;
    bool required_crps_lower_bound;
};

/// Published XOR-PUF and CDC-XPUF hardware rows, checked against cost().
std::span<const ReferenceDesign> reference_designs() noexcept;

/// Interpose PUF rows carried as static data; their structure is not modelled.
std::span<const CostReport> interpose_reference() noexcept;

CostReport to_report(const ReferenceDesign& row);

/// "100k", "4.5m", "over 100m".
std::string format_crps(std::uint64_t crps, bool lower_bound = false);

/// Aligned plain-text table.
std::string format_table(std::span<const CostReport> reports);

} // namespace pufsim::cost
