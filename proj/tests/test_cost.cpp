#include "doctest.h"

#include "pufsim/cost.hpp"
#include "pufsim/errors.hpp"

using pufsim::PufKind;
using pufsim::InvalidInput;
using pufsim::cost::CostReport;
using pufsim::cost::cost;
using pufsim::cost::compare;
using pufsim::cost::format_crps;
using pufsim::cost::format_table;
using pufsim::cost::interpose_reference;
using pufsim::cost::reference_designs;
using pufsim::cost::to_report;

namespace {

struct Golden {
    PufKind kind;
    std::size_t k, n;
    const char* hardware;
    std::size_t bits, space;
};

// Published comparison rows, typed in by hand.
const Golden kGolden[] = {
    {PufKind::Xor, 4, 64, "512+4", 64, 64},     {PufKind::Xor, 5, 64, "640+5", 64, 64},
    {PufKind::Xor, 9, 64, "1152+9", 64, 64},    {PufKind::Cdc, 4, 64, "512+4", 256, 256},
    {PufKind::Cdc, 5, 64, "640+5", 320, 320},   {PufKind::Cdc, 6, 64, "768+6", 384, 384},
    {PufKind::Cdc, 6, 8, "96+6", 48, 48},       {PufKind::Cdc, 7, 8, "112+7", 56, 56},
    {PufKind::Cdc, 7, 24, "336+7", 168, 168},   {PufKind::Cdc, 8, 8, "128+8", 64, 64},
    {PufKind::Cdc, 8, 16, "256+8", 128, 128},   {PufKind::Cdc, 8, 24, "384+8", 192, 192},
    {PufKind::Cdc, 9, 16, "288+9", 144, 144},   {PufKind::Cdc, 10, 8, "160+10", 80, 80},
};

} // namespace

TEST_SUITE("cost-model")
{
    TEST_CASE("closed form reproduces every published row")
    {
        for (const auto& g : kGolden) {
            const CostReport r = cost(g.kind, g.n, g.k);
            CHECK(r.hardware() == g.hardware);
            CHECK(r.transmission_bits == g.bits);
            CHECK(r.crp_space_log2 == g.space);
        }
    }

    TEST_CASE("reference data agrees with the closed form")
    {
        const auto refs = reference_designs();
        REQUIRE(refs.size() == std::size(kGolden));
        for (std::size_t i = 0; i < refs.size(); ++i) {
            const auto& ref = refs[i];
            const CostReport r = cost(ref.kind, ref.stages, ref.components);
            CHECK(r.muxes == ref.muxes);
            CHECK(r.arbiters == ref.arbiters);
            CHECK(r.transmission_bits == ref.transmission_bits);
            CHECK(r.crp_space_log2 == ref.crp_space_log2);
            CHECK(to_report(ref).hardware() == kGolden[i].hardware);
        }
    }

    TEST_CASE("small and degenerate cases")
    {
        const CostReport one = cost(PufKind::Cdc, 1, 1);
        CHECK(one.hardware() == "2+1");
        CHECK(one.transmission_bits == 1);
        CHECK(one.crp_space_log2 == 1);
        CHECK(cost(PufKind::Apuf, 64, 1).hardware() == "128+1");
        CHECK_THROWS_AS(cost(PufKind::Xor, 0, 3), InvalidInput);
        CHECK_THROWS_AS(cost(PufKind::Xor, 8, 0), InvalidInput);
        CHECK_THROWS_AS(cost(PufKind::Apuf, 8, 2), InvalidInput);
    }

    TEST_CASE("CDC transmission is k times XOR transmission")
    {
        for (std::size_t n : {1u, 8u, 16u, 64u, 128u})
            for (std::size_t k = 1; k <= 10; ++k) {
                CHECK(cost(PufKind::Cdc, n, k).transmission_bits == k * cost(PufKind::Xor, n, k).transmission_bits);
                CHECK(cost(PufKind::Cdc, n, k).muxes == cost(PufKind::Xor, n, k).muxes);
            }
    }

    TEST_CASE("short-stage designs cut the multiplexer count")
    {
        // Ten 8-stage chains against six 64-stage chains: 160 of 768.
        const auto light = cost(PufKind::Cdc, 8, 10).muxes;
        const auto heavy = cost(PufKind::Cdc, 64, 6).muxes;
        CHECK(light * 24 == heavy * 5);
        CHECK(light < heavy / 4);
        // Six 8-stage chains against nine 64-stage chains: over 90% fewer.
        CHECK(cost(PufKind::Cdc, 8, 6).muxes * 10 < cost(PufKind::Xor, 64, 9).muxes);
    }

    TEST_CASE("ranking by transmission bits is stable")
    {
        const auto single = compare({cost(PufKind::Xor, 64, 4)});
        REQUIRE(single.size() == 1);
        CHECK(single[0].label == "4-XOR-PUF");

        const auto ranked = compare({cost(PufKind::Xor, 64, 4), cost(PufKind::Cdc, 8, 6)});
        CHECK(ranked[0].label == "CDC-6-XPUF");
        CHECK(ranked[0].transmission_bits == 48);

        CostReport a = cost(PufKind::Xor, 64, 4);
        CostReport b = a;
        a.label = "first";
        b.label = "second";
        const auto tied = compare({a, b});
        CHECK(tied[0].label == "first");
        CHECK(tied[1].label == "second");
        CHECK_THROWS_AS(compare({}), InvalidInput);
    }

    TEST_CASE("interpose rows are carried as data")
    {
        const auto ipuf = interpose_reference();
        REQUIRE(ipuf.size() == 2);
        CHECK(ipuf[0].hardware() == "519+8");
        CHECK(ipuf[1].hardware() == "903+8");
        CHECK(ipuf[0].transmission_bits == 64);
        CHECK(ipuf[1].crp_space_log2 == 64);
    }

    TEST_CASE("CRP counts are abbreviated")
    {
        CHECK(format_crps(100'000) == "100k");
        CHECK(format_crps(4'500'000) == "4.5m");
        CHECK(format_crps(40'000'000) == "40m");
        CHECK(format_crps(100'000'000, true) == "over 100m");
        CHECK(format_crps(512) == "512");
    }

    TEST_CASE("text table has one line per design and no trailing blanks")
    {
        const std::vector<CostReport> rows{cost(PufKind::Xor, 64, 9), cost(PufKind::Cdc, 8, 6)};
        const std::string t = format_table(rows);
        CHECK(t.find("1152+9") != std::string::npos);
        CHECK(t.find("2^48") != std::string::npos);
        std::size_t lines = 0, start = 0;
        for (std::size_t nl; (nl = t.find('\n', start)) != std::string::npos; start = nl + 1) {
            ++lines;
            if (nl > start)
                CHECK(t[nl - 1] != ' ');
        }
        CHECK(lines == 4);
    }
}
