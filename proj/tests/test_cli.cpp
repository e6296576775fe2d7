#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"

#include "pufsim/crp.hpp"
#include "support.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Runs the CLI with stdout and stderr captured to `log`; returns the exit code.
int run(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(PUFSIM_CLI) + " " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load(const fs::path& p)
{
    return json::parse(slurp(p));
}

std::string shell_arg(const fs::path& p)
{
    return "\"" + p.string() + "\"";
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("gen is reproducible byte for byte")
    {
        const auto dir = test::scratch_dir("cli-gen");
        const std::string args = "gen --kind xor -n 32 -k 3 --count 500 --out " + shell_arg(dir);
        REQUIRE(run(args + " --seed 9 --name a", dir / "log") == 0);
        REQUIRE(run(args + " --seed 9 --name b", dir / "log") == 0);
        CHECK(slurp(dir / "a.crp") == slurp(dir / "b.crp"));
        CHECK(slurp(dir / "a.instance") == slurp(dir / "b.instance"));
        REQUIRE(run(args + " --seed 10 --name c", dir / "log") == 0);
        CHECK(slurp(dir / "a.crp") != slurp(dir / "c.crp"));
    }

    TEST_CASE("CDC datasets carry n*k-bit challenges")
    {
        const auto dir = test::scratch_dir("cli-cdc");
        REQUIRE(run("gen --kind cdc -n 8 -k 6 --count 100 --seed 1 --out " + shell_arg(dir), dir / "log") == 0);
        const pufsim::CrpDataset d = pufsim::load_dataset((dir / "puf.crp").string());
        CHECK(d.challenge_width() == 48);
        CHECK(d.size() == 100);
    }

    TEST_CASE("binary output holds the same dataset as text")
    {
        const auto dir = test::scratch_dir("cli-bin");
        const std::string args = "gen --kind xor -n 16 -k 2 --count 300 --seed 2 --out " + shell_arg(dir);
        REQUIRE(run(args + " --name t", dir / "log") == 0);
        REQUIRE(run(args + " --name b --binary", dir / "log") == 0);
        CHECK(pufsim::load_dataset((dir / "t.crp").string()) == pufsim::load_dataset((dir / "b.crp.bin").string()));
    }

    TEST_CASE("error exit codes")
    {
        const auto dir = test::scratch_dir("cli-errors");
        // 300 distinct 8-bit challenges cannot exist.
        CHECK(run("gen --kind apuf -n 8 --count 300 --raw-lcg --out " + shell_arg(dir), dir / "log") == 2);
        CHECK(run("attack -d " + shell_arg(dir / "missing.crp") + " --out " + shell_arg(dir), dir / "log") == 3);
        CHECK(run("attack -d " + shell_arg(test::fixture("apuf16.crp")) + " --method svm --out " + shell_arg(dir),
                  dir / "log") == 2);
        CHECK(run("frobnicate", dir / "log") == 2);
        CHECK(run("attack -d " + shell_arg(test::fixture("apuf16.crp")) + " --components 2 --out " + shell_arg(dir),
                  dir / "log") == 2);
    }

    TEST_CASE("attacking the bundled 16-stage dataset")
    {
        const auto dir = test::scratch_dir("cli-attack");
        REQUIRE(run("attack -d " + shell_arg(test::fixture("apuf16.crp")) +
                        " --kind apuf -n 16 --seed 1 --assert-min-accuracy 0.95 --out " + shell_arg(dir),
                    dir / "log") == 0);
        const json j = load(dir / "attack.json");
        CHECK(j.at("format") == "pufsim-attack");
        CHECK(j.at("result").at("accuracy").get<double>() >= 0.95);
        CHECK(j.at("result").at("training_size") == 2000);
        CHECK(run("attack -d " + shell_arg(test::fixture("apuf16.crp")) + " --max-epochs 1 --learning-rate 1e-9" +
                      " --assert-min-accuracy 0.999 --out " + shell_arg(dir),
                  dir / "log") == 1);
    }

    TEST_CASE("four components select a batch of 1000")
    {
        const auto dir = test::scratch_dir("cli-batch");
        REQUIRE(run("gen --kind xor -n 16 -k 4 --count 3000 --seed 4 --out " + shell_arg(dir), dir / "log") == 0);
        REQUIRE(run("attack -d " + shell_arg(dir / "puf.crp") + " --method lr --components 4 --max-epochs 2 --out " +
                        shell_arg(dir),
                    dir / "log") == 0);
        CHECK(load(dir / "attack.json").at("result").at("batch_size") == 1000);
    }

    TEST_CASE("campaign records its schedule and reruns exactly from its own file")
    {
        const auto dir = test::scratch_dir("cli-campaign");
        REQUIRE(run("campaign --kind xor -n 32 -k 4 --instances 2 --start 1000 --growth 2 --cap 8000 --max-epochs 2"
                    " --seed 5 --out " + shell_arg(dir),
                    dir / "log") == 0);
        const json first = load(dir / "campaign.json");
        const auto& level = first.at("levels")[0];
        CHECK(level.at("trace") == json::array({1000, 2000, 4000, 8000}));
        CHECK_FALSE(level.at("succeeded").get<bool>());
        CHECK(slurp(dir / "campaign.txt").find(">=8k") != std::string::npos);

        REQUIRE(run("campaign --config " + shell_arg(dir / "campaign.json") + " --name again --out " + shell_arg(dir),
                    dir / "log") == 0);
        const json second = load(dir / "again.json");
        CHECK(second.at("config") == first.at("config"));
        const auto& a = first.at("trials");
        const auto& b = second.at("trials");
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].at("accuracy").get<double>() == b[i].at("accuracy").get<double>());
            CHECK(a[i].at("seed") == b[i].at("seed"));
        }
        CHECK(run("campaign --kind xor -n 32 -k 4 --instances 1 --start 500 --cap 500 --max-epochs 1"
                  " --assert-success --out " + shell_arg(dir),
                  dir / "log") == 1);
    }

    TEST_CASE("cost of a 9-XOR-PUF")
    {
        const auto dir = test::scratch_dir("cli-cost");
        REQUIRE(run("cost --design xor:64:9 --assert-hardware 1152+9 --out " + shell_arg(dir), dir / "log") == 0);
        CHECK(load(dir / "cost.json").at("reports")[0].at("crp_space_log2") == 64);
        CHECK(run("cost --design xor:64:9 --assert-hardware 1152+8 --out " + shell_arg(dir), dir / "log") == 1);
        CHECK(run("cost --design xor:0:3 --out " + shell_arg(dir), dir / "log") == 2);
    }

    TEST_CASE("metrics on simulated noise-free devices and on a matrix file")
    {
        const auto dir = test::scratch_dir("cli-metrics");
        REQUIRE(run("metrics --kind xor -n 16 -k 2 --devices 4 --challenges 200 --repeats 5 --noisiness 0"
                    " --assert-steadiness 1 --out " + shell_arg(dir),
                    dir / "log") == 0);
        CHECK(load(dir / "metrics.json").at("metrics").at("mean_steadiness") == 1.0);

        REQUIRE(run("metrics --matrix " + shell_arg(test::fixture("two_devices.matrix")) + " --name m --out " +
                        shell_arg(dir),
                    dir / "log") == 0);
        const json m = load(dir / "m.json").at("metrics");
        CHECK(m.at("uniqueness") == 0.75);
        CHECK(m.at("steadiness")[0] == 0.75);
    }

    TEST_CASE("report renders result files")
    {
        const auto dir = test::scratch_dir("cli-report");
        REQUIRE(run("cost --design cdc:8:6 --out " + shell_arg(dir), dir / "log") == 0);
        REQUIRE(run("report " + shell_arg(dir / "cost.json") + " --out " + shell_arg(dir), dir / "log") == 0);
        CHECK(slurp(dir / "report.txt").find("96+6") != std::string::npos);
    }
}
