// pufsim: command-line front end.
//
// Exit status: 0 ok, 1 a --assert-* check failed, 2 usage or invalid
// arguments, 3 missing or malformed input, or a failed write.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pufsim/attack.hpp"
#include "pufsim/cost.hpp"
#include "pufsim/crp.hpp"
#include "pufsim/errors.hpp"
#include "pufsim/io.hpp"
#include "pufsim/metrics.hpp"
#include "pufsim/puf.hpp"
#include "pufsim/report.hpp"
#include "pufsim/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pufsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAssert = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct AssertionFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string default_out_dir()
{
    if (const char* env = std::getenv("PUFSIM_OUT"); env && *env)
        return env;
    return ".";
}

std::string in_dir(const std::string& dir, const std::string& name)
{
    return (fs::path(dir) / name).string();
}

void write_json(const std::string& path, const json& j)
{
    write_file_atomic(path, j.dump(2) + "\n");
}

json read_json(const std::string& path)
{
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------

struct GenOptions {
    std::string kind = "apuf";
    std::size_t stages = 64;
    std::size_t components = 1;
    std::size_t count = 10000;
    std::uint64_t seed = 1;
    double noisiness = 0.0;
    bool noisy = false;
    bool binary = false;
    bool raw_lcg = false;
    std::uint64_t lcg_a = LcgConfig::kDefaultMultiplier;
    std::uint64_t lcg_g = LcgConfig::kDefaultIncrement;
    std::optional<std::uint64_t> lcg_c0;
    std::string out;
    std::string name = "puf";
};

void add_shape(CLI::App* cmd, std::string& kind, std::size_t& stages, std::size_t& components)
{
    cmd->add_option("--kind", kind, "apuf, xor or cdc")->check(CLI::IsMember({"apuf", "xor", "cdc"}, CLI::ignore_case));
    cmd->add_option("--stages,-n", stages, "Stages per arbiter chain")->check(CLI::PositiveNumber);
    cmd->add_option("--components,-k", components, "Arbiter chains")->check(CLI::PositiveNumber);
}

void run_gen(const GenOptions& o)
{
    const PufKind kind = parse_kind(o.kind);
    const std::size_t k = kind == PufKind::Apuf ? 1 : o.components;
    if (kind == PufKind::Apuf && o.components != 1)
        throw InvalidInput("an apuf has exactly one component");
    const PufInstance puf = sample_instance(kind, o.stages, k, o.noisiness, derive_seed(o.seed, {1}));

    LcgConfig lcg;
    lcg.a = o.lcg_a;
    lcg.g = o.lcg_g;
    lcg.c0 = o.lcg_c0 ? *o.lcg_c0 : derive_seed(o.seed, {2});
    const CrpDataset data = generate_dataset(puf, lcg, o.count, !o.raw_lcg, o.noisy, derive_seed(o.seed, {3}));

    const std::string instance_path = in_dir(o.out, o.name + ".instance");
    const std::string dataset_path = in_dir(o.out, o.name + (o.binary ? ".crp.bin" : ".crp"));
    save_instance(puf, instance_path);
    save_dataset(data, dataset_path);
    std::cout << "instance " << instance_path << "\n"
              << "dataset  " << dataset_path << " (" << data.challenges.size() << " records, width "
              << data.challenges.width() << ")\n";
}

// ---------------------------------------------------------------------------

struct AttackOptions {
    std::string dataset;
    std::string method = "lr";
    std::optional<std::string> kind;
    std::optional<std::size_t> stages;
    std::optional<std::size_t> components;
    std::uint64_t seed = 1;
    std::size_t batch_size = 0;
    std::optional<std::size_t> max_epochs;
    std::optional<double> learning_rate;
    std::string out;
    std::string name = "attack";
    std::optional<double> assert_min_accuracy;
};

void run_attack_cmd(const AttackOptions& o)
{
    const CrpDataset data = load_dataset(o.dataset);
    attack::TargetShape shape = attack::shape_of(data.provenance);
    if (o.kind && parse_kind(*o.kind) != shape.kind)
        throw InvalidInput("--kind does not match the dataset provenance (" + std::string(to_string(shape.kind)) + ")");
    if (o.stages && *o.stages != shape.stages)
        throw InvalidInput("--stages does not match the dataset provenance (" + std::to_string(shape.stages) + ")");
    if (o.components && *o.components != shape.components)
        throw InvalidInput("--components does not match the dataset provenance (" +
                           std::to_string(shape.components) + ")");

    attack::AttackConfig cfg = attack::AttackConfig::defaults(attack::parse_method(o.method));
    cfg.seed = o.seed;
    cfg.batch_size = o.batch_size;
    if (o.max_epochs)
        cfg.max_epochs = *o.max_epochs;
    if (o.learning_rate)
        cfg.learning_rate = *o.learning_rate;

    const attack::AttackOutcome r = attack::run_attack(data, shape, cfg);
    json record = {
        {"shape", report::to_json(shape)},
        {"noise", data.provenance.noisy ? data.provenance.noisiness : 0.0},
        {"method", std::string(attack::to_string(cfg.method))},
        {"training_size", data.challenges.size()},
        {"split", {data.split.train_size(), data.split.validation_size(), data.split.test_size()}},
        {"seed", cfg.seed},
        {"batch_size", r.batch_size},
        {"accuracy", r.test_accuracy},
        {"validation_accuracy", r.validation_accuracy},
        {"epochs", r.epochs},
        {"restarts", r.restarts},
        {"diverged", r.diverged},
        {"seconds", r.seconds},
        {"success", r.success},
    };
    const json file = {
        {"format", "pufsim-attack"},
        {"version", report::kResultVersion},
        {"config", {{"dataset", o.dataset}, {"attack", report::to_json(cfg)}}},
        {"dataset_provenance", format_provenance(data.provenance)},
        {"result", record},
    };
    const std::string path = in_dir(o.out, o.name + ".json");
    write_json(path, file);
    std::printf("%s %s: accuracy %.4f after %zu epochs (batch %zu, %.1f s) -> %s\n",
                std::string(attack::to_string(cfg.method)).c_str(), o.dataset.c_str(), r.test_accuracy, r.epochs,
                r.batch_size, r.seconds, path.c_str());
    if (o.assert_min_accuracy && !(r.test_accuracy >= *o.assert_min_accuracy))
        throw AssertionFailed("accuracy below the asserted minimum");
}

// ---------------------------------------------------------------------------

struct CampaignOptions {
    std::optional<std::string> config;
    std::string kind = "xor";
    std::size_t stages = 64;
    std::size_t components = 2;
    std::string method = "lr";
    std::size_t instances = 10;
    std::vector<double> noise{0.0};
    std::size_t start = 1000;
    double growth = 2.0;
    std::size_t cap = 2'000'000;
    std::uint64_t seed = 1;
    bool raw_lcg = false;
    std::size_t jobs = 1;
    std::optional<std::size_t> max_epochs;
    std::string out;
    std::string name = "campaign";
    bool assert_success = false;
};

void run_campaign_cmd(const CampaignOptions& o, const CLI::App& cmd)
{
    attack::CampaignConfig cfg;
    if (o.config) {
        cfg = report::campaign_config_from_json(read_json(*o.config));
        if (cmd.count("--jobs"))
            cfg.jobs = o.jobs;
    } else {
        cfg.shape = {parse_kind(o.kind), o.stages, parse_kind(o.kind) == PufKind::Apuf ? 1 : o.components};
        cfg.method = attack::parse_method(o.method);
        cfg.instances = o.instances;
        cfg.noise_levels = o.noise;
        cfg.escalation = {o.start, o.growth, o.cap};
        cfg.seed = o.seed;
        cfg.decorrelate = !o.raw_lcg;
        cfg.attack = attack::AttackConfig::defaults(cfg.method);
        if (o.max_epochs)
            cfg.attack.max_epochs = *o.max_epochs;
        cfg.jobs = o.jobs;
    }
    const attack::CampaignResult result = attack::run_campaign(cfg);
    const json file = report::to_json(result);
    const std::string summary = report::campaign_summary(file);
    const std::string json_path = in_dir(o.out, o.name + ".json");
    write_json(json_path, file);
    write_file_atomic(in_dir(o.out, o.name + ".txt"), summary);
    std::cout << summary << "results -> " << json_path << "\n";
    if (o.assert_success)
        for (const auto& lv : result.levels)
            if (!lv.succeeded)
                throw AssertionFailed("campaign did not reach the required success rate");
}

// ---------------------------------------------------------------------------

struct MetricsOptions {
    std::optional<std::string> matrix;
    std::string kind = "apuf";
    std::size_t stages = 64;
    std::size_t components = 1;
    std::size_t devices = 10;
    std::size_t challenges = 1000;
    std::size_t repeats = 11;
    double noisiness = 0.0;
    std::uint64_t seed = 1;
    bool ordered = false;
    std::string out;
    std::string name = "metrics";
    std::optional<double> assert_steadiness;
};

void run_metrics_cmd(const MetricsOptions& o)
{
    const auto counting = o.ordered ? metrics::PairCounting::Ordered : metrics::PairCounting::Unordered;
    metrics::MetricReport rep;
    json config;
    if (o.matrix) {
        std::ifstream in(*o.matrix);
        if (!in)
            throw IoError("cannot open " + *o.matrix);
        const metrics::LabelledMatrix m = metrics::read_matrix(in);
        rep = metrics::evaluate(m.responses, counting);
        config = {{"matrix", *o.matrix}};
    } else {
        const PufKind kind = parse_kind(o.kind);
        const std::size_t k = kind == PufKind::Apuf ? 1 : o.components;
        std::vector<PufInstance> devices;
        for (std::size_t d = 0; d < o.devices; ++d)
            devices.push_back(sample_instance(kind, o.stages, k, o.noisiness, derive_seed(o.seed, {1, d})));
        LcgConfig lcg;
        lcg.c0 = derive_seed(o.seed, {2});
        lcg.width = devices.front().challenge_width();
        const ChallengeSet cs = generate_challenges(lcg, o.challenges, true);
        const auto m = metrics::collect_matrix(devices, cs, o.repeats, o.noisiness, derive_seed(o.seed, {3}));
        rep = metrics::evaluate(m, counting);
        config = {{"kind", o.kind},           {"stages", o.stages},       {"components", k},
                  {"devices", o.devices},     {"challenges", o.challenges}, {"repeats", o.repeats},
                  {"noisiness", o.noisiness}, {"seed", o.seed}};
    }
    config["pair_counting"] = o.ordered ? "ordered" : "unordered";
    const json file = {{"format", "pufsim-metrics"},
                       {"version", report::kResultVersion},
                       {"config", config},
                       {"metrics", report::to_json(rep)}};

    std::ostringstream text;
    char line[128];
    std::snprintf(line, sizeof line, "mean randomness  %.6f\nmean steadiness  %.6f\n", rep.mean_randomness,
                  rep.mean_steadiness);
    text << line;
    if (rep.has_uniqueness) {
        std::snprintf(line, sizeof line, "uniqueness       %.6f\n", rep.uniqueness);
        text << line;
    }
    write_json(in_dir(o.out, o.name + ".json"), file);
    write_file_atomic(in_dir(o.out, o.name + ".txt"), text.str());
    std::cout << text.str();
    if (o.assert_steadiness && !(rep.mean_steadiness >= *o.assert_steadiness))
        throw AssertionFailed("mean steadiness below the asserted minimum");
}

// ---------------------------------------------------------------------------

struct CostOptions {
    std::vector<std::string> designs;
    bool reference = false;
    std::string out;
    std::string name = "cost";
    std::optional<std::string> assert_hardware;
};

// "xor:64:9", "cdc:8:6" or "apuf:64".
cost::CostReport parse_design(const std::string& text)
{
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');)
        parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3)
        throw InvalidInput("design must look like kind:stages[:components], got '" + text + "'");
    try {
        const PufKind kind = parse_kind(parts[0]);
        const std::size_t n = std::stoul(parts[1]);
        const std::size_t k = parts.size() == 3 ? std::stoul(parts[2]) : 1;
        return cost::cost(kind, n, k);
    } catch (const std::logic_error& e) {
        if (dynamic_cast<const InvalidInput*>(&e))
            throw;
        throw InvalidInput("bad number in design '" + text + "'");
    }
}

void run_cost_cmd(const CostOptions& o)
{
    std::vector<cost::CostReport> rows;
    for (const auto& d : o.designs)
        rows.push_back(parse_design(d));
    if (o.reference || o.designs.empty()) {
        for (const auto& r : cost::reference_designs())
            rows.push_back(cost::to_report(r));
        for (const auto& r : cost::interpose_reference())
            rows.push_back(r);
    }
    const std::string table = cost::format_table(rows);
    write_json(in_dir(o.out, o.name + ".json"), report::cost_file(rows));
    write_file_atomic(in_dir(o.out, o.name + ".txt"), table);
    std::cout << table;
    if (o.assert_hardware && (rows.empty() || rows.front().hardware() != *o.assert_hardware))
        throw AssertionFailed("hardware of the first design is " + (rows.empty() ? "n/a" : rows.front().hardware()));
}

// ---------------------------------------------------------------------------

struct ReportOptions {
    std::vector<std::string> inputs;
    std::string out;
    std::string name = "report";
};

void run_report_cmd(const ReportOptions& o)
{
    std::ostringstream text;
    for (const auto& path : o.inputs) {
        const json j = read_json(path);
        const std::string format = j.value("format", "");
        text << "# " << path << "\n";
        if (format == "pufsim-campaign") {
            text << report::campaign_summary(j);
        } else if (format == "pufsim-attack") {
            const json& r = j.at("result");
            char line[160];
            std::snprintf(line, sizeof line, "%s %s n=%zu k=%zu: %zu CRPs, accuracy %.4f, %.1f s\n",
                          r.at("method").get<std::string>().c_str(),
                          r.at("shape").at("kind").get<std::string>().c_str(),
                          r.at("shape").at("stages").get<std::size_t>(),
                          r.at("shape").at("components").get<std::size_t>(),
                          r.at("training_size").get<std::size_t>(), r.at("accuracy").get<double>(),
                          r.at("seconds").get<double>());
            text << line;
        } else if (format == "pufsim-cost") {
            std::vector<cost::CostReport> rows;
            for (const auto& r : j.at("reports")) {
                cost::CostReport c;
                c.label = r.at("label");
                c.components = r.at("components");
                c.stages = r.at("stages");
                c.muxes = r.at("muxes");
                c.arbiters = r.at("arbiters");
                c.transmission_bits = r.at("transmission_bits");
                c.crp_space_log2 = r.at("crp_space_log2");
                if (r.contains("required_crps")) {
                    c.required_crps = r.at("required_crps").get<std::uint64_t>();
                    c.required_crps_lower_bound = r.at("required_crps_lower_bound");
                }
                rows.push_back(std::move(c));
            }
            text << cost::format_table(rows);
        } else if (format == "pufsim-metrics") {
            text << j.at("metrics").dump(2) << "\n";
        } else {
            throw SchemaError(path + ": unknown result format '" + format + "'");
        }
        text << "\n";
    }
    write_file_atomic(in_dir(o.out, o.name + ".txt"), text.str());
    std::cout << text.str();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Arbiter PUF simulation, modelling attacks and cost analysis"};
    app.require_subcommand(1);
    std::string out = default_out_dir();
    app.add_option("--out,-o", out, "Output directory (default: $PUFSIM_OUT or .)");

    GenOptions gen;
    auto* gen_cmd = app.add_subcommand("gen", "Sample a PUF instance and a CRP dataset");
    add_shape(gen_cmd, gen.kind, gen.stages, gen.components);
    gen_cmd->add_option("--count", gen.count, "CRPs to generate")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed, "Base seed");
    gen_cmd->add_option("--noisiness", gen.noisiness, "Instance noisiness")->check(CLI::NonNegativeNumber);
    gen_cmd->add_flag("--noisy", gen.noisy, "Apply evaluation noise to the responses");
    gen_cmd->add_flag("--binary", gen.binary, "Write the bit-packed binary dataset format");
    gen_cmd->add_flag("--raw-lcg", gen.raw_lcg, "Use raw LCG outputs as challenges (no decorrelation)");
    gen_cmd->add_option("--lcg-a", gen.lcg_a, "LCG multiplier (odd)");
    gen_cmd->add_option("--lcg-g", gen.lcg_g, "LCG increment");
    gen_cmd->add_option("--lcg-c0", gen.lcg_c0, "LCG start value (default derived from --seed)");
    gen_cmd->add_option("--name", gen.name, "File name prefix");

    AttackOptions atk;
    auto* atk_cmd = app.add_subcommand("attack", "Model one dataset with LR or NN");
    atk_cmd->add_option("--dataset,-d", atk.dataset, "Dataset file")->required();
    atk_cmd->add_option("--method", atk.method, "lr or nn")->check(CLI::IsMember({"lr", "nn"}, CLI::ignore_case));
    atk_cmd->add_option("--kind", atk.kind, "Expected kind (checked against provenance)");
    atk_cmd->add_option("--stages,-n", atk.stages, "Expected stages (checked against provenance)");
    atk_cmd->add_option("--components,-k", atk.components, "Expected components (checked against provenance)");
    atk_cmd->add_option("--seed", atk.seed, "Training seed");
    atk_cmd->add_option("--batch-size", atk.batch_size, "Override the default batch size");
    atk_cmd->add_option("--max-epochs", atk.max_epochs, "Epoch cap")->check(CLI::PositiveNumber);
    atk_cmd->add_option("--learning-rate", atk.learning_rate, "Initial learning rate")->check(CLI::PositiveNumber);
    atk_cmd->add_option("--name", atk.name, "Result file name prefix");
    atk_cmd->add_option("--assert-min-accuracy", atk.assert_min_accuracy, "Exit 1 below this test accuracy");

    CampaignOptions camp;
    auto* camp_cmd = app.add_subcommand("campaign", "Escalating training-size campaign");
    camp_cmd->add_option("--config", camp.config, "Rerun the configuration stored in a result file");
    add_shape(camp_cmd, camp.kind, camp.stages, camp.components);
    camp_cmd->add_option("--method", camp.method, "lr or nn")->check(CLI::IsMember({"lr", "nn"}, CLI::ignore_case));
    camp_cmd->add_option("--instances", camp.instances, "Instances per training size")->check(CLI::PositiveNumber);
    camp_cmd->add_option("--noise", camp.noise, "Noise levels")->expected(1, -1);
    camp_cmd->add_option("--start", camp.start, "First training size")->check(CLI::PositiveNumber);
    camp_cmd->add_option("--growth", camp.growth, "Escalation factor");
    camp_cmd->add_option("--cap", camp.cap, "Largest training size")->check(CLI::PositiveNumber);
    camp_cmd->add_option("--seed", camp.seed, "Campaign seed");
    camp_cmd->add_flag("--raw-lcg", camp.raw_lcg, "Use raw LCG outputs as challenges");
    camp_cmd->add_option("--jobs,-j", camp.jobs, "Parallel trials")->check(CLI::PositiveNumber);
    camp_cmd->add_option("--max-epochs", camp.max_epochs, "Epoch cap")->check(CLI::PositiveNumber);
    camp_cmd->add_option("--name", camp.name, "Result file name prefix");
    camp_cmd->add_flag("--assert-success", camp.assert_success, "Exit 1 if any noise level fails");

    MetricsOptions met;
    auto* met_cmd = app.add_subcommand("metrics", "Randomness, steadiness and uniqueness");
    met_cmd->add_option("--matrix", met.matrix, "Imported response matrix file");
    add_shape(met_cmd, met.kind, met.stages, met.components);
    met_cmd->add_option("--devices", met.devices, "Simulated devices")->check(CLI::PositiveNumber);
    met_cmd->add_option("--challenges", met.challenges, "Challenges per device")->check(CLI::PositiveNumber);
    met_cmd->add_option("--repeats", met.repeats, "Evaluations per challenge")->check(CLI::PositiveNumber);
    met_cmd->add_option("--noisiness", met.noisiness, "Evaluation noisiness")->check(CLI::NonNegativeNumber);
    met_cmd->add_option("--seed", met.seed, "Seed");
    met_cmd->add_flag("--ordered-pairs", met.ordered, "Count ordered device pairs for uniqueness");
    met_cmd->add_option("--name", met.name, "Result file name prefix");
    met_cmd->add_option("--assert-steadiness", met.assert_steadiness, "Exit 1 below this mean steadiness");

    CostOptions cst;
    auto* cost_cmd = app.add_subcommand("cost", "Hardware and transmission cost");
    cost_cmd->add_option("--design", cst.designs, "kind:stages[:components], repeatable");
    cost_cmd->add_flag("--reference", cst.reference, "Append the published reference designs");
    cost_cmd->add_option("--name", cst.name, "Result file name prefix");
    cost_cmd->add_option("--assert-hardware", cst.assert_hardware, "Exit 1 unless the first design matches");

    ReportOptions rep;
    auto* rep_cmd = app.add_subcommand("report", "Render result files as text tables");
    rep_cmd->add_option("inputs", rep.inputs, "Result files")->required()->check(CLI::ExistingFile);
    rep_cmd->add_option("--name", rep.name, "Report file name prefix");

    for (auto* sub : {gen_cmd, atk_cmd, camp_cmd, met_cmd, cost_cmd, rep_cmd})
        sub->add_option("--out,-o", out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen_cmd) {
            gen.out = out;
            run_gen(gen);
        } else if (*atk_cmd) {
            atk.out = out;
            run_attack_cmd(atk);
        } else if (*camp_cmd) {
            camp.out = out;
            run_campaign_cmd(camp, *camp_cmd);
        } else if (*met_cmd) {
            met.out = out;
            run_metrics_cmd(met);
        } else if (*cost_cmd) {
            cst.out = out;
            run_cost_cmd(cst);
        } else if (*rep_cmd) {
            rep.out = out;
            run_report_cmd(rep);
        }
    } catch (const AssertionFailed& e) {
        std::cerr << "assertion failed: " << e.what() << "\n";
        return kExitAssert;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const InsufficientSpace& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ParseError& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return kExitIo;
    } catch (const SchemaError& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return kExitIo;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "malformed input: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}
