#include "pufsim/report.hpp"

#include <cstdio>
#include <sstream>

#include "pufsim/errors.hpp"

namespace pufsim::report {

json to_json(const attack::TargetShape& s)
{
    return {{"kind", std::string(to_string(s.kind))}, {"stages", s.stages}, {"components", s.components}};
}

attack::TargetShape shape_from_json(const json& j)
{
    attack::TargetShape s;
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.stages = j.at("stages").get<std::size_t>();
    s.components = j.at("components").get<std::size_t>();
    s.validate();
    return s;
}

json to_json(const attack::AttackConfig& c)
{
    json j = {
        {"method", std::string(attack::to_string(c.method))},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"patience", c.patience},
        {"plateau_patience", c.plateau_patience},
        {"rate_decay", c.rate_decay},
        {"rate_floor", c.rate_floor},
        {"stop_validation_accuracy", c.stop_validation_accuracy},
        {"max_epochs", c.max_epochs},
        {"init_stddev", c.init_stddev},
        {"success_threshold", c.success_threshold},
        {"max_restarts", c.max_restarts},
        {"seed", c.seed},
        {"optimizer", "adam(beta1=0.9, beta2=0.999, eps=1e-8)"},
        {"loss", "binary cross-entropy"},
    };
    if (c.method == attack::Method::Nn)
        j["activations"] = {{"hidden", "tanh"}, {"output", "sigmoid"}};
    else
        j["activations"] = {{"output", "sigmoid(sign * product of component latents)"}};
    return j;
}

attack::AttackConfig attack_config_from_json(const json& j)
{
    auto c = attack::AttackConfig::defaults(attack::parse_method(j.at("method").get<std::string>()));
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.patience = j.value("patience", c.patience);
    c.plateau_patience = j.value("plateau_patience", c.plateau_patience);
    c.rate_decay = j.value("rate_decay", c.rate_decay);
    c.rate_floor = j.value("rate_floor", c.rate_floor);
    c.stop_validation_accuracy = j.value("stop_validation_accuracy", c.stop_validation_accuracy);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.init_stddev = j.value("init_stddev", c.init_stddev);
    c.success_threshold = j.value("success_threshold", c.success_threshold);
    c.max_restarts = j.value("max_restarts", c.max_restarts);
    c.seed = j.value("seed", c.seed);
    return c;
}

json to_json(const attack::CampaignConfig& c)
{
    return {
        {"shape", to_json(c.shape)},
        {"method", std::string(attack::to_string(c.method))},
        {"instances", c.instances},
        {"noise_levels", c.noise_levels},
        {"escalation", {{"start", c.escalation.start}, {"growth", c.escalation.growth}, {"cap", c.escalation.cap}}},
        {"schedule", c.escalation.schedule()},
        {"required_success_rate", c.required_success_rate},
        {"seed", c.seed},
        {"lcg", {{"a", c.lcg.a}, {"g", c.lcg.g}}},
        {"decorrelate", c.decorrelate},
        {"attack", to_json(c.attack)},
        {"jobs", c.jobs},
        {"rng", std::string(Rng::kName)},
    };
}

attack::CampaignConfig campaign_config_from_json(const json& in)
{
    const json& j = in.contains("config") ? in.at("config") : in;
    try {
        attack::CampaignConfig c;
        c.shape = shape_from_json(j.at("shape"));
        c.method = attack::parse_method(j.at("method").get<std::string>());
        c.instances = j.at("instances").get<std::size_t>();
        c.noise_levels = j.at("noise_levels").get<std::vector<double>>();
        const json& e = j.at("escalation");
        c.escalation = {e.at("start").get<std::size_t>(), e.at("growth").get<double>(), e.at("cap").get<std::size_t>()};
        c.required_success_rate = j.value("required_success_rate", c.required_success_rate);
        c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("lcg")) {
            c.lcg.a = j.at("lcg").at("a").get<std::uint64_t>();
            c.lcg.g = j.at("lcg").at("g").get<std::uint64_t>();
        }
        c.decorrelate = j.value("decorrelate", c.decorrelate);
        c.attack = j.contains("attack") ? attack_config_from_json(j.at("attack")) : attack::AttackConfig::defaults(c.method);
        c.attack.method = c.method;
        c.jobs = j.value("jobs", c.jobs);
        return c;
    } catch (const json::exception& e) {
        throw ParseError(std::string("campaign config: ") + e.what());
    }
}

json to_json(const attack::TrialRecord& t)
{
    return {
        {"shape", to_json(t.shape)},
        {"noise", t.noise},
        {"method", std::string(attack::to_string(t.method))},
        {"training_size", t.training_size},
        {"instance", t.instance},
        {"instance_seed", t.instance_seed},
        {"challenge_seed", t.challenge_seed},
        {"noise_seed", t.noise_seed},
        {"seed", t.attack_seed},
        {"batch_size", t.batch_size},
        {"accuracy", t.accuracy},
        {"epochs", t.epochs},
        {"restarts", t.restarts},
        {"diverged", t.diverged},
        {"seconds", t.seconds},
        {"success", t.success},
    };
}

json to_json(const attack::CampaignResult& r)
{
    json levels = json::array();
    json trials = json::array();
    for (const auto& lv : r.levels) {
        levels.push_back({
            {"noise", lv.noise},
            {"trace", lv.trace},
            {"succeeded", lv.succeeded},
            {"final_size", lv.final_size},
            {"success_rate", lv.success_rate},
            {"average_accuracy", lv.average_accuracy},
            {"average_seconds", lv.average_seconds},
        });
        for (const auto& t : lv.trials)
            trials.push_back(to_json(t));
    }
    return {
        {"format", "pufsim-campaign"},
        {"version", kResultVersion},
        {"config", to_json(r.config)},
        {"levels", levels},
        {"trials", trials},
    };
}

std::string format_count(std::size_t n)
{
    char buf[32];
    if (n >= 1'000'000 && n % 100'000 == 0)
        std::snprintf(buf, sizeof buf, "%gm", static_cast<double>(n) / 1e6);
    else if (n >= 1000 && n % 100 == 0)
        std::snprintf(buf, sizeof buf, "%gk", static_cast<double>(n) / 1e3);
    else
        std::snprintf(buf, sizeof buf, "%zu", n);
    return buf;
}

namespace {

std::string type_label(const attack::TargetShape& s)
{
    switch (s.kind) {
    case PufKind::Apuf:
        return "APUF";
    case PufKind::Xor:
        return std::to_string(s.components) + "-XOR-PUF";
    case PufKind::Cdc:
        return "CDC-" + std::to_string(s.components) + "-XPUF";
    }
    return "?";
}

std::string percent(double x)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.0f%%", 100.0 * x);
    return buf;
}

std::string seconds_label(double s)
{
    char buf[32];
    if (s < 120)
        std::snprintf(buf, sizeof buf, "%.1f s", s);
    else if (s < 7200)
        std::snprintf(buf, sizeof buf, "%.1f min", s / 60);
    else
        std::snprintf(buf, sizeof buf, "%.1f h", s / 3600);
    return buf;
}

struct SummaryRow {
    std::string stages, type, noise, method, size, accuracy, time, rate;
};

std::string render(const std::vector<SummaryRow>& rows)
{
    const SummaryRow head{"Stages", "PUF Type", "Noise", "Method", "Training Size", "Accuracy", "Time", "Success Rate"};
    auto cells = [](const SummaryRow& r) {
        return std::array<const std::string*, 8>{&r.stages, &r.type,     &r.noise, &r.method,
                                                 &r.size,   &r.accuracy, &r.time,  &r.rate};
    };
    std::array<std::size_t, 8> width{};
    for (const auto* row : {&head}) {
        auto c = cells(*row);
        for (std::size_t i = 0; i < 8; ++i)
            width[i] = c[i]->size();
    }
    for (const auto& r : rows) {
        auto c = cells(r);
        for (std::size_t i = 0; i < 8; ++i)
            width[i] = std::max(width[i], c[i]->size());
    }
    std::ostringstream out;
    auto emit = [&](const SummaryRow& r) {
        auto c = cells(r);
        for (std::size_t i = 0; i < 8; ++i) {
            out << *c[i];
            if (i + 1 < 8)
                out << std::string(width[i] - c[i]->size() + 2, ' ');
        }
        out << '\n';
    };
    emit(head);
    std::size_t total = 0;
    for (std::size_t w : width)
        total += w + 2;
    out << std::string(total - 2, '-') << '\n';
    for (const auto& r : rows)
        emit(r);
    return out.str();
}

} // namespace

std::string campaign_summary(const attack::CampaignResult& r)
{
    return campaign_summary(to_json(r));
}

std::string campaign_summary(const json& file)
{
    const auto cfg = campaign_config_from_json(file);
    std::vector<SummaryRow> rows;
    for (const auto& lv : file.at("levels")) {
        const bool ok = lv.at("succeeded").get<bool>();
        SummaryRow row;
        row.stages = std::to_string(cfg.shape.stages) + " bits";
        row.type = type_label(cfg.shape);
        row.noise = percent(lv.at("noise").get<double>());
        row.method = cfg.method == attack::Method::Lr ? "LR" : "NN";
        row.size = (ok ? "" : ">=") + format_count(lv.at("final_size").get<std::size_t>());
        row.accuracy = ok ? percent(lv.at("average_accuracy").get<double>())
                          : "No Convergence (" + percent(lv.at("average_accuracy").get<double>()) + ")";
        row.time = seconds_label(lv.at("average_seconds").get<double>());
        row.rate = percent(lv.at("success_rate").get<double>());
        rows.push_back(std::move(row));
    }
    return render(rows);
}

json to_json(const cost::CostReport& r)
{
    json j = {
        {"label", r.label},
        {"components", r.components},
        {"stages", r.stages},
        {"muxes", r.muxes},
        {"arbiters", r.arbiters},
        {"hardware", r.hardware()},
        {"transmission_bits", r.transmission_bits},
        {"crp_space_log2", r.crp_space_log2},
    };
    if (r.required_crps) {
        j["required_crps"] = *r.required_crps;
        j["required_crps_lower_bound"] = r.required_crps_lower_bound;
    }
    return j;
}

json cost_file(std::span<const cost::CostReport> reports)
{
    json rows = json::array();
    for (const auto& r : reports)
        rows.push_back(to_json(r));
    return {{"format", "pufsim-cost"}, {"version", kResultVersion}, {"reports", rows}};
}

json to_json(const metrics::MetricReport& r)
{
    json j = {
        {"randomness", r.randomness},
        {"steadiness", r.steadiness},
        {"mean_randomness", r.mean_randomness},
        {"mean_steadiness", r.mean_steadiness},
    };
    if (r.has_uniqueness)
        j["uniqueness"] = r.uniqueness;
    return j;
}

} // namespace pufsim::report
