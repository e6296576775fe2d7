#pragma once

#include <span>
#include <string>

#include "json.hpp"

#include "pufsim/attack.hpp"
#include "pufsim/cost.hpp"
#include "pufsim/metrics.hpp"

namespace pufsim::report {

using nlohmann::json;

/// Result files are JSON. Every file carries "format" and "version", and
/// campaign files embed the complete effective configuration under
/// "config" so that a rerun from the file reproduces it.
constexpr int kResultVersion = 1;

json to_json(const attack::TargetShape& s);
attack::TargetShape shape_from_json(const json& j);

json to_json(const attack::AttackConfig& c);
attack::AttackConfig attack_config_from_json(const json& j);

json to_json(const attack::CampaignConfig& c);
/// Accepts either a bare config object or a campaign result file.
attack::CampaignConfig campaign_config_from_json(const json& j);

json to_json(const attack::TrialRecord& t);
json to_json(const attack::CampaignResult& r);

/// Plain aligned table: one line per noise level with the stopping size,
/// mean accuracy, mean time and success rate.
std::string campaign_summary(const attack::CampaignResult& r);
/// Same table rebuilt from a result file.
std::string campaign_summary(const json& result_file);

json to_json(const cost::CostReport& r);
json cost_file(std::span<const cost::CostReport> reports);

json to_json(const metrics::MetricReport& r);

/// "1.8m", "50k", "512".
std::string format_count(std::size_t n);

} // namespace pufsim::report
