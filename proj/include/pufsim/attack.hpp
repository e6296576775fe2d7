#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pufsim/crp.hpp"
#include "pufsim/numerics.hpp"
#include "pufsim/puf.hpp"

namespace pufsim::attack {

enum class Method { Lr, Nn };

std::string_view to_string(Method m) noexcept;
Method parse_method(std::string_view text);

/// The architecture the attacker is told about: kind, stages n, components k.
struct TargetShape {
    PufKind kind = PufKind::Xor;
    std::size_t stages = 64;
    std::size_t components = 1;

    std::size_t challenge_width() const noexcept { return kind == PufKind::Cdc ? stages * components : stages; }
    /// Width of the parity feature vector fed to the attack models.
    std::size_t feature_width() const noexcept { return challenge_width(); }
    void validate() const;
    friend bool operator==(const TargetShape&, const TargetShape&) = default;
};

TargetShape shape_of(const PufInstance& p) noexcept;
TargetShape shape_of(const Provenance& p) noexcept;

/// +1/-1 parity features, one row per dataset record. XOR/APUF targets get
/// the n-wide transform of the whole challenge; CDC targets get k n-wide
/// blocks, block j being the transform of sub-challenge j.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<const std::int8_t> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<std::int8_t> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::int8_t> data_;
};

FeatureMatrix make_features(const CrpDataset& d, const TargetShape& shape);

/// Product-of-linear-models attacker:
///
///     p(r = 1) = sigmoid( s * prod_j (<w_j, phi_j> + v_j) ),   s = (-1)^(k+1)
///
/// The sign s makes the model agree with the XOR of component bits for
/// every k: an odd number of positive latents means response 1, and the
/// product's sign encodes the parity of negative latents.
class LrAttackModel {
public:
    LrAttackModel(const TargetShape& shape);

    static LrAttackModel random_normal(const TargetShape& shape, double stddev, Rng& rng);
    /// Model carrying the true delay parameters of `p`.
    static LrAttackModel from_instance(const PufInstance& p);

    const TargetShape& shape() const noexcept { return shape_; }
    std::size_t components() const noexcept { return shape_.components; }
    std::size_t stages() const noexcept { return shape_.stages; }

    /// Component-major: w_j(1..n) followed by v_j, for j = 1..k.
    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    std::size_t feature_offset(std::size_t j) const noexcept
    {
        return shape_.kind == PufKind::Cdc ? j * shape_.stages : 0;
    }
    double latent(std::size_t j, std::span<const std::int8_t> features) const noexcept;
    double output_sign() const noexcept { return shape_.components % 2 == 1 ? 1.0 : -1.0; }

    friend bool operator==(const LrAttackModel&, const LrAttackModel&) = default;

private:
    TargetShape shape_;
    std::vector<double> params_;
};

/// Probability of response 1 for one feature row.
double lr_forward(const LrAttackModel& model, std::span<const std::int8_t> features);

/// Mean BCE over `rows` and its gradient, laid out like parameters().
numerics::LossAndGradient lr_loss_gradient(const LrAttackModel& model, const FeatureMatrix& features,
                                           std::span<const Response> labels, std::span<const std::size_t> rows);

/// MLP attacker. Layer widths [in, k*n, k*n/2, k*n/2, k*n, 1].
struct NnAttackModel {
    numerics::DenseNet net;

    static std::vector<std::size_t> layer_dims(const TargetShape& shape);
};

using AttackModel = std::variant<LrAttackModel, NnAttackModel>;

struct AttackConfig {
    Method method = Method::Lr;
    /// 0 selects 10^(k-1) clamped to [32, train size].
    std::size_t batch_size = 0;
    /// LR: fixed Adam rate. NN: initial rate of the plateau-halving schedule.
    double learning_rate = 0.01;
    /// LR early stop: epochs without validation-loss improvement.
    std::size_t patience = 5;
    /// NN schedule: halve the rate after this many non-improving epochs.
    std::size_t plateau_patience = 3;
    double rate_decay = 0.5;
    double rate_floor = 1e-5;
    /// NN early stop threshold on validation accuracy.
    double stop_validation_accuracy = 0.98;
    std::size_t max_epochs = 300;
    double init_stddev = 1.0;
    double success_threshold = 0.90;
    std::size_t max_restarts = 1;
    std::uint64_t seed = 0;

    static AttackConfig defaults(Method method);
    friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

std::size_t default_batch_size(std::size_t components, std::size_t train_size) noexcept;

struct AttackOutcome {
    AttackModel model;
    double test_accuracy = 0.0;
    double validation_accuracy = 0.0;
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    std::size_t restarts = 0;
    bool diverged = false;
    double seconds = 0.0;
    bool success = false;
};

/// Trains on the train split, early-stops on the validation split and
/// scores the untouched test split. Divergence triggers up to
/// cfg.max_restarts restarts with a derived seed; a trial that still
/// diverges is returned with diverged = true and accuracy 0.
AttackOutcome run_attack(const CrpDataset& dataset, const TargetShape& shape, const AttackConfig& cfg);

/// Fraction of rows in [begin, end) whose thresholded prediction (p > 0.5)
/// equals the label.
double evaluate_model(const AttackModel& model, const FeatureMatrix& features, std::span<const Response> labels,
                      std::size_t begin, std::size_t end);
double evaluate_predictor(const std::function<double(std::size_t)>& probability, std::span<const Response> labels,
                          std::size_t begin, std::size_t end);

/// Training-size escalation: start, start*growth, ... while <= cap; the cap
/// itself is appended when the geometric sequence skips over it.
struct Escalation {
    std::size_t start = 1000;
    double growth = 2.0;
    std::size_t cap = 2'000'000;

    std::vector<std::size_t> schedule() const;
    friend bool operator==(const Escalation&, const Escalation&) = default;
};

struct CampaignConfig {
    TargetShape shape;
    Method method = Method::Lr;
    std::size_t instances = 10;
    std::vector<double> noise_levels{0.0};
    Escalation escalation;
    double required_success_rate = 0.9;
    std::uint64_t seed = 1;
    LcgConfig lcg;
    bool decorrelate = true;
    AttackConfig attack = AttackConfig::defaults(Method::Lr);
    std::size_t jobs = 1;

    friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

struct TrialRecord {
    TargetShape shape;
    double noise = 0.0;
    Method method = Method::Lr;
    std::size_t training_size = 0;
    std::size_t instance = 0;
    std::uint64_t instance_seed = 0;
    std::uint64_t challenge_seed = 0;
    std::uint64_t noise_seed = 0;
    std::uint64_t attack_seed = 0;
    std::size_t batch_size = 0;
    double accuracy = 0.0;
    std::size_t epochs = 0;
    std::size_t restarts = 0;
    bool diverged = false;
    double seconds = 0.0;
    bool success = false;
};

struct NoiseLevelResult {
    double noise = 0.0;
    std::vector<std::size_t> trace;
    std::vector<TrialRecord> trials;
    bool succeeded = false;
    /// Size at which the campaign stopped (the cap on failure).
    std::size_t final_size = 0;
    double success_rate = 0.0;
    /// Mean accuracy of successful trials at final_size, or of all of them
    /// when none succeeded.
    double average_accuracy = 0.0;
    double average_seconds = 0.0;
};

struct CampaignResult {
    CampaignConfig config;
    std::vector<NoiseLevelResult> levels;
};

/// successes / instances; 0 instances is an error.
double success_rate(std::size_t successes, std::size_t instances);

/// Instance i keeps the same delay parameters across sizes and noise levels;
/// every (noise level, size, instance) trial gets a fresh challenge stream,
/// noise stream and attack seed, all derived from config.seed.
CampaignResult run_campaign(const CampaignConfig& cfg);

/// Seeds used by run_campaign, exposed for tests and reruns.
std::uint64_t campaign_instance_seed(std::uint64_t seed, std::size_t instance) noexcept;
TrialRecord run_trial(const CampaignConfig& cfg, std::size_t level, std::size_t training_size, std::size_t instance);

} // namespace pufsim::attack
