#include "pufsim/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "pufsim/errors.hpp"

namespace pufsim::attack {

std::string_view to_string(Method m) noexcept
{
    return m == Method::Lr ? "lr" : "nn";
}

Method parse_method(std::string_view text)
{
    if (text == "lr" || text == "LR")
        return Method::Lr;
    if (text == "nn" || text == "NN")
        return Method::Nn;
    throw InvalidInput("unknown attack method '" + std::string(text) + "' (expected lr or nn)");
}

void TargetShape::validate() const
{
    if (stages < 1 || components < 1)
        throw InvalidInput("target shape needs n >= 1 and k >= 1");
    if (kind == PufKind::Apuf && components != 1)
        throw InvalidInput("an APUF target has exactly one component");
}

TargetShape shape_of(const PufInstance& p) noexcept
{
    return {p.kind, p.stages, p.component_count()};
}

TargetShape shape_of(const Provenance& p) noexcept
{
    return {p.kind, p.stages, p.components};
}

FeatureMatrix make_features(const CrpDataset& d, const TargetShape& shape)
{
    shape.validate();
    if (d.challenge_width() != shape.challenge_width())
        throw InvalidInput("dataset width " + std::to_string(d.challenge_width()) + " does not match target width " +
                           std::to_string(shape.challenge_width()));
    FeatureMatrix f(d.size(), shape.feature_width());
    std::vector<std::uint8_t> bits(d.challenge_width());
    const std::size_t blocks = shape.kind == PufKind::Cdc ? shape.components : 1;
    const std::size_t n = shape.stages;
    for (std::size_t r = 0; r < d.size(); ++r) {
        d.challenges.unpack(r, bits);
        auto row = f.row(r);
        for (std::size_t b = 0; b < blocks; ++b)
            transform_bits(std::span<const std::uint8_t>(bits).subspan(b * n, n), row.subspan(b * n, n));
    }
    return f;
}

// ---------------------------------------------------------------------------
// LR product model

LrAttackModel::LrAttackModel(const TargetShape& shape) : shape_(shape)
{
    shape_.validate();
    params_.assign(shape_.components * (shape_.stages + 1), 0.0);
}

LrAttackModel LrAttackModel::random_normal(const TargetShape& shape, double stddev, Rng& rng)
{
    LrAttackModel m(shape);
    for (double& p : m.params_)
        p = rng.normal(0.0, stddev);
    return m;
}

LrAttackModel LrAttackModel::from_instance(const PufInstance& p)
{
    LrAttackModel m(shape_of(p));
    const std::size_t stride = p.stages + 1;
    for (std::size_t j = 0; j < p.component_count(); ++j) {
        std::copy(p.components[j].weights.begin(), p.components[j].weights.end(), m.params_.begin() + j * stride);
        m.params_[j * stride + p.stages] = p.components[j].bias;
    }
    return m;
}

double LrAttackModel::latent(std::size_t j, std::span<const std::int8_t> features) const noexcept
{
    const std::size_t n = shape_.stages;
    const double* w = params_.data() + j * (n + 1);
    const std::int8_t* x = features.data() + feature_offset(j);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        z += w[i] * x[i];
    return z + w[n];
}

namespace {

double lr_logit(const LrAttackModel& model, std::span<const std::int8_t> features) noexcept
{
    double prod = model.output_sign();
    for (std::size_t j = 0; j < model.components(); ++j)
        prod *= model.latent(j, features);
    return prod;
}

} // namespace

double lr_forward(const LrAttackModel& model, std::span<const std::int8_t> features)
{
    if (features.size() != model.shape().feature_width())
        throw InvalidInput("feature width " + std::to_string(features.size()) + " does not match model width " +
                           std::to_string(model.shape().feature_width()));
    return numerics::sigmoid(lr_logit(model, features));
}

namespace {

// BCE written in terms of the logit: softplus(-x) for label 1, softplus(x)
// for label 0. Stays accurate when the prediction is confidently wrong,
// where 1 - sigmoid(x) would lose most of its digits. Capped like the
// probability clamp used by bce_loss.
double logit_bce(double logit, Response y) noexcept
{
    const double t = y ? -logit : logit;
    const double softplus = std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
    return std::min(softplus, -std::log(numerics::kProbabilityClamp));
}

} // namespace

numerics::LossAndGradient lr_loss_gradient(const LrAttackModel& model, const FeatureMatrix& features,
                                           std::span<const Response> labels, std::span<const std::size_t> rows)
{
    if (features.cols() != model.shape().feature_width())
        throw InvalidInput("feature width does not match the model");
    if (rows.empty())
        throw InvalidInput("empty batch");
    const std::size_t k = model.components();
    const std::size_t n = model.stages();
    const double sign = model.output_sign();
    const double scale = 1.0 / static_cast<double>(rows.size());

    numerics::LossAndGradient out;
    out.gradient.assign(model.parameters().size(), 0.0);
    std::vector<double> z(k), prefix(k + 1), suffix(k + 1);
    double loss = 0.0;
    for (std::size_t r : rows) {
        const auto x = features.row(r);
        for (std::size_t j = 0; j < k; ++j)
            z[j] = model.latent(j, x);
        // prod_{i != j} z_i via prefix/suffix products; no division by z_j.
        prefix[0] = 1.0;
        for (std::size_t j = 0; j < k; ++j)
            prefix[j + 1] = prefix[j] * z[j];
        suffix[k] = 1.0;
        for (std::size_t j = k; j-- > 0;)
            suffix[j] = suffix[j + 1] * z[j];
        const double p = numerics::sigmoid(sign * prefix[k]);
        loss += logit_bce(sign * prefix[k], labels[r]);
        const double delta = (p - labels[r]) * sign * scale;
        for (std::size_t j = 0; j < k; ++j) {
            const double dz = delta * prefix[j] * suffix[j + 1];
            double* g = out.gradient.data() + j * (n + 1);
            const std::int8_t* xj = x.data() + model.feature_offset(j);
            for (std::size_t i = 0; i < n; ++i)
                g[i] += dz * xj[i];
            g[n] += dz;
        }
    }
    out.loss = loss * scale;
    return out;
}

std::vector<std::size_t> NnAttackModel::layer_dims(const TargetShape& shape)
{
    const std::size_t wide = shape.components * shape.stages;
    const std::size_t half = std::max<std::size_t>(1, wide / 2);
    return {shape.feature_width(), wide, half, half, wide, 1};
}

// ---------------------------------------------------------------------------
// Training

AttackConfig AttackConfig::defaults(Method method)
{
    AttackConfig c;
    c.method = method;
    if (method == Method::Lr) {
        c.learning_rate = 0.01;
        c.max_epochs = 300;
        c.init_stddev = 0.1;
        c.plateau_patience = 2;
    } else {
        c.learning_rate = 0.005;
        c.max_epochs = 200;
        c.init_stddev = 0.05;
    }
    return c;
}

std::size_t default_batch_size(std::size_t components, std::size_t train_size) noexcept
{
    std::size_t b = 1;
    for (std::size_t i = 1; i < components && b < (std::numeric_limits<std::size_t>::max() / 10); ++i)
        b *= 10;
    b = std::max<std::size_t>(b, 32);
    return std::max<std::size_t>(1, std::min(b, train_size));
}

namespace {

numerics::DenseNet::Matrix gather(const FeatureMatrix& f, std::span<const std::size_t> rows)
{
    numerics::DenseNet::Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(f.cols()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = f.row(rows[r]);
        for (std::size_t c = 0; c < src.size(); ++c)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = src[c];
    }
    return x;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng)
{
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end)
{
    std::vector<std::size_t> v(end - begin);
    std::iota(v.begin(), v.end(), begin);
    return v;
}

struct Scores {
    double loss;
    double accuracy;
};

Scores score_lr(const LrAttackModel& m, const FeatureMatrix& f, std::span<const Response> labels,
                std::span<const std::size_t> rows)
{
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t r : rows) {
        const double logit = lr_logit(m, f.row(r));
        const double p = numerics::sigmoid(logit);
        loss += logit_bce(logit, labels[r]);
        correct += static_cast<std::size_t>((p > 0.5) == (labels[r] == 1));
    }
    const auto count = static_cast<double>(rows.size());
    return {loss / count, static_cast<double>(correct) / count};
}

Scores score_nn(const numerics::DenseNet& net, const FeatureMatrix& f, std::span<const Response> labels,
                std::span<const std::size_t> rows)
{
    constexpr std::size_t kChunk = 4096;
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < rows.size(); start += kChunk) {
        const auto chunk = rows.subspan(start, std::min(kChunk, rows.size() - start));
        const auto p = net.forward(gather(f, chunk));
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            const Response y = labels[chunk[i]];
            const double pc =
                std::clamp(p(static_cast<Eigen::Index>(i)), numerics::kProbabilityClamp, 1.0 - numerics::kProbabilityClamp);
            loss -= y ? std::log(pc) : std::log1p(-pc);
            correct += static_cast<std::size_t>((p(static_cast<Eigen::Index>(i)) > 0.5) == (y == 1));
        }
    }
    const auto count = static_cast<double>(rows.size());
    return {loss / count, static_cast<double>(correct) / count};
}

struct TrainResult {
    AttackModel model;
    double validation_accuracy;
    std::size_t epochs;
};

TrainResult train_lr(const FeatureMatrix& f, std::span<const Response> labels, const Split& split,
                     const TargetShape& shape, const AttackConfig& cfg, std::size_t batch_size, std::uint64_t seed)
{
    Rng rng(seed);
    LrAttackModel model = LrAttackModel::random_normal(shape, cfg.init_stddev, rng);
    numerics::AdamState adam(model.parameters().size(), cfg.learning_rate);
    std::vector<std::size_t> order = iota_range(split.train_begin, split.train_end);
    const std::vector<std::size_t> val_rows = iota_range(split.validation_begin, split.validation_end);
    const bool have_val = !val_rows.empty();

    std::vector<double> best = {model.parameters().begin(), model.parameters().end()};
    double best_loss = std::numeric_limits<double>::infinity();
    double best_acc = 0.0;
    std::size_t stall = 0;
    std::size_t epoch = 0;
    while (epoch < cfg.max_epochs) {
        ++epoch;
        shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::span<const std::size_t> batch(order.data() + start,
                                                     std::min(batch_size, order.size() - start));
            const auto lg = lr_loss_gradient(model, f, labels, batch);
            if (!std::isfinite(lg.loss))
                throw TrainingDivergence("non-finite training loss");
            numerics::adam_step(adam, model.parameters(), lg.gradient);
        }
        if (!have_val)
            continue;
        const Scores s = score_lr(model, f, labels, val_rows);
        if (!std::isfinite(s.loss))
            throw TrainingDivergence("non-finite validation loss");
        if (s.loss < best_loss) {
            best_loss = s.loss;
            best_acc = s.accuracy;
            best.assign(model.parameters().begin(), model.parameters().end());
            stall = 0;
        } else if (++stall >= cfg.patience) {
            break;
        } else if (stall % cfg.plateau_patience == 0) {
            adam.learning_rate = std::max(adam.learning_rate * cfg.rate_decay, cfg.rate_floor);
        }
    }
    if (have_val)
        std::copy(best.begin(), best.end(), model.parameters().begin());
    return {std::move(model), best_acc, epoch};
}

TrainResult train_nn(const FeatureMatrix& f, std::span<const Response> labels, const Split& split,
                     const TargetShape& shape, const AttackConfig& cfg, std::size_t batch_size, std::uint64_t seed)
{
    Rng rng(seed);
    NnAttackModel model{numerics::DenseNet::random_normal(NnAttackModel::layer_dims(shape), cfg.init_stddev, rng)};
    numerics::AdamState adam(model.net.parameter_count(), cfg.learning_rate);
    std::vector<std::size_t> order = iota_range(split.train_begin, split.train_end);
    const std::vector<std::size_t> val_rows = iota_range(split.validation_begin, split.validation_end);
    std::vector<Response> batch_labels;

    double best_loss = std::numeric_limits<double>::infinity();
    double val_acc = 0.0;
    std::size_t stall = 0;
    std::size_t epoch = 0;
    while (epoch < cfg.max_epochs) {
        ++epoch;
        shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::span<const std::size_t> batch(order.data() + start,
                                                     std::min(batch_size, order.size() - start));
            batch_labels.resize(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i)
                batch_labels[i] = labels[batch[i]];
            const auto lg = numerics::backward(model.net, gather(f, batch), batch_labels);
            if (!std::isfinite(lg.loss))
                throw TrainingDivergence("non-finite training loss");
            numerics::adam_step(adam, model.net.parameters(), lg.gradient);
        }
        if (val_rows.empty())
            continue;
        const Scores s = score_nn(model.net, f, labels, val_rows);
        if (!std::isfinite(s.loss))
            throw TrainingDivergence("non-finite validation loss");
        val_acc = s.accuracy;
        if (val_acc >= cfg.stop_validation_accuracy)
            break;
        if (s.loss < best_loss) {
            best_loss = s.loss;
            stall = 0;
        } else if (++stall >= cfg.plateau_patience) {
            adam.learning_rate = std::max(adam.learning_rate * cfg.rate_decay, cfg.rate_floor);
            stall = 0;
        }
    }
    return {std::move(model), val_acc, epoch};
}

} // namespace

AttackOutcome run_attack(const CrpDataset& dataset, const TargetShape& shape, const AttackConfig& cfg)
{
    shape.validate();
    if (shape_of(dataset.provenance) != shape)
        throw InvalidInput("dataset provenance shape does not match the attack target");
    if (dataset.split.train_size() == 0 || dataset.split.test_size() == 0)
        throw InvalidInput("dataset needs non-empty train and test splits");

    const auto t0 = std::chrono::steady_clock::now();
    const FeatureMatrix features = make_features(dataset, shape);
    const std::size_t batch = cfg.batch_size ? std::min(cfg.batch_size, dataset.split.train_size())
                                             : default_batch_size(shape.components, dataset.split.train_size());

    AttackOutcome out{.model = LrAttackModel(shape)};
    out.batch_size = batch;
    std::uint64_t seed = cfg.seed;
    for (std::size_t attempt = 0;; ++attempt) {
        try {
            TrainResult r = cfg.method == Method::Lr
                                ? train_lr(features, dataset.responses, dataset.split, shape, cfg, batch, seed)
                                : train_nn(features, dataset.responses, dataset.split, shape, cfg, batch, seed);
            out.model = std::move(r.model);
            out.validation_accuracy = r.validation_accuracy;
            out.epochs = r.epochs;
            out.test_accuracy = evaluate_model(out.model, features, dataset.responses, dataset.split.test_begin,
                                               dataset.split.test_end);
            out.diverged = false;
            break;
        } catch (const TrainingDivergence&) {
            out.diverged = true;
            out.test_accuracy = 0.0;
            if (attempt >= cfg.max_restarts)
                break;
            ++out.restarts;
            seed = derive_seed(cfg.seed, {0x5245u, attempt + 1});
        }
    }
    out.success = !out.diverged && out.test_accuracy > cfg.success_threshold;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

double evaluate_predictor(const std::function<double(std::size_t)>& probability, std::span<const Response> labels,
                          std::size_t begin, std::size_t end)
{
    if (begin >= end)
        throw InvalidInput("cannot evaluate on an empty split");
    if (end > labels.size())
        throw InvalidInput("split range exceeds the label count");
    std::size_t correct = 0;
    for (std::size_t i = begin; i < end; ++i)
        correct += static_cast<std::size_t>((probability(i) > 0.5) == (labels[i] == 1));
    return static_cast<double>(correct) / static_cast<double>(end - begin);
}

double evaluate_model(const AttackModel& model, const FeatureMatrix& features, std::span<const Response> labels,
                      std::size_t begin, std::size_t end)
{
    if (begin >= end)
        throw InvalidInput("cannot evaluate on an empty split");
    if (end > labels.size() || end > features.rows())
        throw InvalidInput("split range exceeds the dataset");
    const auto rows = iota_range(begin, end);
    if (const auto* lr = std::get_if<LrAttackModel>(&model))
        return score_lr(*lr, features, labels, rows).accuracy;
    return score_nn(std::get<NnAttackModel>(model).net, features, labels, rows).accuracy;
}

// ---------------------------------------------------------------------------
// Campaigns

std::vector<std::size_t> Escalation::schedule() const
{
    if (start < 1 || cap < start || !(growth > 1.0))
        throw InvalidInput("escalation needs 1 <= start <= cap and growth > 1");
    std::vector<std::size_t> sizes;
    double s = static_cast<double>(start);
    while (s <= static_cast<double>(cap)) {
        const auto size = static_cast<std::size_t>(std::llround(s));
        if (sizes.empty() || size > sizes.back())
            sizes.push_back(size);
        s *= growth;
    }
    if (sizes.back() < cap)
        sizes.push_back(cap);
    return sizes;
}

double success_rate(std::size_t successes, std::size_t instances)
{
    if (instances == 0 || successes > instances)
        throw InvalidInput("success rate needs 0 <= successes <= instances and instances >= 1");
    return static_cast<double>(successes) / static_cast<double>(instances);
}

std::uint64_t campaign_instance_seed(std::uint64_t seed, std::size_t instance) noexcept
{
    return derive_seed(seed, {1, instance});
}

TrialRecord run_trial(const CampaignConfig& cfg, std::size_t level, std::size_t training_size, std::size_t instance)
{
    const double noise = cfg.noise_levels.at(level);
    TrialRecord t;
    t.shape = cfg.shape;
    t.noise = noise;
    t.method = cfg.method;
    t.training_size = training_size;
    t.instance = instance;
    t.instance_seed = campaign_instance_seed(cfg.seed, instance);
    t.challenge_seed = derive_seed(cfg.seed, {2, level, training_size, instance});
    t.noise_seed = derive_seed(cfg.seed, {3, level, training_size, instance});
    t.attack_seed = derive_seed(cfg.seed, {4, level, training_size, instance});

    const PufInstance puf =
        sample_instance(cfg.shape.kind, cfg.shape.stages, cfg.shape.components, noise, t.instance_seed);
    LcgConfig lcg = cfg.lcg;
    lcg.c0 = t.challenge_seed;
    const CrpDataset data = generate_dataset(puf, lcg, training_size, cfg.decorrelate, noise > 0.0, t.noise_seed);

    AttackConfig ac = cfg.attack;
    ac.method = cfg.method;
    ac.seed = t.attack_seed;
    const AttackOutcome o = run_attack(data, cfg.shape, ac);
    t.batch_size = o.batch_size;
    t.accuracy = o.test_accuracy;
    t.epochs = o.epochs;
    t.restarts = o.restarts;
    t.diverged = o.diverged;
    t.seconds = o.seconds;
    t.success = o.success;
    return t;
}

namespace {

std::vector<TrialRecord> run_step(const CampaignConfig& cfg, std::size_t level, std::size_t size)
{
    std::vector<TrialRecord> trials(cfg.instances);
    const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg.jobs, cfg.instances));
    if (jobs == 1) {
        for (std::size_t i = 0; i < cfg.instances; ++i)
            trials[i] = run_trial(cfg, level, size, i);
        return trials;
    }
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < cfg.instances; i += jobs)
                    trials[i] = run_trial(cfg, level, size, i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
        th.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return trials;
}

} // namespace

CampaignResult run_campaign(const CampaignConfig& cfg)
{
    cfg.shape.validate();
    if (cfg.instances < 1)
        throw InvalidInput("a campaign needs at least one instance");
    if (cfg.noise_levels.empty())
        throw InvalidInput("a campaign needs at least one noise level");
    const auto sizes = cfg.escalation.schedule();

    CampaignResult result;
    result.config = cfg;
    for (std::size_t level = 0; level < cfg.noise_levels.size(); ++level) {
        NoiseLevelResult lr;
        lr.noise = cfg.noise_levels[level];
        for (std::size_t size : sizes) {
            auto trials = run_step(cfg, level, size);
            lr.trace.push_back(size);
            const auto successes =
                static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [](const auto& t) { return t.success; }));
            lr.success_rate = success_rate(successes, trials.size());
            lr.final_size = size;

            double acc_sum = 0.0, secs = 0.0;
            std::size_t acc_n = 0;
            for (const auto& t : trials) {
                secs += t.seconds;
                if (successes == 0 || t.success) {
                    acc_sum += t.accuracy;
                    ++acc_n;
                }
            }
            lr.average_accuracy = acc_sum / static_cast<double>(acc_n);
            lr.average_seconds = secs / static_cast<double>(trials.size());
            lr.trials.insert(lr.trials.end(), trials.begin(), trials.end());
            if (lr.success_rate >= cfg.required_success_rate) {
                lr.succeeded = true;
                break;
            }
        }
        result.levels.push_back(std::move(lr));
    }
    return result;
}

} // namespace pufsim::attack
