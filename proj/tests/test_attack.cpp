#include "doctest.h"

#include <cmath>

#include "pufsim/attack.hpp"
#include "pufsim/errors.hpp"

using namespace pufsim;
using namespace pufsim::attack;

namespace {

CrpDataset clean_dataset(const PufInstance& p, std::size_t count, std::uint64_t c0)
{
    LcgConfig lcg;
    lcg.c0 = c0;
    return generate_dataset(p, lcg, count, true, false);
}

// Every challenge of width w, in counting order.
ChallengeSet all_challenges(std::size_t w)
{
    ChallengeSet cs(w);
    for (std::uint64_t v = 0; v < (std::uint64_t{1} << w); ++v) {
        Challenge c;
        for (std::size_t i = 0; i < w; ++i)
            c.bits.push_back(static_cast<std::uint8_t>((v >> i) & 1));
        cs.push_back(c);
    }
    return cs;
}

double sigmoid(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

std::size_t campaign_stop(PufKind kind, std::size_t n, std::size_t k)
{
    CampaignConfig cfg;
    cfg.shape = {kind, n, k};
    cfg.instances = 10;
    cfg.escalation = {250, 2.0, 16000};
    cfg.seed = 77;
    const CampaignResult r = run_campaign(cfg);
    return r.levels.at(0).succeeded ? r.levels[0].final_size : 2 * cfg.escalation.cap;
}

} // namespace

TEST_SUITE("attack-engine")
{
    TEST_CASE("method names")
    {
        CHECK(parse_method("lr") == Method::Lr);
        CHECK(parse_method("NN") == Method::Nn);
        CHECK(to_string(Method::Nn) == "nn");
        CHECK_THROWS_AS(parse_method("svm"), InvalidInput);
    }

    TEST_CASE("batch size follows 10^(k-1) within [32, train size]")
    {
        CHECK(default_batch_size(1, 5000) == 32);
        CHECK(default_batch_size(2, 5000) == 32);
        CHECK(default_batch_size(3, 5000) == 100);
        CHECK(default_batch_size(4, 5000) == 1000);
        CHECK(default_batch_size(6, 356'400) == 100'000);
        CHECK(default_batch_size(6, 5000) == 5000);
        CHECK(default_batch_size(1, 10) == 10);
    }

    TEST_CASE("escalation schedule")
    {
        CHECK(Escalation{1000, 2.0, 16000}.schedule() == std::vector<std::size_t>{1000, 2000, 4000, 8000, 16000});
        CHECK(Escalation{1000, 2.0, 10000}.schedule() == std::vector<std::size_t>{1000, 2000, 4000, 8000, 10000});
        CHECK(Escalation{500, 10.0, 500}.schedule() == std::vector<std::size_t>{500});
        CHECK_THROWS_AS((Escalation{1000, 1.0, 4000}.schedule()), InvalidInput);
        CHECK_THROWS_AS((Escalation{4000, 2.0, 1000}.schedule()), InvalidInput);
    }

    TEST_CASE("success rate arithmetic")
    {
        CHECK(success_rate(9, 10) == 0.9);
        CHECK(success_rate(9, 10) >= CampaignConfig{}.required_success_rate);
        CHECK(success_rate(8, 10) < CampaignConfig{}.required_success_rate);
        CHECK(success_rate(0, 3) == 0.0);
        CHECK_THROWS_AS(success_rate(1, 0), InvalidInput);
        CHECK_THROWS_AS(success_rate(4, 3), InvalidInput);
    }

    TEST_CASE("network layer widths")
    {
        CHECK(NnAttackModel::layer_dims({PufKind::Xor, 64, 3}) == std::vector<std::size_t>{64, 192, 96, 96, 192, 1});
        CHECK(NnAttackModel::layer_dims({PufKind::Cdc, 8, 6}) == std::vector<std::size_t>{48, 48, 24, 24, 48, 1});
        CHECK(NnAttackModel::layer_dims({PufKind::Apuf, 16, 1}) == std::vector<std::size_t>{16, 16, 8, 8, 16, 1});
    }

    TEST_CASE("parameter count is k(n+1)")
    {
        for (std::size_t k = 1; k <= 4; ++k) {
            const LrAttackModel m({PufKind::Cdc, 6, k});
            CHECK(m.parameters().size() == k * 7);
        }
    }

    TEST_CASE("true delay parameters classify clean data perfectly")
    {
        for (PufKind kind : {PufKind::Xor, PufKind::Cdc})
            for (std::size_t k : {1u, 2u, 3u, 4u}) {
                const PufInstance p = sample_instance(kind, 32, k, 0.0, 100 + k);
                const CrpDataset d = clean_dataset(p, 3000, 9);
                const FeatureMatrix f = make_features(d, shape_of(p));
                const AttackModel m = LrAttackModel::from_instance(p);
                CHECK(evaluate_model(m, f, d.responses, 0, d.size()) == 1.0);
            }
    }

    TEST_CASE("single component model is plain logistic regression")
    {
        Rng rng(21);
        const LrAttackModel m = LrAttackModel::random_normal({PufKind::Apuf, 8, 1}, 0.7, rng);
        const auto theta = m.parameters();
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<std::int8_t> phi(8);
            double z = theta[8];
            for (std::size_t i = 0; i < 8; ++i) {
                phi[i] = rng.below(2) ? 1 : -1;
                z += theta[i] * phi[i];
            }
            CHECK(std::abs(lr_forward(m, phi) - sigmoid(z)) < 1e-15);
        }
    }

    TEST_CASE("product sign decides the response")
    {
        LrAttackModel m({PufKind::Xor, 4, 3});
        const std::vector<std::int8_t> phi{1, 1, 1, 1};
        auto params = m.parameters();
        for (std::size_t j = 0; j < 3; ++j)
            params[j * 5 + 4] = 5.0;
        CHECK(lr_forward(m, phi) > 1.0 - 1e-12);
        params[1 * 5 + 4] = -5.0;
        CHECK(lr_forward(m, phi) < 1e-12);

        // With an even number of components the sign factor keeps the
        // XOR reading: two positive latents mean two 1-bits, response 0.
        LrAttackModel even({PufKind::Xor, 4, 2});
        even.parameters()[4] = 5.0;
        even.parameters()[9] = 5.0;
        CHECK(lr_forward(even, phi) < 1e-9);
        even.parameters()[9] = -5.0;
        CHECK(lr_forward(even, phi) > 1.0 - 1e-9);
    }

    TEST_CASE("product model gradient agrees with finite differences")
    {
        for (PufKind kind : {PufKind::Xor, PufKind::Cdc})
            for (std::uint64_t seed = 1; seed <= 5; ++seed) {
                const TargetShape shape{kind, 4, 2};
                const PufInstance p = sample_instance(kind, 4, 2, 0.0, seed);
                LcgConfig lcg;
                lcg.c0 = seed;
                lcg.width = shape.challenge_width();
                const CrpDataset d = build_dataset(p, generate_challenges(lcg, 8, true), false);
                const FeatureMatrix f = make_features(d, shape);
                const std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7};

                Rng rng(seed + 40);
                const LrAttackModel m = LrAttackModel::random_normal(shape, 0.8, rng);
                const auto analytic = lr_loss_gradient(m, f, d.responses, rows);
                const auto numeric = numerics::finite_difference_gradient(
                    [&](std::span<const double> theta) {
                        LrAttackModel probe = m;
                        std::copy(theta.begin(), theta.end(), probe.parameters().begin());
                        return lr_loss_gradient(probe, f, d.responses, rows).loss;
                    },
                    m.parameters());
                CHECK(numerics::max_relative_error(analytic.gradient, numeric) < 1e-5);
            }
    }

    TEST_CASE("accuracy over all 16 challenges matches an exhaustive comparison")
    {
        const TargetShape shape{PufKind::Xor, 4, 2};
        const PufInstance p = sample_instance(PufKind::Xor, 4, 2, 0.0, 5);
        const CrpDataset d = build_dataset(p, all_challenges(4), false);
        const FeatureMatrix f = make_features(d, shape);

        AttackConfig cfg = AttackConfig::defaults(Method::Lr);
        cfg.seed = 3;
        cfg.max_epochs = 40;
        const AttackOutcome o = run_attack(d, shape, cfg);
        const auto& model = std::get<LrAttackModel>(o.model);

        std::size_t agree = 0;
        for (std::size_t r = 0; r < 16; ++r) {
            const Response predicted = lr_forward(model, f.row(r)) > 0.5 ? 1 : 0;
            agree += predicted == eval_puf(p, d.challenges[r]);
        }
        CHECK(evaluate_model(o.model, f, d.responses, 0, 16) == static_cast<double>(agree) / 16.0);
    }

    TEST_CASE("a constant one-half predictor sits at chance")
    {
        const PufInstance p = sample_instance(PufKind::Xor, 64, 2, 0.0, 8);
        const CrpDataset d = clean_dataset(p, 20000, 4);
        const double acc = evaluate_predictor([](std::size_t) { return 0.5; }, d.responses, 0, d.size());
        CHECK(std::abs(acc - 0.5) < 0.02);
        CHECK_THROWS_AS(evaluate_predictor([](std::size_t) { return 0.5; }, d.responses, 3, 3), InvalidInput);
    }

    TEST_CASE("noisy labels cap the accuracy of a perfect model")
    {
        const PufInstance p = sample_instance(PufKind::Xor, 32, 2, 0.05, 13);
        LcgConfig lcg;
        lcg.c0 = 2;
        const CrpDataset noisy = generate_dataset(p, lcg, 5000, true, true, 6);
        const CrpDataset clean = build_dataset(p, noisy.challenges, false);
        std::size_t stable = 0;
        for (std::size_t r = 0; r < noisy.size(); ++r)
            stable += noisy.responses[r] == clean.responses[r];
        const FeatureMatrix f = make_features(noisy, shape_of(p));
        const double acc = evaluate_model(LrAttackModel::from_instance(p), f, noisy.responses, 0, noisy.size());
        CHECK(acc == static_cast<double>(stable) / static_cast<double>(noisy.size()));
        CHECK(acc < 1.0);
    }

    TEST_CASE("logistic regression learns a 16-stage arbiter PUF from 2000 CRPs")
    {
        const PufInstance p = sample_instance(PufKind::Apuf, 16, 1, 0.0, 31);
        const CrpDataset d = clean_dataset(p, 2000, 17);
        AttackConfig cfg = AttackConfig::defaults(Method::Lr);
        cfg.seed = 5;
        const AttackOutcome o = run_attack(d, shape_of(p), cfg);
        CHECK(o.test_accuracy >= 0.95);
        CHECK(o.success);
        CHECK(o.batch_size == 32);
        CHECK_FALSE(o.diverged);
    }

    TEST_CASE("the network attack learns a 16-stage arbiter PUF")
    {
        const PufInstance p = sample_instance(PufKind::Apuf, 16, 1, 0.0, 32);
        const CrpDataset d = clean_dataset(p, 4000, 18);
        AttackConfig cfg = AttackConfig::defaults(Method::Nn);
        cfg.seed = 6;
        const AttackOutcome o = run_attack(d, shape_of(p), cfg);
        CHECK(o.test_accuracy >= 0.9);
        CHECK(std::holds_alternative<NnAttackModel>(o.model));
    }

    TEST_CASE("attacks are deterministic given the seed")
    {
        const PufInstance p = sample_instance(PufKind::Cdc, 8, 2, 0.0, 41);
        const CrpDataset d = clean_dataset(p, 3000, 3);
        for (Method method : {Method::Lr, Method::Nn}) {
            AttackConfig cfg = AttackConfig::defaults(method);
            cfg.seed = 12;
            cfg.max_epochs = 15;
            const AttackOutcome a = run_attack(d, shape_of(p), cfg);
            const AttackOutcome b = run_attack(d, shape_of(p), cfg);
            CHECK(a.test_accuracy == b.test_accuracy);
            CHECK(a.epochs == b.epochs);
            if (method == Method::Lr)
                CHECK(std::get<LrAttackModel>(a.model) == std::get<LrAttackModel>(b.model));
            else
                CHECK(std::get<NnAttackModel>(a.model).net == std::get<NnAttackModel>(b.model).net);
        }
    }

    TEST_CASE("attacks refuse a dataset from a different architecture")
    {
        const PufInstance p = sample_instance(PufKind::Xor, 16, 2, 0.0, 1);
        const CrpDataset d = clean_dataset(p, 500, 1);
        const AttackConfig cfg = AttackConfig::defaults(Method::Lr);
        CHECK_THROWS_AS(run_attack(d, {PufKind::Xor, 16, 3}, cfg), InvalidInput);
        CHECK_THROWS_AS(run_attack(d, {PufKind::Cdc, 8, 2}, cfg), InvalidInput);
        CHECK_THROWS_AS(make_features(d, {PufKind::Xor, 32, 2}), InvalidInput);
    }

    TEST_CASE("campaign on a 16-stage arbiter PUF stops at 2000 CRPs")
    {
        CampaignConfig cfg;
        cfg.shape = {PufKind::Apuf, 16, 1};
        cfg.instances = 10;
        cfg.escalation = {2000, 2.0, 8000};
        cfg.seed = 3;
        const CampaignResult r = run_campaign(cfg);
        REQUIRE(r.levels.size() == 1);
        const auto& level = r.levels[0];
        CHECK(level.succeeded);
        CHECK(level.final_size == 2000);
        CHECK(level.trace == std::vector<std::size_t>{2000});
        CHECK(level.success_rate == 1.0);
        REQUIRE(level.trials.size() == 10);
        for (const auto& t : level.trials) {
            CHECK(t.success == (t.accuracy > 0.9));
            CHECK(t.instance_seed == campaign_instance_seed(3, t.instance));
        }
    }

    TEST_CASE("instances keep their delays across training sizes")
    {
        CampaignConfig cfg;
        cfg.shape = {PufKind::Xor, 16, 2};
        cfg.instances = 2;
        cfg.attack.max_epochs = 2;
        const TrialRecord a = run_trial(cfg, 0, 500, 1);
        const TrialRecord b = run_trial(cfg, 0, 1000, 1);
        CHECK(a.instance_seed == b.instance_seed);
        CHECK(a.challenge_seed != b.challenge_seed);
        CHECK(a.attack_seed != b.attack_seed);
    }

    TEST_CASE("more components never make the attack cheaper")
    {
        const std::size_t k1 = campaign_stop(PufKind::Xor, 16, 1);
        const std::size_t k2 = campaign_stop(PufKind::Xor, 16, 2);
        const std::size_t k3 = campaign_stop(PufKind::Xor, 16, 3);
        CHECK(k1 <= k2);
        CHECK(k2 <= k3);
    }

    TEST_CASE("more stages never make the attack cheaper")
    {
        const std::size_t n8 = campaign_stop(PufKind::Cdc, 8, 2);
        const std::size_t n16 = campaign_stop(PufKind::Cdc, 16, 2);
        const std::size_t n32 = campaign_stop(PufKind::Cdc, 32, 2);
        CHECK(n8 <= n16);
        CHECK(n16 <= n32);
    }
}
