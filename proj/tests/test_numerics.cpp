#include "doctest.h"

#include <cmath>
#include <sstream>

#include "pufsim/errors.hpp"
#include "pufsim/numerics.hpp"

using namespace pufsim;
using namespace pufsim::numerics;

namespace {

// Plain loops, no Eigen: tanh hidden layers, sigmoid output.
double hand_forward(const DenseNet& net, const std::vector<double>& x)
{
    std::vector<double> a = x;
    const auto& dims = net.dims();
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const auto W = net.weights(l);
        const auto b = net.bias(l);
        std::vector<double> z(dims[l + 1]);
        for (std::size_t o = 0; o < dims[l + 1]; ++o) {
            double s = b(static_cast<Eigen::Index>(o));
            for (std::size_t i = 0; i < dims[l]; ++i)
                s += W(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * a[i];
            z[o] = l + 2 == dims.size() ? 1.0 / (1.0 + std::exp(-s)) : std::tanh(s);
        }
        a = z;
    }
    return a[0];
}

DenseNet::Matrix random_batch(std::size_t rows, std::size_t cols, Rng& rng)
{
    DenseNet::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = rng.below(2) ? 1.0 : -1.0;
    return m;
}

std::vector<std::uint8_t> random_labels(std::size_t n, Rng& rng)
{
    std::vector<std::uint8_t> y(n);
    for (auto& b : y)
        b = static_cast<std::uint8_t>(rng.below(2));
    return y;
}

double net_loss(const DenseNet& net, const DenseNet::Matrix& x, std::span<const std::uint8_t> y)
{
    const auto p = net.forward(x);
    return bce_loss(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), y);
}

} // namespace

TEST_SUITE("numerics")
{
    TEST_CASE("zero network outputs one half")
    {
        const DenseNet net({5, 4, 1});
        Rng rng(1);
        const auto p = net.forward(random_batch(7, 5, rng));
        for (Eigen::Index i = 0; i < p.size(); ++i)
            CHECK(p(i) == 0.5);

        DenseNet unit({1, 1});
        unit.weights(0)(0, 0) = 1.0;
        DenseNet::Matrix x(1, 1);
        x(0, 0) = 0.0;
        CHECK(unit.forward(x)(0) == 0.5);
    }

    TEST_CASE("forward matches a hand-rolled evaluation")
    {
        Rng rng(2);
        for (int trial = 0; trial < 10; ++trial) {
            DenseNet net = DenseNet::random_normal({2, 3, 1}, 0.8, rng);
            for (auto& b : net.parameters())
                if (rng.below(3) == 0)
                    b += rng.normal();
            const auto x = random_batch(6, 2, rng);
            const auto p = net.forward(x);
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                const std::vector<double> row{x(r, 0), x(r, 1)};
                CHECK(p(r) == doctest::Approx(hand_forward(net, row)).epsilon(1e-14));
            }
        }
    }

    TEST_CASE("forward is equivariant under batch permutation")
    {
        Rng rng(3);
        const DenseNet net = DenseNet::random_normal({6, 5, 3, 1}, 0.5, rng);
        const auto x = random_batch(9, 6, rng);
        DenseNet::Matrix shuffled(x.rows(), x.cols());
        const int perm[] = {4, 0, 8, 2, 7, 1, 3, 6, 5};
        for (int r = 0; r < 9; ++r)
            shuffled.row(r) = x.row(perm[r]);
        const auto p = net.forward(x);
        const auto q = net.forward(shuffled);
        for (int r = 0; r < 9; ++r)
            CHECK(q(r) == p(perm[r]));
    }

    TEST_CASE("shape errors")
    {
        CHECK_THROWS_AS(DenseNet({3}), InvalidInput);
        CHECK_THROWS_AS(DenseNet({3, 2}), InvalidInput);
        CHECK_THROWS_AS(DenseNet({3, 0, 1}), InvalidInput);
        const DenseNet net({3, 2, 1});
        CHECK_THROWS_AS(net.forward(DenseNet::Matrix::Zero(2, 4)), InvalidInput);
    }

    TEST_CASE("binary cross-entropy values")
    {
        const double half[] = {0.5};
        const std::uint8_t one[] = {1};
        CHECK(bce_loss(half, one) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

        const double exact[] = {1.0, 0.0};
        const std::uint8_t labels[] = {1, 0};
        CHECK(bce_loss(exact, labels) < 1e-11);

        const double wrong[] = {0.0};
        CHECK(std::isfinite(bce_loss(wrong, one)));

        Rng rng(4);
        std::vector<double> p(8);
        for (auto& x : p)
            x = rng.uniform();
        const auto y = random_labels(8, rng);
        double sum = 0.0;
        for (std::size_t i = 0; i < 8; ++i)
            sum += y[i] ? -std::log(p[i]) : -std::log(1.0 - p[i]);
        CHECK(bce_loss(p, y) == doctest::Approx(sum / 8).epsilon(1e-14));
    }

    TEST_CASE("backward agrees with central finite differences")
    {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Rng rng(seed);
            DenseNet net = DenseNet::random_normal({4, 8, 8, 4, 1}, 0.5, rng);
            for (std::size_t l = 0; l < net.layer_count(); ++l)
                for (Eigen::Index i = 0; i < net.bias(l).size(); ++i)
                    net.bias(l)(i) = 0.1 * rng.normal();
            const auto x = random_batch(16, 4, rng);
            const auto y = random_labels(16, rng);
            const auto analytic = backward(net, x, y);
            CHECK(analytic.loss == doctest::Approx(net_loss(net, x, y)).epsilon(1e-14));

            const auto numeric = finite_difference_gradient(
                [&](std::span<const double> theta) {
                    DenseNet probe = net;
                    std::copy(theta.begin(), theta.end(), probe.parameters().begin());
                    return net_loss(probe, x, y);
                },
                net.parameters());
            CHECK(max_relative_error(analytic.gradient, numeric) < 1e-5);
        }
    }

    TEST_CASE("output bias gradient is the mean residual")
    {
        Rng rng(5);
        const DenseNet net = DenseNet::random_normal({3, 4, 1}, 1.0, rng);
        const auto x = random_batch(10, 3, rng);
        const auto y = random_labels(10, rng);
        const auto g = backward(net, x, y);
        const auto p = net.forward(x);
        double mean = 0.0;
        for (int i = 0; i < 10; ++i)
            mean += p(i) - y[static_cast<std::size_t>(i)];
        mean /= 10;
        CHECK(g.gradient.back() == doctest::Approx(mean).epsilon(1e-14));
    }

    TEST_CASE("gradient vanishes when predictions equal labels")
    {
        DenseNet net({2, 1});
        net.bias(0)(0) = 60.0;
        Rng rng(6);
        const auto x = random_batch(5, 2, rng);
        const std::vector<std::uint8_t> y(5, 1);
        const auto g = backward(net, x, y);
        for (double v : g.gradient)
            CHECK(std::abs(v) < 1e-20);
    }

    TEST_CASE("adam first step and idle steps")
    {
        std::vector<double> theta{1.0, -2.0, 3.0};
        AdamState s(3, 0.01);
        const std::vector<double> unit{1.0, 1.0, 1.0};
        adam_step(s, theta, unit);
        CHECK(s.step == 1);
        CHECK(theta[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
        CHECK(theta[1] == doctest::Approx(-2.0 - 0.01).epsilon(1e-6));

        std::vector<double> still{0.5, 0.25};
        AdamState z(2, 0.1);
        const std::vector<double> zero{0.0, 0.0};
        for (int i = 0; i < 1000; ++i)
            adam_step(z, still, zero);
        CHECK(still[0] == 0.5);
        CHECK(still[1] == 0.25);
    }

    TEST_CASE("adam solves a scalar quadratic")
    {
        std::vector<double> theta{0.0};
        const double target = 1.7;
        AdamState s(1, 0.05);
        for (int i = 0; i < 100; ++i) {
            const std::vector<double> g{2.0 * (theta[0] - target)};
            adam_step(s, theta, g);
        }
        CHECK(std::abs(theta[0] - target) < 1e-2);
    }

    TEST_CASE("adam rejects non-finite gradients and mismatched shapes")
    {
        std::vector<double> theta{0.0, 0.0};
        AdamState s(2, 0.01);
        const std::vector<double> bad{1.0, std::nan("")};
        CHECK_THROWS_AS(adam_step(s, theta, bad), TrainingDivergence);
        const std::vector<double> inf{INFINITY, 0.0};
        CHECK_THROWS_AS(adam_step(s, theta, inf), TrainingDivergence);
        const std::vector<double> short_grad{1.0};
        CHECK_THROWS_AS(adam_step(s, theta, short_grad), InvalidInput);
    }

    TEST_CASE("loss falls on a separable toy problem")
    {
        Rng rng(7);
        const auto x = random_batch(64, 3, rng);
        std::vector<std::uint8_t> y(64);
        for (Eigen::Index r = 0; r < 64; ++r)
            y[static_cast<std::size_t>(r)] = x(r, 0) + 0.5 * x(r, 1) > 0 ? 1 : 0;
        DenseNet net = DenseNet::random_normal({3, 4, 1}, 0.05, rng);
        AdamState s(net.parameter_count(), 0.01);
        double previous = backward(net, x, y).loss;
        int violations = 0;
        for (int step = 0; step < 50; ++step) {
            const auto lg = backward(net, x, y);
            adam_step(s, net.parameters(), lg.gradient);
            const double now = backward(net, x, y).loss;
            if (now > previous + 1e-6)
                ++violations;
            previous = now;
        }
        CHECK(violations <= 5);
        CHECK(previous < std::log(2.0) - 0.1);
    }

    TEST_CASE("checkpoint round trip is exact")
    {
        Rng rng(8);
        const DenseNet net = DenseNet::random_normal({6, 4, 2, 1}, 0.3, rng);
        std::stringstream ss;
        write_checkpoint(ss, net);
        CHECK(read_checkpoint(ss) == net);

        std::stringstream broken(ss.str().substr(0, ss.str().size() / 2));
        CHECK_THROWS_AS(read_checkpoint(broken), ParseError);
    }
}
