#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pufsim/rng.hpp"

namespace pufsim::numerics {

constexpr double kProbabilityClamp = 1e-12;

double sigmoid(double z) noexcept;

/// Fully connected network: tanh on every hidden layer, sigmoid on the single
/// output unit. All parameters live in one flat buffer (layer by layer, each
/// layer's column-major weight matrix followed by its bias) so optimisers and
/// gradient checks can treat the network as a plain vector.
class DenseNet {
public:
    using Matrix = Eigen::MatrixXd;
    using Vector = Eigen::VectorXd;

    /// All-zero parameters. dims = {inputs, hidden..., 1}.
    explicit DenseNet(std::vector<std::size_t> dims);

    /// Weights N(0, stddev^2), biases zero.
    static DenseNet random_normal(std::vector<std::size_t> dims, double stddev, Rng& rng);

    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    std::size_t layer_count() const noexcept { return dims_.size() - 1; }
    std::size_t parameter_count() const noexcept { return params_.size(); }

    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }

    Eigen::Map<Matrix> weights(std::size_t layer);
    Eigen::Map<const Matrix> weights(std::size_t layer) const;
    Eigen::Map<Vector> bias(std::size_t layer);
    Eigen::Map<const Vector> bias(std::size_t layer) const;

    /// One row per sample; returns one probability per sample.
    Vector forward(const Matrix& batch) const;

    friend bool operator==(const DenseNet&, const DenseNet&) = default;

private:
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

/// Mean binary cross-entropy with predictions clamped to [1e-12, 1 - 1e-12].
double bce_loss(std::span<const double> predicted, std::span<const std::uint8_t> labels);

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Gradient of the mean BCE over the batch with respect to every parameter,
/// laid out like DenseNet::parameters(). The output delta is (p - y), the
/// exact derivative of sigmoid + BCE at unclamped p.
LossAndGradient backward(const DenseNet& net, const DenseNet::Matrix& batch, std::span<const std::uint8_t> labels);

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;

    AdamState() = default;
    AdamState(std::size_t parameter_count, double lr)
        : learning_rate(lr), first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0)
    {
    }
};

/// Bias-corrected Adam update in place. Throws TrainingDivergence when a
/// gradient entry is not finite (parameters are left untouched).
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

/// Central differences; the step for parameter i is rel_step * max(1, |theta_i|).
std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& loss,
                                               std::span<const double> params, double rel_step = 1e-6);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-4);

/// Versioned text checkpoint with layer dims and 17-digit parameters.
void write_checkpoint(std::ostream& out, const DenseNet& net);
DenseNet read_checkpoint(std::istream& in);

} // namespace pufsim::numerics
