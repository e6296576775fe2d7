#include "pufsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "pufsim/errors.hpp"
#include "pufsim/io.hpp"

namespace pufsim::numerics {

double sigmoid(double z) noexcept
{
    return 1.0 / (1.0 + std::exp(-z));
}

DenseNet::DenseNet(std::vector<std::size_t> dims) : dims_(std::move(dims))
{
    if (dims_.size() < 2)
        throw InvalidInput("a network needs at least an input and an output layer");
    if (dims_.back() != 1)
        throw InvalidInput("the output layer must have exactly one unit");
    for (std::size_t d : dims_)
        if (d == 0)
            throw InvalidInput("layer widths must be positive");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
        offsets_.push_back(total);
        total += dims_[l + 1] * dims_[l] + dims_[l + 1];
    }
    params_.assign(total, 0.0);
}

DenseNet DenseNet::random_normal(std::vector<std::size_t> dims, double stddev, Rng& rng)
{
    DenseNet net(std::move(dims));
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto w = net.weights(l);
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w.data()[i] = rng.normal(0.0, stddev);
    }
    return net;
}

Eigen::Map<DenseNet::Matrix> DenseNet::weights(std::size_t l)
{
    return {params_.data() + offsets_[l], static_cast<Eigen::Index>(dims_[l + 1]),
            static_cast<Eigen::Index>(dims_[l])};
}

Eigen::Map<const DenseNet::Matrix> DenseNet::weights(std::size_t l) const
{
    return {params_.data() + offsets_[l], static_cast<Eigen::Index>(dims_[l + 1]),
            static_cast<Eigen::Index>(dims_[l])};
}

Eigen::Map<DenseNet::Vector> DenseNet::bias(std::size_t l)
{
    return {params_.data() + offsets_[l] + dims_[l + 1] * dims_[l], static_cast<Eigen::Index>(dims_[l + 1])};
}

Eigen::Map<const DenseNet::Vector> DenseNet::bias(std::size_t l) const
{
    return {params_.data() + offsets_[l] + dims_[l + 1] * dims_[l], static_cast<Eigen::Index>(dims_[l + 1])};
}

namespace {

// Activations stored one column per sample; acts[0] is the input.
std::vector<DenseNet::Matrix> forward_all(const DenseNet& net, const DenseNet::Matrix& batch)
{
    if (static_cast<std::size_t>(batch.cols()) != net.dims().front())
        throw InvalidInput("feature width " + std::to_string(batch.cols()) + " does not match input layer " +
                           std::to_string(net.dims().front()));
    std::vector<DenseNet::Matrix> acts;
    acts.reserve(net.layer_count() + 1);
    acts.push_back(batch.transpose());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        DenseNet::Matrix z = net.weights(l) * acts.back();
        z.colwise() += net.bias(l);
        if (l + 1 < net.layer_count())
            z = z.array().tanh();
        else
            z = z.unaryExpr([](double v) { return sigmoid(v); });
        acts.push_back(std::move(z));
    }
    return acts;
}

} // namespace

DenseNet::Vector DenseNet::forward(const Matrix& batch) const
{
    return forward_all(*this, batch).back().row(0).transpose();
}

double bce_loss(std::span<const double> predicted, std::span<const std::uint8_t> labels)
{
    if (predicted.size() != labels.size())
        throw InvalidInput("prediction and label counts differ");
    if (predicted.empty())
        throw InvalidInput("empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double p = std::clamp(predicted[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
        total -= labels[i] ? std::log(p) : std::log1p(-p);
    }
    return total / static_cast<double>(predicted.size());
}

LossAndGradient backward(const DenseNet& net, const DenseNet::Matrix& batch, std::span<const std::uint8_t> labels)
{
    if (static_cast<std::size_t>(batch.rows()) != labels.size())
        throw InvalidInput("batch and label counts differ");
    const auto acts = forward_all(net, batch);
    const auto batch_size = static_cast<double>(labels.size());

    LossAndGradient out;
    const auto& probs = acts.back();
    out.loss = bce_loss(std::span<const double>(probs.data(), labels.size()), labels);
    out.gradient.assign(net.parameter_count(), 0.0);

    DenseNet::Matrix delta(1, batch.rows());
    for (Eigen::Index i = 0; i < batch.rows(); ++i)
        delta(0, i) = (probs(0, i) - labels[static_cast<std::size_t>(i)]) / batch_size;

    // Gradient buffer shares the parameter layout, so reuse DenseNet's views.
    DenseNet grad_view(net.dims());
    for (std::size_t l = net.layer_count(); l-- > 0;) {
        grad_view.weights(l).noalias() = delta * acts[l].transpose();
        grad_view.bias(l) = delta.rowwise().sum();
        if (l > 0) {
            DenseNet::Matrix back = net.weights(l).transpose() * delta;
            delta = back.array() * (1.0 - acts[l].array().square());
        }
    }
    auto g = grad_view.parameters();
    out.gradient.assign(g.begin(), g.end());
    return out;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads)
{
    if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size())
        throw InvalidInput("Adam: parameter, gradient and moment shapes differ");
    for (double g : grads)
        if (!std::isfinite(g))
            throw TrainingDivergence("non-finite gradient");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
        v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& loss,
                                               std::span<const double> params, double rel_step)
{
    std::vector<double> theta(params.begin(), params.end());
    std::vector<double> grad(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double original = theta[i];
        const double h = rel_step * std::max(1.0, std::abs(original));
        theta[i] = original + h;
        const double up = loss(theta);
        theta[i] = original - h;
        const double down = loss(theta);
        theta[i] = original;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor)
{
    if (a.size() != b.size())
        throw InvalidInput("gradient vectors differ in length");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

void write_checkpoint(std::ostream& out, const DenseNet& net)
{
    out << "pufsim-densenet 1\n" << "hidden_activation tanh\n" << "output_activation sigmoid\n" << "dims";
    for (std::size_t d : net.dims())
        out << ' ' << d;
    out << '\n';
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto w = net.weights(l);
        const auto b = net.bias(l);
        out << "layer " << l << '\n';
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            out << format_exact(b(r));
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                out << ' ' << format_exact(w(r, c));
            out << '\n';
        }
    }
}

DenseNet read_checkpoint(std::istream& in)
{
    std::string line;
    std::size_t line_no = 0;
    auto next = [&]() -> std::string& {
        if (!std::getline(in, line))
            throw ParseError("checkpoint: unexpected end of file at line " + std::to_string(line_no + 1));
        ++line_no;
        return line;
    };
    if (next() != "pufsim-densenet 1")
        throw ParseError("checkpoint line 1: bad header");
    if (next() != "hidden_activation tanh" || next() != "output_activation sigmoid")
        throw ParseError("checkpoint line " + std::to_string(line_no) + ": unsupported activation");
    std::istringstream ds(next());
    std::string key;
    ds >> key;
    if (key != "dims")
        throw ParseError("checkpoint line " + std::to_string(line_no) + ": expected dims");
    std::vector<std::size_t> dims;
    std::size_t d = 0;
    while (ds >> d)
        dims.push_back(d);
    DenseNet net(dims);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        if (next() != "layer " + std::to_string(l))
            throw ParseError("checkpoint line " + std::to_string(line_no) + ": expected layer " + std::to_string(l));
        auto w = net.weights(l);
        auto b = net.bias(l);
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            std::istringstream ls(next());
            std::vector<double> row;
            std::string tok;
            while (ls >> tok) {
                try {
                    row.push_back(std::stod(tok));
                } catch (const std::exception&) {
                    throw ParseError("checkpoint line " + std::to_string(line_no) + ": bad number '" + tok + "'");
                }
            }
            if (row.size() != static_cast<std::size_t>(w.cols()) + 1)
                throw ParseError("checkpoint line " + std::to_string(line_no) + ": wrong value count");
            b(r) = row[0];
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = row[static_cast<std::size_t>(c) + 1];
        }
    }
    return net;
}

} // namespace pufsim::numerics
