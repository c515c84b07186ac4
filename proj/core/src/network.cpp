#include "ntklab/network.hpp"

#include "ntklab/errors.hpp"

#include <cmath>
#include <random>

namespace ntklab {

namespace {

constexpr std::uint64_t kGridSeedSalt = 0x9E3779B97F4A7C15ULL;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Matrix activate(const Matrix& pre, Activation act) {
    if (act == Activation::Identity) return pre;
    return pre.cwiseMax(0.0);
}

// ReLU'(0) is taken as 0.
Matrix activation_derivative(const Matrix& pre, Activation act) {
    if (act == Activation::Identity) return Matrix::Ones(pre.rows(), pre.cols());
    return (pre.array() > 0.0).cast<double>().matrix();
}

void encode_into(const EncodingState& enc, std::span<const double> x, std::span<double> out) {
    std::visit(Overloaded{
                   [&](const IdentitySpec&) {
                       for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i];
                   },
                   [&](const FfeSpec& s) { ffe_encode_into(x, s, out); },
                   [&](const GridStack& g) { mpe_encode_into(x, g, out); },
               },
               enc);
}

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Matrix input;  // d_e × B
};

// Backpropagates `output_grad` (out × B) through a recorded forward pass.
Gradients backpropagate(const MlpNetwork& net, const ForwardTrace& trace, Matrix delta) {
    const std::size_t n_layers = net.layers.size();
    Gradients g;
    g.weights.resize(n_layers);
    g.biases.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        const double scale = net.input_scale(l);
        g.weights[l] = scale * (delta * trace.inputs[l].transpose());
        g.biases[l] = net.config.beta * delta.rowwise().sum();
        Matrix upstream = scale * (net.layers[l].weight.transpose() * delta);
        if (l == 0) {
            g.input = std::move(upstream);
        } else {
            delta = upstream.cwiseProduct(
                activation_derivative(trace.pre[l - 1], net.config.activation));
        }
    }
    return g;
}

}  // namespace

std::size_t MlpNetwork::parameter_count() const {
    std::size_t total = 0;
    for (const auto& layer : layers) {
        total += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    }
    return total;
}

double MlpNetwork::input_scale(std::size_t layer) const {
    if (layer == 0 && config.input_scaling == InputScaling::None) return 1.0;
    return 1.0 / std::sqrt(static_cast<double>(layers[layer].weight.cols()));
}

std::size_t MlpNetwork::hidden_neuron_count() const {
    std::size_t total = 0;
    for (int w : config.hidden) total += static_cast<std::size_t>(w);
    return total;
}

int CoordinateModel::input_dim() const {
    return std::visit([](const auto& e) { return e.input_dim; }, encoding);
}

int CoordinateModel::encoded_dim() const {
    return std::visit(Overloaded{
                          [](const IdentitySpec& s) { return s.input_dim; },
                          [](const FfeSpec& s) { return s.output_dim(); },
                          [](const GridStack& g) { return g.output_dim(); },
                      },
                      encoding);
}

std::size_t CoordinateModel::grid_parameter_count() const {
    const GridStack* g = grids();
    return g ? g->parameter_count() : 0;
}

EncodingSpec CoordinateModel::encoding_spec() const {
    return std::visit(Overloaded{
                          [](const IdentitySpec& s) -> EncodingSpec { return s; },
                          [](const FfeSpec& s) -> EncodingSpec { return s; },
                          [](const GridStack& g) -> EncodingSpec { return g.spec(); },
                      },
                      encoding);
}

void validate(const MlpConfig& config) {
    if (config.input_dim < 1) throw ConfigError("mlp: input dimension must be positive");
    if (config.hidden.empty()) throw ConfigError("mlp: at least one hidden layer required");
    for (int w : config.hidden) {
        if (w < 1) throw ConfigError("mlp: hidden widths must be positive");
    }
    if (config.output_dim < 1 || config.output_dim > 3) {
        throw ConfigError("mlp: output dimension must be 1..3");
    }
    if (!std::isfinite(config.beta)) throw ConfigError("mlp: beta must be finite");
}

CoordinateModel init_model(const EncodingSpec& encoding, MlpConfig mlp, std::uint64_t seed) {
    const int encoded = encoding_output_dim(encoding);
    if (mlp.input_dim == 0) mlp.input_dim = encoded;
    if (mlp.input_dim != encoded) {
        throw DimensionError("init_model: MLP input dimension " + std::to_string(mlp.input_dim) +
                             " does not match encoding output " + std::to_string(encoded));
    }
    validate(mlp);

    CoordinateModel model;
    model.encoding = std::visit(Overloaded{
                                    [](const IdentitySpec& s) -> EncodingState { return s; },
                                    [](const FfeSpec& s) -> EncodingState {
                                        validate(s);
                                        return s;
                                    },
                                    [&](const MpeSpec& s) -> EncodingState {
                                        return make_grid_stack(s, seed ^ kGridSeedSalt);
                                    },
                                },
                                encoding);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    model.network.config = mlp;
    int fan_in = mlp.input_dim;
    std::vector<int> widths = mlp.hidden;
    widths.push_back(mlp.output_dim);
    for (int out : widths) {
        DenseLayer layer;
        layer.weight.resize(out, fan_in);
        layer.bias.resize(out);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = normal(rng);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = normal(rng);
        model.network.layers.push_back(std::move(layer));
        fan_in = out;
    }
    return model;
}

Vector encode(const CoordinateModel& model, std::span<const double> x) {
    if (static_cast<int>(x.size()) != model.input_dim()) {
        throw DimensionError("encode: point has " + std::to_string(x.size()) +
                             " components, model expects " + std::to_string(model.input_dim()));
    }
    Vector out(model.encoded_dim());
    encode_into(model.encoding, x, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
    return out;
}

Matrix encode_batch(const CoordinateModel& model, const Matrix& points) {
    if (points.cols() != model.input_dim()) {
        throw DimensionError("encode_batch: points have " + std::to_string(points.cols()) +
                             " columns, model expects " + std::to_string(model.input_dim()));
    }
    const auto d = static_cast<std::size_t>(points.cols());
    Matrix out(model.encoded_dim(), points.rows());
    std::vector<double> x(d);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        for (std::size_t a = 0; a < d; ++a) x[a] = points(i, static_cast<Eigen::Index>(a));
        encode_into(model.encoding, x,
                    std::span<double>(out.col(i).data(), static_cast<std::size_t>(out.rows())));
    }
    return out;
}

ForwardTrace forward_trace(const MlpNetwork& net, const Matrix& encoded) {
    ForwardTrace trace;
    const std::size_t n_layers = net.layers.size();
    trace.inputs.reserve(n_layers);
    trace.pre.reserve(n_layers);
    trace.inputs.push_back(encoded);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& layer = net.layers[l];
        Matrix pre = net.input_scale(l) * (layer.weight * trace.inputs[l]);
        pre.colwise() += net.config.beta * layer.bias;
        if (l + 1 < n_layers) trace.inputs.push_back(activate(pre, net.config.activation));
        trace.pre.push_back(std::move(pre));
    }
    trace.output = trace.pre.back();
    if (!trace.output.allFinite()) throw NumericError("forward: non-finite network output");
    return trace;
}

Vector forward(const CoordinateModel& model, std::span<const double> x) {
    const Vector e = encode(model, x);
    return forward_trace(model.network, e).output.col(0);
}

Matrix forward_batch(const CoordinateModel& model, const Matrix& points) {
    return forward_trace(model.network, encode_batch(model, points)).output.transpose();
}

ChannelGradients channel_gradients(const MlpNetwork& net, const Matrix& encoded, int channel) {
    if (channel < 0 || channel >= net.config.output_dim) {
        throw DimensionError("channel " + std::to_string(channel) + " out of range");
    }
    ChannelGradients out;
    out.trace = forward_trace(net, encoded);
    const std::size_t n_layers = net.layers.size();
    out.deltas.resize(n_layers);
    Matrix delta = Matrix::Zero(net.config.output_dim, encoded.cols());
    delta.row(channel).setOnes();
    for (std::size_t l = n_layers; l-- > 0;) {
        Matrix upstream = net.input_scale(l) * (net.layers[l].weight.transpose() * delta);
        out.deltas[l] = std::move(delta);
        if (l == 0) {
            out.input_gradient = std::move(upstream);
        } else {
            delta = upstream.cwiseProduct(
                activation_derivative(out.trace.pre[l - 1], net.config.activation));
        }
    }
    return out;
}

Vector param_jacobian(const CoordinateModel& model, std::span<const double> x, int channel) {
    const Vector e = encode(model, x);
    const ChannelGradients cg = channel_gradients(model.network, e, channel);
    const MlpNetwork& net = model.network;

    Vector jac = Vector::Zero(static_cast<Eigen::Index>(model.parameter_count()));
    Eigen::Index o = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const double scale = net.input_scale(l);
        const Matrix& delta = cg.deltas[l];
        const Matrix& in = cg.trace.inputs[l];
        for (Eigen::Index r = 0; r < delta.rows(); ++r) {
            for (Eigen::Index c = 0; c < in.rows(); ++c) jac[o++] = scale * delta(r, 0) * in(c, 0);
        }
        for (Eigen::Index r = 0; r < delta.rows(); ++r) jac[o++] = net.config.beta * delta(r, 0);
    }
    if (const GridStack* g = model.grids()) {
        for (const auto& entry : mpe_grid_gradient(x, *g).entries) {
            jac[o + static_cast<Eigen::Index>(entry.parameter)] +=
                cg.input_gradient(static_cast<Eigen::Index>(entry.output), 0) * entry.value;
        }
    }
    if (!jac.allFinite()) throw NumericError("param_jacobian: non-finite gradient");
    return jac;
}

Vector flatten_parameters(const CoordinateModel& model) {
    Vector flat(static_cast<Eigen::Index>(model.parameter_count()));
    Eigen::Index o = 0;
    for (const auto& layer : model.network.layers) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) flat[o++] = layer.weight(r, c);
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) flat[o++] = layer.bias[r];
    }
    if (const GridStack* g = model.grids()) {
        for (const auto& layer : g->layers) {
            for (double w : layer.weights) flat[o++] = w;
        }
    }
    return flat;
}

void assign_parameters(CoordinateModel& model, const Vector& flat) {
    if (flat.size() != static_cast<Eigen::Index>(model.parameter_count())) {
        throw DimensionError("assign_parameters: expected " +
                             std::to_string(model.parameter_count()) + " values");
    }
    Eigen::Index o = 0;
    for (auto& layer : model.network.layers) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = flat[o++];
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = flat[o++];
    }
    if (GridStack* g = model.grids()) {
        for (auto& layer : g->layers) {
            for (double& w : layer.weights) w = flat[o++];
        }
    }
}

double evaluate_loss(const Matrix& outputs, const Matrix& targets, Loss loss) {
    if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
        throw DimensionError("evaluate_loss: output/target shape mismatch");
    }
    const auto count = static_cast<double>(outputs.size());
    if (loss == Loss::MeanSquaredError) return (outputs - targets).squaredNorm() / count;
    const auto f = outputs.array();
    const auto softplus = f.max(0.0) + (-f.abs()).exp().log1p();
    return (softplus - targets.array() * f).sum() / count;
}

double train_step(CoordinateModel& model, const Matrix& points, const Matrix& targets,
                  double learning_rate, Loss loss) {
    if (points.rows() == 0) throw DimensionError("train_step: empty batch");
    if (targets.rows() != points.rows() || targets.cols() != model.output_dim()) {
        throw DimensionError("train_step: targets must be N × output_dim");
    }
    const Matrix encoded = encode_batch(model, points);
    const ForwardTrace trace = forward_trace(model.network, encoded);
    const Matrix target_t = targets.transpose();
    const double value = evaluate_loss(trace.output, target_t, loss);
    if (!std::isfinite(value)) {
        throw NumericError("train_step: non-finite loss (learning rate " +
                           std::to_string(learning_rate) + " may be too large)");
    }

    const auto count = static_cast<double>(trace.output.size());
    Matrix output_grad;
    if (loss == Loss::MeanSquaredError) {
        output_grad = (2.0 / count) * (trace.output - target_t);
    } else {
        const Matrix sigmoid = (1.0 / (1.0 + (-trace.output.array()).exp())).matrix();
        output_grad = (sigmoid - target_t) / count;
    }
    const Gradients grads = backpropagate(model.network, trace, std::move(output_grad));

    for (std::size_t l = 0; l < model.network.layers.size(); ++l) {
        model.network.layers[l].weight -= learning_rate * grads.weights[l];
        model.network.layers[l].bias -= learning_rate * grads.biases[l];
    }
    if (GridStack* g = model.grids()) {
        const auto d = static_cast<std::size_t>(g->input_dim);
        const auto k = static_cast<std::size_t>(g->slots);
        std::vector<double> x(d);
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            for (std::size_t a = 0; a < d; ++a) x[a] = points(i, static_cast<Eigen::Index>(a));
            for (std::size_t l = 0; l < g->layers.size(); ++l) {
                GridLayer& layer = g->layers[l];
                const InterpFootprint fp = interp_footprint(x, layer, g->input_dim);
                for (std::size_t s = 0; s < k; ++s) {
                    const double upstream =
                        grads.input(static_cast<Eigen::Index>(l * k + s), i) * learning_rate;
                    for (int c = 0; c < fp.count; ++c) {
                        const auto uc = static_cast<std::size_t>(c);
                        layer.weights[fp.nodes[uc] * k + s] -= upstream * fp.weights[uc];
                    }
                }
            }
        }
    }
    return value;
}

}  // namespace ntklab
