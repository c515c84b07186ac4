#pragma once

#include "ntklab/encoding.hpp"
#include "ntklab/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ntklab {

enum class Activation {
    ReLU,
    /// Linear hidden layers; only used by the wide-network kernel oracle.
    Identity,
};

/// How the first layer's pre-activation is scaled. `FanIn` divides by √d_e
/// like every other layer; `None` gives the single-layer form
/// f(x) = W² φ(W¹x + βb)/√n used for the analytic wide-width kernel.
enum class InputScaling { FanIn, None };

struct MlpConfig {
    int input_dim = 0;
    std::vector<int> hidden;
    int output_dim = 1;
    double beta = 0.1;
    Activation activation = Activation::ReLU;
    InputScaling input_scaling = InputScaling::FanIn;
};

struct DenseLayer {
    Matrix weight;  // out × in
    Vector bias;    // out
};

/// NTK-parameterized MLP: layer l computes φ(W z / √n_l + β b) with n_l the
/// layer's input size, weights and biases drawn from N(0, 1). The last layer
/// is linear.
struct MlpNetwork {
    MlpConfig config;
    std::vector<DenseLayer> layers;

    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] double input_scale(std::size_t layer) const;
    [[nodiscard]] std::size_t hidden_neuron_count() const;
};

using EncodingState = std::variant<IdentitySpec, FfeSpec, GridStack>;

/// f_θ ∘ γ: an encoding (possibly with learnable grids) feeding an MLP.
struct CoordinateModel {
    EncodingState encoding;
    MlpNetwork network;

    [[nodiscard]] int input_dim() const;
    [[nodiscard]] int encoded_dim() const;
    [[nodiscard]] int output_dim() const { return network.config.output_dim; }
    [[nodiscard]] std::size_t mlp_parameter_count() const { return network.parameter_count(); }
    [[nodiscard]] std::size_t grid_parameter_count() const;
    [[nodiscard]] std::size_t parameter_count() const {
        return mlp_parameter_count() + grid_parameter_count();
    }
    [[nodiscard]] const GridStack* grids() const { return std::get_if<GridStack>(&encoding); }
    [[nodiscard]] GridStack* grids() { return std::get_if<GridStack>(&encoding); }
    [[nodiscard]] EncodingSpec encoding_spec() const;
};

void validate(const MlpConfig& config);

/// Samples every parameter from `seed`; the grid scalars use a stream derived
/// from the same seed. `mlp.input_dim` is overwritten with the encoding's
/// output dimension when it is 0 and must match it otherwise.
CoordinateModel init_model(const EncodingSpec& encoding, MlpConfig mlp, std::uint64_t seed);

/// Encodes a single point.
Vector encode(const CoordinateModel& model, std::span<const double> x);

/// Encodes N points given as rows of `points` (N × d); returns d_e × N.
Matrix encode_batch(const CoordinateModel& model, const Matrix& points);

Vector forward(const CoordinateModel& model, std::span<const double> x);

/// Outputs for rows of `points`; returns N × output_dim.
Matrix forward_batch(const CoordinateModel& model, const Matrix& points);

/// Per-layer activations of a batch, samples as columns.
struct ForwardTrace {
    std::vector<Matrix> inputs;  // inputs[l]: input to layer l (n_l × B)
    std::vector<Matrix> pre;     // pre[l]: pre-activation of layer l (out_l × B)
    Matrix output;               // out × B
};

ForwardTrace forward_trace(const MlpNetwork& net, const Matrix& encoded);

/// ∂f_c/∂(pre-activation) for every layer and ∂f_c/∂(encoded input), for one
/// output channel, samples as columns. This is everything the factored
/// kernel assembly needs.
struct ChannelGradients {
    ForwardTrace trace;
    std::vector<Matrix> deltas;  // deltas[l]: out_l × B
    Matrix input_gradient;       // d_e × B
};

ChannelGradients channel_gradients(const MlpNetwork& net, const Matrix& encoded, int channel);

/// ∂f_c(x)/∂θ flattened as: for each layer, W row-major then b; then the grid
/// scalars layer-major (absent for identity and Fourier encodings).
Vector param_jacobian(const CoordinateModel& model, std::span<const double> x, int channel = 0);

/// Flattened parameters in the same order as param_jacobian.
Vector flatten_parameters(const CoordinateModel& model);
void assign_parameters(CoordinateModel& model, const Vector& flat);

enum class Loss {
    MeanSquaredError,
    /// Sigmoid on the output followed by binary cross entropy, computed from
    /// logits.
    BinaryCrossEntropy,
};

/// Loss averaged over batch and channels.
double evaluate_loss(const Matrix& outputs, const Matrix& targets, Loss loss);

/// One plain SGD step θ ← θ − η ∇θ loss on the batch (rows of `points` and
/// `targets`); grid scalars are updated with the MLP. Returns the batch loss
/// before the update.
double train_step(CoordinateModel& model, const Matrix& points, const Matrix& targets,
                  double learning_rate, Loss loss);

}  // namespace ntklab
