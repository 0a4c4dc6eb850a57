#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pullback/linalg.hpp"
#include "pullback/rng.hpp"

namespace pullback {

enum class LayerKind { affine, tanh, sigmoid, frozen_norm };

const char* to_string(LayerKind kind);

// One stage of an MLP. Affine layers own weight (out×in) and bias; frozen-norm
// layers own a per-feature scale and shift (y = scale ⊙ x + shift) that are
// not trained by gradient descent.
struct Layer {
    LayerKind kind = LayerKind::affine;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    DenseMatrix weight;
    DenseVector bias;
    DenseVector scale;
    DenseVector shift;

    static Layer affine(DenseMatrix weight, DenseVector bias);
    static Layer tanh(std::size_t dim);
    static Layer sigmoid(std::size_t dim);
    // Starts as the identity map.
    static Layer frozen_norm(std::size_t dim);

    std::size_t parameter_count() const noexcept;
};

// Activations recorded by MlpNetwork::forward. values[0] is the input,
// values[i + 1] the output of layer i.
struct ForwardTape {
    std::vector<DenseVector> values;

    std::span<const double> output() const { return values.back(); }
};

class MlpNetwork {
public:
    MlpNetwork() = default;
    MlpNetwork(std::size_t input_dim, std::vector<Layer> layers);

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept { return output_dim_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    Layer& layer(std::size_t i) { return layers_.at(i); }

    DenseVector evaluate(std::span<const double> x) const;
    ForwardTape forward(std::span<const double> x) const;

    // Reverse pass for ⟨upstream, net(x)⟩. Parameter gradients are added into
    // `grad` (length parameter_count(), affine layers in order, weight then
    // bias). Returns the gradient with respect to the input.
    DenseVector backward(const ForwardTape& tape, std::span<const double> upstream,
                         std::span<double> grad) const;

    // output_dim × input_dim, accumulated forward through the layer chain.
    DenseMatrix input_jacobian(std::span<const double> x) const;

    std::size_t parameter_count() const noexcept;
    void copy_parameters(std::span<double> out) const;
    void load_parameters(std::span<const double> in);

    friend bool operator==(const MlpNetwork&, const MlpNetwork&);

private:
    void check_input(std::span<const double> x) const;

    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 0;
    std::vector<Layer> layers_;
};

// Flat gradient of ⟨upstream, net(x)⟩ with respect to every parameter.
DenseVector param_grad(const MlpNetwork& net, std::span<const double> x, std::span<const double> upstream);

// Affine layer with weights uniform in ±√(6/(fan_in + fan_out)) and zero bias.
Layer glorot_affine(std::size_t in_dim, std::size_t out_dim, RngState& rng);

enum class Activation { tanh, sigmoid };

struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 0;
    Activation activation = Activation::tanh;
    // Insert a frozen-norm layer before every hidden activation.
    bool normalization = false;
};

// affine → [norm] → act for every hidden width, then a final affine layer.
MlpNetwork build_mlp(const MlpSpec& spec, RngState& rng);

}  // namespace pullback
