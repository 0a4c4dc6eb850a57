#include "pullback/nn.hpp"

#include <cmath>
#include <string>

#include "pullback/errors.hpp"

namespace pullback {

namespace {

double logistic(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::affine: return "affine";
        case LayerKind::tanh: return "tanh";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::frozen_norm: return "frozen-norm";
    }
    return "unknown";
}

Layer Layer::affine(DenseMatrix weight, DenseVector bias) {
    if (bias.size() != weight.rows()) throw ShapeError("Layer::affine: bias length must match weight rows");
    Layer l;
    l.kind = LayerKind::affine;
    l.in_dim = weight.cols();
    l.out_dim = weight.rows();
    l.weight = std::move(weight);
    l.bias = std::move(bias);
    return l;
}

Layer Layer::tanh(std::size_t dim) {
    Layer l;
    l.kind = LayerKind::tanh;
    l.in_dim = l.out_dim = dim;
    return l;
}

Layer Layer::sigmoid(std::size_t dim) {
    Layer l;
    l.kind = LayerKind::sigmoid;
    l.in_dim = l.out_dim = dim;
    return l;
}

Layer Layer::frozen_norm(std::size_t dim) {
    Layer l;
    l.kind = LayerKind::frozen_norm;
    l.in_dim = l.out_dim = dim;
    l.scale.assign(dim, 1.0);
    l.shift.assign(dim, 0.0);
    return l;
}

std::size_t Layer::parameter_count() const noexcept {
    return kind == LayerKind::affine ? weight.rows() * weight.cols() + bias.size() : 0;
}

MlpNetwork::MlpNetwork(std::size_t input_dim, std::vector<Layer> layers)
    : input_dim_(input_dim), output_dim_(input_dim), layers_(std::move(layers)) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        if (l.in_dim != output_dim_) {
            throw ShapeError("MlpNetwork: layer " + std::to_string(i) + " expects " + std::to_string(l.in_dim) +
                             " inputs but receives " + std::to_string(output_dim_));
        }
        if (l.kind == LayerKind::frozen_norm &&
            (l.scale.size() != l.in_dim || l.shift.size() != l.in_dim || !all_finite(l.scale) ||
             !all_finite(l.shift))) {
            throw InvalidArgument("MlpNetwork: frozen-norm layer " + std::to_string(i) + " is malformed");
        }
        output_dim_ = l.out_dim;
    }
}

void MlpNetwork::check_input(std::span<const double> x) const {
    if (x.size() != input_dim_) {
        throw ShapeError("MlpNetwork: expected input of length " + std::to_string(input_dim_) + ", got " +
                         std::to_string(x.size()));
    }
    if (!all_finite(x)) throw InvalidArgument("MlpNetwork: non-finite input");
}

DenseVector MlpNetwork::evaluate(std::span<const double> x) const {
    return std::move(forward(x).values.back());
}

ForwardTape MlpNetwork::forward(std::span<const double> x) const {
    check_input(x);
    ForwardTape tape;
    tape.values.reserve(layers_.size() + 1);
    tape.values.emplace_back(x.begin(), x.end());
    for (const Layer& l : layers_) {
        const DenseVector& in = tape.values.back();
        DenseVector out;
        switch (l.kind) {
            case LayerKind::affine:
                out = matvec(l.weight, in);
                for (std::size_t i = 0; i < out.size(); ++i) out[i] += l.bias[i];
                break;
            case LayerKind::tanh:
                out.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
                break;
            case LayerKind::sigmoid:
                out.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = logistic(in[i]);
                break;
            case LayerKind::frozen_norm:
                out.resize(in.size());
                for (std::size_t i = 0; i < in.size(); ++i) out[i] = l.scale[i] * in[i] + l.shift[i];
                break;
        }
        tape.values.push_back(std::move(out));
    }
    return tape;
}

DenseVector MlpNetwork::backward(const ForwardTape& tape, std::span<const double> upstream,
                                 std::span<double> grad) const {
    if (upstream.size() != output_dim_) throw ShapeError("MlpNetwork::backward: upstream length mismatch");
    if (grad.size() != parameter_count()) throw ShapeError("MlpNetwork::backward: gradient buffer size mismatch");
    if (tape.values.size() != layers_.size() + 1) throw ShapeError("MlpNetwork::backward: tape does not match network");

    DenseVector g(upstream.begin(), upstream.end());
    std::size_t offset = grad.size();
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        const DenseVector& in = tape.values[li];
        const DenseVector& out = tape.values[li + 1];
        switch (l.kind) {
            case LayerKind::affine: {
                const std::size_t nw = l.weight.rows() * l.weight.cols();
                offset -= nw + l.bias.size();
                double* gw = grad.data() + offset;
                double* gb = gw + nw;
                for (std::size_t r = 0; r < l.out_dim; ++r) {
                    const double gr = g[r];
                    gb[r] += gr;
                    if (gr == 0.0) continue;
                    double* row = gw + r * l.in_dim;
                    for (std::size_t c = 0; c < l.in_dim; ++c) row[c] += gr * in[c];
                }
                g = matvec_t(l.weight, g);
                break;
            }
            case LayerKind::tanh:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - out[i] * out[i];
                break;
            case LayerKind::sigmoid:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] *= out[i] * (1.0 - out[i]);
                break;
            case LayerKind::frozen_norm:
                for (std::size_t i = 0; i < g.size(); ++i) g[i] *= l.scale[i];
                break;
        }
    }
    return g;
}

DenseMatrix MlpNetwork::input_jacobian(std::span<const double> x) const {
    const ForwardTape tape = forward(x);
    // Until the first affine layer the accumulated Jacobian is diagonal.
    DenseVector diag(input_dim_, 1.0);
    DenseMatrix jac;
    bool dense = false;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        const DenseVector& out = tape.values[li + 1];
        if (l.kind == LayerKind::affine) {
            if (!dense) {
                jac = l.weight;
                for (std::size_t r = 0; r < jac.rows(); ++r) {
                    auto row = jac.row(r);
                    for (std::size_t c = 0; c < row.size(); ++c) row[c] *= diag[c];
                }
                dense = true;
            } else {
                jac = matmul(l.weight, jac);
            }
            continue;
        }
        DenseVector d(l.out_dim);
        for (std::size_t i = 0; i < d.size(); ++i) {
            switch (l.kind) {
                case LayerKind::tanh: d[i] = 1.0 - out[i] * out[i]; break;
                case LayerKind::sigmoid: d[i] = out[i] * (1.0 - out[i]); break;
                case LayerKind::frozen_norm: d[i] = l.scale[i]; break;
                case LayerKind::affine: break;
            }
        }
        if (!dense) {
            for (std::size_t i = 0; i < d.size(); ++i) diag[i] *= d[i];
        } else {
            for (std::size_t r = 0; r < jac.rows(); ++r) {
                auto row = jac.row(r);
                for (double& v : row) v *= d[r];
            }
        }
    }
    return dense ? jac : DenseMatrix::diagonal(diag);
}

std::size_t MlpNetwork::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const Layer& l : layers_) n += l.parameter_count();
    return n;
}

void MlpNetwork::copy_parameters(std::span<double> out) const {
    if (out.size() != parameter_count()) throw ShapeError("MlpNetwork::copy_parameters: size mismatch");
    std::size_t offset = 0;
    for (const Layer& l : layers_) {
        if (l.kind != LayerKind::affine) continue;
        for (double v : l.weight.data()) out[offset++] = v;
        for (double v : l.bias) out[offset++] = v;
    }
}

void MlpNetwork::load_parameters(std::span<const double> in) {
    if (in.size() != parameter_count()) throw ShapeError("MlpNetwork::load_parameters: size mismatch");
    std::size_t offset = 0;
    for (Layer& l : layers_) {
        if (l.kind != LayerKind::affine) continue;
        for (double& v : l.weight.data()) v = in[offset++];
        for (double& v : l.bias) v = in[offset++];
    }
}

bool operator==(const MlpNetwork& a, const MlpNetwork& b) {
    if (a.input_dim_ != b.input_dim_ || a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        const Layer& x = a.layers_[i];
        const Layer& y = b.layers_[i];
        if (x.kind != y.kind || x.in_dim != y.in_dim || x.out_dim != y.out_dim || !(x.weight == y.weight) ||
            x.bias != y.bias || x.scale != y.scale || x.shift != y.shift) {
            return false;
        }
    }
    return true;
}

DenseVector param_grad(const MlpNetwork& net, std::span<const double> x, std::span<const double> upstream) {
    DenseVector grad(net.parameter_count(), 0.0);
    net.backward(net.forward(x), upstream, grad);
    return grad;
}

Layer glorot_affine(std::size_t in_dim, std::size_t out_dim, RngState& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    DenseMatrix w(out_dim, in_dim);
    for (double& v : w.data()) v = (2.0 * rng.uniform() - 1.0) * limit;
    return Layer::affine(std::move(w), DenseVector(out_dim, 0.0));
}

MlpNetwork build_mlp(const MlpSpec& spec, RngState& rng) {
    std::vector<Layer> layers;
    std::size_t width = spec.input_dim;
    for (std::size_t h : spec.hidden) {
        layers.push_back(glorot_affine(width, h, rng));
        if (spec.normalization) layers.push_back(Layer::frozen_norm(h));
        layers.push_back(spec.activation == Activation::tanh ? Layer::tanh(h) : Layer::sigmoid(h));
        width = h;
    }
    layers.push_back(glorot_affine(width, spec.output_dim, rng));
    return MlpNetwork(spec.input_dim, std::move(layers));
}

}  // namespace pullback
