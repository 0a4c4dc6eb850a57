#include "pullback/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pullback/errors.hpp"

namespace pullback {

namespace {

double logistic(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

void require_same_length(std::size_t a, std::size_t b, const char* op) {
    if (a != b) {
        throw ShapeError(std::string(op) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) +
                         ")");
    }
}

struct Offsets {
    std::size_t trunk = 0;
    std::size_t mu = 0;
    std::size_t logsigma = 0;
    std::size_t decoder = 0;
    std::size_t decoder_logsigma = 0;
    std::size_t total = 0;
};

Offsets layout(const VaeModel& m) {
    Offsets o;
    o.trunk = 0;
    o.mu = o.trunk + m.encoder_trunk.parameter_count();
    o.logsigma = o.mu + m.mu_head.parameter_count();
    o.decoder = o.logsigma + m.logsigma_head.parameter_count();
    o.decoder_logsigma = o.decoder + m.decoder.parameter_count();
    o.total = o.decoder_logsigma + (m.decoder_logsigma ? m.decoder_logsigma->parameter_count() : 0);
    return o;
}

std::span<double> slice(std::span<double> grad, std::size_t offset, const MlpNetwork& net) {
    return grad.subspan(offset, net.parameter_count());
}

struct EncoderPass {
    ForwardTape trunk;
    ForwardTape mu;
    ForwardTape logsigma;
    DenseVector log_sigma;  // clamped
    DenseVector sigma;
    std::vector<bool> clamped;

    std::span<const double> mean() const { return mu.output(); }
};

EncoderPass encoder_forward(const VaeModel& model, std::span<const double> x) {
    EncoderPass p;
    p.trunk = model.encoder_trunk.forward(x);
    p.mu = model.mu_head.forward(p.trunk.output());
    p.logsigma = model.logsigma_head.forward(p.trunk.output());
    const auto raw = p.logsigma.output();
    p.log_sigma.resize(raw.size());
    p.sigma.resize(raw.size());
    p.clamped.resize(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) {
        p.clamped[k] = raw[k] < kLogSigmaMin || raw[k] > kLogSigmaMax;
        p.log_sigma[k] = std::clamp(raw[k], kLogSigmaMin, kLogSigmaMax);
        p.sigma[k] = std::exp(p.log_sigma[k]);
    }
    return p;
}

// dlog_sigma is with respect to the clamped value; entries that were clamped
// carry no gradient. Pass an empty span to skip the log σ head.
void encoder_backward(const VaeModel& model, const Offsets& off, const EncoderPass& p,
                      std::span<const double> dmu, std::span<const double> dlog_sigma, std::span<double> grad) {
    DenseVector dh = model.mu_head.backward(p.mu, dmu, slice(grad, off.mu, model.mu_head));
    if (!dlog_sigma.empty()) {
        DenseVector masked(dlog_sigma.begin(), dlog_sigma.end());
        for (std::size_t k = 0; k < masked.size(); ++k)
            if (p.clamped[k]) masked[k] = 0.0;
        const DenseVector dh2 = model.logsigma_head.backward(p.logsigma, masked, slice(grad, off.logsigma, model.logsigma_head));
        for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i];
    }
    model.encoder_trunk.backward(p.trunk, dh, slice(grad, off.trunk, model.encoder_trunk));
}

struct DecoderPass {
    ForwardTape out;
    std::optional<ForwardTape> logsigma;
};

DecoderPass decoder_forward(const VaeModel& model, std::span<const double> z, bool with_sigma) {
    DecoderPass p;
    p.out = model.decoder.forward(z);
    if (with_sigma && model.decoder_logsigma) p.logsigma = model.decoder_logsigma->forward(z);
    return p;
}

// Reconstruction negative log-likelihood and its gradient with respect to the
// decoder outputs (and the decoder log σ head when present).
double reconstruction_terms(const VaeModel& model, const DecoderPass& p, std::span<const double> x,
                            DenseVector& d_out, DenseVector& d_logsigma) {
    const auto out = p.out.output();
    d_out.assign(out.size(), 0.0);
    d_logsigma.clear();
    double recon = 0.0;
    if (model.likelihood == Likelihood::bernoulli) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            recon += softplus(out[i]) - x[i] * out[i];
            d_out[i] = logistic(out[i]) - x[i];
        }
    } else if (!p.logsigma) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double r = out[i] - x[i];
            recon += 0.5 * r * r;
            d_out[i] = r;
        }
    } else {
        const auto raw = p.logsigma->output();
        d_logsigma.assign(raw.size(), 0.0);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double s = std::clamp(raw[i], kLogSigmaMin, kLogSigmaMax);
            const double inv_var = std::exp(-2.0 * s);
            const double r = out[i] - x[i];
            recon += 0.5 * r * r * inv_var + s;
            d_out[i] = r * inv_var;
            const bool clamped = raw[i] < kLogSigmaMin || raw[i] > kLogSigmaMax;
            d_logsigma[i] = clamped ? 0.0 : 1.0 - r * r * inv_var;
        }
    }
    return recon;
}

DenseVector decoder_backward(const VaeModel& model, const Offsets& off, const DecoderPass& p,
                             std::span<const double> d_out, std::span<const double> d_logsigma,
                             std::span<double> grad) {
    DenseVector dz = model.decoder.backward(p.out, d_out, slice(grad, off.decoder, model.decoder));
    if (p.logsigma && !d_logsigma.empty()) {
        const DenseVector dz2 = model.decoder_logsigma->backward(
            *p.logsigma, d_logsigma, slice(grad, off.decoder_logsigma, *model.decoder_logsigma));
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += dz2[i];
    }
    return dz;
}

void check_likelihood_domain(const VaeModel& model, std::span<const double> x) {
    if (model.likelihood != Likelihood::bernoulli) return;
    for (double v : x) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw DomainError("bernoulli likelihood requires inputs in [0,1], got " + std::to_string(v));
        }
    }
}

// Adds scale·∇C into grad and returns scale·∂C/∂z_m.
double mixup_accumulate(const VaeModel& model, const Offsets& off, std::span<const double> x_m,
                        std::span<const double> z_m, double scale, std::span<double> grad, DenseVector& dz_m) {
    require_same_length(x_m.size(), model.input_dim(), "mixup_penalty");
    require_same_length(z_m.size(), model.latent_dim(), "mixup_penalty");
    constexpr double kTiny = 1e-12;

    const EncoderPass enc = encoder_forward(model, x_m);
    const DenseVector r1 = subtract(z_m, enc.mean());
    const double n1 = norm2(r1);

    const DecoderPass dec = decoder_forward(model, z_m, false);
    const auto out = dec.out.output();
    DenseVector g(out.begin(), out.end());
    if (model.likelihood == Likelihood::bernoulli)
        for (double& v : g) v = logistic(v);
    const DenseVector r2 = subtract(g, x_m);
    const double n2 = norm2(r2);

    dz_m.assign(z_m.size(), 0.0);
    if (n1 > kTiny) {
        DenseVector dmu(r1.size());
        for (std::size_t k = 0; k < r1.size(); ++k) {
            dmu[k] = -scale * r1[k] / n1;
            dz_m[k] += scale * r1[k] / n1;
        }
        encoder_backward(model, off, enc, dmu, {}, grad);
    }
    if (n2 > kTiny) {
        DenseVector d_out(r2.size());
        for (std::size_t i = 0; i < r2.size(); ++i) {
            d_out[i] = scale * r2[i] / n2;
            if (model.likelihood == Likelihood::bernoulli) d_out[i] *= g[i] * (1.0 - g[i]);
        }
        const DenseVector dz = decoder_backward(model, off, dec, d_out, {}, grad);
        for (std::size_t k = 0; k < dz.size(); ++k) dz_m[k] += dz[k];
    }
    return n1 + n2;
}

std::vector<Layer> hidden_stack(std::size_t input_dim, std::span<const std::size_t> widths, bool normalization,
                                RngState& rng) {
    std::vector<Layer> layers;
    std::size_t width = input_dim;
    for (std::size_t h : widths) {
        layers.push_back(glorot_affine(width, h, rng));
        if (normalization) layers.push_back(Layer::frozen_norm(h));
        layers.push_back(Layer::tanh(h));
        width = h;
    }
    return layers;
}

void calibrate_network(MlpNetwork& net, std::span<const DenseVector> inputs) {
    constexpr double kNormEps = 1e-5;
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
        if (net.layers()[li].kind == LayerKind::frozen_norm) {
            Layer& l = net.layer(li);
            std::fill(l.scale.begin(), l.scale.end(), 1.0);
            std::fill(l.shift.begin(), l.shift.end(), 0.0);
        }
    }
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
        if (net.layers()[li].kind != LayerKind::frozen_norm) continue;
        const std::size_t dim = net.layers()[li].in_dim;
        DenseVector mean(dim, 0.0);
        DenseVector sq(dim, 0.0);
        for (const DenseVector& x : inputs) {
            const ForwardTape tape = net.forward(x);
            const DenseVector& v = tape.values[li];
            for (std::size_t i = 0; i < dim; ++i) {
                mean[i] += v[i];
                sq[i] += v[i] * v[i];
            }
        }
        Layer& l = net.layer(li);
        const double n = static_cast<double>(inputs.size());
        for (std::size_t i = 0; i < dim; ++i) {
            const double m = mean[i] / n;
            const double var = std::max(sq[i] / n - m * m, 0.0);
            l.scale[i] = 1.0 / std::sqrt(var + kNormEps);
            l.shift[i] = -m * l.scale[i];
        }
    }
}

bool has_normalization(const MlpNetwork& net) {
    return std::any_of(net.layers().begin(), net.layers().end(),
                       [](const Layer& l) { return l.kind == LayerKind::frozen_norm; });
}

}  // namespace

const char* to_string(Likelihood likelihood) {
    return likelihood == Likelihood::bernoulli ? "bernoulli" : "gaussian";
}

Likelihood parse_likelihood(const std::string& name) {
    if (name == "bernoulli") return Likelihood::bernoulli;
    if (name == "gaussian") return Likelihood::gaussian;
    throw InvalidArgument("unknown likelihood '" + name + "'");
}

Architecture Architecture::paper() { return Architecture{{256, 256, 512, 32}, 32, false, false}; }

Architecture Architecture::small() { return Architecture{{64, 64}, 8, false, false}; }

Architecture Architecture::from_profile(const std::string& name) {
    if (name == "paper") return paper();
    if (name == "small") return small();
    throw InvalidArgument("unknown architecture profile '" + name + "'");
}

void VaeModel::validate() const {
    if (mu_head.input_dim() != encoder_trunk.output_dim() || logsigma_head.input_dim() != encoder_trunk.output_dim()) {
        throw ShapeError("VaeModel: encoder heads do not match the trunk output");
    }
    if (logsigma_head.output_dim() != mu_head.output_dim()) {
        throw ShapeError("VaeModel: mean and log-sigma heads disagree on the latent dimension");
    }
    if (decoder.input_dim() != latent_dim() || decoder.output_dim() != input_dim()) {
        throw ShapeError("VaeModel: decoder must map the latent space back to the input space");
    }
    if (decoder_logsigma) {
        if (decoder_logsigma->input_dim() != latent_dim() || decoder_logsigma->output_dim() != input_dim()) {
            throw ShapeError("VaeModel: decoder log-sigma head has the wrong shape");
        }
        if (likelihood == Likelihood::bernoulli) {
            throw InvalidArgument("VaeModel: a decoder sigma head requires the gaussian likelihood");
        }
    }
    if (!std::isfinite(beta) || beta < 0.0) throw InvalidArgument("VaeModel: beta must be finite and non-negative");
}

std::size_t VaeModel::parameter_count() const noexcept { return layout(*this).total; }

DenseVector VaeModel::parameters() const {
    const Offsets off = layout(*this);
    DenseVector p(off.total);
    std::span<double> all(p);
    encoder_trunk.copy_parameters(slice(all, off.trunk, encoder_trunk));
    mu_head.copy_parameters(slice(all, off.mu, mu_head));
    logsigma_head.copy_parameters(slice(all, off.logsigma, logsigma_head));
    decoder.copy_parameters(slice(all, off.decoder, decoder));
    if (decoder_logsigma) decoder_logsigma->copy_parameters(slice(all, off.decoder_logsigma, *decoder_logsigma));
    return p;
}

void VaeModel::set_parameters(std::span<const double> p) {
    const Offsets off = layout(*this);
    require_same_length(p.size(), off.total, "VaeModel::set_parameters");
    encoder_trunk.load_parameters(p.subspan(off.trunk, encoder_trunk.parameter_count()));
    mu_head.load_parameters(p.subspan(off.mu, mu_head.parameter_count()));
    logsigma_head.load_parameters(p.subspan(off.logsigma, logsigma_head.parameter_count()));
    decoder.load_parameters(p.subspan(off.decoder, decoder.parameter_count()));
    if (decoder_logsigma)
        decoder_logsigma->load_parameters(p.subspan(off.decoder_logsigma, decoder_logsigma->parameter_count()));
}

VaeModel build_vae(const Architecture& arch, std::size_t input_dim, Likelihood likelihood, double beta,
                   RngState& rng) {
    if (arch.encoder_hidden.empty() || arch.latent_dim == 0 || input_dim == 0) {
        throw InvalidArgument("build_vae: architecture needs at least one hidden layer and a latent dimension");
    }
    VaeModel m;
    m.beta = beta;
    m.likelihood = likelihood;

    m.encoder_trunk = MlpNetwork(input_dim, hidden_stack(input_dim, arch.encoder_hidden, arch.normalization, rng));
    const std::size_t h = arch.encoder_hidden.back();
    m.mu_head = MlpNetwork(h, {glorot_affine(h, arch.latent_dim, rng)});
    m.logsigma_head = MlpNetwork(h, {glorot_affine(h, arch.latent_dim, rng)});

    std::vector<std::size_t> mirrored(arch.encoder_hidden.rbegin(), arch.encoder_hidden.rend());
    std::vector<Layer> dec = hidden_stack(arch.latent_dim, mirrored, arch.normalization, rng);
    dec.push_back(glorot_affine(mirrored.back(), input_dim, rng));
    m.decoder = MlpNetwork(arch.latent_dim, std::move(dec));

    if (arch.decoder_sigma) {
        m.decoder_logsigma = MlpNetwork(arch.latent_dim, {glorot_affine(arch.latent_dim, input_dim, rng)});
    }
    m.validate();
    return m;
}

Encoding encode(const VaeModel& model, std::span<const double> x) {
    const DenseVector h = model.encoder_trunk.evaluate(x);
    Encoding e{model.mu_head.evaluate(h), model.logsigma_head.evaluate(h)};
    for (double& v : e.log_sigma) v = std::clamp(v, kLogSigmaMin, kLogSigmaMax);
    return e;
}

DenseVector encode_mean(const VaeModel& model, std::span<const double> x) {
    return model.mu_head.evaluate(model.encoder_trunk.evaluate(x));
}

LatentCode sample_latent(const VaeModel& model, std::span<const double> x, RngState& rng) {
    Encoding e = encode(model, x);
    LatentCode code;
    code.epsilon = sample_std_normal(rng, e.mu.size());
    code.z = reparameterize(e.mu, e.log_sigma, code.epsilon);
    code.mu = std::move(e.mu);
    code.log_sigma = std::move(e.log_sigma);
    return code;
}

DenseVector reparameterize(std::span<const double> mu, std::span<const double> log_sigma,
                           std::span<const double> epsilon) {
    require_same_length(log_sigma.size(), mu.size(), "reparameterize");
    require_same_length(epsilon.size(), mu.size(), "reparameterize");
    DenseVector z(mu.size());
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = mu[k] + std::exp(log_sigma[k]) * epsilon[k];
    return z;
}

DenseVector decode_mean(const VaeModel& model, std::span<const double> z) {
    DenseVector out = model.decoder.evaluate(z);
    if (model.likelihood == Likelihood::bernoulli)
        for (double& v : out) v = logistic(v);
    return out;
}

DenseVector reconstruct(const VaeModel& model, std::span<const double> x) {
    return decode_mean(model, encode_mean(model, x));
}

double kl_term(std::span<const double> mu, std::span<const double> log_sigma) {
    require_same_length(log_sigma.size(), mu.size(), "kl_term");
    if (!all_finite(mu) || !all_finite(log_sigma)) throw InvalidArgument("kl_term: non-finite input");
    double kl = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        // σ² − 1 − 2 log σ is computed as expm1(2s) − 2s to stay exact near s = 0.
        const double two_s = 2.0 * log_sigma[k];
        kl += mu[k] * mu[k] + std::expm1(two_s) - two_s;
    }
    return 0.5 * kl;
}

ElboParts elbo_loss(const VaeModel& model, std::span<const double> x, std::span<const double> epsilon) {
    require_same_length(epsilon.size(), model.latent_dim(), "elbo_loss");
    check_likelihood_domain(model, x);
    const EncoderPass enc = encoder_forward(model, x);
    const DenseVector z = reparameterize(enc.mean(), enc.log_sigma, epsilon);
    const DecoderPass dec = decoder_forward(model, z, true);
    DenseVector d_out;
    DenseVector d_ls;
    ElboParts parts;
    parts.recon = reconstruction_terms(model, dec, x, d_out, d_ls);
    parts.kl = kl_term(enc.mean(), enc.log_sigma);
    parts.loss = parts.recon + model.beta * parts.kl;
    return parts;
}

DenseVector elbo_gradient(const VaeModel& model, std::span<const double> x, std::span<const double> epsilon) {
    require_same_length(epsilon.size(), model.latent_dim(), "elbo_gradient");
    check_likelihood_domain(model, x);
    const Offsets off = layout(model);
    DenseVector grad(off.total, 0.0);

    const EncoderPass enc = encoder_forward(model, x);
    const DenseVector z = reparameterize(enc.mean(), enc.log_sigma, epsilon);
    const DecoderPass dec = decoder_forward(model, z, true);
    DenseVector d_out;
    DenseVector d_ls;
    reconstruction_terms(model, dec, x, d_out, d_ls);
    const DenseVector dz = decoder_backward(model, off, dec, d_out, d_ls, grad);

    const auto mu = enc.mean();
    DenseVector dmu(mu.size());
    DenseVector dls(mu.size());
    for (std::size_t k = 0; k < mu.size(); ++k) {
        dmu[k] = dz[k] + model.beta * mu[k];
        dls[k] = dz[k] * enc.sigma[k] * epsilon[k] + model.beta * (enc.sigma[k] * enc.sigma[k] - 1.0);
    }
    encoder_backward(model, off, enc, dmu, dls, grad);
    return grad;
}

MixupSample mixup_pair(std::span<const double> x_i, std::span<const double> x_j, std::span<const double> z_i,
                       std::span<const double> z_j, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw InvalidArgument("mixup_pair: alpha must lie in [0,1], got " + std::to_string(alpha));
    }
    require_same_length(x_j.size(), x_i.size(), "mixup_pair");
    require_same_length(z_j.size(), z_i.size(), "mixup_pair");
    MixupSample m;
    m.x.resize(x_i.size());
    m.z.resize(z_i.size());
    for (std::size_t i = 0; i < x_i.size(); ++i) m.x[i] = alpha * x_i[i] + (1.0 - alpha) * x_j[i];
    for (std::size_t k = 0; k < z_i.size(); ++k) m.z[k] = alpha * z_i[k] + (1.0 - alpha) * z_j[k];
    return m;
}

double mixup_penalty(const VaeModel& model, std::span<const double> x_m, std::span<const double> z_m) {
    require_same_length(x_m.size(), model.input_dim(), "mixup_penalty");
    require_same_length(z_m.size(), model.latent_dim(), "mixup_penalty");
    const DenseVector mu = encode_mean(model, x_m);
    const DenseVector g = decode_mean(model, z_m);
    return norm2(subtract(z_m, mu)) + norm2(subtract(g, x_m));
}

std::pair<DenseVector, DenseVector> mixup_penalty_gradient(const VaeModel& model, std::span<const double> x_m,
                                                           std::span<const double> z_m) {
    const Offsets off = layout(model);
    DenseVector grad(off.total, 0.0);
    DenseVector dz;
    mixup_accumulate(model, off, x_m, z_m, 1.0, grad, dz);
    return {std::move(grad), std::move(dz)};
}

void calibrate_normalization(VaeModel& model, std::span<const DenseVector> samples) {
    if (samples.empty()) throw InvalidArgument("calibrate_normalization: no samples");
    if (has_normalization(model.encoder_trunk)) calibrate_network(model.encoder_trunk, samples);
    if (has_normalization(model.decoder)) {
        std::vector<DenseVector> latents;
        latents.reserve(samples.size());
        for (const DenseVector& x : samples) latents.push_back(encode_mean(model, x));
        calibrate_network(model.decoder, latents);
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw InvalidArgument("TrainConfig: learning_rate must be positive");
    if (batch_size < 1) throw InvalidArgument("TrainConfig: batch_size must be at least 1");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("TrainConfig: beta must be non-negative");
    if (!(mixup_weight >= 0.0) || !std::isfinite(mixup_weight))
        throw InvalidArgument("TrainConfig: mixup_weight must be non-negative");
    if (!(mixup_shape > 0.0)) throw InvalidArgument("TrainConfig: mixup_shape must be positive");
}

AdamOptimizer::AdamOptimizer(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(size, 0.0), v_(size, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
    require_same_length(params.size(), m_.size(), "AdamOptimizer::step");
    require_same_length(grad.size(), m_.size(), "AdamOptimizer::step");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

TrainResult train(VaeModel model, const Dataset& data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw InvalidArgument("train: dataset is empty");
    data.validate();
    model.validate();
    if (data.input_dim != model.input_dim()) {
        throw ShapeError("train: dataset dimension " + std::to_string(data.input_dim) + " does not match model input " +
                         std::to_string(model.input_dim()));
    }
    for (const DenseVector& x : data.samples) check_likelihood_domain(model, x);

    model.beta = config.beta;
    const bool normalized = has_normalization(model.encoder_trunk) || has_normalization(model.decoder);
    const Offsets off = layout(model);
    const std::size_t n = data.size();
    const std::size_t dz = model.latent_dim();
    const bool use_mixup = config.mixup_weight > 0.0;

    RngState rng(config.seed);
    AdamOptimizer adam(off.total, config.learning_rate);
    DenseVector params = model.parameters();
    DenseVector grad(off.total);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    struct SampleState {
        EncoderPass enc;
        DecoderPass dec;
        DenseVector eps;
        DenseVector z;
        DenseVector dz;
    };
    std::vector<SampleState> states;

    TrainResult result;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        if (normalized) calibrate_normalization(model, data.samples);
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);

        EpochLoss record;
        record.epoch = epoch + 1;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
            const std::size_t b = std::min(config.batch_size, n - start);
            const double inv = 1.0 / static_cast<double>(b);
            std::fill(grad.begin(), grad.end(), 0.0);
            states.assign(b, {});
            double batch_recon = 0.0;
            double batch_kl = 0.0;
            double batch_mix = 0.0;

            DenseVector d_out;
            DenseVector d_ls;
            for (std::size_t p = 0; p < b; ++p) {
                const DenseVector& x = data.samples[order[start + p]];
                SampleState& st = states[p];
                st.enc = encoder_forward(model, x);
                st.eps = sample_std_normal(rng, dz);
                st.z = reparameterize(st.enc.mean(), st.enc.log_sigma, st.eps);
                st.dec = decoder_forward(model, st.z, true);
                batch_recon += reconstruction_terms(model, st.dec, x, d_out, d_ls);
                for (double& v : d_out) v *= inv;
                for (double& v : d_ls) v *= inv;
                st.dz = decoder_backward(model, off, st.dec, d_out, d_ls, grad);
                batch_kl += kl_term(st.enc.mean(), st.enc.log_sigma);
            }

            if (use_mixup && b >= 2) {
                DenseVector dz_m;
                for (std::size_t p = 0; p < b; ++p) {
                    const std::size_t q = (p + 1 + rng.uniform_index(b - 1)) % b;
                    const double alpha = sample_beta(rng, config.mixup_shape, config.mixup_shape);
                    const MixupSample mix = mixup_pair(data.samples[order[start + p]], data.samples[order[start + q]],
                                                       states[p].z, states[q].z, alpha);
                    batch_mix += mixup_accumulate(model, off, mix.x, mix.z, config.mixup_weight * inv, grad, dz_m);
                    for (std::size_t k = 0; k < dz; ++k) {
                        states[p].dz[k] += alpha * dz_m[k];
                        states[q].dz[k] += (1.0 - alpha) * dz_m[k];
                    }
                }
            }

            for (std::size_t p = 0; p < b; ++p) {
                SampleState& st = states[p];
                const auto mu = st.enc.mean();
                DenseVector dmu(dz);
                DenseVector dls(dz);
                for (std::size_t k = 0; k < dz; ++k) {
                    const double s = st.enc.sigma[k];
                    dmu[k] = st.dz[k] + inv * model.beta * mu[k];
                    dls[k] = st.dz[k] * s * st.eps[k] + inv * model.beta * (s * s - 1.0);
                }
                encoder_backward(model, off, st.enc, dmu, dls, grad);
            }

            const double batch_total = batch_recon + model.beta * batch_kl + config.mixup_weight * batch_mix;
            if (!std::isfinite(batch_total) || !all_finite(grad)) {
                throw NumericalError("training diverged at epoch " + std::to_string(epoch + 1) + ", batch " +
                                     std::to_string(batch_index + 1));
            }
            adam.step(params, grad);
            model.set_parameters(params);

            record.recon += batch_recon;
            record.kl += batch_kl;
            record.mixup += batch_mix;
        }
        const double dn = static_cast<double>(n);
        record.recon /= dn;
        record.kl /= dn;
        record.mixup /= dn;
        record.total = record.recon + model.beta * record.kl + config.mixup_weight * record.mixup;
        result.history.push_back(record);
    }
    if (normalized) calibrate_normalization(model, data.samples);
    result.model = std::move(model);
    return result;
}

}  // namespace pullback
