#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pullback/data.hpp"
#include "pullback/linalg.hpp"
#include "pullback/nn.hpp"
#include "pullback/rng.hpp"

namespace pullback {

enum class Likelihood { bernoulli, gaussian };

const char* to_string(Likelihood likelihood);
Likelihood parse_likelihood(const std::string& name);

inline constexpr double kLogSigmaMin = -7.0;
inline constexpr double kLogSigmaMax = 7.0;

struct Architecture {
    std::vector<std::size_t> encoder_hidden;
    std::size_t latent_dim = 0;
    bool normalization = false;
    // Learned per-pixel log σ for a Gaussian decoder.
    bool decoder_sigma = false;

    // 256/256/512/32 trunk, 32-d latent, mirrored decoder.
    static Architecture paper();
    // 64/64 trunk, 8-d latent.
    static Architecture small();
    static Architecture from_profile(const std::string& name);
};

// Stochastic encoder q(z|x) = N(μ(x), diag σ(x)²) with μ and log σ heads on a
// shared trunk, plus a decoder whose output is the Bernoulli logits or the
// Gaussian mean. The optional decoder log σ head maps z to per-pixel log σ.
struct VaeModel {
    MlpNetwork encoder_trunk;
    MlpNetwork mu_head;
    MlpNetwork logsigma_head;
    MlpNetwork decoder;
    std::optional<MlpNetwork> decoder_logsigma;
    double beta = 1.0;
    Likelihood likelihood = Likelihood::gaussian;

    std::size_t input_dim() const noexcept { return encoder_trunk.input_dim(); }
    std::size_t latent_dim() const noexcept { return mu_head.output_dim(); }
    // Throws ShapeError/InvalidArgument when the pieces do not fit together.
    void validate() const;

    std::size_t parameter_count() const noexcept;
    DenseVector parameters() const;
    void set_parameters(std::span<const double> p);

    friend bool operator==(const VaeModel&, const VaeModel&) = default;
};

VaeModel build_vae(const Architecture& arch, std::size_t input_dim, Likelihood likelihood, double beta,
                   RngState& rng);

struct Encoding {
    DenseVector mu;
    DenseVector log_sigma;  // clamped to [kLogSigmaMin, kLogSigmaMax]
};

struct LatentCode {
    DenseVector mu;
    DenseVector log_sigma;
    DenseVector z;
    DenseVector epsilon;
};

Encoding encode(const VaeModel& model, std::span<const double> x);
DenseVector encode_mean(const VaeModel& model, std::span<const double> x);
LatentCode sample_latent(const VaeModel& model, std::span<const double> x, RngState& rng);

// z = μ + exp(log σ) ⊙ ε
DenseVector reparameterize(std::span<const double> mu, std::span<const double> log_sigma,
                           std::span<const double> epsilon);

// Decoder mean: sigmoid(logits) for Bernoulli, the raw output for Gaussian.
DenseVector decode_mean(const VaeModel& model, std::span<const double> z);
// decode_mean(μ(x)).
DenseVector reconstruct(const VaeModel& model, std::span<const double> x);

// KL(N(μ, σ²) ‖ N(0, I)) = ½ Σ (μ² + σ² − 1 − 2 log σ).
double kl_term(std::span<const double> mu, std::span<const double> log_sigma);

struct ElboParts {
    double loss = 0.0;
    double recon = 0.0;
    double kl = 0.0;
};

// Negative ELBO for one datum and one noise draw: recon + β·kl.
ElboParts elbo_loss(const VaeModel& model, std::span<const double> x, std::span<const double> epsilon);
// Gradient of elbo_loss with respect to model.parameters().
DenseVector elbo_gradient(const VaeModel& model, std::span<const double> x, std::span<const double> epsilon);

struct MixupSample {
    DenseVector x;
    DenseVector z;
};

// x_m = α x_i + (1 − α) x_j and likewise for z.
MixupSample mixup_pair(std::span<const double> x_i, std::span<const double> x_j, std::span<const double> z_i,
                       std::span<const double> z_j, double alpha);

// ‖z_m − μ(x_m)‖ + ‖g(z_m) − x_m‖ with g the decoder mean.
double mixup_penalty(const VaeModel& model, std::span<const double> x_m, std::span<const double> z_m);

// Gradient of mixup_penalty with respect to the parameters (first) and to
// z_m (second).
std::pair<DenseVector, DenseVector> mixup_penalty_gradient(const VaeModel& model, std::span<const double> x_m,
                                                           std::span<const double> z_m);

// Sets every frozen-norm layer from the statistics of its inputs over
// `samples` (scale = 1/√(var + 1e-5), shift = −mean·scale). Decoder layers see
// the encoder means.
void calibrate_normalization(VaeModel& model, std::span<const DenseVector> samples);

struct TrainConfig {
    double learning_rate = 0.003;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    double beta = 1.0;
    double mixup_weight = 0.0;
    // Beta(a, a) mixing coefficient.
    double mixup_shape = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochLoss {
    std::size_t epoch = 0;
    double recon = 0.0;
    double kl = 0.0;
    double mixup = 0.0;
    double total = 0.0;
};

struct TrainResult {
    VaeModel model;
    std::vector<EpochLoss> history;
};

// Minibatch Adam on the mean negative ELBO plus mixup_weight times the mean
// mixup penalty. Throws NumericalError naming the epoch and batch on
// divergence.
TrainResult train(VaeModel model, const Dataset& data, const TrainConfig& config);

class AdamOptimizer {
public:
    AdamOptimizer(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    void step(std::span<double> params, std::span<const double> grad);
    std::size_t steps() const noexcept { return t_; }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    std::size_t t_ = 0;
    DenseVector m_;
    DenseVector v_;
};

}  // namespace pullback
