#pragma once

#include <cstdint>
#include <vector>

#include "gzsda/data.hpp"
#include "gzsda/nn.hpp"

namespace gzsda {

inline constexpr std::size_t kDomainDim = 2;  // one-hot {source, target}

struct CcvaeArch {
    std::size_t feature_dim = 0;
    std::vector<std::size_t> hidden = {512};
    std::size_t latent_dim = 64;
};

// Defaults anchored at 2048-dim (512 hidden / 64 latent) and 512-dim
// (128 / 32) features, with a small-dim tier (64 / 8) below that.
CcvaeArch default_arch(std::size_t feature_dim);
std::size_t default_epochs(std::size_t feature_dim);  // 50 / 10 / 30 per tier

// One conditional VAE serving both domains: a single encoder/decoder pair is
// shared, and the domain enters only as a one-hot condition appended to the
// encoder and decoder inputs. The posterior is a diagonal Gaussian carried
// as (mu, log-variance); mu/logvar heads and the decoder output are linear.
struct CcvaeModel {
    CcvaeArch arch;
    Mlp encoder_trunk;  // (feature_dim + 2) -> hidden..., ReLU on every layer
    Mlp mu_head;        // hidden.back() -> latent_dim, linear
    Mlp logvar_head;    // hidden.back() -> latent_dim, linear
    Mlp decoder;        // (latent_dim + 2) -> reversed hidden -> feature_dim, linear output

    std::vector<Parameter*> parameters();
    std::size_t parameter_count() const;
    void zero_grads();
};

CcvaeModel make_ccvae(const CcvaeArch& arch, Rng& rng);

Matrix domain_onehot(Domain d, std::size_t batch_rows);

struct EncodeResult {
    Matrix mu;
    Matrix logvar;
};

struct EncodeCache {
    MlpCache trunk;
    MlpCache mu;
    MlpCache logvar;
};

EncodeResult encode(const CcvaeModel& model, const Matrix& x, Domain domain,
                    EncodeCache* cache = nullptr);

struct ReparamResult {
    Matrix z;
    Matrix eps;  // the raw standard-normal draw, kept for the backward pass
};

// z = mu + exp(0.5 * logvar) .* eps, eps drawn row-major from rng.
ReparamResult reparameterize(const Matrix& mu, const Matrix& logvar, Rng& rng);

// Mean over rows of D_KL(N(mu, diag(exp(logvar))) || N(0, I)), closed form
// 0.5 * sum_j (mu_j^2 + sigma_j^2 - log sigma_j^2 - 1). Always >= 0.
double kl_divergence(const Matrix& mu, const Matrix& logvar);

Matrix decode(const CcvaeModel& model, const Matrix& z, Domain domain, MlpCache* cache = nullptr);

// Per-batch loss components; all are means over the batch's valid rows.
// total = (recon_s + recon_t) + (cross_st + cross_ts) + lambda * kl.
struct LossBreakdown {
    double recon_s = 0.0;    // L2(x_s, decode(z_s, source))
    double recon_t = 0.0;    // L2(x_t, decode(z_t, target))
    double cross_st = 0.0;   // L2(x_t, decode(z_s, target)), the source->target path
    double cross_ts = 0.0;   // L2(x_s, decode(z_t, source)), the target->source path
    double kl = 0.0;         // mean of per-sample KL over both encodings
    double lambda = 0.0;
    double total = 0.0;
};

// Computes the coupled loss over the batch and, when with_grad, accumulates
// d(total)/d(param) into every Parameter.grad. Rows with valid_t = false are
// skipped outright: they enter no term, no mean and no gradient. Each
// encoding draws one z (source side first), reused for its within-domain and
// cross-domain decode. Throws when the batch has no valid rows.
LossBreakdown ccvae_loss(CcvaeModel& model, const PairBatch& batch, double lambda, Rng& rng,
                         bool with_grad = true);

// lambda(step) = lambda_max * min(1, step / total_steps).
struct WarmupSchedule {
    double lambda_max = 0.2;
    std::size_t total_steps = 1;
};

double warmup_lambda(const WarmupSchedule& schedule, std::size_t step);

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    AdamConfig adam;  // learning_rate 1e-3
    std::uint64_t seed = 0;
    double lambda_max = 0.2;
    double warmup_fraction = 0.2;  // share of all steps spent ramping lambda
};

struct TrainHistory {
    std::vector<LossBreakdown> per_epoch;  // component means over the epoch's steps
    std::vector<double> per_step_lambda;
};

// Epochs x ceil(n_source / batch_size) steps; every epoch reshuffles the
// source order and pairs each seen-class row with a random same-class target
// row. Batches with no valid pair are skipped (their lambda step still
// advances). Deterministic given config.seed.
TrainHistory train_ccvae(CcvaeModel& model, const FeatureDataset& source,
                         const FeatureDataset& target_seen, const TrainConfig& config);

// encode(x, from) -> sample z -> decode(z, to). Row i of the output inherits
// row i's class label; deterministic_mu uses z = mu instead of sampling.
// Works for from == to as well (within-domain augmentation).
Matrix generate_cross_domain(const CcvaeModel& model, const Matrix& x, Domain from, Domain to,
                             Rng& rng, bool deterministic_mu = false);

}  // namespace gzsda
