#include "gzsda/ccvae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gzsda {

CcvaeArch default_arch(std::size_t feature_dim) {
    CcvaeArch arch;
    arch.feature_dim = feature_dim;
    if (feature_dim >= 1024) {
        arch.hidden = {512};
        arch.latent_dim = 64;
    } else if (feature_dim >= 256) {
        arch.hidden = {128};
        arch.latent_dim = 32;
    } else {
        arch.hidden = {64};
        arch.latent_dim = 8;
    }
    return arch;
}

std::size_t default_epochs(std::size_t feature_dim) {
    if (feature_dim >= 1024) return 50;
    if (feature_dim >= 256) return 10;
    return 30;  // tiny-dim tier; trains in seconds and needs the extra steps
}

std::vector<Parameter*> CcvaeModel::parameters() {
    std::vector<Parameter*> out;
    for (Mlp* net : {&encoder_trunk, &mu_head, &logvar_head, &decoder}) {
        for (Parameter* p : net->parameters()) out.push_back(p);
    }
    return out;
}

std::size_t CcvaeModel::parameter_count() const {
    std::size_t n = 0;
    for (const Mlp* net : {&encoder_trunk, &mu_head, &logvar_head, &decoder}) {
        for (const Parameter* p : net->parameters()) n += p->value.size();
    }
    return n;
}

void CcvaeModel::zero_grads() {
    for (Parameter* p : parameters()) p->zero_grad();
}

CcvaeModel make_ccvae(const CcvaeArch& arch, Rng& rng) {
    if (arch.feature_dim == 0) throw std::invalid_argument("make_ccvae: feature_dim must be > 0");
    if (arch.latent_dim == 0) throw std::invalid_argument("make_ccvae: latent_dim must be > 0");
    if (arch.hidden.empty()) throw std::invalid_argument("make_ccvae: need at least one hidden layer");

    CcvaeModel model;
    model.arch = arch;

    std::vector<std::size_t> enc_dims;
    enc_dims.push_back(arch.feature_dim + kDomainDim);
    for (std::size_t h : arch.hidden) enc_dims.push_back(h);
    model.encoder_trunk = make_mlp(enc_dims, rng, "encoder", /*relu_on_last=*/true);

    model.mu_head = make_mlp({arch.hidden.back(), arch.latent_dim}, rng, "mu_head");
    model.logvar_head = make_mlp({arch.hidden.back(), arch.latent_dim}, rng, "logvar_head");

    std::vector<std::size_t> dec_dims;
    dec_dims.push_back(arch.latent_dim + kDomainDim);
    for (auto it = arch.hidden.rbegin(); it != arch.hidden.rend(); ++it) dec_dims.push_back(*it);
    dec_dims.push_back(arch.feature_dim);
    model.decoder = make_mlp(dec_dims, rng, "decoder");

    return model;
}

Matrix domain_onehot(Domain d, std::size_t batch_rows) {
    Matrix out(batch_rows, kDomainDim);
    const std::size_t hot = d == Domain::source ? 0 : 1;
    for (std::size_t i = 0; i < batch_rows; ++i) out(i, hot) = 1.0;
    return out;
}

EncodeResult encode(const CcvaeModel& model, const Matrix& x, Domain domain, EncodeCache* cache) {
    if (x.cols != model.arch.feature_dim) {
        throw std::invalid_argument("encode: input " + x.shape_str() +
                                    " does not match feature_dim " +
                                    std::to_string(model.arch.feature_dim));
    }
    const Matrix input = hconcat(x, domain_onehot(domain, x.rows));
    const Matrix trunk_out =
        mlp_forward(model.encoder_trunk, input, cache ? &cache->trunk : nullptr);
    EncodeResult result;
    result.mu = mlp_forward(model.mu_head, trunk_out, cache ? &cache->mu : nullptr);
    result.logvar = mlp_forward(model.logvar_head, trunk_out, cache ? &cache->logvar : nullptr);
    return result;
}

ReparamResult reparameterize(const Matrix& mu, const Matrix& logvar, Rng& rng) {
    if (!mu.same_shape(logvar)) {
        throw std::invalid_argument("reparameterize: mu " + mu.shape_str() + " vs logvar " +
                                    logvar.shape_str());
    }
    ReparamResult result;
    result.eps = random_normal(mu.rows, mu.cols, rng);
    result.z = mu;
    for (std::size_t i = 0; i < result.z.data.size(); ++i)
        result.z.data[i] += std::exp(0.5 * logvar.data[i]) * result.eps.data[i];
    return result;
}

double kl_divergence(const Matrix& mu, const Matrix& logvar) {
    if (!mu.same_shape(logvar)) {
        throw std::invalid_argument("kl_divergence: mu " + mu.shape_str() + " vs logvar " +
                                    logvar.shape_str());
    }
    if (mu.rows == 0) throw std::invalid_argument("kl_divergence: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < mu.data.size(); ++i) {
        const double m = mu.data[i];
        const double lv = logvar.data[i];
        total += 0.5 * (m * m + std::exp(lv) - lv - 1.0);
    }
    return total / static_cast<double>(mu.rows);
}

Matrix decode(const CcvaeModel& model, const Matrix& z, Domain domain, MlpCache* cache) {
    if (z.cols != model.arch.latent_dim) {
        throw std::invalid_argument("decode: latent " + z.shape_str() +
                                    " does not match latent_dim " +
                                    std::to_string(model.arch.latent_dim));
    }
    const Matrix input = hconcat(z, domain_onehot(domain, z.rows));
    return mlp_forward(model.decoder, input, cache);
}

namespace {

// Mean over rows of the per-row sum of squared differences.
double mean_row_sq_error(const Matrix& target, const Matrix& output) {
    return sum_squares(subtract(output, target)) / static_cast<double>(target.rows);
}

// d(mean_row_sq_error)/d(output) = 2 (output - target) / rows.
Matrix mean_row_sq_error_grad(const Matrix& target, const Matrix& output) {
    Matrix g = subtract(output, target);
    const double s = 2.0 / static_cast<double>(target.rows);
    for (double& v : g.data) v *= s;
    return g;
}

// Drops the one-hot condition columns from a decoder input gradient.
Matrix latent_part(const Matrix& decoder_input_grad, std::size_t latent_dim) {
    Matrix out(decoder_input_grad.rows, latent_dim);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < latent_dim; ++j) out(i, j) = decoder_input_grad(i, j);
    return out;
}

struct SidePass {
    EncodeCache enc_cache;
    EncodeResult enc;
    ReparamResult rep;
    MlpCache within_cache;
    MlpCache cross_cache;
    Matrix within;  // decoded under the row's own domain
    Matrix cross;   // decoded under the other domain
};

void backward_side(CcvaeModel& model, SidePass& side, const Matrix& within_target,
                   const Matrix& cross_target, double lambda, std::size_t valid_rows) {
    Matrix dz = latent_part(
        mlp_backward(model.decoder, side.within_cache,
                     mean_row_sq_error_grad(within_target, side.within)),
        model.arch.latent_dim);
    add_inplace(dz, latent_part(mlp_backward(model.decoder, side.cross_cache,
                                             mean_row_sq_error_grad(cross_target, side.cross)),
                                model.arch.latent_dim));

    // z = mu + exp(0.5 lv) eps, so dz flows straight into mu and scaled into lv
    Matrix dmu = dz;
    Matrix dlogvar(dz.rows, dz.cols);
    for (std::size_t i = 0; i < dz.data.size(); ++i) {
        dlogvar.data[i] =
            dz.data[i] * 0.5 * std::exp(0.5 * side.enc.logvar.data[i]) * side.rep.eps.data[i];
    }

    // kl = 0.5 * (kl_side_s + kl_side_t) with each side a mean over valid rows
    const double kl_scale = lambda * 0.5 / static_cast<double>(valid_rows);
    for (std::size_t i = 0; i < dmu.data.size(); ++i) {
        dmu.data[i] += kl_scale * side.enc.mu.data[i];
        dlogvar.data[i] += kl_scale * 0.5 * (std::exp(side.enc.logvar.data[i]) - 1.0);
    }

    Matrix trunk_grad = mlp_backward(model.mu_head, side.enc_cache.mu, dmu);
    add_inplace(trunk_grad, mlp_backward(model.logvar_head, side.enc_cache.logvar, dlogvar));
    mlp_backward(model.encoder_trunk, side.enc_cache.trunk, trunk_grad);
}

}  // namespace

LossBreakdown ccvae_loss(CcvaeModel& model, const PairBatch& batch, double lambda, Rng& rng,
                         bool with_grad) {
    if (batch.batch_size() == 0) throw std::invalid_argument("ccvae_loss: empty batch");
    if (batch.x_s.cols != model.arch.feature_dim || batch.x_t.cols != model.arch.feature_dim) {
        throw std::invalid_argument("ccvae_loss: batch feature dim " + batch.x_s.shape_str() +
                                    " does not match model feature_dim " +
                                    std::to_string(model.arch.feature_dim));
    }
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < batch.valid_t.size(); ++i)
        if (batch.valid_t[i]) valid.push_back(i);
    if (valid.empty()) {
        throw std::invalid_argument(
            "ccvae_loss: batch has no valid pairs; every loss term would average an empty set");
    }
    const std::size_t n = valid.size();
    const Matrix xs = select_rows(batch.x_s, valid);
    const Matrix xt = select_rows(batch.x_t, valid);

    SidePass src;
    SidePass tgt;
    src.enc = encode(model, xs, Domain::source, &src.enc_cache);
    tgt.enc = encode(model, xt, Domain::target, &tgt.enc_cache);
    src.rep = reparameterize(src.enc.mu, src.enc.logvar, rng);
    tgt.rep = reparameterize(tgt.enc.mu, tgt.enc.logvar, rng);
    src.within = decode(model, src.rep.z, Domain::source, &src.within_cache);
    src.cross = decode(model, src.rep.z, Domain::target, &src.cross_cache);
    tgt.within = decode(model, tgt.rep.z, Domain::target, &tgt.within_cache);
    tgt.cross = decode(model, tgt.rep.z, Domain::source, &tgt.cross_cache);

    LossBreakdown loss;
    loss.lambda = lambda;
    loss.recon_s = mean_row_sq_error(xs, src.within);
    loss.recon_t = mean_row_sq_error(xt, tgt.within);
    loss.cross_st = mean_row_sq_error(xt, src.cross);
    loss.cross_ts = mean_row_sq_error(xs, tgt.cross);
    loss.kl = 0.5 * (kl_divergence(src.enc.mu, src.enc.logvar) +
                     kl_divergence(tgt.enc.mu, tgt.enc.logvar));
    loss.total = (loss.recon_s + loss.recon_t) + (loss.cross_st + loss.cross_ts) +
                 lambda * loss.kl;

    if (with_grad) {
        backward_side(model, src, xs, xt, lambda, n);
        backward_side(model, tgt, xt, xs, lambda, n);
    }
    return loss;
}

double warmup_lambda(const WarmupSchedule& schedule, std::size_t step) {
    if (schedule.total_steps == 0) return schedule.lambda_max;
    const double frac = static_cast<double>(step) / static_cast<double>(schedule.total_steps);
    return schedule.lambda_max * std::min(1.0, frac);
}

TrainHistory train_ccvae(CcvaeModel& model, const FeatureDataset& source,
                         const FeatureDataset& target_seen, const TrainConfig& config) {
    if (config.batch_size == 0) throw std::invalid_argument("train_ccvae: batch_size must be >= 1");
    if (source.empty()) throw std::invalid_argument("train_ccvae: empty source set");
    if (source.feature_dim != model.arch.feature_dim ||
        target_seen.feature_dim != model.arch.feature_dim) {
        throw std::invalid_argument("train_ccvae: dataset dims do not match the model");
    }
    const std::set<int> source_classes = source.class_set();
    for (int c : target_seen.class_set()) {
        if (!source_classes.count(c)) {
            throw std::invalid_argument("train_ccvae: target class " + std::to_string(c) +
                                        " missing from the source set");
        }
    }

    TrainHistory history;
    if (config.epochs == 0) return history;  // documented no-op

    const std::size_t steps_per_epoch =
        (source.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = config.epochs * steps_per_epoch;
    WarmupSchedule warmup;
    warmup.lambda_max = config.lambda_max;
    warmup.total_steps = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::ceil(config.warmup_fraction * static_cast<double>(total_steps))));

    Rng rng(config.seed);
    AdamConfig adam = config.adam;
    std::vector<Parameter*> params = model.parameters();
    std::vector<std::size_t> order(source.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        LossBreakdown epoch_sum;
        std::size_t epoch_batches = 0;
        for (std::size_t start = 0; start < source.size(); start += config.batch_size) {
            const double lambda = warmup_lambda(warmup, step);
            history.per_step_lambda.push_back(lambda);
            ++step;
            PairBatch batch =
                sample_pairs(source, target_seen, order, start, config.batch_size, rng);
            if (batch.valid_count() == 0) continue;  // nothing to learn from
            const LossBreakdown loss = ccvae_loss(model, batch, lambda, rng, /*with_grad=*/true);
            adam_step(params, adam);
            epoch_sum.recon_s += loss.recon_s;
            epoch_sum.recon_t += loss.recon_t;
            epoch_sum.cross_st += loss.cross_st;
            epoch_sum.cross_ts += loss.cross_ts;
            epoch_sum.kl += loss.kl;
            epoch_sum.lambda += loss.lambda;
            epoch_sum.total += loss.total;
            ++epoch_batches;
        }
        if (epoch_batches > 0) {
            const double inv = 1.0 / static_cast<double>(epoch_batches);
            epoch_sum.recon_s *= inv;
            epoch_sum.recon_t *= inv;
            epoch_sum.cross_st *= inv;
            epoch_sum.cross_ts *= inv;
            epoch_sum.kl *= inv;
            epoch_sum.lambda *= inv;
            epoch_sum.total *= inv;
        }
        history.per_epoch.push_back(epoch_sum);
    }
    return history;
}

Matrix generate_cross_domain(const CcvaeModel& model, const Matrix& x, Domain from, Domain to,
                             Rng& rng, bool deterministic_mu) {
    const EncodeResult enc = encode(model, x, from);
    if (deterministic_mu) return decode(model, enc.mu, to);
    const ReparamResult rep = reparameterize(enc.mu, enc.logvar, rng);
    return decode(model, rep.z, to);
}

}  // namespace gzsda
