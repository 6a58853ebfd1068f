#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gzsda/ccvae.hpp"

using namespace gzsda;

namespace {

CcvaeModel tiny_model(std::uint64_t seed, std::size_t feature_dim = 6, std::size_t hidden = 5,
                      std::size_t latent = 2) {
    Rng rng(seed);
    CcvaeArch arch;
    arch.feature_dim = feature_dim;
    arch.hidden = {hidden};
    arch.latent_dim = latent;
    return make_ccvae(arch, rng);
}

// independent dense evaluation: y = relu_maybe(x W + b)
std::vector<double> dense_ref(const std::vector<double>& x, const Parameter& w,
                              const Parameter& b, bool relu) {
    std::vector<double> y(w.value.cols, 0.0);
    for (std::size_t j = 0; j < w.value.cols; ++j) {
        double s = b.value(0, j);
        for (std::size_t k = 0; k < w.value.rows; ++k) s += x[k] * w.value(k, j);
        y[j] = relu && s <= 0.0 ? 0.0 : s;
    }
    return y;
}

std::vector<double> mlp_ref(const Mlp& net, std::vector<double> x) {
    for (const DenseLayer& layer : net.layers)
        x = dense_ref(x, layer.weight, layer.bias, layer.relu);
    return x;
}

std::vector<double> row_of(const Matrix& m, std::size_t i) {
    return std::vector<double>(m.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols),
                               m.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.cols));
}

std::vector<double> with_condition(std::vector<double> x, Domain d) {
    x.push_back(d == Domain::source ? 1.0 : 0.0);
    x.push_back(d == Domain::target ? 1.0 : 0.0);
    return x;
}

FeatureDataset dataset_from_matrix(const Matrix& features, const std::vector<int>& labels,
                                   int domain) {
    FeatureDataset ds;
    ds.feature_dim = features.cols;
    for (std::size_t i = 0; i < features.rows; ++i) {
        FeatureRecord rec;
        rec.class_label = labels[i];
        rec.domain_label = domain;
        rec.features = row_of(features, i);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace

TEST_CASE("encode: zero weights give a standard-normal posterior") {
    CcvaeModel model = tiny_model(1);
    for (Parameter* p : model.parameters()) p->value.fill(0.0);
    Rng rng(2);
    const EncodeResult enc = encode(model, random_normal(3, 6, rng), Domain::source);
    for (double v : enc.mu.data) CHECK(v == 0.0);
    for (double v : enc.logvar.data) CHECK(v == 0.0);
}

TEST_CASE("encode: the domain condition changes the posterior") {
    CcvaeModel model = tiny_model(3);
    Rng rng(4);
    const Matrix x = random_normal(4, 6, rng);
    const EncodeResult s = encode(model, x, Domain::source);
    const EncodeResult t = encode(model, x, Domain::target);
    CHECK(s.mu.data != t.mu.data);
}

TEST_CASE("encode/decode match an independent layer-by-layer evaluation") {
    CcvaeModel model = tiny_model(5);
    Rng rng(6);
    const Matrix x = random_normal(3, 6, rng);

    EncodeCache cache;
    const EncodeResult enc = encode(model, x, Domain::target, &cache);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto trunk = mlp_ref(model.encoder_trunk, with_condition(row_of(x, i), Domain::target));
        const auto mu_ref = mlp_ref(model.mu_head, trunk);
        const auto lv_ref = mlp_ref(model.logvar_head, trunk);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(enc.mu(i, j) == doctest::Approx(mu_ref[j]).epsilon(1e-12));
            CHECK(enc.logvar(i, j) == doctest::Approx(lv_ref[j]).epsilon(1e-12));
        }
    }

    const Matrix z = random_normal(3, 2, rng);
    const Matrix decoded = decode(model, z, Domain::source);
    for (std::size_t i = 0; i < z.rows; ++i) {
        const auto ref = mlp_ref(model.decoder, with_condition(row_of(z, i), Domain::source));
        for (std::size_t j = 0; j < 6; ++j)
            CHECK(decoded(i, j) == doctest::Approx(ref[j]).epsilon(1e-12));
    }
}

TEST_CASE("decode: zero weights give zero output, condition changes it otherwise") {
    CcvaeModel zero = tiny_model(7);
    for (Parameter* p : zero.parameters()) p->value.fill(0.0);
    Rng rng(8);
    const Matrix z = random_normal(2, 2, rng);
    for (double v : decode(zero, z, Domain::target).data) CHECK(v == 0.0);

    CcvaeModel model = tiny_model(9);
    const Matrix a = decode(model, z, Domain::source);
    const Matrix b = decode(model, z, Domain::target);
    CHECK(a.data != b.data);
}

TEST_CASE("reparameterize: degenerate variance returns mu") {
    Rng data_rng(10);
    const Matrix mu = random_normal(3, 4, data_rng);
    const Matrix logvar(3, 4, -100.0);
    Rng rng(11);
    const ReparamResult rep = reparameterize(mu, logvar, rng);
    for (std::size_t i = 0; i < mu.size(); ++i)
        CHECK(rep.z.data[i] == doctest::Approx(mu.data[i]).epsilon(1e-8));
}

TEST_CASE("reparameterize: standard posterior returns the raw noise draw") {
    const Matrix mu(2, 3);
    const Matrix logvar(2, 3);
    Rng rng(12);
    const ReparamResult rep = reparameterize(mu, logvar, rng);
    Rng replay(12);
    const Matrix expected = random_normal(2, 3, replay);
    CHECK(rep.z.data == expected.data);
    CHECK(rep.eps.data == expected.data);
}

TEST_CASE("reparameterize: empirical moments match mu = 1, sigma = 2") {
    const std::size_t n = 100000;
    const Matrix mu(n, 1, 1.0);
    const Matrix logvar(n, 1, std::log(4.0));
    Rng rng(13);
    const ReparamResult rep = reparameterize(mu, logvar, rng);
    double mean = 0.0;
    for (double v : rep.z.data) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : rep.z.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    CHECK(std::fabs(mean - 1.0) < 0.02);
    CHECK(std::fabs(std::sqrt(var) - 2.0) < 0.02);
}

TEST_CASE("kl_divergence: closed-form anchor values") {
    CHECK(kl_divergence(Matrix(3, 4), Matrix(3, 4)) == 0.0);
    Matrix mu(1, 1, 1.0);
    Matrix logvar(1, 1, 0.0);
    CHECK(kl_divergence(mu, logvar) == 0.5);
}

TEST_CASE("kl_divergence: closed form matches a Monte-Carlo estimate within 1%") {
    Matrix mu(1, 4);
    Matrix logvar(1, 4);
    Rng rng(14);
    for (std::size_t j = 0; j < 4; ++j) {
        mu(0, j) = rng.uniform(0.6, 1.8) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        logvar(0, j) = rng.uniform(-1.2, 1.2);
    }
    const double closed = kl_divergence(mu, logvar);
    const std::size_t samples = 1000000;
    double mc = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double sigma2 = std::exp(logvar(0, j));
            const double x = mu(0, j) + std::sqrt(sigma2) * rng.normal();
            const double log_q = -0.5 * (logvar(0, j) + (x - mu(0, j)) * (x - mu(0, j)) / sigma2);
            const double log_p = -0.5 * x * x;
            mc += log_q - log_p;
        }
    }
    mc /= static_cast<double>(samples);
    CHECK(std::fabs(mc - closed) / closed < 0.01);
}

TEST_CASE("kl_divergence is nonnegative and zero only at the prior") {
    Rng rng(15);
    for (int trial = 0; trial < 200; ++trial) {
        const Matrix mu = random_normal(2, 3, rng);
        const Matrix logvar = random_normal(2, 3, rng);
        const double kl = kl_divergence(mu, logvar);
        CHECK(kl >= 0.0);
        double magnitude = 0.0;
        for (double v : mu.data) magnitude += std::fabs(v);
        for (double v : logvar.data) magnitude += std::fabs(v);
        if (magnitude > 1e-3) CHECK(kl > 1e-12);
    }
}

TEST_CASE("ccvae_loss: a contrived perfect autoencoder has (near-)zero total at lambda 0") {
    // feature_dim 1, hidden 1, latent 1; identity maps with a huge negative
    // logvar bias so z == mu up to 1e-22 noise
    Rng rng(16);
    CcvaeArch arch;
    arch.feature_dim = 1;
    arch.hidden = {1};
    arch.latent_dim = 1;
    CcvaeModel model = make_ccvae(arch, rng);
    auto set = [](Mlp& net, std::size_t layer, std::vector<double> w, std::vector<double> b) {
        net.layers[layer].weight.value.data = std::move(w);
        net.layers[layer].bias.value.data = std::move(b);
    };
    set(model.encoder_trunk, 0, {1.0, 0.0, 0.0}, {0.0});  // picks up x, ignores condition
    set(model.mu_head, 0, {1.0}, {0.0});
    set(model.logvar_head, 0, {0.0}, {-100.0});
    set(model.decoder, 0, {1.0, 0.0, 0.0}, {0.0});        // hidden = z, ignores condition
    set(model.decoder, 1, {1.0}, {0.0});                  // output = hidden
    // inputs are positive so the trunk ReLU is pass-through
    PairBatch batch;
    batch.x_s = Matrix(2, 1);
    batch.x_s(0, 0) = 0.5;
    batch.x_s(1, 0) = 1.5;
    batch.x_t = batch.x_s;
    batch.class_labels = {0, 1};
    batch.valid_t = {true, true};

    Rng eps(17);
    const LossBreakdown loss = ccvae_loss(model, batch, 0.0, eps, /*with_grad=*/false);
    CHECK(loss.total < 1e-20);
    CHECK(loss.recon_s < 1e-20);
    CHECK(loss.cross_st < 1e-20);
}

TEST_CASE("ccvae_loss: a batch with no valid pairs is an error") {
    CcvaeModel model = tiny_model(18);
    PairBatch batch;
    batch.x_s = Matrix(2, 6, 0.3);
    batch.x_t = Matrix(2, 6);
    batch.class_labels = {0, 1};
    batch.valid_t = {false, false};
    Rng rng(19);
    CHECK_THROWS_AS(ccvae_loss(model, batch, 0.1, rng), std::invalid_argument);
    CHECK_THROWS_AS(ccvae_loss(model, PairBatch{}, 0.1, rng), std::invalid_argument);
}

TEST_CASE("ccvae_loss matches an independently scripted evaluation with frozen noise") {
    CcvaeModel model = tiny_model(20, 5, 4, 3);
    Rng data_rng(21);
    PairBatch batch;
    batch.x_s = random_normal(4, 5, data_rng);
    batch.x_t = random_normal(4, 5, data_rng);
    batch.class_labels = {0, 1, 2, 3};
    batch.valid_t = {true, false, true, true};
    for (std::size_t j = 0; j < 5; ++j) batch.x_t(1, j) = 0.0;
    const double lambda = 0.17;

    const std::uint64_t eps_seed = 22;
    Rng eps(eps_seed);
    const LossBreakdown loss = ccvae_loss(model, batch, lambda, eps, /*with_grad=*/false);

    // --- scripted oracle ---
    const std::vector<std::size_t> valid{0, 2, 3};
    const std::size_t n = valid.size();
    // encoder outputs per row
    std::vector<std::vector<double>> mu_s(n), lv_s(n), mu_t(n), lv_t(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto trunk_s =
            mlp_ref(model.encoder_trunk, with_condition(row_of(batch.x_s, valid[i]), Domain::source));
        mu_s[i] = mlp_ref(model.mu_head, trunk_s);
        lv_s[i] = mlp_ref(model.logvar_head, trunk_s);
        auto trunk_t =
            mlp_ref(model.encoder_trunk, with_condition(row_of(batch.x_t, valid[i]), Domain::target));
        mu_t[i] = mlp_ref(model.mu_head, trunk_t);
        lv_t[i] = mlp_ref(model.logvar_head, trunk_t);
    }
    // noise draw order: source block first, then target, row-major
    Rng replay(eps_seed);
    std::vector<std::vector<double>> z_s(n, std::vector<double>(3)), z_t(n, std::vector<double>(3));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            z_s[i][j] = mu_s[i][j] + std::exp(0.5 * lv_s[i][j]) * replay.normal();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            z_t[i][j] = mu_t[i][j] + std::exp(0.5 * lv_t[i][j]) * replay.normal();

    auto l2 = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return s;
    };
    double recon_s = 0.0, recon_t = 0.0, cross_st = 0.0, cross_ts = 0.0, kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto xs = row_of(batch.x_s, valid[i]);
        const auto xt = row_of(batch.x_t, valid[i]);
        recon_s += l2(xs, mlp_ref(model.decoder, with_condition(z_s[i], Domain::source)));
        cross_st += l2(xt, mlp_ref(model.decoder, with_condition(z_s[i], Domain::target)));
        recon_t += l2(xt, mlp_ref(model.decoder, with_condition(z_t[i], Domain::target)));
        cross_ts += l2(xs, mlp_ref(model.decoder, with_condition(z_t[i], Domain::source)));
        for (std::size_t j = 0; j < 3; ++j) {
            kl += 0.5 * (mu_s[i][j] * mu_s[i][j] + std::exp(lv_s[i][j]) - lv_s[i][j] - 1.0);
            kl += 0.5 * (mu_t[i][j] * mu_t[i][j] + std::exp(lv_t[i][j]) - lv_t[i][j] - 1.0);
        }
    }
    const double nd = static_cast<double>(n);
    recon_s /= nd;
    recon_t /= nd;
    cross_st /= nd;
    cross_ts /= nd;
    kl /= 2.0 * nd;
    const double total = recon_s + recon_t + cross_st + cross_ts + lambda * kl;

    CHECK(loss.recon_s == doctest::Approx(recon_s).epsilon(1e-10));
    CHECK(loss.recon_t == doctest::Approx(recon_t).epsilon(1e-10));
    CHECK(loss.cross_st == doctest::Approx(cross_st).epsilon(1e-10));
    CHECK(loss.cross_ts == doctest::Approx(cross_ts).epsilon(1e-10));
    CHECK(loss.kl == doctest::Approx(kl).epsilon(1e-10));
    CHECK(loss.total == doctest::Approx(total).epsilon(1e-10));
}

TEST_CASE("ccvae_loss: the breakdown recomposes to the total") {
    CcvaeModel model = tiny_model(23);
    Rng data_rng(24);
    PairBatch batch;
    batch.x_s = random_normal(5, 6, data_rng);
    batch.x_t = random_normal(5, 6, data_rng);
    batch.class_labels = {0, 1, 2, 3, 4};
    batch.valid_t = {true, true, true, true, true};
    Rng eps(25);
    const LossBreakdown loss = ccvae_loss(model, batch, 0.2, eps, /*with_grad=*/false);
    const double recomposed =
        (loss.recon_s + loss.recon_t) + (loss.cross_st + loss.cross_ts) + loss.lambda * loss.kl;
    CHECK(std::fabs(loss.total - recomposed) < 1e-12);
    CHECK(loss.recon_s >= 0.0);
    CHECK(loss.kl >= 0.0);
}

TEST_CASE("ccvae_loss: appending a masked row changes nothing, bitwise") {
    CcvaeModel model = tiny_model(26);
    Rng data_rng(27);
    PairBatch batch;
    batch.x_s = random_normal(3, 6, data_rng);
    batch.x_t = random_normal(3, 6, data_rng);
    batch.class_labels = {0, 1, 2};
    batch.valid_t = {true, true, true};

    auto run = [&](const PairBatch& b) {
        model.zero_grads();
        Rng eps(28);
        const LossBreakdown loss = ccvae_loss(model, b, 0.2, eps, /*with_grad=*/true);
        std::vector<double> grads;
        for (Parameter* p : model.parameters())
            grads.insert(grads.end(), p->grad.data.begin(), p->grad.data.end());
        return std::pair<LossBreakdown, std::vector<double>>(loss, std::move(grads));
    };
    const auto [loss_a, grads_a] = run(batch);

    PairBatch extended = batch;
    Matrix xs(4, 6), xt(4, 6);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            xs(i, j) = batch.x_s(i, j);
            xt(i, j) = batch.x_t(i, j);
        }
    for (std::size_t j = 0; j < 6; ++j) xs(3, j) = 0.37 * static_cast<double>(j + 1);
    extended.x_s = xs;
    extended.x_t = xt;  // dummy row stays zero
    extended.class_labels.push_back(9);
    extended.valid_t.push_back(false);
    const auto [loss_b, grads_b] = run(extended);

    CHECK(loss_a.recon_s == loss_b.recon_s);
    CHECK(loss_a.recon_t == loss_b.recon_t);
    CHECK(loss_a.cross_st == loss_b.cross_st);
    CHECK(loss_a.cross_ts == loss_b.cross_ts);
    CHECK(loss_a.kl == loss_b.kl);
    CHECK(loss_a.total == loss_b.total);
    CHECK(grads_a == grads_b);
}

TEST_CASE("shared weights: one coupled model has exactly the parameters of one CVAE") {
    const std::size_t d = 6, h = 5, z = 2;
    CcvaeModel model = tiny_model(29, d, h, z);
    const std::size_t expected = ((d + 2) * h + h)   // encoder trunk
                                 + 2 * (h * z + z)   // mu and logvar heads
                                 + ((z + 2) * h + h) // decoder hidden
                                 + (h * d + d);      // decoder output
    CHECK(model.parameter_count() == expected);
    CHECK(model.parameters().size() == 10);
}

TEST_CASE("train_ccvae: zero epochs is a no-op") {
    CcvaeModel model = tiny_model(30);
    std::vector<double> before;
    for (Parameter* p : model.parameters())
        before.insert(before.end(), p->value.data.begin(), p->value.data.end());

    Rng data_rng(31);
    const Matrix src = random_normal(8, 6, data_rng);
    const FeatureDataset source = dataset_from_matrix(src, {0, 0, 1, 1, 0, 1, 0, 1}, 0);
    const FeatureDataset target = dataset_from_matrix(random_normal(6, 6, data_rng),
                                                      {0, 0, 0, 1, 1, 1}, 1);
    TrainConfig cfg;
    cfg.epochs = 0;
    const TrainHistory history = train_ccvae(model, source, target, cfg);
    CHECK(history.per_epoch.empty());
    CHECK(history.per_step_lambda.empty());
    std::vector<double> after;
    for (Parameter* p : model.parameters())
        after.insert(after.end(), p->value.data.begin(), p->value.data.end());
    CHECK(before == after);
}

TEST_CASE("train_ccvae: loss improves on a tiny task and reruns identically") {
    SyntheticConfig sc;
    sc.num_classes = 3;
    sc.feature_dim = 6;
    sc.samples_per_class_per_domain = 30;
    sc.class_subspace_dim = 2;
    sc.seed = 32;
    const SyntheticBenchmark bench = gen_synthetic_benchmark(sc);

    auto run = [&]() {
        CcvaeModel model = tiny_model(33, 6, 8, 3);
        TrainConfig cfg;
        cfg.epochs = 10;
        cfg.batch_size = 16;
        cfg.seed = 34;
        return train_ccvae(model, bench.source, bench.target, cfg);
    };
    const TrainHistory a = run();
    REQUIRE(a.per_epoch.size() == 10);
    CHECK(a.per_epoch.back().total < a.per_epoch.front().total);

    const TrainHistory b = run();
    for (std::size_t i = 0; i < a.per_epoch.size(); ++i) {
        CHECK(a.per_epoch[i].total == b.per_epoch[i].total);
        CHECK(a.per_epoch[i].kl == b.per_epoch[i].kl);
    }
    CHECK(a.per_step_lambda == b.per_step_lambda);
}

TEST_CASE("train_ccvae: target classes must be a subset of source classes") {
    CcvaeModel model = tiny_model(35);
    Rng data_rng(36);
    const FeatureDataset source =
        dataset_from_matrix(random_normal(4, 6, data_rng), {0, 0, 1, 1}, 0);
    const FeatureDataset target =
        dataset_from_matrix(random_normal(2, 6, data_rng), {1, 7}, 1);
    TrainConfig cfg;
    CHECK_THROWS_AS(train_ccvae(model, source, target, cfg), std::invalid_argument);
}

TEST_CASE("generate_cross_domain: shapes, stochasticity, reconstruction quality") {
    SyntheticConfig sc;
    sc.num_classes = 3;
    sc.feature_dim = 8;
    sc.samples_per_class_per_domain = 40;
    sc.class_subspace_dim = 2;
    sc.seed = 37;
    const SyntheticBenchmark bench = gen_synthetic_benchmark(sc);
    CcvaeModel model = tiny_model(38, 8, 16, 4);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 16;
    cfg.seed = 39;
    train_ccvae(model, bench.source, bench.target, cfg);

    // one row in, one row out
    Matrix one(1, 8);
    for (std::size_t j = 0; j < 8; ++j) one(0, j) = bench.source.records[0].features[j];
    Rng g1(40);
    const Matrix out = generate_cross_domain(model, one, Domain::source, Domain::target, g1);
    CHECK(out.rows == 1);
    CHECK(out.cols == 8);

    // different seeds, different samples
    Rng g2(41), g3(42);
    const Matrix s1 = generate_cross_domain(model, one, Domain::source, Domain::target, g2);
    const Matrix s2 = generate_cross_domain(model, one, Domain::source, Domain::target, g3);
    CHECK(s1.data != s2.data);

    // deterministic-mu mode ignores the rng
    Rng g4(43), g5(44);
    const Matrix d1 = generate_cross_domain(model, one, Domain::source, Domain::target, g4, true);
    const Matrix d2 = generate_cross_domain(model, one, Domain::source, Domain::target, g5, true);
    CHECK(d1.data == d2.data);

    // within-domain reconstruction sits closer than the cross-domain map
    const Matrix inputs = bench.source.features_matrix();
    Rng g6(45), g7(46);
    const Matrix recon =
        generate_cross_domain(model, inputs, Domain::source, Domain::source, g6, true);
    const Matrix cross =
        generate_cross_domain(model, inputs, Domain::source, Domain::target, g7, true);
    double mse_recon = 0.0, mse_cross = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        mse_recon += (recon.data[i] - inputs.data[i]) * (recon.data[i] - inputs.data[i]);
        mse_cross += (cross.data[i] - inputs.data[i]) * (cross.data[i] - inputs.data[i]);
    }
    CHECK(mse_recon < mse_cross);
}

TEST_CASE("warmup_lambda: endpoints and midpoint") {
    WarmupSchedule schedule;
    schedule.lambda_max = 0.2;
    schedule.total_steps = 10;
    CHECK(warmup_lambda(schedule, 0) == 0.0);
    CHECK(warmup_lambda(schedule, 5) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(warmup_lambda(schedule, 10) == 0.2);
    CHECK(warmup_lambda(schedule, 999) == 0.2);
}

TEST_CASE("warmup: the recorded lambda sequence ramps from 0 to exactly 0.2") {
    SyntheticConfig sc;
    sc.num_classes = 2;
    sc.feature_dim = 4;
    sc.samples_per_class_per_domain = 24;
    sc.class_subspace_dim = 2;
    sc.seed = 47;
    const SyntheticBenchmark bench = gen_synthetic_benchmark(sc);
    CcvaeModel model = tiny_model(48, 4, 6, 2);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 8;
    cfg.seed = 49;
    const TrainHistory history = train_ccvae(model, bench.source, bench.target, cfg);
    REQUIRE(!history.per_step_lambda.empty());
    CHECK(history.per_step_lambda.front() == 0.0);
    for (std::size_t i = 1; i < history.per_step_lambda.size(); ++i)
        CHECK(history.per_step_lambda[i] >= history.per_step_lambda[i - 1]);
    CHECK(history.per_step_lambda.back() == 0.2);
}

TEST_CASE("two hidden layers: mirrored decoder and exact gradients") {
    Rng rng(60);
    CcvaeArch arch;
    arch.feature_dim = 5;
    arch.hidden = {6, 4};
    arch.latent_dim = 2;
    CcvaeModel model = make_ccvae(arch, rng);

    // encoder trunk: (5+2) -> 6 -> 4, ReLU on both; decoder: (2+2) -> 4 -> 6 -> 5
    REQUIRE(model.encoder_trunk.layers.size() == 2);
    CHECK(model.encoder_trunk.layers[0].weight.value.rows == 7);
    CHECK(model.encoder_trunk.layers[1].weight.value.cols == 4);
    CHECK(model.encoder_trunk.layers[1].relu);
    REQUIRE(model.decoder.layers.size() == 3);
    CHECK(model.decoder.layers[0].weight.value.rows == 4);
    CHECK(model.decoder.layers[0].weight.value.cols == 4);
    CHECK(model.decoder.layers[1].weight.value.cols == 6);
    CHECK(model.decoder.layers[2].weight.value.cols == 5);
    CHECK_FALSE(model.decoder.layers[2].relu);

    Rng data_rng(61);
    PairBatch batch;
    batch.x_s = random_normal(3, 5, data_rng);
    batch.x_t = random_normal(3, 5, data_rng);
    batch.class_labels = {0, 1, 2};
    batch.valid_t = {true, true, true};

    auto loss_fn = [&]() {
        Rng eps(62);
        return ccvae_loss(model, batch, 0.2, eps, /*with_grad=*/false).total;
    };
    model.zero_grads();
    {
        Rng eps(62);
        ccvae_loss(model, batch, 0.2, eps, /*with_grad=*/true);
    }
    Rng check_rng(63);
    const GradCheckReport report =
        grad_check(loss_fn, model.parameters(), 1e-5, 1e-4, check_rng);
    CHECK(report.max_rel_error < 1e-4);
}
