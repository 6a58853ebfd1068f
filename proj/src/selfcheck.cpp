#include "gzsda/selfcheck.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "gzsda/ccvae.hpp"
#include "gzsda/nn.hpp"

namespace gzsda {

namespace {

struct CheckLog {
    std::ostream& out;
    bool all_ok = true;

    void result(bool ok, const std::string& name, const std::string& detail) {
        out << (ok ? "[ ok ] " : "[FAIL] ") << name;
        if (!detail.empty()) out << ": " << detail;
        out << "\n";
        all_ok = all_ok && ok;
    }
};

std::string fmt_err(double v) {
    std::ostringstream ss;
    ss << std::scientific << std::setprecision(2) << v;
    return ss.str();
}

void check_mlp_gradients(CheckLog& log, std::uint64_t seed) {
    Rng rng(seed);
    Mlp net = make_mlp({5, 7, 4}, rng, "selfcheck");
    const Matrix input = random_normal(6, 5, rng);
    const Matrix direction = random_normal(6, 4, rng);

    auto loss_fn = [&]() {
        const Matrix out = mlp_forward(net, input);
        double loss = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) loss += out.data[i] * direction.data[i];
        return loss;
    };
    for (Parameter* p : net.parameters()) p->zero_grad();
    MlpCache cache;
    mlp_forward(net, input, &cache);
    mlp_backward(net, cache, direction);

    Rng check_rng(seed + 1);
    const GradCheckReport report =
        grad_check(loss_fn, net.parameters(), 1e-5, 1e-6, check_rng);
    log.result(report.ok(), "mlp gradient vs finite differences",
               "max rel error " + fmt_err(report.max_rel_error) + " over " +
                   std::to_string(report.coords_checked) + " coords");
}

void check_softmax_gradients(CheckLog& log, std::uint64_t seed) {
    Rng rng(seed);
    Parameter logits("logits", random_normal(5, 4, rng));
    std::vector<int> labels{0, 3, 1, 2, 3};

    auto loss_fn = [&]() { return softmax_cross_entropy(logits.value, labels).first; };
    logits.zero_grad();
    logits.grad = softmax_cross_entropy(logits.value, labels).second;

    Rng check_rng(seed + 1);
    const GradCheckReport report = grad_check(loss_fn, {&logits}, 1e-5, 1e-6, check_rng);
    log.result(report.ok(), "softmax cross-entropy gradient",
               "max rel error " + fmt_err(report.max_rel_error));
}

void check_ccvae_gradients(CheckLog& log, std::uint64_t seed, bool perturb) {
    Rng rng(seed);
    CcvaeArch arch;
    arch.feature_dim = 6;
    arch.hidden = {5};
    arch.latent_dim = 2;
    CcvaeModel model = make_ccvae(arch, rng);

    PairBatch batch;
    batch.x_s = random_normal(4, 6, rng);
    batch.x_t = random_normal(4, 6, rng);
    batch.class_labels = {0, 1, 0, 2};
    batch.valid_t = {true, true, false, true};
    for (std::size_t j = 0; j < 6; ++j) batch.x_t(2, j) = 0.0;  // the dummy row

    const double lambda = 0.2;
    const std::uint64_t eps_seed = seed + 17;
    auto loss_fn = [&]() {
        Rng eps(eps_seed);  // frozen noise: same draw every call
        return ccvae_loss(model, batch, lambda, eps, /*with_grad=*/false).total;
    };
    model.zero_grads();
    {
        Rng eps(eps_seed);
        ccvae_loss(model, batch, lambda, eps, /*with_grad=*/true);
    }
    if (perturb) model.parameters().front()->grad.data[0] += 1e-2;

    Rng check_rng(seed + 1);
    const GradCheckReport report =
        grad_check(loss_fn, model.parameters(), 1e-5, 1e-4, check_rng);
    log.result(report.ok(), "ccvae loss gradient (frozen noise)",
               "max relative gradient error " + fmt_err(report.max_rel_error) + " over " +
                   std::to_string(report.coords_checked) + " coords (tolerance 1e-4)");
}

void check_kl_properties(CheckLog& log, std::uint64_t seed) {
    const Matrix zero(3, 4);
    const double at_zero = kl_divergence(zero, zero);
    log.result(at_zero == 0.0, "kl at (mu=0, logvar=0)", "value " + fmt_err(at_zero));

    Rng rng(seed);
    bool nonneg = true;
    for (int trial = 0; trial < 50 && nonneg; ++trial) {
        const Matrix mu = random_normal(2, 3, rng);
        const Matrix logvar = random_normal(2, 3, rng);
        nonneg = kl_divergence(mu, logvar) >= 0.0;
    }
    log.result(nonneg, "kl nonnegativity", "50 random (mu, logvar)");

    // closed form vs a Monte-Carlo estimate of E_q[log q - log p]
    Matrix mu(1, 3);
    Matrix logvar(1, 3);
    for (std::size_t j = 0; j < 3; ++j) {
        mu(0, j) = rng.uniform(0.6, 1.6) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        logvar(0, j) = rng.uniform(-1.0, 1.0);
    }
    const double closed = kl_divergence(mu, logvar);
    const std::size_t samples = 200000;
    double mc = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        double term = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
            const double sigma = std::exp(0.5 * logvar(0, j));
            const double x = mu(0, j) + sigma * rng.normal();
            const double log_q = -0.5 * (logvar(0, j) + (x - mu(0, j)) * (x - mu(0, j)) /
                                                            (sigma * sigma));
            const double log_p = -0.5 * x * x;
            term += log_q - log_p;
        }
        mc += term;
    }
    mc /= static_cast<double>(samples);
    const double rel = std::fabs(mc - closed) / std::max(std::fabs(closed), 1e-12);
    log.result(rel < 0.02, "kl closed form vs Monte-Carlo",
               "closed " + fmt_err(closed) + ", mc " + fmt_err(mc) + ", rel " + fmt_err(rel));
}

void check_determinism(CheckLog& log, std::uint64_t seed) {
    Rng a(seed);
    Rng b(seed);
    bool same_stream = true;
    for (int i = 0; i < 1000 && same_stream; ++i) {
        same_stream = a.next_u64() == b.next_u64();
        if (same_stream) same_stream = a.normal() == b.normal();
    }
    log.result(same_stream, "rng determinism", "identical streams for identical seeds");

    SyntheticConfig sc;
    sc.num_classes = 3;
    sc.feature_dim = 6;
    sc.samples_per_class_per_domain = 12;
    sc.seed = seed;
    const SyntheticBenchmark bench = gen_synthetic_benchmark(sc);

    auto run_once = [&]() {
        Rng init(seed + 3);
        CcvaeArch arch;
        arch.feature_dim = 6;
        arch.hidden = {8};
        arch.latent_dim = 3;
        CcvaeModel model = make_ccvae(arch, init);
        TrainConfig tc;
        tc.epochs = 2;
        tc.batch_size = 8;
        tc.seed = seed + 4;
        return train_ccvae(model, bench.source, bench.target, tc);
    };
    const TrainHistory h1 = run_once();
    const TrainHistory h2 = run_once();
    bool identical = h1.per_epoch.size() == h2.per_epoch.size();
    for (std::size_t i = 0; identical && i < h1.per_epoch.size(); ++i)
        identical = h1.per_epoch[i].total == h2.per_epoch[i].total;
    log.result(identical, "training determinism", "same seed, bit-identical loss history");
}

}  // namespace

bool run_selfcheck(std::ostream& out, const SelfCheckOptions& options) {
    CheckLog log{out};
    check_mlp_gradients(log, options.seed);
    check_softmax_gradients(log, derive_seed(options.seed, "softmax"));
    check_ccvae_gradients(log, derive_seed(options.seed, "ccvae"), options.perturb_gradient);
    check_kl_properties(log, derive_seed(options.seed, "kl"));
    check_determinism(log, derive_seed(options.seed, "determinism"));
    out << (log.all_ok ? "selfcheck: all checks passed\n" : "selfcheck: FAILURES detected\n");
    return log.all_ok;
}

}  // namespace gzsda
