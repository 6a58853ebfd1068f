#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gzsda/nn.hpp"

using namespace gzsda;

namespace {

// independent layer-by-layer reference forward pass
Matrix forward_reference(const Mlp& net, const Matrix& input) {
    Matrix x = input;
    for (const DenseLayer& layer : net.layers) {
        Matrix next(x.rows, layer.weight.value.cols);
        for (std::size_t i = 0; i < x.rows; ++i) {
            for (std::size_t j = 0; j < next.cols; ++j) {
                double s = layer.bias.value(0, j);
                for (std::size_t k = 0; k < x.cols; ++k)
                    s += x(i, k) * layer.weight.value(k, j);
                next(i, j) = layer.relu && s <= 0.0 ? 0.0 : s;
            }
        }
        x = std::move(next);
    }
    return x;
}

double all_grads_abs_sum(Mlp& net) {
    double s = 0.0;
    for (Parameter* p : net.parameters())
        for (double g : p->grad.data) s += std::fabs(g);
    return s;
}

}  // namespace

TEST_CASE("mlp_forward: zero weights and biases give zero output") {
    Rng rng(1);
    Mlp net = make_mlp({3, 4, 2}, rng, "t");
    for (Parameter* p : net.parameters()) p->value.fill(0.0);
    const Matrix out = mlp_forward(net, random_normal(5, 3, rng));
    for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("mlp_forward: identity single layer passes input through") {
    Rng rng(2);
    Mlp net = make_mlp({3, 3}, rng, "t");  // single layer, linear output
    net.layers[0].weight.value.fill(0.0);
    for (std::size_t i = 0; i < 3; ++i) net.layers[0].weight.value(i, i) = 1.0;
    net.layers[0].bias.value.fill(0.0);
    const Matrix input = random_normal(4, 3, rng);
    const Matrix out = mlp_forward(net, input);
    for (std::size_t i = 0; i < input.size(); ++i) CHECK(out.data[i] == input.data[i]);
}

TEST_CASE("mlp_forward matches the reference evaluation on a random net") {
    Rng rng(3);
    Mlp net = make_mlp({4, 6, 3}, rng, "t");
    const Matrix input = random_normal(5, 4, rng);
    const Matrix out = mlp_forward(net, input);
    const Matrix ref = forward_reference(net, input);
    REQUIRE(out.same_shape(ref));
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
}

TEST_CASE("mlp_forward rejects shape mismatches") {
    Rng rng(4);
    Mlp net = make_mlp({4, 2}, rng, "t");
    CHECK_THROWS_AS(mlp_forward(net, Matrix(3, 5)), std::invalid_argument);
}

TEST_CASE("mlp_backward: zero output grad leaves all grads zero") {
    Rng rng(5);
    Mlp net = make_mlp({3, 5, 2}, rng, "t");
    MlpCache cache;
    mlp_forward(net, random_normal(4, 3, rng), &cache);
    mlp_backward(net, cache, Matrix(4, 2));
    CHECK(all_grads_abs_sum(net) == 0.0);
}

TEST_CASE("mlp_backward: scalar linear net has grad equal to the input") {
    Rng rng(6);
    Mlp net = make_mlp({1, 1}, rng, "t");
    net.layers[0].weight.value(0, 0) = 2.0;
    net.layers[0].bias.value(0, 0) = 0.0;
    Matrix x(1, 1);
    x(0, 0) = 3.0;
    MlpCache cache;
    mlp_forward(net, x, &cache);
    Matrix g(1, 1);
    g(0, 0) = 1.0;  // loss = f(x) = w x
    mlp_backward(net, cache, g);
    CHECK(net.layers[0].weight.grad(0, 0) == 3.0);
    CHECK(net.layers[0].bias.grad(0, 0) == 1.0);
}

TEST_CASE("mlp_backward matches central finite differences") {
    Rng rng(7);
    Mlp net = make_mlp({4, 5, 3}, rng, "t");
    const Matrix input = random_normal(6, 4, rng);
    const Matrix direction = random_normal(6, 3, rng);

    auto loss_fn = [&]() {
        const Matrix out = mlp_forward(net, input);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out.data[i] * direction.data[i];
        return s;
    };
    for (Parameter* p : net.parameters()) p->zero_grad();
    MlpCache cache;
    mlp_forward(net, input, &cache);
    mlp_backward(net, cache, direction);

    Rng check_rng(70);
    const GradCheckReport report = grad_check(loss_fn, net.parameters(), 1e-5, 1e-6, check_rng);
    CHECK(report.max_rel_error < 1e-6);
    CHECK(report.coords_checked == 4 * 5 + 5 + 5 * 3 + 3);
}

TEST_CASE("backward/forward consistency holds over 100 random shapes") {
    Rng shape_rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t in = 1 + shape_rng.below(5);
        const std::size_t hid = 1 + shape_rng.below(6);
        const std::size_t out = 1 + shape_rng.below(4);
        const std::size_t batch = 1 + shape_rng.below(4);
        Rng rng(1000 + static_cast<std::uint64_t>(trial));
        const bool two_layers = rng.uniform() < 0.7;
        Mlp net = two_layers ? make_mlp({in, hid, out}, rng, "t")
                             : make_mlp({in, out}, rng, "t");
        const Matrix input = random_normal(batch, in, rng);
        const Matrix direction = random_normal(batch, out, rng);
        auto loss_fn = [&]() {
            const Matrix y = mlp_forward(net, input);
            double s = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * direction.data[i];
            return s;
        };
        for (Parameter* p : net.parameters()) p->zero_grad();
        MlpCache cache;
        mlp_forward(net, input, &cache);
        mlp_backward(net, cache, direction);
        Rng check_rng(2000 + static_cast<std::uint64_t>(trial));
        const GradCheckReport report =
            grad_check(loss_fn, net.parameters(), 1e-5, 1e-6, check_rng);
        REQUIRE_MESSAGE(report.max_rel_error < 1e-6,
                        "trial " << trial << " worst " << report.worst_param);
    }
}

TEST_CASE("relu boundary: pre-activation exactly zero passes zero gradient") {
    Rng rng(9);
    Mlp net = make_mlp({1, 1}, rng, "t", /*relu_on_last=*/true);
    net.layers[0].weight.value(0, 0) = 1.0;
    net.layers[0].bias.value(0, 0) = 0.0;
    Matrix x(1, 1);  // x = 0 -> preact exactly 0
    MlpCache cache;
    mlp_forward(net, x, &cache);
    Matrix g(1, 1);
    g(0, 0) = 5.0;
    const Matrix input_grad = mlp_backward(net, cache, g);
    CHECK(net.layers[0].weight.grad(0, 0) == 0.0);
    CHECK(net.layers[0].bias.grad(0, 0) == 0.0);
    CHECK(input_grad(0, 0) == 0.0);

    // strictly positive preact passes it through
    x(0, 0) = 2.0;
    for (Parameter* p : net.parameters()) p->zero_grad();
    mlp_forward(net, x, &cache);
    mlp_backward(net, cache, g);
    CHECK(net.layers[0].bias.grad(0, 0) == 5.0);
}

TEST_CASE("adam_step: zero gradients keep values bitwise identical") {
    Rng rng(10);
    Parameter p("p", random_normal(3, 3, rng));
    const std::vector<double> before = p.value.data;
    AdamConfig cfg;
    adam_step({&p}, cfg);
    CHECK(cfg.step_count == 1);
    CHECK(p.value.data == before);
}

TEST_CASE("adam_step: first step with unit gradient moves by about lr") {
    Parameter p("p", Matrix(1, 1, 1.0));
    p.grad(0, 0) = 1.0;
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    adam_step({&p}, cfg);
    // hand-evaluated recurrence at t=1: m_hat = v_hat = 1 -> step = lr/(1+eps)
    CHECK(std::fabs((1.0 - p.value(0, 0)) - 0.1) < 1e-8);
    CHECK(p.grad(0, 0) == 0.0);  // grads zeroed after the step
}

TEST_CASE("adam_step: 100 steps on w^2 match the scalar reference recurrence") {
    Parameter p("w", Matrix(1, 1, 1.0));
    AdamConfig cfg;
    cfg.learning_rate = 0.1;

    // independent scalar Adam recurrence
    double w_ref = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 100; ++t) {
        p.grad(0, 0) = 2.0 * p.value(0, 0);
        adam_step({&p}, cfg);

        const double g = 2.0 * w_ref;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double m_hat = m / (1.0 - std::pow(0.9, t));
        const double v_hat = v / (1.0 - std::pow(0.999, t));
        w_ref -= 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
        CHECK(p.value(0, 0) == doctest::Approx(w_ref).epsilon(1e-12));
    }
    CHECK(std::fabs(p.value(0, 0)) < 0.1);
    CHECK(cfg.step_count == 100);
}

TEST_CASE("adam_step: non-finite gradient names the parameter") {
    Parameter p("encoder.w0", Matrix(1, 1, 1.0));
    p.grad(0, 0) = std::nan("");
    AdamConfig cfg;
    try {
        adam_step({&p}, cfg);
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("encoder.w0") != std::string::npos);
    }
}

TEST_CASE("softmax_cross_entropy: uniform logits give ln(C)") {
    const Matrix logits(3, 5, 0.7);  // equal within each row
    auto [loss, grad] = softmax_cross_entropy(logits, {0, 2, 4});
    CHECK(loss == doctest::Approx(std::log(5.0)).epsilon(1e-12));
    for (std::size_t i = 0; i < grad.rows; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < grad.cols; ++j) row_sum += grad(i, j);
        CHECK(row_sum == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax_cross_entropy: saturated correct logit gives near-zero loss") {
    Matrix logits(1, 2);
    logits(0, 0) = 10.0;
    logits(0, 1) = -10.0;
    auto [loss, grad] = softmax_cross_entropy(logits, {0});
    CHECK(loss >= 0.0);
    CHECK(loss < 1e-8);
}

TEST_CASE("softmax_cross_entropy gradient matches finite differences and the formula") {
    Rng rng(12);
    Matrix logits = random_normal(4, 3, rng);
    const std::vector<int> labels{2, 0, 1, 1};
    auto [loss, grad] = softmax_cross_entropy(logits, labels);

    for (std::size_t i = 0; i < logits.rows; ++i) {
        // formula check: (softmax - onehot) / batch
        double row_max = std::max({logits(i, 0), logits(i, 1), logits(i, 2)});
        double z = 0.0;
        for (std::size_t j = 0; j < 3; ++j) z += std::exp(logits(i, j) - row_max);
        for (std::size_t j = 0; j < 3; ++j) {
            const double p = std::exp(logits(i, j) - row_max) / z;
            const double expected =
                (p - (labels[i] == static_cast<int>(j) ? 1.0 : 0.0)) / 4.0;
            CHECK(grad(i, j) == doctest::Approx(expected).epsilon(1e-10));
        }
    }

    const double h = 1e-6;
    for (std::size_t idx = 0; idx < logits.size(); ++idx) {
        const double saved = logits.data[idx];
        logits.data[idx] = saved + h;
        const double lp = softmax_cross_entropy(logits, labels).first;
        logits.data[idx] = saved - h;
        const double lm = softmax_cross_entropy(logits, labels).first;
        logits.data[idx] = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::fabs(numeric), std::fabs(grad.data[idx]), 1e-4});
        CHECK(std::fabs(numeric - grad.data[idx]) / denom < 1e-6);
    }
}

TEST_CASE("softmax_cross_entropy rejects out-of-range labels") {
    CHECK_THROWS_AS(softmax_cross_entropy(Matrix(2, 3), {0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(softmax_cross_entropy(Matrix(2, 3), {-1, 0}), std::invalid_argument);
}

TEST_CASE("grad_check: quadratic loss is exact to float error") {
    Rng rng(13);
    std::vector<Parameter> params;
    for (int i = 0; i < 3; ++i)
        params.emplace_back("q" + std::to_string(i), Matrix(1, 2, 0.5 + 0.3 * i));
    std::vector<Parameter*> ptrs;
    for (Parameter& p : params) ptrs.push_back(&p);

    auto loss_fn = [&]() {
        double s = 0.0;
        for (const Parameter& p : params)
            for (double v : p.value.data) s += v * v;
        return s;
    };
    for (Parameter* p : ptrs) {
        p->zero_grad();
        for (std::size_t i = 0; i < p->value.size(); ++i)
            p->grad.data[i] = 2.0 * p->value.data[i];
    }
    const GradCheckReport report = grad_check(loss_fn, ptrs, 1e-5, 1e-9, rng);
    CHECK(report.max_rel_error < 1e-9);
    CHECK(report.coords_checked == 6);
}

TEST_CASE("grad_check detects a non-deterministic loss") {
    Parameter p("p", Matrix(1, 1, 1.0));
    int calls = 0;
    auto noisy = [&calls, &p]() { return p.value(0, 0) + 0.001 * (calls++); };
    Rng rng(14);
    CHECK_THROWS_AS(grad_check(noisy, {&p}, 1e-5, 1e-6, rng), std::runtime_error);
}

TEST_CASE("training trajectories are bit-identical for the same seed") {
    auto run = [] {
        Rng rng(77);
        Mlp net = make_mlp({3, 4, 2}, rng, "t");
        const Matrix input = random_normal(6, 3, rng);
        const std::vector<int> labels{0, 1, 0, 1, 1, 0};
        AdamConfig adam;
        for (int step = 0; step < 20; ++step) {
            MlpCache cache;
            const Matrix logits = mlp_forward(net, input, &cache);
            auto [loss, grad] = softmax_cross_entropy(logits, labels);
            mlp_backward(net, cache, grad);
            adam_step(net.parameters(), adam);
        }
        std::vector<double> flat;
        for (Parameter* p : net.parameters())
            flat.insert(flat.end(), p->value.data.begin(), p->value.data.end());
        return flat;
    };
    CHECK(run() == run());
}
