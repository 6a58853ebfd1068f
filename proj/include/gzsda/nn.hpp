#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gzsda/matrix.hpp"
#include "gzsda/rng.hpp"

namespace gzsda {

// Trainable tensor with its gradient and Adam moment estimates. All four
// matrices share one shape; grads accumulate as sums over the batch.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix adam_m;
    Matrix adam_v;

    Parameter() = default;
    Parameter(std::string n, Matrix v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(value.rows, value.cols),
          adam_m(value.rows, value.cols),
          adam_v(value.rows, value.cols) {}

    void zero_grad() { grad.fill(0.0); }
};

struct DenseLayer {
    Parameter weight;  // in x out
    Parameter bias;    // 1 x out
    bool relu = true;  // ReLU after this layer; false = linear output
};

// Fully-connected stack. Consecutive layer dimensions chain.
struct Mlp {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().weight.value.rows; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().weight.value.cols; }
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
};

// dims = {in, h1, ..., out}. ReLU follows every layer except the last;
// relu_on_last overrides that for trunks whose output feeds further heads.
// Weights are uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
Mlp make_mlp(const std::vector<std::size_t>& dims, Rng& rng, const std::string& name_prefix,
             bool relu_on_last = false);

// Everything the exact backward pass needs: per-layer inputs and
// pre-activations from one forward call.
struct MlpCache {
    std::vector<Matrix> inputs;
    std::vector<Matrix> preacts;
};

Matrix mlp_forward(const Mlp& net, const Matrix& input, MlpCache* cache = nullptr);

// Accumulates d(loss)/d(param) into each Parameter.grad (sums over the
// batch) and returns d(loss)/d(input) for chaining. The ReLU subgradient at
// exactly zero is zero.
Matrix mlp_backward(Mlp& net, const MlpCache& cache, const Matrix& output_grad);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step_count = 0;
};

// One bias-corrected Adam update over all params; increments step_count and
// zeroes grads afterwards. Non-finite gradients raise an error naming the
// offending parameter.
void adam_step(const std::vector<Parameter*>& params, AdamConfig& config);

// Mean loss over the batch and d(loss)/d(logits) = (softmax - onehot) / batch.
std::pair<double, Matrix> softmax_cross_entropy(const Matrix& logits,
                                                const std::vector<int>& labels);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    std::string worst_param;
    std::size_t worst_coord = 0;
    double tolerance = 0.0;

    bool ok() const { return max_rel_error < tolerance; }
};

// Central finite differences against the analytic grads already stored in
// each Parameter. loss_fn must be deterministic (noise frozen); two initial
// evaluations that disagree raise an error. Checks every coordinate unless
// max_coords caps them, in which case at least 50 are sampled via rng.
// Relative error uses a scale floor so finite-difference noise on
// near-zero coordinates does not register as disagreement.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::vector<Parameter*>& params, double h, double tolerance,
                           Rng& rng, std::size_t max_coords = 0, double scale_floor = 1e-4);

}  // namespace gzsda
