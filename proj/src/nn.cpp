#include "gzsda/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gzsda {

std::vector<Parameter*> Mlp::parameters() {
    std::vector<Parameter*> out;
    for (DenseLayer& layer : layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
    std::vector<const Parameter*> out;
    for (const DenseLayer& layer : layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    return out;
}

Mlp make_mlp(const std::vector<std::size_t>& dims, Rng& rng, const std::string& name_prefix,
             bool relu_on_last) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dims");
    Mlp net;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = dims[l];
        const std::size_t fan_out = dims[l + 1];
        if (fan_in == 0 || fan_out == 0)
            throw std::invalid_argument("make_mlp: zero layer dimension");
        Matrix w(fan_in, fan_out);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        DenseLayer layer{Parameter(name_prefix + ".w" + std::to_string(l), std::move(w)),
                         Parameter(name_prefix + ".b" + std::to_string(l), Matrix(1, fan_out)),
                         /*relu=*/true};
        const bool last = (l + 2 == dims.size());
        if (last && !relu_on_last) layer.relu = false;
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix mlp_forward(const Mlp& net, const Matrix& input, MlpCache* cache) {
    if (net.layers.empty()) throw std::invalid_argument("mlp_forward: empty network");
    if (input.cols != net.input_dim()) {
        throw std::invalid_argument("mlp_forward: input " + input.shape_str() +
                                    " does not match layer input dim " +
                                    std::to_string(net.input_dim()));
    }
    if (cache) {
        cache->inputs.clear();
        cache->preacts.clear();
    }
    Matrix x = input;
    for (const DenseLayer& layer : net.layers) {
        if (cache) cache->inputs.push_back(x);
        Matrix pre = matmul(x, layer.weight.value);
        for (std::size_t i = 0; i < pre.rows; ++i)
            for (std::size_t j = 0; j < pre.cols; ++j) pre(i, j) += layer.bias.value(0, j);
        if (cache) cache->preacts.push_back(pre);
        if (layer.relu) {
            for (double& v : pre.data) v = v > 0.0 ? v : 0.0;
        }
        x = std::move(pre);
    }
    return x;
}

Matrix mlp_backward(Mlp& net, const MlpCache& cache, const Matrix& output_grad) {
    if (cache.inputs.size() != net.layers.size() || cache.preacts.size() != net.layers.size()) {
        throw std::invalid_argument("mlp_backward: cache does not match network layout");
    }
    Matrix g = output_grad;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        DenseLayer& layer = net.layers[li];
        const Matrix& pre = cache.preacts[li];
        const Matrix& in = cache.inputs[li];
        if (!g.same_shape(pre)) {
            throw std::invalid_argument("mlp_backward: grad " + g.shape_str() +
                                        " does not match layer output " + pre.shape_str());
        }
        if (layer.relu) {
            // subgradient at exactly 0 is 0
            for (std::size_t i = 0; i < g.data.size(); ++i)
                if (!(pre.data[i] > 0.0)) g.data[i] = 0.0;
        }
        add_inplace(layer.weight.grad, matmul(transpose(in), g));
        add_inplace(layer.bias.grad, column_sums(g));
        g = matmul(g, transpose(layer.weight.value));
    }
    return g;
}

void adam_step(const std::vector<Parameter*>& params, AdamConfig& config) {
    for (const Parameter* p : params) {
        for (double gv : p->grad.data) {
            if (!std::isfinite(gv)) {
                throw std::runtime_error("adam_step: non-finite gradient in parameter '" +
                                         p->name + "'");
            }
        }
    }
    config.step_count += 1;
    const double t = static_cast<double>(config.step_count);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->value.data.size(); ++i) {
            const double g = p->grad.data[i];
            double& m = p->adam_m.data[i];
            double& v = p->adam_v.data[i];
            m = config.beta1 * m + (1.0 - config.beta1) * g;
            v = config.beta2 * v + (1.0 - config.beta2) * g * g;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            p->value.data[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
        p->zero_grad();
    }
}

std::pair<double, Matrix> softmax_cross_entropy(const Matrix& logits,
                                                const std::vector<int>& labels) {
    if (labels.size() != logits.rows) {
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(logits.rows) + " rows");
    }
    if (logits.rows == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
    const std::size_t n = logits.rows;
    const std::size_t c = logits.cols;
    Matrix grad(n, c);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= c) {
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                        " out of range [0, " + std::to_string(c) + ") at row " +
                                        std::to_string(i));
        }
        double row_max = logits(i, 0);
        for (std::size_t j = 1; j < c; ++j) row_max = std::max(row_max, logits(i, j));
        double sum_exp = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum_exp += std::exp(logits(i, j) - row_max);
        const double log_sum = std::log(sum_exp) + row_max;
        loss += log_sum - logits(i, static_cast<std::size_t>(label));
        for (std::size_t j = 0; j < c; ++j) {
            const double p = std::exp(logits(i, j) - log_sum);
            grad(i, j) = (p - (static_cast<std::size_t>(label) == j ? 1.0 : 0.0)) /
                         static_cast<double>(n);
        }
    }
    return {loss / static_cast<double>(n), std::move(grad)};
}

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::vector<Parameter*>& params, double h, double tolerance,
                           Rng& rng, std::size_t max_coords, double scale_floor) {
    const double l1 = loss_fn();
    const double l2 = loss_fn();
    if (!(l1 == l2)) {
        throw std::runtime_error(
            "grad_check: loss_fn is not deterministic (two evaluations at the same point "
            "differ); freeze all noise draws before checking");
    }

    std::size_t total = 0;
    for (const Parameter* p : params) total += p->value.size();
    if (total == 0) throw std::invalid_argument("grad_check: no coordinates to check");

    std::vector<std::size_t> coords(total);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords != 0 && max_coords < total) {
        const std::size_t want = std::max<std::size_t>(50, max_coords);
        if (want < total) {
            rng.shuffle(coords);
            coords.resize(want);
            std::sort(coords.begin(), coords.end());
        }
    }

    GradCheckReport report;
    report.tolerance = tolerance;
    for (std::size_t flat : coords) {
        std::size_t offset = flat;
        Parameter* owner = nullptr;
        for (Parameter* p : params) {
            if (offset < p->value.size()) {
                owner = p;
                break;
            }
            offset -= p->value.size();
        }
        double& coord = owner->value.data[offset];
        const double saved = coord;
        coord = saved + h;
        const double lp = loss_fn();
        coord = saved - h;
        const double lm = loss_fn();
        coord = saved;
        const double numeric = (lp - lm) / (2.0 * h);
        const double analytic = owner->grad.data[offset];
        const double denom = std::max({std::fabs(numeric), std::fabs(analytic), scale_floor});
        const double rel = std::fabs(numeric - analytic) / denom;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_param = owner->name;
            report.worst_coord = offset;
        }
        report.coords_checked += 1;
    }
    return report;
}

}  // namespace gzsda
