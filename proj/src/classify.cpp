#include "gzsda/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gzsda {

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::real_source: return "real_source";
        case Provenance::real_target: return "real_target";
        case Provenance::synth_target: return "synth_target";
        case Provenance::synth_source: return "synth_source";
    }
    return "unknown";
}

void ClassifierTrainSet::append(const Matrix& feats, const std::vector<int>& row_labels,
                                Provenance tag) {
    if (feats.rows != row_labels.size())
        throw std::invalid_argument("ClassifierTrainSet::append: row/label count mismatch");
    if (features.rows == 0) {
        features = feats;
    } else {
        if (feats.cols != features.cols)
            throw std::invalid_argument("ClassifierTrainSet::append: feature dim mismatch");
        Matrix merged(features.rows + feats.rows, features.cols);
        std::copy(features.data.begin(), features.data.end(), merged.data.begin());
        std::copy(feats.data.begin(), feats.data.end(),
                  merged.data.begin() + static_cast<std::ptrdiff_t>(features.data.size()));
        features = std::move(merged);
    }
    labels.insert(labels.end(), row_labels.begin(), row_labels.end());
    provenance.insert(provenance.end(), feats.rows, tag);
}

std::map<std::string, std::size_t> ClassifierTrainSet::provenance_counts() const {
    std::map<std::string, std::size_t> out;
    for (Provenance p : provenance) out[provenance_name(p)] += 1;
    return out;
}

Matrix LinearClassifier::logits(const Matrix& features) const {
    if (features.cols != weights.value.rows) {
        throw std::invalid_argument("LinearClassifier: features " + features.shape_str() +
                                    " vs weights " + weights.value.shape_str());
    }
    Matrix out = matmul(features, weights.value);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += bias.value(0, j);
    return out;
}

LinearClassifier train_linear(const ClassifierTrainSet& train, const ClassifierConfig& config,
                              int num_classes, std::vector<double>* epoch_losses) {
    if (train.features.rows == 0) throw std::invalid_argument("train_linear: empty train set");
    int max_label = 0;
    for (int label : train.labels) {
        if (label < 0) throw std::invalid_argument("train_linear: negative class label");
        max_label = std::max(max_label, label);
    }
    const int c = num_classes > 0 ? num_classes : max_label + 1;
    if (max_label >= c) {
        throw std::invalid_argument("train_linear: label " + std::to_string(max_label) +
                                    " out of range [0, " + std::to_string(c) + ")");
    }

    const std::size_t d = train.features.cols;
    LinearClassifier clf;
    clf.num_classes = c;
    // zero init: the objective is convex, and starting from zero logits keeps
    // the low-lr full-batch regime from being dominated by init noise
    clf.weights = Parameter("classifier.w", Matrix(d, static_cast<std::size_t>(c)));
    clf.bias = Parameter("classifier.b", Matrix(1, static_cast<std::size_t>(c)));

    AdamConfig adam = config.adam;
    std::vector<Parameter*> params{&clf.weights, &clf.bias};
    const Matrix features_t = transpose(train.features);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const Matrix logit_m = clf.logits(train.features);
        auto [loss, logit_grad] = softmax_cross_entropy(logit_m, train.labels);
        if (epoch_losses) epoch_losses->push_back(loss);
        add_inplace(clf.weights.grad, matmul(features_t, logit_grad));
        add_inplace(clf.bias.grad, column_sums(logit_grad));
        adam_step(params, adam);
    }
    return clf;
}

std::vector<int> predict(const LinearClassifier& classifier, const Matrix& features) {
    const Matrix logit_m = classifier.logits(features);
    std::vector<int> out(logit_m.rows);
    for (std::size_t i = 0; i < logit_m.rows; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < logit_m.cols; ++j)
            if (logit_m(i, j) > logit_m(i, best)) best = j;  // ties keep the lowest id
        out[i] = static_cast<int>(best);
    }
    return out;
}

std::vector<int> knn_predict(const Matrix& train_features, const std::vector<int>& train_labels,
                             const Matrix& query, int k) {
    if (k != 1) throw std::invalid_argument("knn_predict: only k = 1 is supported");
    if (train_features.rows == 0) throw std::invalid_argument("knn_predict: empty train set");
    if (train_features.rows != train_labels.size())
        throw std::invalid_argument("knn_predict: row/label count mismatch");
    if (query.cols != train_features.cols) {
        throw std::invalid_argument("knn_predict: query " + query.shape_str() + " vs train " +
                                    train_features.shape_str());
    }
    std::vector<int> out(query.rows);
    for (std::size_t q = 0; q < query.rows; ++q) {
        const double* qrow = query.data.data() + q * query.cols;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t t = 0; t < train_features.rows; ++t) {
            const double* trow = train_features.data.data() + t * train_features.cols;
            double dist = 0.0;
            for (std::size_t j = 0; j < query.cols; ++j) {
                const double diff = qrow[j] - trow[j];
                dist += diff * diff;
            }
            if (dist < best) {  // strict: equal distances keep the earlier index
                best = dist;
                best_idx = t;
            }
        }
        out[q] = train_labels[best_idx];
    }
    return out;
}

}  // namespace gzsda
