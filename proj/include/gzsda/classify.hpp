#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gzsda/data.hpp"
#include "gzsda/nn.hpp"

namespace gzsda {

enum class Provenance { real_source, real_target, synth_target, synth_source };

const char* provenance_name(Provenance p);

// Features plus labels plus an origin tag per row, so reports can show how
// much of the classifier's diet was synthetic.
struct ClassifierTrainSet {
    Matrix features;
    std::vector<int> labels;
    std::vector<Provenance> provenance;

    void append(const Matrix& feats, const std::vector<int>& row_labels, Provenance tag);
    std::map<std::string, std::size_t> provenance_counts() const;
};

// Single affine map from features to class logits.
struct LinearClassifier {
    Parameter weights;  // d x C
    Parameter bias;     // 1 x C
    int num_classes = 0;

    Matrix logits(const Matrix& features) const;
};

struct ClassifierConfig {
    std::size_t epochs = 200;
    AdamConfig adam;  // learning_rate 1e-3
    std::uint64_t seed = 0;
};

// Full-batch Adam on mean softmax cross-entropy. num_classes = 0 infers
// C = max label + 1. Per-epoch losses land in epoch_losses when given.
LinearClassifier train_linear(const ClassifierTrainSet& train, const ClassifierConfig& config,
                              int num_classes = 0, std::vector<double>* epoch_losses = nullptr);

// Argmax of the logits per row; ties break toward the lowest class id.
std::vector<int> predict(const LinearClassifier& classifier, const Matrix& features);

// k = 1 nearest neighbour under Euclidean distance; exact distance ties
// break toward the lowest training-row index.
std::vector<int> knn_predict(const Matrix& train_features, const std::vector<int>& train_labels,
                             const Matrix& query, int k = 1);

}  // namespace gzsda
