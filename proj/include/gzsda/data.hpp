#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gzsda/matrix.hpp"
#include "gzsda/rng.hpp"

namespace gzsda {

enum class Domain : int { source = 0, target = 1 };

inline const char* domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

struct FeatureRecord {
    std::vector<double> features;
    int class_label = 0;
    int domain_label = 0;  // 0 = source, 1 = target
};

// Rows of (feature vector, class label, domain label); everything the
// pipeline consumes is one of these.
struct FeatureDataset {
    std::size_t feature_dim = 0;
    std::vector<FeatureRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    std::set<int> class_set() const;
    int num_classes() const;  // max label + 1; 0 when empty
    Matrix features_matrix() const;
    std::vector<int> labels() const;
    std::map<int, std::vector<std::size_t>> indices_by_class() const;
};

enum class FileFormat { csv, fvec };

FileFormat format_from_name(const std::string& name);

// csv: header "dim=<d>", rows "f1,...,fd,class,domain".
// fvec: magic "FVGZ", u32 version=1, u32 n, u32 d, then n records of
// d little-endian f32 + u16 class + u8 domain.
FeatureDataset load_dataset(const std::string& path, FileFormat format);
void save_dataset(const FeatureDataset& ds, const std::string& path, FileFormat format);

struct SplitSpec {
    std::set<int> seen_classes;
    std::set<int> unseen_classes;
    double target_train_fraction = 0.5;
    std::uint64_t seed = 0;

    bool is_seen(int class_label) const { return seen_classes.count(class_label) > 0; }
};

// One experiment instance: full labelled source set, seen-class target
// training set, and the all-class target test set.
struct GzsdaTask {
    FeatureDataset source_train;
    FeatureDataset target_train;
    FeatureDataset target_test;
    SplitSpec split;
};

// Splits the target per class at target_train_fraction (floor for the train
// share) with a shuffle seeded from spec.seed; unseen-class target records
// all go to the test side. The source passes through whole.
GzsdaTask make_task(const FeatureDataset& source, const FeatureDataset& target,
                    const SplitSpec& spec);

// num_splits distinct seen/unseen partitions, deterministically derived from
// seed. Throws when num_unseen is 0 or distinct partitions cannot exist.
std::vector<SplitSpec> random_splits(int num_classes, int num_unseen, int num_splits,
                                     std::uint64_t seed);

// Aligned same-class source/target rows; rows whose source class has no
// target partner carry a zero dummy and valid_t = false.
struct PairBatch {
    Matrix x_s;
    Matrix x_t;
    std::vector<int> class_labels;
    std::vector<bool> valid_t;

    std::size_t batch_size() const { return x_s.rows; }
    std::size_t valid_count() const;
};

// Builds the batch for source rows order[batch_start .. batch_start+batch_size).
// Each row whose class appears in target_train draws a same-class partner
// uniformly at random with replacement; other rows get the dummy.
PairBatch sample_pairs(const FeatureDataset& source, const FeatureDataset& target_train,
                       const std::vector<std::size_t>& order, std::size_t batch_start,
                       std::size_t batch_size, Rng& rng);

PairBatch sample_pairs(const GzsdaTask& task, const std::vector<std::size_t>& order,
                       std::size_t batch_start, std::size_t batch_size, Rng& rng);

// Two-domain Gaussian-cluster benchmark. Source class k is N(mu_k, sigma^2 I);
// the class means live in a random class_subspace_dim-dimensional subspace
// (coordinates drawn N(0, class_separation^2), so the class structure sits
// class_separation noise-sigmas wide per direction of variation). Target
// class k is A*mu_k + b + N(0, sigma^2 I) for one fixed affine map (random
// orthogonal basis, per-dimension scaling in [0.5, 2], bias of norm
// class_separation) shared by all classes. Keeping the means low-dimensional
// is what makes the map recoverable from the seen classes alone: their means
// span the subspace, so the relation learned on them extends to the unseen
// means. identity_map disables the shift for control runs.
struct SyntheticConfig {
    int num_classes = 10;
    std::size_t feature_dim = 32;
    int samples_per_class_per_domain = 200;
    double class_separation = 4.0;
    double noise_sigma = 1.0;
    std::size_t class_subspace_dim = 2;  // 0 = means span the full feature space
    bool identity_map = false;
    std::uint64_t seed = 0;
};

struct SyntheticBenchmark {
    FeatureDataset source;
    FeatureDataset target;
};

SyntheticBenchmark gen_synthetic_benchmark(const SyntheticConfig& config);

}  // namespace gzsda
