#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gzsda/ccvae.hpp"
#include "gzsda/classify.hpp"
#include "gzsda/data.hpp"

namespace gzsda {

// Accuracy per class present in the test labels; classes with zero test
// samples simply never appear in the map.
std::map<int, double> per_class_accuracy(const std::vector<int>& predictions,
                                         const std::vector<int>& labels);

// h = 2ab / (a + b), defined as 0 when both accuracies are 0.
double harmonic_mean(double a, double b);

struct HarmonicSummary {
    double acc_seen = 0.0;
    double acc_unseen = 0.0;
    double h = 0.0;
};

// Unweighted means of the per-class accuracies over the seen and unseen
// classes present in the test set.
HarmonicSummary harmonic_summary(const std::map<int, double>& per_class, const SplitSpec& split);

enum class Method { source_only, baseline_1nn, baseline_nn, ccvae };

std::string method_name(Method m);
Method method_from_name(const std::string& name);
const std::vector<Method>& all_methods();

// Per-method knobs for a benchmark run; zeros mean "derive from the
// feature dim" (see default_arch / default_epochs).
struct MethodConfig {
    std::vector<std::size_t> hidden;  // empty = default
    std::size_t latent_dim = 0;       // 0 = default
    std::size_t epochs = 0;           // 0 = default
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double lambda_max = 0.2;
    double warmup_fraction = 0.2;
    std::size_t classifier_epochs = 1000;
    double classifier_learning_rate = 1e-3;
    bool standardize_features = false;
    bool deterministic_mu = false;
    std::uint64_t master_seed = 0;

    std::string echo_json() const;  // canonical (sorted-key) JSON
};

struct EvalReport {
    std::string method;
    int split_id = 0;
    std::map<int, double> per_class_acc;
    double acc_seen = 0.0;
    double acc_unseen = 0.0;
    double h = 0.0;
    std::map<std::string, std::size_t> provenance_counts;  // classifier diet by origin
    std::string config_echo;

    std::string to_json() const;
};

// source_only: 1NN over the source set. baseline_1nn: 1NN over source +
// target-train. baseline_nn: linear classifier over source + target-train.
// ccvae: train the coupled VAE, generate the synthetic budget (per unseen
// class, the median per-class count of real target training rows, plus the
// same budget of within-domain source augmentations for every class), train
// the linear classifier on real + synthetic, and evaluate on target_test.
EvalReport run_method(Method method, const GzsdaTask& task, const MethodConfig& config,
                      int split_id);

struct MethodAggregate {
    std::string method;
    int num_splits = 0;
    double mean_seen = 0.0;
    double mean_unseen = 0.0;
    double mean_h = 0.0;
    std::optional<double> sem_seen;   // absent below 2 splits
    std::optional<double> sem_unseen;
    std::optional<double> sem_h;
};

struct AggregateReport {
    std::vector<MethodAggregate> methods;
    std::string config_echo;
};

// Groups by method and reduces to mean and SEM (sample stddev / sqrt(n)).
// All reports must carry the same config echo.
AggregateReport aggregate(const std::vector<EvalReport>& reports);

std::string summary_csv(const AggregateReport& report, std::uint64_t master_seed);
std::string summary_text(const AggregateReport& report);
std::string summary_json(const AggregateReport& report, std::uint64_t master_seed);

}  // namespace gzsda
