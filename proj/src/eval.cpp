#include "gzsda/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace gzsda {

std::map<int, double> per_class_accuracy(const std::vector<int>& predictions,
                                         const std::vector<int>& labels) {
    if (predictions.size() != labels.size()) {
        throw std::invalid_argument("per_class_accuracy: " + std::to_string(predictions.size()) +
                                    " predictions for " + std::to_string(labels.size()) +
                                    " labels");
    }
    std::map<int, std::size_t> totals;
    std::map<int, std::size_t> hits;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        totals[labels[i]] += 1;
        if (predictions[i] == labels[i]) hits[labels[i]] += 1;
    }
    std::map<int, double> out;
    for (const auto& [class_label, total] : totals) {
        out[class_label] =
            static_cast<double>(hits[class_label]) / static_cast<double>(total);
    }
    return out;
}

double harmonic_mean(double a, double b) {
    if (a + b == 0.0) return 0.0;
    return 2.0 * a * b / (a + b);
}

HarmonicSummary harmonic_summary(const std::map<int, double>& per_class, const SplitSpec& split) {
    double seen_sum = 0.0;
    double unseen_sum = 0.0;
    std::size_t seen_n = 0;
    std::size_t unseen_n = 0;
    for (const auto& [class_label, acc] : per_class) {
        if (split.is_seen(class_label)) {
            seen_sum += acc;
            ++seen_n;
        } else if (split.unseen_classes.count(class_label)) {
            unseen_sum += acc;
            ++unseen_n;
        } else {
            throw std::invalid_argument("harmonic_summary: class " +
                                        std::to_string(class_label) +
                                        " is in neither partition");
        }
    }
    HarmonicSummary s;
    s.acc_seen = seen_n > 0 ? seen_sum / static_cast<double>(seen_n) : 0.0;
    s.acc_unseen = unseen_n > 0 ? unseen_sum / static_cast<double>(unseen_n) : 0.0;
    s.h = harmonic_mean(s.acc_seen, s.acc_unseen);
    return s;
}

std::string method_name(Method m) {
    switch (m) {
        case Method::source_only: return "source_only";
        case Method::baseline_1nn: return "baseline_1nn";
        case Method::baseline_nn: return "baseline_nn";
        case Method::ccvae: return "ccvae";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    for (Method m : all_methods())
        if (method_name(m) == name) return m;
    throw std::invalid_argument("unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods{Method::source_only, Method::baseline_1nn,
                                             Method::baseline_nn, Method::ccvae};
    return methods;
}

std::string MethodConfig::echo_json() const {
    nlohmann::json j;
    j["hidden"] = hidden;
    j["latent_dim"] = latent_dim;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["lambda_max"] = lambda_max;
    j["warmup_fraction"] = warmup_fraction;
    j["classifier_epochs"] = classifier_epochs;
    j["classifier_learning_rate"] = classifier_learning_rate;
    j["standardize_features"] = standardize_features;
    j["deterministic_mu"] = deterministic_mu;
    j["master_seed"] = master_seed;
    return j.dump();
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["method"] = method;
    j["split_id"] = split_id;
    j["acc_seen"] = acc_seen;
    j["acc_unseen"] = acc_unseen;
    j["h"] = h;
    nlohmann::json per_class = nlohmann::json::object();
    for (const auto& [class_label, acc] : per_class_acc)
        per_class[std::to_string(class_label)] = acc;
    j["per_class_acc"] = per_class;
    j["training_rows"] = provenance_counts;
    j["config"] = nlohmann::json::parse(config_echo.empty() ? "{}" : config_echo);
    return j.dump(2);
}

namespace {

struct Standardizer {
    std::vector<double> mean;
    std::vector<double> inv_std;

    static Standardizer fit(const Matrix& features) {
        Standardizer s;
        s.mean.assign(features.cols, 0.0);
        s.inv_std.assign(features.cols, 1.0);
        if (features.rows == 0) return s;
        for (std::size_t i = 0; i < features.rows; ++i)
            for (std::size_t j = 0; j < features.cols; ++j) s.mean[j] += features(i, j);
        for (double& m : s.mean) m /= static_cast<double>(features.rows);
        std::vector<double> var(features.cols, 0.0);
        for (std::size_t i = 0; i < features.rows; ++i) {
            for (std::size_t j = 0; j < features.cols; ++j) {
                const double d = features(i, j) - s.mean[j];
                var[j] += d * d;
            }
        }
        for (std::size_t j = 0; j < features.cols; ++j) {
            const double sd = std::sqrt(var[j] / static_cast<double>(features.rows));
            s.inv_std[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
        }
        return s;
    }

    Matrix apply(const Matrix& features) const {
        Matrix out = features;
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t j = 0; j < out.cols; ++j)
                out(i, j) = (out(i, j) - mean[j]) * inv_std[j];
        return out;
    }
};

// Median per-class count of the target training rows, lower-rounded for an
// even class count.
std::size_t synthetic_budget(const FeatureDataset& target_train) {
    std::vector<std::size_t> counts;
    for (const auto& [class_label, idx] : target_train.indices_by_class())
        counts.push_back(idx.size());
    if (counts.empty()) return 0;
    std::sort(counts.begin(), counts.end());
    const std::size_t n = counts.size();
    if (n % 2 == 1) return counts[n / 2];
    return (counts[n / 2 - 1] + counts[n / 2]) / 2;
}

// Rows of the given class drawn uniformly with replacement.
Matrix draw_class_rows(const FeatureDataset& ds, const std::vector<std::size_t>& class_indices,
                       std::size_t count, Rng& rng) {
    Matrix out(count, ds.feature_dim);
    for (std::size_t i = 0; i < count; ++i) {
        const FeatureRecord& rec =
            ds.records[class_indices[static_cast<std::size_t>(rng.below(class_indices.size()))]];
        for (std::size_t j = 0; j < ds.feature_dim; ++j) out(i, j) = rec.features[j];
    }
    return out;
}

EvalReport finish_report(Method method, const GzsdaTask& task, const MethodConfig& config,
                         int split_id, const std::vector<int>& predictions,
                         std::map<std::string, std::size_t> provenance_counts) {
    EvalReport report;
    report.method = method_name(method);
    report.split_id = split_id;
    report.per_class_acc = per_class_accuracy(predictions, task.target_test.labels());
    const HarmonicSummary s = harmonic_summary(report.per_class_acc, task.split);
    report.acc_seen = s.acc_seen;
    report.acc_unseen = s.acc_unseen;
    report.h = s.h;
    report.provenance_counts = std::move(provenance_counts);
    report.config_echo = config.echo_json();
    return report;
}

}  // namespace

EvalReport run_method(Method method, const GzsdaTask& task, const MethodConfig& config,
                      int split_id) {
    if (task.target_test.empty()) throw std::invalid_argument("run_method: empty target test set");
    const std::size_t d = task.source_train.feature_dim;
    const int num_classes = task.source_train.num_classes();
    const std::uint64_t split_index = static_cast<std::uint64_t>(split_id);

    Matrix test_features = task.target_test.features_matrix();

    if (method == Method::source_only || method == Method::baseline_1nn) {
        ClassifierTrainSet train;
        train.append(task.source_train.features_matrix(), task.source_train.labels(),
                     Provenance::real_source);
        if (method == Method::baseline_1nn) {
            train.append(task.target_train.features_matrix(), task.target_train.labels(),
                         Provenance::real_target);
        }
        Matrix train_features = train.features;
        if (config.standardize_features) {
            const Standardizer s = Standardizer::fit(train_features);
            train_features = s.apply(train_features);
            test_features = s.apply(test_features);
        }
        const std::vector<int> predictions =
            knn_predict(train_features, train.labels, test_features);
        return finish_report(method, task, config, split_id, predictions,
                             train.provenance_counts());
    }

    ClassifierTrainSet train;
    train.append(task.source_train.features_matrix(), task.source_train.labels(),
                 Provenance::real_source);
    train.append(task.target_train.features_matrix(), task.target_train.labels(),
                 Provenance::real_target);

    if (method == Method::ccvae) {
        CcvaeArch arch = default_arch(d);
        if (!config.hidden.empty()) arch.hidden = config.hidden;
        if (config.latent_dim != 0) arch.latent_dim = config.latent_dim;

        TrainConfig tc;
        tc.epochs = config.epochs != 0 ? config.epochs : default_epochs(d);
        tc.batch_size = config.batch_size;
        tc.adam.learning_rate = config.learning_rate;
        tc.lambda_max = config.lambda_max;
        tc.warmup_fraction = config.warmup_fraction;
        tc.seed = derive_seed(config.master_seed, "ccvae-train", split_index);

        Rng init_rng(derive_seed(config.master_seed, "ccvae-init", split_index));
        CcvaeModel model = make_ccvae(arch, init_rng);
        train_ccvae(model, task.source_train, task.target_train, tc);

        const std::size_t budget = synthetic_budget(task.target_train);
        Rng gen_rng(derive_seed(config.master_seed, "ccvae-generate", split_index));
        const auto source_by_class = task.source_train.indices_by_class();
        if (budget > 0) {
            // target-domain features for the unseen classes
            for (const auto& [class_label, idx] : source_by_class) {
                if (task.split.is_seen(class_label)) continue;
                const Matrix inputs = draw_class_rows(task.source_train, idx, budget, gen_rng);
                const Matrix synth = generate_cross_domain(model, inputs, Domain::source,
                                                           Domain::target, gen_rng,
                                                           config.deterministic_mu);
                train.append(synth, std::vector<int>(budget, class_label),
                             Provenance::synth_target);
            }
            // within-domain source augmentation for every class
            for (const auto& [class_label, idx] : source_by_class) {
                const Matrix inputs = draw_class_rows(task.source_train, idx, budget, gen_rng);
                const Matrix synth = generate_cross_domain(model, inputs, Domain::source,
                                                           Domain::source, gen_rng,
                                                           config.deterministic_mu);
                train.append(synth, std::vector<int>(budget, class_label),
                             Provenance::synth_source);
            }
        }
    }

    Matrix train_features = train.features;
    if (config.standardize_features) {
        const Standardizer s = Standardizer::fit(train_features);
        train_features = s.apply(train_features);
        test_features = s.apply(test_features);
    }

    ClassifierConfig cc;
    cc.epochs = config.classifier_epochs;
    cc.adam.learning_rate = config.classifier_learning_rate;
    cc.seed = derive_seed(config.master_seed, "classifier-" + method_name(method), split_index);
    ClassifierTrainSet scaled = train;
    scaled.features = std::move(train_features);
    const LinearClassifier clf = train_linear(scaled, cc, num_classes);
    const std::vector<int> predictions = predict(clf, test_features);
    return finish_report(method, task, config, split_id, predictions, train.provenance_counts());
}

AggregateReport aggregate(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
    for (const EvalReport& r : reports) {
        if (r.config_echo != reports.front().config_echo) {
            throw std::invalid_argument(
                "aggregate: reports carry inconsistent configs (method " + r.method +
                ", split " + std::to_string(r.split_id) + ")");
        }
    }

    std::vector<std::string> order;
    for (Method m : all_methods()) order.push_back(method_name(m));
    for (const EvalReport& r : reports)
        if (std::find(order.begin(), order.end(), r.method) == order.end())
            order.push_back(r.method);

    AggregateReport out;
    out.config_echo = reports.front().config_echo;
    for (const std::string& name : order) {
        std::vector<const EvalReport*> group;
        for (const EvalReport& r : reports)
            if (r.method == name) group.push_back(&r);
        if (group.empty()) continue;

        auto stats = [&group](double EvalReport::*field) {
            double mean = 0.0;
            for (const EvalReport* r : group) mean += r->*field;
            mean /= static_cast<double>(group.size());
            std::optional<double> sem;
            if (group.size() >= 2) {
                double ss = 0.0;
                for (const EvalReport* r : group) {
                    const double diff = r->*field - mean;
                    ss += diff * diff;
                }
                const double stddev = std::sqrt(ss / static_cast<double>(group.size() - 1));
                sem = stddev / std::sqrt(static_cast<double>(group.size()));
            }
            return std::pair<double, std::optional<double>>(mean, sem);
        };

        MethodAggregate agg;
        agg.method = name;
        agg.num_splits = static_cast<int>(group.size());
        std::tie(agg.mean_seen, agg.sem_seen) = stats(&EvalReport::acc_seen);
        std::tie(agg.mean_unseen, agg.sem_unseen) = stats(&EvalReport::acc_unseen);
        std::tie(agg.mean_h, agg.sem_h) = stats(&EvalReport::h);
        out.methods.push_back(std::move(agg));
    }
    return out;
}

namespace {
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }
}  // namespace

std::string summary_csv(const AggregateReport& report, std::uint64_t master_seed) {
    std::string out = "# master_seed=" + std::to_string(master_seed) +
                      " config=" + report.config_echo + "\n";
    out +=
        "method,splits,acc_seen_mean,acc_seen_sem,acc_unseen_mean,acc_unseen_sem,h_mean,h_sem\n";
    for (const MethodAggregate& m : report.methods) {
        out += m.method + "," + std::to_string(m.num_splits) + "," + fmt(m.mean_seen) + "," +
               fmt_opt(m.sem_seen) + "," + fmt(m.mean_unseen) + "," + fmt_opt(m.sem_unseen) +
               "," + fmt(m.mean_h) + "," + fmt_opt(m.sem_h) + "\n";
    }
    return out;
}

std::string summary_json(const AggregateReport& report, std::uint64_t master_seed) {
    nlohmann::json j;
    j["master_seed"] = master_seed;
    j["config"] = nlohmann::json::parse(report.config_echo.empty() ? "{}" : report.config_echo);
    nlohmann::json methods = nlohmann::json::array();
    for (const MethodAggregate& m : report.methods) {
        nlohmann::json row;
        row["method"] = m.method;
        row["splits"] = m.num_splits;
        row["acc_seen_mean"] = m.mean_seen;
        row["acc_unseen_mean"] = m.mean_unseen;
        row["h_mean"] = m.mean_h;
        row["acc_seen_sem"] = m.sem_seen ? nlohmann::json(*m.sem_seen) : nlohmann::json();
        row["acc_unseen_sem"] = m.sem_unseen ? nlohmann::json(*m.sem_unseen) : nlohmann::json();
        row["h_sem"] = m.sem_h ? nlohmann::json(*m.sem_h) : nlohmann::json();
        methods.push_back(std::move(row));
    }
    j["methods"] = std::move(methods);
    return j.dump(2);
}

std::string summary_text(const AggregateReport& report) {
    auto cell = [](double mean, const std::optional<double>& sem) {
        char buf[48];
        if (sem)
            std::snprintf(buf, sizeof(buf), "%.4f +- %.4f", mean, *sem);
        else
            std::snprintf(buf, sizeof(buf), "%.4f", mean);
        return std::string(buf);
    };
    char line[160];
    std::string out;
    std::snprintf(line, sizeof(line), "%-14s %-18s %-18s %-18s\n", "Method", "Acc_seen",
                  "Acc_unseen", "H");
    out += line;
    for (const MethodAggregate& m : report.methods) {
        std::snprintf(line, sizeof(line), "%-14s %-18s %-18s %-18s\n", m.method.c_str(),
                      cell(m.mean_seen, m.sem_seen).c_str(),
                      cell(m.mean_unseen, m.sem_unseen).c_str(),
                      cell(m.mean_h, m.sem_h).c_str());
        out += line;
    }
    return out;
}

}  // namespace gzsda
