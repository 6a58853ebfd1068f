// gzsda: generalized zero-shot domain adaptation over feature vectors.
// Subcommands: synth-data, train, generate, classify, evaluate, benchmark,
// selfcheck. Config precedence: built-in defaults < --config file < flags.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gzsda/ccvae.hpp"
#include "gzsda/checkpoint.hpp"
#include "gzsda/classify.hpp"
#include "gzsda/data.hpp"
#include "gzsda/eval.hpp"
#include "gzsda/selfcheck.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace gzsda;

struct RunConfig {
    std::uint64_t master_seed = 42;
    std::string out_dir = "gzsda-out";

    bool use_synthetic = true;
    SyntheticConfig synthetic;
    std::string source_path;
    std::string target_path;
    std::string data_format = "fvec";

    int num_unseen = 5;
    int num_splits = 5;
    double target_train_fraction = 0.5;

    MethodConfig method;
    std::vector<std::string> methods = {"source_only", "baseline_1nn", "baseline_nn", "ccvae"};
    int threads = 1;
};

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void overlay_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file '" + path + "'");
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config file '" + path + "' is not valid JSON: " + e.what());
    }
    read_if(j, "master_seed", cfg.master_seed);
    read_if(j, "out_dir", cfg.out_dir);
    read_if(j, "methods", cfg.methods);
    read_if(j, "threads", cfg.threads);
    if (j.contains("data")) {
        const json& d = j.at("data");
        if (d.contains("source") || d.contains("target")) {
            cfg.use_synthetic = false;
            read_if(d, "source", cfg.source_path);
            read_if(d, "target", cfg.target_path);
            read_if(d, "format", cfg.data_format);
        }
        if (d.contains("synthetic")) {
            cfg.use_synthetic = !d.contains("source");
            const json& s = d.at("synthetic");
            read_if(s, "num_classes", cfg.synthetic.num_classes);
            read_if(s, "feature_dim", cfg.synthetic.feature_dim);
            read_if(s, "samples_per_class_per_domain", cfg.synthetic.samples_per_class_per_domain);
            read_if(s, "class_separation", cfg.synthetic.class_separation);
            read_if(s, "noise_sigma", cfg.synthetic.noise_sigma);
            read_if(s, "class_subspace_dim", cfg.synthetic.class_subspace_dim);
            read_if(s, "identity_map", cfg.synthetic.identity_map);
        }
    }
    if (j.contains("split")) {
        const json& s = j.at("split");
        read_if(s, "num_unseen", cfg.num_unseen);
        read_if(s, "num_splits", cfg.num_splits);
        read_if(s, "target_train_fraction", cfg.target_train_fraction);
    }
    if (j.contains("ccvae")) {
        const json& c = j.at("ccvae");
        read_if(c, "hidden", cfg.method.hidden);
        read_if(c, "latent_dim", cfg.method.latent_dim);
        read_if(c, "epochs", cfg.method.epochs);
        read_if(c, "batch_size", cfg.method.batch_size);
        read_if(c, "learning_rate", cfg.method.learning_rate);
        read_if(c, "lambda_max", cfg.method.lambda_max);
        read_if(c, "warmup_fraction", cfg.method.warmup_fraction);
    }
    if (j.contains("classifier")) {
        const json& c = j.at("classifier");
        read_if(c, "epochs", cfg.method.classifier_epochs);
        read_if(c, "learning_rate", cfg.method.classifier_learning_rate);
        read_if(c, "standardize_features", cfg.method.standardize_features);
    }
    if (j.contains("generation")) {
        read_if(j.at("generation"), "deterministic_mu", cfg.method.deterministic_mu);
    }
}

json effective_json(const RunConfig& cfg) {
    json j;
    j["master_seed"] = cfg.master_seed;
    j["out_dir"] = cfg.out_dir;
    if (cfg.use_synthetic) {
        j["data"]["synthetic"] = {{"num_classes", cfg.synthetic.num_classes},
                                  {"feature_dim", cfg.synthetic.feature_dim},
                                  {"samples_per_class_per_domain",
                                   cfg.synthetic.samples_per_class_per_domain},
                                  {"class_separation", cfg.synthetic.class_separation},
                                  {"noise_sigma", cfg.synthetic.noise_sigma},
                                  {"class_subspace_dim", cfg.synthetic.class_subspace_dim},
                                  {"identity_map", cfg.synthetic.identity_map}};
    } else {
        j["data"] = {{"source", cfg.source_path},
                     {"target", cfg.target_path},
                     {"format", cfg.data_format}};
    }
    j["split"] = {{"num_unseen", cfg.num_unseen},
                  {"num_splits", cfg.num_splits},
                  {"target_train_fraction", cfg.target_train_fraction}};
    j["ccvae"] = {{"hidden", cfg.method.hidden},
                  {"latent_dim", cfg.method.latent_dim},
                  {"epochs", cfg.method.epochs},
                  {"batch_size", cfg.method.batch_size},
                  {"learning_rate", cfg.method.learning_rate},
                  {"lambda_max", cfg.method.lambda_max},
                  {"warmup_fraction", cfg.method.warmup_fraction}};
    j["classifier"] = {{"epochs", cfg.method.classifier_epochs},
                       {"learning_rate", cfg.method.classifier_learning_rate},
                       {"standardize_features", cfg.method.standardize_features}};
    j["generation"] = {{"deterministic_mu", cfg.method.deterministic_mu}};
    j["methods"] = cfg.methods;
    j["threads"] = cfg.threads;
    return j;
}

void write_text_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    f << content;
    if (!f) throw std::runtime_error("write to '" + path.string() + "' failed");
}

struct DataPair {
    FeatureDataset source;
    FeatureDataset target;
};

DataPair load_or_generate(RunConfig& cfg) {
    if (cfg.use_synthetic) {
        cfg.synthetic.seed = derive_seed(cfg.master_seed, "synthetic-data");
        const SyntheticBenchmark bench = gen_synthetic_benchmark(cfg.synthetic);
        return {bench.source, bench.target};
    }
    if (cfg.source_path.empty() || cfg.target_path.empty())
        throw std::runtime_error("dataset paths missing: set data.source and data.target");
    const FileFormat format = format_from_name(cfg.data_format);
    for (const std::string& p : {cfg.source_path, cfg.target_path}) {
        if (!fs::exists(p)) throw std::runtime_error("dataset path '" + p + "' does not exist");
    }
    return {load_dataset(cfg.source_path, format), load_dataset(cfg.target_path, format)};
}

// Resolves the zero "use defaults" knobs against the actual feature dim so
// the echoed config states what really ran.
void resolve_method_defaults(RunConfig& cfg, std::size_t feature_dim) {
    const CcvaeArch arch = default_arch(feature_dim);
    if (cfg.method.hidden.empty()) cfg.method.hidden = arch.hidden;
    if (cfg.method.latent_dim == 0) cfg.method.latent_dim = arch.latent_dim;
    if (cfg.method.epochs == 0) cfg.method.epochs = default_epochs(feature_dim);
    cfg.method.master_seed = cfg.master_seed;
}

std::vector<SplitSpec> make_splits(const RunConfig& cfg, const FeatureDataset& source) {
    std::vector<SplitSpec> splits = random_splits(source.num_classes(), cfg.num_unseen,
                                                  cfg.num_splits,
                                                  derive_seed(cfg.master_seed, "splits"));
    for (SplitSpec& s : splits) s.target_train_fraction = cfg.target_train_fraction;
    return splits;
}

std::string loss_history_csv(const RunConfig& cfg, const TrainHistory& history) {
    std::ostringstream out;
    out << "# master_seed=" << cfg.master_seed << " config=" << effective_json(cfg).dump()
        << "\n";
    out << "epoch,recon_s,recon_t,cross_st,cross_ts,kl,lambda,total\n";
    char buf[256];
    for (std::size_t e = 0; e < history.per_epoch.size(); ++e) {
        const LossBreakdown& l = history.per_epoch[e];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e, l.recon_s,
                      l.recon_t, l.cross_st, l.cross_ts, l.kl, l.lambda, l.total);
        out << buf;
    }
    return out.str();
}

std::string lambda_schedule_csv(const RunConfig& cfg, const TrainHistory& history) {
    std::ostringstream out;
    out << "# master_seed=" << cfg.master_seed << "\n";
    out << "step,lambda\n";
    char buf[64];
    for (std::size_t s = 0; s < history.per_step_lambda.size(); ++s) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", s, history.per_step_lambda[s]);
        out << buf;
    }
    return out.str();
}

int cmd_synth_data(RunConfig cfg) {
    cfg.synthetic.seed = derive_seed(cfg.master_seed, "synthetic-data");
    const SyntheticBenchmark bench = gen_synthetic_benchmark(cfg.synthetic);
    const FileFormat format = format_from_name(cfg.data_format);
    const std::string ext = cfg.data_format;
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    const fs::path source_file = dir / ("source." + ext);
    const fs::path target_file = dir / ("target." + ext);
    save_dataset(bench.source, source_file.string(), format);
    save_dataset(bench.target, target_file.string(), format);

    json manifest;
    manifest["files"] = {{"source", source_file.filename().string()},
                         {"target", target_file.filename().string()}};
    manifest["format"] = cfg.data_format;
    json class_names = json::array();
    for (int k = 0; k < cfg.synthetic.num_classes; ++k)
        class_names.push_back("class_" + std::to_string(k));
    manifest["class_names"] = class_names;
    manifest["provenance"] =
        "synthetic two-domain gaussian benchmark (class clusters under one affine domain map)";
    manifest["master_seed"] = cfg.master_seed;
    manifest["config"] = effective_json(cfg);
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::cout << "wrote " << source_file.string() << " (" << bench.source.size() << " rows), "
              << target_file.string() << " (" << bench.target.size() << " rows)\n";
    return 0;
}

int cmd_train(RunConfig cfg, int split_id, const std::string& resume) {
    if (!resume.empty())
        throw std::runtime_error("resume from checkpoint is not supported in v1");
    const DataPair data = load_or_generate(cfg);
    resolve_method_defaults(cfg, data.source.feature_dim);
    if (split_id < 0 || split_id >= cfg.num_splits)
        throw std::runtime_error("split id " + std::to_string(split_id) +
                                 " out of range [0, " + std::to_string(cfg.num_splits) + ")");
    const std::vector<SplitSpec> splits = make_splits(cfg, data.source);
    const GzsdaTask task = make_task(data.source, data.target, splits[split_id]);

    CcvaeArch arch;
    arch.feature_dim = data.source.feature_dim;
    arch.hidden = cfg.method.hidden;
    arch.latent_dim = cfg.method.latent_dim;
    Rng init_rng(derive_seed(cfg.master_seed, "ccvae-init", static_cast<std::uint64_t>(split_id)));
    CcvaeModel model = make_ccvae(arch, init_rng);

    TrainConfig tc;
    tc.epochs = cfg.method.epochs;
    tc.batch_size = cfg.method.batch_size;
    tc.adam.learning_rate = cfg.method.learning_rate;
    tc.lambda_max = cfg.method.lambda_max;
    tc.warmup_fraction = cfg.method.warmup_fraction;
    tc.seed = derive_seed(cfg.master_seed, "ccvae-train", static_cast<std::uint64_t>(split_id));
    const TrainHistory history = train_ccvae(model, task.source_train, task.target_train, tc);

    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    save_ccvae_checkpoint(model, (dir / "ccvae.ckpt").string(), effective_json(cfg).dump());
    write_text_file(dir / "loss_history.csv", loss_history_csv(cfg, history));
    write_text_file(dir / "lambda_schedule.csv", lambda_schedule_csv(cfg, history));
    write_text_file(dir / "config.json", effective_json(cfg).dump(2) + "\n");

    std::cout << "trained " << cfg.method.epochs << " epochs on split " << split_id
              << "; checkpoint at " << (dir / "ccvae.ckpt").string() << "\n";
    if (!history.per_epoch.empty()) {
        std::cout << "final epoch loss total " << history.per_epoch.back().total << "\n";
    }
    return 0;
}

int cmd_generate(const std::string& checkpoint, const std::string& data_path,
                 const std::string& format_name, const std::string& from_name,
                 const std::string& to_name, long long budget, bool deterministic_mu,
                 std::uint64_t seed, const std::string& out_path) {
    if (budget < 0) throw std::runtime_error("budget must be >= 0");
    const auto parse_domain = [](const std::string& s) {
        if (s == "source") return Domain::source;
        if (s == "target") return Domain::target;
        throw std::runtime_error("domain must be 'source' or 'target', got '" + s + "'");
    };
    const Domain from = parse_domain(from_name);
    const Domain to = parse_domain(to_name);

    std::string ckpt_config;
    const CcvaeModel model = load_ccvae_checkpoint(checkpoint, &ckpt_config);
    const FeatureDataset input = load_dataset(data_path, format_from_name(format_name));
    if (input.feature_dim != model.arch.feature_dim) {
        throw std::runtime_error("dataset dim " + std::to_string(input.feature_dim) +
                                 " does not match checkpoint feature_dim " +
                                 std::to_string(model.arch.feature_dim));
    }

    FeatureDataset from_rows;
    from_rows.feature_dim = input.feature_dim;
    for (const FeatureRecord& r : input.records)
        if (r.domain_label == static_cast<int>(from)) from_rows.records.push_back(r);

    FeatureDataset out;
    out.feature_dim = input.feature_dim;
    Rng rng(derive_seed(seed, "generate"));
    for (const auto& [class_label, idx] : from_rows.indices_by_class()) {
        if (budget == 0) break;
        Matrix inputs(static_cast<std::size_t>(budget), input.feature_dim);
        std::vector<int> labels(static_cast<std::size_t>(budget), class_label);
        for (long long i = 0; i < budget; ++i) {
            const FeatureRecord& rec =
                from_rows.records[idx[static_cast<std::size_t>(rng.below(idx.size()))]];
            for (std::size_t j = 0; j < input.feature_dim; ++j)
                inputs(static_cast<std::size_t>(i), j) = rec.features[j];
        }
        const Matrix synth = generate_cross_domain(model, inputs, from, to, rng, deterministic_mu);
        for (std::size_t i = 0; i < synth.rows; ++i) {
            FeatureRecord rec;
            rec.class_label = class_label;
            rec.domain_label = static_cast<int>(to);
            rec.features.assign(synth.data.begin() + static_cast<std::ptrdiff_t>(i * synth.cols),
                                synth.data.begin() +
                                    static_cast<std::ptrdiff_t>((i + 1) * synth.cols));
            out.records.push_back(std::move(rec));
        }
    }
    const fs::path out_file(out_path);
    if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
    save_dataset(out, out_path, FileFormat::fvec);

    json manifest;
    manifest["file"] = out_file.filename().string();
    manifest["checkpoint"] = checkpoint;
    manifest["checkpoint_config"] = json::parse(ckpt_config.empty() ? "{}" : ckpt_config);
    manifest["from_domain"] = from_name;
    manifest["to_domain"] = to_name;
    manifest["budget_per_class"] = budget;
    manifest["deterministic_mu"] = deterministic_mu;
    manifest["master_seed"] = seed;
    write_text_file(out_path + ".json", manifest.dump(2) + "\n");

    std::cout << "wrote " << out.size() << " synthetic rows to " << out_path << "\n";
    return 0;
}

int cmd_classify(const std::vector<std::string>& train_paths, const std::string& test_path,
                 const std::string& format_name, std::size_t epochs, double learning_rate,
                 std::uint64_t seed, int num_classes, const std::string& out_path) {
    const FileFormat format = format_from_name(format_name);
    ClassifierTrainSet train;
    for (const std::string& path : train_paths) {
        const FeatureDataset ds = load_dataset(path, format);
        Matrix feats = ds.features_matrix();
        std::vector<int> labels = ds.labels();
        // tag rows by their recorded domain
        for (std::size_t i = 0; i < ds.size(); ++i) {
            Matrix row(1, ds.feature_dim);
            for (std::size_t j = 0; j < ds.feature_dim; ++j) row(0, j) = feats(i, j);
            train.append(row, {labels[i]},
                         ds.records[i].domain_label == 0 ? Provenance::real_source
                                                         : Provenance::real_target);
        }
    }
    ClassifierConfig cc;
    cc.epochs = epochs;
    cc.adam.learning_rate = learning_rate;
    cc.seed = derive_seed(seed, "classifier");
    const LinearClassifier clf = train_linear(train, cc, num_classes);

    json echo;
    echo["epochs"] = epochs;
    echo["learning_rate"] = learning_rate;
    echo["master_seed"] = seed;
    echo["train_files"] = train_paths;
    const fs::path out_file(out_path);
    if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
    save_classifier_checkpoint(clf, out_path, echo.dump());
    std::cout << "trained classifier on " << train.features.rows << " rows ("
              << clf.num_classes << " classes); checkpoint at " << out_path << "\n";

    if (!test_path.empty()) {
        const FeatureDataset test = load_dataset(test_path, format);
        const std::vector<int> predictions = predict(clf, test.features_matrix());
        const std::map<int, double> per_class = per_class_accuracy(predictions, test.labels());
        double mean = 0.0;
        for (const auto& [class_label, acc] : per_class) mean += acc;
        if (!per_class.empty()) mean /= static_cast<double>(per_class.size());
        std::cout << "mean per-class accuracy on " << test_path << ": " << mean << "\n";
    }
    return 0;
}

void run_splits(const RunConfig& cfg, const DataPair& data,
                const std::vector<SplitSpec>& splits, const std::vector<Method>& methods,
                std::vector<std::vector<EvalReport>>& reports) {
    const int thread_count = std::max(1, std::min<int>(cfg.threads, static_cast<int>(splits.size())));
    auto worker = [&](int worker_id) {
        for (std::size_t i = static_cast<std::size_t>(worker_id); i < splits.size();
             i += static_cast<std::size_t>(thread_count)) {
            const GzsdaTask task = make_task(data.source, data.target, splits[i]);
            for (Method m : methods)
                reports[i].push_back(run_method(m, task, cfg.method, static_cast<int>(i)));
        }
    };
    if (thread_count == 1) {
        worker(0);
        return;
    }
    std::vector<std::thread> pool;
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker, t);
    for (std::thread& t : pool) t.join();
}

int cmd_evaluate(RunConfig cfg, const std::string& method_str, int split_id) {
    const DataPair data = load_or_generate(cfg);
    resolve_method_defaults(cfg, data.source.feature_dim);
    if (split_id < 0 || split_id >= cfg.num_splits)
        throw std::runtime_error("split id " + std::to_string(split_id) + " out of range [0, " +
                                 std::to_string(cfg.num_splits) + ")");
    const std::vector<SplitSpec> splits = make_splits(cfg, data.source);
    const GzsdaTask task = make_task(data.source, data.target, splits[split_id]);
    const Method method = method_from_name(method_str);
    const EvalReport report = run_method(method, task, cfg.method, split_id);

    const fs::path dir = fs::path(cfg.out_dir) / report.method;
    write_text_file(dir / ("split_" + std::to_string(split_id) + ".json"),
                    report.to_json() + "\n");
    std::cout << report.method << " split " << split_id << ": acc_seen=" << report.acc_seen
              << " acc_unseen=" << report.acc_unseen << " h=" << report.h << "\n";
    return 0;
}

int cmd_benchmark(RunConfig cfg) {
    const DataPair data = load_or_generate(cfg);
    resolve_method_defaults(cfg, data.source.feature_dim);
    const std::vector<SplitSpec> splits = make_splits(cfg, data.source);
    std::vector<Method> methods;
    for (const std::string& name : cfg.methods) methods.push_back(method_from_name(name));

    std::vector<std::vector<EvalReport>> reports(splits.size());
    run_splits(cfg, data, splits, methods, reports);

    const fs::path dir(cfg.out_dir);
    std::vector<EvalReport> flat;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        for (const EvalReport& r : reports[i]) {
            write_text_file(dir / r.method / ("split_" + std::to_string(i) + ".json"),
                            r.to_json() + "\n");
            flat.push_back(r);
        }
    }
    const AggregateReport agg = aggregate(flat);
    const std::string text = summary_text(agg);
    write_text_file(dir / "summary.csv", summary_csv(agg, cfg.master_seed));
    write_text_file(dir / "summary.txt",
                    "# master_seed=" + std::to_string(cfg.master_seed) + "\n" + text);
    write_text_file(dir / "summary.json", summary_json(agg, cfg.master_seed) + "\n");
    write_text_file(dir / "config.json", effective_json(cfg).dump(2) + "\n");
    std::cout << text;
    std::cout << "reports under " << dir.string() << "\n";
    return 0;
}

int cmd_selfcheck(bool perturb) {
    SelfCheckOptions options;
    options.perturb_gradient = perturb;
    return run_selfcheck(std::cout, options) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generalized zero-shot domain adaptation over feature vectors"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed_flag = 0;
    std::string out_flag;
    std::string format_flag;
    int threads_flag = 0;
    bool det_mu_flag = false;

    auto add_common = [&](CLI::App* cmd, bool with_format = true) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--seed", seed_flag, "master seed");
        cmd->add_option("--out", out_flag, "output directory");
        if (with_format) cmd->add_option("--format", format_flag, "dataset format (csv or fvec)")
                             ->check(CLI::IsMember({"csv", "fvec"}));
        cmd->add_option("--threads", threads_flag, "worker threads for split-parallel commands");
        cmd->add_flag("--deterministic-mu", det_mu_flag,
                      "decode posterior means instead of sampling when generating");
    };

    // resolves defaults < config file < flags for one subcommand
    auto resolve = [&](CLI::App* cmd) {
        RunConfig cfg;
        if (!config_path.empty()) overlay_config_file(cfg, config_path);
        if (cmd->count("--seed")) cfg.master_seed = seed_flag;
        if (cmd->count("--out")) cfg.out_dir = out_flag;
        if (cmd->get_option_no_throw("--format") && cmd->count("--format"))
            cfg.data_format = format_flag;
        if (cmd->count("--threads")) cfg.threads = threads_flag;
        if (cmd->count("--deterministic-mu")) cfg.method.deterministic_mu = det_mu_flag;
        return cfg;
    };

    int exit_code = 0;
    auto guard = [&exit_code](auto&& fn) {
        try {
            exit_code = fn();
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            exit_code = 1;
        }
    };

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "generate the synthetic two-domain benchmark");
    add_common(synth);
    int synth_classes = 0;
    long long synth_dim = -1;
    int synth_samples = 0;
    double synth_separation = 0.0;
    double synth_noise = -1.0;
    bool synth_identity = false;
    synth->add_option("--classes", synth_classes, "number of classes");
    synth->add_option("--dim", synth_dim, "feature dimension");
    synth->add_option("--samples", synth_samples, "samples per class per domain");
    synth->add_option("--separation", synth_separation, "class separation");
    synth->add_option("--noise-sigma", synth_noise, "cluster noise sigma");
    long long synth_subspace = -1;
    synth->add_option("--subspace-dim", synth_subspace,
                      "dimension of the class-mean subspace (0 = full)");
    synth->add_flag("--identity-map", synth_identity, "no domain shift (control datasets)");
    synth->callback([&] {
        guard([&] {
            RunConfig cfg = resolve(synth);
            cfg.use_synthetic = true;
            if (synth->count("--classes")) cfg.synthetic.num_classes = synth_classes;
            if (synth->count("--dim")) {
                if (synth_dim < 2)
                    throw std::runtime_error("synthetic.feature_dim must be >= 2, got " +
                                             std::to_string(synth_dim));
                cfg.synthetic.feature_dim = static_cast<std::size_t>(synth_dim);
            }
            if (synth->count("--samples")) cfg.synthetic.samples_per_class_per_domain = synth_samples;
            if (synth->count("--separation")) cfg.synthetic.class_separation = synth_separation;
            if (synth->count("--noise-sigma")) cfg.synthetic.noise_sigma = synth_noise;
            if (synth->count("--subspace-dim")) {
                if (synth_subspace < 0)
                    throw std::runtime_error("synthetic.class_subspace_dim must be >= 0");
                cfg.synthetic.class_subspace_dim = static_cast<std::size_t>(synth_subspace);
            }
            if (synth_identity) cfg.synthetic.identity_map = true;
            return cmd_synth_data(cfg);
        });
    });

    // train
    auto* train = app.add_subcommand("train", "train the coupled conditional VAE");
    add_common(train);
    int train_split = 0;
    std::string resume_path;
    train->add_option("--split-id", train_split, "which seen/unseen split to train on");
    train->add_option("--resume", resume_path, "resume from a checkpoint (unsupported)");
    train->callback([&] {
        guard([&] { return cmd_train(resolve(train), train_split, resume_path); });
    });

    // generate
    auto* gen = app.add_subcommand("generate", "generate synthetic features from a checkpoint");
    std::string gen_ckpt;
    std::string gen_data;
    std::string gen_format = "fvec";
    std::string gen_from = "source";
    std::string gen_to = "target";
    long long gen_budget = 0;
    bool gen_det_mu = false;
    std::uint64_t gen_seed = 42;
    std::string gen_out = "synthetic.fvec";
    gen->add_option("--checkpoint", gen_ckpt, "CCVAE checkpoint")->required();
    gen->add_option("--data", gen_data, "input feature file")->required();
    gen->add_option("--format", gen_format, "dataset format")->check(CLI::IsMember({"csv", "fvec"}));
    gen->add_option("--from-domain", gen_from, "domain of the input rows");
    gen->add_option("--to-domain", gen_to, "domain to generate into");
    gen->add_option("--budget", gen_budget, "rows to generate per class")->required();
    gen->add_flag("--deterministic-mu", gen_det_mu, "decode the posterior mean instead of sampling");
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--out", gen_out, "output fvec path");
    gen->callback([&] {
        guard([&] {
            return cmd_generate(gen_ckpt, gen_data, gen_format, gen_from, gen_to, gen_budget,
                                gen_det_mu, gen_seed, gen_out);
        });
    });

    // classify
    auto* cls = app.add_subcommand("classify", "train a linear classifier on feature files");
    std::vector<std::string> cls_train;
    std::string cls_test;
    std::string cls_format = "fvec";
    std::size_t cls_epochs = 200;
    double cls_lr = 1e-3;
    std::uint64_t cls_seed = 42;
    int cls_classes = 0;
    std::string cls_out = "classifier.ckpt";
    cls->add_option("--train-data", cls_train, "training feature files")->required();
    cls->add_option("--test-data", cls_test, "optional test feature file");
    cls->add_option("--format", cls_format, "dataset format")->check(CLI::IsMember({"csv", "fvec"}));
    cls->add_option("--epochs", cls_epochs, "training epochs");
    cls->add_option("--learning-rate", cls_lr, "Adam learning rate");
    cls->add_option("--seed", cls_seed, "master seed");
    cls->add_option("--num-classes", cls_classes, "class count (0 = infer)");
    cls->add_option("--out", cls_out, "checkpoint output path");
    cls->callback([&] {
        guard([&] {
            return cmd_classify(cls_train, cls_test, cls_format, cls_epochs, cls_lr, cls_seed,
                                cls_classes, cls_out);
        });
    });

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "run one method on one split");
    add_common(eval_cmd);
    std::string eval_method = "ccvae";
    int eval_split = 0;
    eval_cmd->add_option("--method", eval_method, "source_only, baseline_1nn, baseline_nn or ccvae")
        ->required();
    eval_cmd->add_option("--split-id", eval_split, "split index");
    eval_cmd->callback([&] {
        guard([&] { return cmd_evaluate(resolve(eval_cmd), eval_method, eval_split); });
    });

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "run all methods over all splits");
    add_common(bench);
    std::vector<std::string> bench_methods;
    bench->add_option("--methods", bench_methods, "subset of methods to run");
    bench->callback([&] {
        guard([&] {
            RunConfig cfg = resolve(bench);
            if (!bench_methods.empty()) cfg.methods = bench_methods;
            return cmd_benchmark(cfg);
        });
    });

    // selfcheck
    auto* self = app.add_subcommand("selfcheck", "gradient, KL and determinism checks");
    bool perturb = false;
    self->add_flag("--perturb-gradient", perturb, "test hook: corrupt one gradient")
        ->group("");  // hidden
    self->callback([&] { guard([&] { return cmd_selfcheck(perturb); }); });

    CLI11_PARSE(app, argc, argv);
    return exit_code;
}
