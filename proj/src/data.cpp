#include "gzsda/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gzsda {

std::set<int> FeatureDataset::class_set() const {
    std::set<int> out;
    for (const FeatureRecord& r : records) out.insert(r.class_label);
    return out;
}

int FeatureDataset::num_classes() const {
    int max_label = -1;
    for (const FeatureRecord& r : records) max_label = std::max(max_label, r.class_label);
    return max_label + 1;
}

Matrix FeatureDataset::features_matrix() const {
    Matrix out(records.size(), feature_dim);
    for (std::size_t i = 0; i < records.size(); ++i)
        for (std::size_t j = 0; j < feature_dim; ++j) out(i, j) = records[i].features[j];
    return out;
}

std::vector<int> FeatureDataset::labels() const {
    std::vector<int> out;
    out.reserve(records.size());
    for (const FeatureRecord& r : records) out.push_back(r.class_label);
    return out;
}

std::map<int, std::vector<std::size_t>> FeatureDataset::indices_by_class() const {
    std::map<int, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < records.size(); ++i) out[records[i].class_label].push_back(i);
    return out;
}

FileFormat format_from_name(const std::string& name) {
    if (name == "csv") return FileFormat::csv;
    if (name == "fvec") return FileFormat::fvec;
    throw std::invalid_argument("unknown dataset format '" + name + "' (expected csv or fvec)");
}

namespace {

void validate_record_ranges(int class_label, int domain_label, const std::string& where) {
    if (class_label < 0 || class_label > 65535) {
        throw std::runtime_error(where + ": class label " + std::to_string(class_label) +
                                 " out of range [0, 65536)");
    }
    if (domain_label != 0 && domain_label != 1) {
        throw std::runtime_error(where + ": domain label " + std::to_string(domain_label) +
                                 " must be 0 (source) or 1 (target)");
    }
}

FeatureDataset load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path + ":1: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("dim=", 0) != 0)
        throw std::runtime_error(path + ":1: malformed header '" + line + "' (expected dim=<d>)");
    long dim_value = 0;
    try {
        dim_value = std::stol(line.substr(4));
    } catch (const std::exception&) {
        throw std::runtime_error(path + ":1: malformed header '" + line + "'");
    }
    if (dim_value <= 0) throw std::runtime_error(path + ":1: feature dim must be positive");

    FeatureDataset ds;
    ds.feature_dim = static_cast<std::size_t>(dim_value);
    std::size_t line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != ds.feature_dim + 2) {
            throw std::runtime_error(where + ": expected " + std::to_string(ds.feature_dim + 2) +
                                     " fields, got " + std::to_string(fields.size()));
        }
        FeatureRecord rec;
        rec.features.resize(ds.feature_dim);
        for (std::size_t j = 0; j < ds.feature_dim; ++j) {
            char* end = nullptr;
            // file floats are 32-bit; widen on load
            const float v = std::strtof(fields[j].c_str(), &end);
            if (end == fields[j].c_str() || *end != '\0')
                throw std::runtime_error(where + ": bad float '" + fields[j] + "'");
            rec.features[j] = static_cast<double>(v);
        }
        try {
            rec.class_label = std::stoi(fields[ds.feature_dim]);
            rec.domain_label = std::stoi(fields[ds.feature_dim + 1]);
        } catch (const std::exception&) {
            throw std::runtime_error(where + ": bad class/domain field");
        }
        validate_record_ranges(rec.class_label, rec.domain_label, where);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void save_csv(const FeatureDataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("save_dataset: cannot open '" + path + "' for writing");
    f << "dim=" << ds.feature_dim << "\n";
    char buf[64];
    for (const FeatureRecord& r : ds.records) {
        for (std::size_t j = 0; j < ds.feature_dim; ++j) {
            // %.9g round-trips a 32-bit float exactly
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<float>(r.features[j]));
            f << buf << ',';
        }
        f << r.class_label << ',' << r.domain_label << "\n";
    }
    if (!f) throw std::runtime_error("save_dataset: write to '" + path + "' failed");
}

constexpr char kFvecMagic[4] = {'F', 'V', 'G', 'Z'};

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

FeatureDataset load_fvec(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_dataset: cannot open '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kFvecMagic, 4) != 0)
        throw std::runtime_error(path + ": offset 0: bad magic (expected FVGZ)");
    const std::uint32_t version = read_u32(f);
    if (!f || version != 1)
        throw std::runtime_error(path + ": offset 4: unsupported version " +
                                 std::to_string(version));
    const std::uint32_t n = read_u32(f);
    const std::uint32_t d = read_u32(f);
    if (!f) throw std::runtime_error(path + ": offset 8: truncated header");
    if (d == 0) throw std::runtime_error(path + ": offset 12: feature dim must be positive");

    FeatureDataset ds;
    ds.feature_dim = d;
    ds.records.reserve(n);
    const std::size_t record_bytes = static_cast<std::size_t>(d) * 4 + 2 + 1;
    std::vector<unsigned char> buf(record_bytes);
    for (std::uint32_t i = 0; i < n; ++i) {
        f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record_bytes));
        if (!f) {
            throw std::runtime_error(path + ": offset " +
                                     std::to_string(16 + static_cast<std::size_t>(i) * record_bytes) +
                                     ": truncated record " + std::to_string(i) + " of " +
                                     std::to_string(n));
        }
        FeatureRecord rec;
        rec.features.resize(d);
        for (std::uint32_t j = 0; j < d; ++j) {
            std::uint32_t bits = static_cast<std::uint32_t>(buf[j * 4]) |
                                 (static_cast<std::uint32_t>(buf[j * 4 + 1]) << 8) |
                                 (static_cast<std::uint32_t>(buf[j * 4 + 2]) << 16) |
                                 (static_cast<std::uint32_t>(buf[j * 4 + 3]) << 24);
            float v;
            std::memcpy(&v, &bits, 4);
            rec.features[j] = static_cast<double>(v);
        }
        rec.class_label = static_cast<int>(buf[d * 4]) | (static_cast<int>(buf[d * 4 + 1]) << 8);
        rec.domain_label = static_cast<int>(buf[d * 4 + 2]);
        validate_record_ranges(rec.class_label, rec.domain_label,
                               path + ": record " + std::to_string(i));
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void save_fvec(const FeatureDataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_dataset: cannot open '" + path + "' for writing");
    f.write(kFvecMagic, 4);
    write_u32(f, 1);
    write_u32(f, static_cast<std::uint32_t>(ds.records.size()));
    write_u32(f, static_cast<std::uint32_t>(ds.feature_dim));
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const FeatureRecord& r = ds.records[i];
        if (r.features.size() != ds.feature_dim)
            throw std::runtime_error("save_dataset: record " + std::to_string(i) +
                                     " has inconsistent dim");
        validate_record_ranges(r.class_label, r.domain_label,
                               "save_dataset: record " + std::to_string(i));
        for (std::size_t j = 0; j < ds.feature_dim; ++j) {
            const float v = static_cast<float>(r.features[j]);
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            write_u32(f, bits);
        }
        const unsigned char tail[3] = {static_cast<unsigned char>(r.class_label & 0xFF),
                                       static_cast<unsigned char>((r.class_label >> 8) & 0xFF),
                                       static_cast<unsigned char>(r.domain_label)};
        f.write(reinterpret_cast<const char*>(tail), 3);
    }
    if (!f) throw std::runtime_error("save_dataset: write to '" + path + "' failed");
}

}  // namespace

FeatureDataset load_dataset(const std::string& path, FileFormat format) {
    return format == FileFormat::csv ? load_csv(path) : load_fvec(path);
}

void save_dataset(const FeatureDataset& ds, const std::string& path, FileFormat format) {
    if (format == FileFormat::csv)
        save_csv(ds, path);
    else
        save_fvec(ds, path);
}

GzsdaTask make_task(const FeatureDataset& source, const FeatureDataset& target,
                    const SplitSpec& spec) {
    if (source.feature_dim != target.feature_dim) {
        throw std::invalid_argument("make_task: feature dims differ (source " +
                                    std::to_string(source.feature_dim) + ", target " +
                                    std::to_string(target.feature_dim) + ")");
    }
    if (spec.target_train_fraction <= 0.0 || spec.target_train_fraction >= 1.0)
        throw std::invalid_argument("make_task: target_train_fraction must be in (0, 1)");
    for (int c : spec.seen_classes)
        if (spec.unseen_classes.count(c))
            throw std::invalid_argument("make_task: class " + std::to_string(c) +
                                        " is both seen and unseen");
    const std::set<int> source_classes = source.class_set();
    const std::set<int> target_classes = target.class_set();
    std::set<int> split_classes = spec.seen_classes;
    split_classes.insert(spec.unseen_classes.begin(), spec.unseen_classes.end());
    if (split_classes != source_classes) {
        throw std::invalid_argument(
            "make_task: seen+unseen classes do not cover the source class set");
    }
    for (int c : target_classes) {
        if (!source_classes.count(c))
            throw std::invalid_argument("make_task: target class " + std::to_string(c) +
                                        " missing from the source");
    }
    for (int c : spec.seen_classes) {
        if (!target_classes.count(c))
            throw std::invalid_argument("make_task: seen class " + std::to_string(c) +
                                        " has no target records (cannot pair)");
    }

    GzsdaTask task;
    task.split = spec;
    task.source_train = source;
    task.target_train.feature_dim = target.feature_dim;
    task.target_test.feature_dim = target.feature_dim;

    for (const auto& [class_label, idx] : target.indices_by_class()) {
        std::vector<std::size_t> shuffled = idx;
        Rng rng(derive_seed(spec.seed, "target-split", static_cast<std::uint64_t>(class_label)));
        rng.shuffle(shuffled);
        std::size_t train_count = 0;
        if (spec.is_seen(class_label)) {
            train_count = static_cast<std::size_t>(
                std::floor(spec.target_train_fraction * static_cast<double>(shuffled.size())));
        }
        for (std::size_t i = 0; i < shuffled.size(); ++i) {
            const FeatureRecord& rec = target.records[shuffled[i]];
            if (i < train_count)
                task.target_train.records.push_back(rec);
            else
                task.target_test.records.push_back(rec);
        }
    }
    return task;
}

namespace {
// C(n, k) capped to avoid overflow; anything above the cap is plenty.
std::uint64_t binomial_capped(int n, int k, std::uint64_t cap) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (int i = 1; i <= k; ++i) {
        result = result * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
        if (result >= cap) return cap;
    }
    return result;
}
}  // namespace

std::vector<SplitSpec> random_splits(int num_classes, int num_unseen, int num_splits,
                                     std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("random_splits: need at least 2 classes");
    if (num_unseen <= 0)
        throw std::invalid_argument("random_splits: num_unseen must be positive (a GZSDA task "
                                    "requires unseen classes)");
    if (num_unseen >= num_classes)
        throw std::invalid_argument("random_splits: num_unseen must be below num_classes");
    if (num_splits < 1) throw std::invalid_argument("random_splits: num_splits must be positive");
    const std::uint64_t distinct =
        binomial_capped(num_classes, num_unseen, static_cast<std::uint64_t>(num_splits) + 1);
    if (static_cast<std::uint64_t>(num_splits) > distinct) {
        throw std::invalid_argument("random_splits: cannot draw " + std::to_string(num_splits) +
                                    " distinct partitions of " + std::to_string(num_classes) +
                                    " classes with " + std::to_string(num_unseen) + " unseen");
    }

    std::vector<SplitSpec> out;
    std::set<std::set<int>> taken;
    std::uint64_t attempt = 0;
    while (out.size() < static_cast<std::size_t>(num_splits)) {
        Rng rng(derive_seed(seed, "class-split", attempt));
        ++attempt;
        std::vector<int> classes(num_classes);
        for (int i = 0; i < num_classes; ++i) classes[i] = i;
        rng.shuffle(classes);
        std::set<int> unseen(classes.begin(), classes.begin() + num_unseen);
        if (!taken.insert(unseen).second) continue;  // redraw duplicates
        SplitSpec spec;
        spec.unseen_classes = std::move(unseen);
        for (int c : classes)
            if (!spec.unseen_classes.count(c)) spec.seen_classes.insert(c);
        spec.target_train_fraction = 0.5;
        spec.seed = derive_seed(seed, "split-seed", out.size());
        out.push_back(std::move(spec));
    }
    return out;
}

std::size_t PairBatch::valid_count() const {
    std::size_t n = 0;
    for (bool v : valid_t) n += v ? 1 : 0;
    return n;
}

PairBatch sample_pairs(const FeatureDataset& source, const FeatureDataset& target_train,
                       const std::vector<std::size_t>& order, std::size_t batch_start,
                       std::size_t batch_size, Rng& rng) {
    if (batch_start > order.size())
        throw std::invalid_argument("sample_pairs: batch_start past end of order");
    const std::size_t end = std::min(order.size(), batch_start + batch_size);
    const std::size_t n = end - batch_start;
    const std::map<int, std::vector<std::size_t>> by_class = target_train.indices_by_class();

    PairBatch batch;
    batch.x_s = Matrix(n, source.feature_dim);
    batch.x_t = Matrix(n, source.feature_dim);
    batch.class_labels.resize(n);
    batch.valid_t.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src_idx = order[batch_start + i];
        if (src_idx >= source.size())
            throw std::invalid_argument("sample_pairs: source index out of range");
        const FeatureRecord& src = source.records[src_idx];
        batch.class_labels[i] = src.class_label;
        for (std::size_t j = 0; j < source.feature_dim; ++j) batch.x_s(i, j) = src.features[j];
        const auto it = by_class.find(src.class_label);
        if (it != by_class.end() && !it->second.empty()) {
            const std::size_t pick = static_cast<std::size_t>(rng.below(it->second.size()));
            const FeatureRecord& tgt = target_train.records[it->second[pick]];
            for (std::size_t j = 0; j < source.feature_dim; ++j)
                batch.x_t(i, j) = tgt.features[j];
            batch.valid_t[i] = true;
        }
        // invalid rows keep the zero dummy in x_t
    }
    return batch;
}

PairBatch sample_pairs(const GzsdaTask& task, const std::vector<std::size_t>& order,
                       std::size_t batch_start, std::size_t batch_size, Rng& rng) {
    return sample_pairs(task.source_train, task.target_train, order, batch_start, batch_size,
                        rng);
}

namespace {
// Orthonormal columns from a seeded Gaussian matrix (modified Gram-Schmidt).
std::vector<std::vector<double>> random_orthogonal(std::size_t d, Rng& rng) {
    std::vector<std::vector<double>> q(d, std::vector<double>(d));
    for (std::size_t c = 0; c < d; ++c) {
        std::vector<double> v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = rng.normal();
        for (std::size_t prev = 0; prev < c; ++prev) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += v[i] * q[prev][i];
            for (std::size_t i = 0; i < d; ++i) v[i] -= dot * q[prev][i];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // essentially impossible for a Gaussian draw; restart the column
            --c;
            continue;
        }
        for (std::size_t i = 0; i < d; ++i) q[c][i] = v[i] / norm;
    }
    return q;  // q[c] is column c of an orthogonal matrix
}
}  // namespace

SyntheticBenchmark gen_synthetic_benchmark(const SyntheticConfig& config) {
    if (config.num_classes < 2)
        throw std::invalid_argument("gen_synthetic_benchmark: num_classes must be >= 2");
    if (config.feature_dim < 2)
        throw std::invalid_argument("gen_synthetic_benchmark: feature_dim must be >= 2");
    if (config.samples_per_class_per_domain < 1)
        throw std::invalid_argument(
            "gen_synthetic_benchmark: samples_per_class_per_domain must be >= 1");
    if (config.noise_sigma < 0.0)
        throw std::invalid_argument("gen_synthetic_benchmark: noise_sigma must be >= 0");

    const std::size_t d = config.feature_dim;
    if (config.class_subspace_dim > d)
        throw std::invalid_argument(
            "gen_synthetic_benchmark: class_subspace_dim exceeds feature_dim");
    Rng rng(config.seed);

    // Class means in a random low-dimensional subspace. The seen classes then
    // span the mean subspace, so the domain relation they exhibit determines
    // it on the unseen means too. Coordinates are scaled so the RMS pairwise
    // mean distance is 2*sqrt(2)*class_separation whatever the subspace dim,
    // and each mean is placed maximin (best of a fixed candidate pool) so no
    // two classes land on top of each other.
    const std::size_t r = config.class_subspace_dim == 0 ? d : config.class_subspace_dim;
    const double coord_scale = 2.0 * config.class_separation / std::sqrt(static_cast<double>(r));
    std::vector<std::vector<double>> mean_basis = random_orthogonal(d, rng);
    constexpr std::size_t kCandidates = 64;
    std::vector<std::vector<double>> coords;
    for (int k = 0; k < config.num_classes; ++k) {
        std::vector<double> best;
        double best_score = -1.0;
        for (std::size_t cand = 0; cand < kCandidates; ++cand) {
            std::vector<double> c(r);
            for (double& v : c) v = coord_scale * rng.normal();
            double score = std::numeric_limits<double>::infinity();
            for (const auto& prev : coords) {
                double dist2 = 0.0;
                for (std::size_t j = 0; j < r; ++j)
                    dist2 += (c[j] - prev[j]) * (c[j] - prev[j]);
                score = std::min(score, dist2);
            }
            if (coords.empty()) score = 0.0;  // first mean: take the first draw
            if (cand == 0 || score > best_score) {
                best_score = score;
                best = std::move(c);
            }
        }
        coords.push_back(std::move(best));
    }
    std::vector<std::vector<double>> mu(config.num_classes, std::vector<double>(d, 0.0));
    for (int k = 0; k < config.num_classes; ++k) {
        for (std::size_t c = 0; c < r; ++c)
            for (std::size_t i = 0; i < d; ++i)
                mu[k][i] += coords[k][c] * mean_basis[c][i];
    }

    // One affine domain map shared by every class.
    std::vector<std::vector<double>> basis;
    std::vector<double> dim_scale(d, 1.0);
    std::vector<double> bias(d, 0.0);
    if (!config.identity_map) {
        basis = random_orthogonal(d, rng);
        for (double& s : dim_scale) s = rng.uniform(0.5, 2.0);
        double norm = 0.0;
        for (double& b : bias) {
            b = rng.normal();
            norm += b * b;
        }
        norm = std::sqrt(norm);
        for (double& b : bias) b = b / norm * config.class_separation;
    }

    auto map_mean = [&](const std::vector<double>& m) {
        if (config.identity_map) return m;
        std::vector<double> out(d, 0.0);
        for (std::size_t c = 0; c < d; ++c) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += basis[c][i] * m[i];
            out[c] = dim_scale[c] * dot + bias[c];
        }
        return out;
    };

    SyntheticBenchmark bench;
    bench.source.feature_dim = d;
    bench.target.feature_dim = d;
    for (int k = 0; k < config.num_classes; ++k) {
        for (int s = 0; s < config.samples_per_class_per_domain; ++s) {
            FeatureRecord rec;
            rec.class_label = k;
            rec.domain_label = 0;
            rec.features.resize(d);
            for (std::size_t j = 0; j < d; ++j)
                rec.features[j] = mu[k][j] + config.noise_sigma * rng.normal();
            bench.source.records.push_back(std::move(rec));
        }
    }
    for (int k = 0; k < config.num_classes; ++k) {
        const std::vector<double> shifted = map_mean(mu[k]);
        for (int s = 0; s < config.samples_per_class_per_domain; ++s) {
            FeatureRecord rec;
            rec.class_label = k;
            rec.domain_label = 1;
            rec.features.resize(d);
            for (std::size_t j = 0; j < d; ++j)
                rec.features[j] = shifted[j] + config.noise_sigma * rng.normal();
            bench.target.records.push_back(std::move(rec));
        }
    }
    return bench;
}

}  // namespace gzsda
