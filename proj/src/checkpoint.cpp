#include "gzsda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace gzsda {

namespace {

constexpr const char* kCcvaeMagic = "CCVAE1";
constexpr const char* kClassifierMagic = "LINC1";

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

void write_params(std::ostream& os, const std::vector<const Parameter*>& params) {
    for (const Parameter* p : params) {
        os.write(reinterpret_cast<const char*>(p->value.data.data()),
                 static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
    }
}

void read_params(std::istream& is, const std::vector<Parameter*>& params,
                 const std::string& path) {
    for (Parameter* p : params) {
        is.read(reinterpret_cast<char*>(p->value.data.data()),
                static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
        if (!is)
            throw std::runtime_error(path + ": truncated parameter data near '" + p->name + "'");
    }
    char extra;
    if (is.read(&extra, 1))
        throw std::runtime_error(path + ": trailing bytes after the parameter data");
}

void write_checkpoint(const std::string& path, const char* magic, const nlohmann::json& header,
                      const std::vector<const Parameter*>& params) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    f.write(magic, static_cast<std::streamsize>(std::strlen(magic)));
    const std::string header_bytes = header.dump();
    write_u32(f, static_cast<std::uint32_t>(header_bytes.size()));
    f.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    write_params(f, params);
    if (!f) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

nlohmann::json read_header(std::ifstream& f, const std::string& path, const char* magic) {
    const std::size_t magic_len = std::strlen(magic);
    std::string found(magic_len, '\0');
    f.read(found.data(), static_cast<std::streamsize>(magic_len));
    if (!f || found != magic)
        throw std::runtime_error(path + ": bad checkpoint magic (expected " + magic + ")");
    const std::uint32_t header_len = read_u32(f);
    if (!f || header_len == 0 || header_len > (1u << 24))
        throw std::runtime_error(path + ": implausible header length");
    std::string header_bytes(header_len, '\0');
    f.read(header_bytes.data(), header_len);
    if (!f) throw std::runtime_error(path + ": truncated header");
    try {
        return nlohmann::json::parse(header_bytes);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": header is not valid JSON: " + e.what());
    }
}

nlohmann::json parse_config_echo(const std::string& config_echo_json) {
    try {
        return nlohmann::json::parse(config_echo_json.empty() ? "{}" : config_echo_json);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("checkpoint: config echo is not valid JSON: ") +
                                    e.what());
    }
}

}  // namespace

void save_ccvae_checkpoint(const CcvaeModel& model, const std::string& path,
                           const std::string& config_echo_json) {
    nlohmann::json header;
    header["feature_dim"] = model.arch.feature_dim;
    header["hidden"] = model.arch.hidden;
    header["latent_dim"] = model.arch.latent_dim;
    header["config"] = parse_config_echo(config_echo_json);
    std::vector<const Parameter*> params;
    for (const Mlp* net :
         {&model.encoder_trunk, &model.mu_head, &model.logvar_head, &model.decoder})
        for (const Parameter* p : net->parameters()) params.push_back(p);
    write_checkpoint(path, kCcvaeMagic, header, params);
}

CcvaeModel load_ccvae_checkpoint(const std::string& path, std::string* config_echo) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    const nlohmann::json header = read_header(f, path, kCcvaeMagic);
    CcvaeArch arch;
    try {
        arch.feature_dim = header.at("feature_dim").get<std::size_t>();
        arch.hidden = header.at("hidden").get<std::vector<std::size_t>>();
        arch.latent_dim = header.at("latent_dim").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": incomplete header: " + e.what());
    }
    if (config_echo) *config_echo = header.value("config", nlohmann::json::object()).dump();
    Rng rng(0);  // values are overwritten below
    CcvaeModel model = make_ccvae(arch, rng);
    read_params(f, model.parameters(), path);
    return model;
}

void save_classifier_checkpoint(const LinearClassifier& classifier, const std::string& path,
                                const std::string& config_echo_json) {
    nlohmann::json header;
    header["input_dim"] = classifier.weights.value.rows;
    header["num_classes"] = classifier.num_classes;
    header["config"] = parse_config_echo(config_echo_json);
    write_checkpoint(path, kClassifierMagic, header,
                     {&classifier.weights, &classifier.bias});
}

LinearClassifier load_classifier_checkpoint(const std::string& path, std::string* config_echo) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    const nlohmann::json header = read_header(f, path, kClassifierMagic);
    std::size_t input_dim = 0;
    int num_classes = 0;
    try {
        input_dim = header.at("input_dim").get<std::size_t>();
        num_classes = header.at("num_classes").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": incomplete header: " + e.what());
    }
    if (input_dim == 0 || num_classes <= 0)
        throw std::runtime_error(path + ": invalid classifier dimensions in header");
    if (config_echo) *config_echo = header.value("config", nlohmann::json::object()).dump();
    LinearClassifier clf;
    clf.num_classes = num_classes;
    clf.weights = Parameter("classifier.w", Matrix(input_dim, static_cast<std::size_t>(num_classes)));
    clf.bias = Parameter("classifier.b", Matrix(1, static_cast<std::size_t>(num_classes)));
    read_params(f, {&clf.weights, &clf.bias}, path);
    return clf;
}

}  // namespace gzsda
