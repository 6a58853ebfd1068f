#pragma once

#include <string>

#include "gzsda/ccvae.hpp"
#include "gzsda/classify.hpp"

namespace gzsda {

// Versioned binary checkpoints: magic bytes, u32 little-endian header
// length, JSON header (dims plus a config echo), then every parameter
// matrix as little-endian 64-bit floats in declaration order. A save ->
// load -> save round trip is byte-exact. Adam moments are not persisted;
// a loaded model is for inference and further use, not resuming.
void save_ccvae_checkpoint(const CcvaeModel& model, const std::string& path,
                           const std::string& config_echo_json = "{}");
CcvaeModel load_ccvae_checkpoint(const std::string& path, std::string* config_echo = nullptr);

void save_classifier_checkpoint(const LinearClassifier& classifier, const std::string& path,
                                const std::string& config_echo_json = "{}");
LinearClassifier load_classifier_checkpoint(const std::string& path,
                                            std::string* config_echo = nullptr);

}  // namespace gzsda
