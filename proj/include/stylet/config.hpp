#pragma once

#include <cstdint>
#include <string>

namespace stylet {

// Model dimensions. Desk defaults are small enough to gradient-check; the
// paper-scale values (N=18, D=512) remain constructible.
struct ModelConfig {
    std::size_t n_styles = 8;    // N: rows of the style code = generator layers
    std::size_t dim = 64;        // D: style width
    std::size_t heads = 4;       // H
    std::size_t ffn_inner = 256; // D_ff = 4*D
    std::size_t embed_dim = 32;  // E: classifier attribute embedding width
    std::size_t n_attrs = 3;     // K
    std::size_t mapper_layers = 4;
    std::size_t img_size = 16;   // square images
    std::size_t img_channels = 3;
    std::size_t gen_channels = 16;  // generator feature width
};

struct TrainConfig {
    std::size_t batch_size = 8;
    std::size_t invert_steps = 2000;
    std::size_t classifier_epochs = 40;
    std::size_t editor_steps = 400;
    double invert_lr = 1e-4;
    double editor_lr = 1e-3;
    double classifier_lr = 1e-3;
};

struct LossConfig {
    double lambda_l2 = 1.0;
    double lambda_lpips = 0.8;
    double lambda_id = 0.1;
    double lambda_ref = 1.0;    // lambda_r
    double lambda_keep = 1.0;   // lambda_s
    double lambda_reg = 0.1;
};

struct EditConfig {
    double alpha = 0.5;
    double xi = 1e-4;
    std::size_t power_iters = 50;
};

struct Config {
    std::uint64_t seed = 7;
    std::uint64_t generator_seed = 11;
    std::uint64_t data_seed = 13;
    ModelConfig model;
    TrainConfig train;
    LossConfig loss;
    EditConfig edit;
    std::string out_dir = "out";

    // Validates cross-field consistency (H | D, image divisible by patch
    // sizes, ...). Throws std::invalid_argument on violation.
    void validate() const;

    // Stable hash over every field, stored in checkpoints to detect loading
    // into a mismatched configuration.
    std::uint64_t hash() const;
};

// Parses the plain-text `key = value` format with [section] headers.
// Unknown sections or keys are errors. Environment variables STYLET_SEED and
// STYLET_OUT_DIR override the corresponding fields when set.
Config load_config(const std::string& path);
Config config_from_text(const std::string& text);
void apply_env_overrides(Config& cfg);

}  // namespace stylet
