#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stylet/attention.hpp"
#include "stylet/optim.hpp"
#include "stylet/tensor.hpp"

namespace stylet {

// All on-disk containers are little-endian binary with an 8-byte magic and a
// u32 format version. Tensors are stored as (name, shape, row-major f64).

struct CheckpointData {
    std::uint32_t version = 1;
    std::uint64_t config_hash = 0;
    std::vector<NamedTensor> tensors;
    bool has_optimizer = false;
    long opt_t = 0;
    std::vector<Adam::State> opt_state;
};

void save_checkpoint(const std::string& path, std::uint64_t config_hash, const ParamList& params,
                     const Adam* opt = nullptr);
CheckpointData load_checkpoint(const std::string& path);

// Copies checkpoint values into live parameters by name. Every parameter
// must be present with a matching shape. A config-hash mismatch is refused
// unless force is set.
void restore_params(const CheckpointData& ckpt, ParamList& params, std::uint64_t config_hash,
                    bool force = false);

struct CodeFile {
    std::size_t n = 0, d = 0;
    std::vector<Tensor> codes;                    // each {n, d}
    std::vector<std::vector<int>> labels;         // optional, [count][k]
};

void save_codes(const std::string& path, const CodeFile& cf);
CodeFile load_codes(const std::string& path);

struct ImageFile {
    std::size_t h = 0, w = 0, c = 0;
    std::vector<Tensor> images;  // each {h*w, c}
};

void save_images(const std::string& path, const ImageFile& imf);
ImageFile load_images(const std::string& path);

// Locale-independent CSV: one header row, %.17g numbers.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace stylet
