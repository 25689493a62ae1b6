#pragma once

#include <cstdint>
#include <cstring>

#include "stylet/attention.hpp"
#include "stylet/tensor.hpp"

namespace stylet {

inline std::uint64_t fnv_tensor(std::uint64_t h, const Tensor& t) {
    for (double d : t.values()) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    }
    return h;
}

inline std::uint64_t checksum(const ParamList& params) {
    std::uint64_t h = 1469598103934665603ull;
    for (const NamedTensor& p : params) h = fnv_tensor(h, p.tensor);
    return h;
}

}  // namespace stylet
