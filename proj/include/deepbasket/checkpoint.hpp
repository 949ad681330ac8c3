#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "deepbasket/neural_net.hpp"
#include "deepbasket/optimizer.hpp"

namespace deepbasket {

// Checkpoint layout (little-endian):
//   char[8] "DBSKMLP1" | u32 version | u32 activation | u32 n_dims | u32 dims[n_dims] |
//   u64 iteration | u32 has_optimizer | u32 reserved |
//   f64 input_shift[n0] | f64 input_scale[n0] | f64 output_shift | f64 output_scale |
//   per layer: f64 W (row-major n_l x n_{l-1}) | f64 b[n_l]
//   if has_optimizer: u64 step | f64 lr, beta1, beta2, eps |
//     per layer: m_W | v_W | m_b | v_b (same shapes and order as the parameters)
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    Mlp model;
    std::uint64_t iteration = 0;
    std::optional<AdamState> optimizer;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace deepbasket
