#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fri/nn/tensor.hpp"

namespace fri::nn {

// Flat binary container: header (magic, version, tensor count), then per
// tensor: name length, name bytes, rank, dims, values as little-endian
// 64-bit floats.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);
std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::filesystem::path& path);

}  // namespace fri::nn
