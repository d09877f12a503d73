#pragma once

#include <filesystem>
#include <stdexcept>

#include "mbd/mlp.hpp"

namespace mbd {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Versioned binary parameter file: magic, version, L, layer dims, seed,
// scene scale, then the flat weights as little-endian 64-bit floats in
// layer order.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& p);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace mbd
