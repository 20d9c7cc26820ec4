#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>

#include "lanedrop/nn.hpp"

namespace lanedrop {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "lanedrop-checkpoint";

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Checkpoints are JSON documents:
//   {"format": "lanedrop-checkpoint", "version": 1,
//    "tensors": [{"name": ..., "shape": [rows, cols], "values": [...]}, ...]}
// Values are written with round-trip precision.

std::string checkpoint_to_string(std::span<const ConstParamRef> tensors);
void write_checkpoint(const std::filesystem::path& path, std::span<const ConstParamRef> tensors);

/// Loads every tensor in `tensors` by name. A missing tensor or a shape
/// disagreement throws CheckpointError naming the tensor.
void checkpoint_from_string(const std::string& text, std::span<const ParamRef> tensors);
void read_checkpoint(const std::filesystem::path& path, std::span<const ParamRef> tensors);

} // namespace lanedrop
