#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "plab/encoder.hpp"
#include "plab/synthworld.hpp"

namespace plab {

// Framed binary container ("PLAB"): magic, format version, a count of
// (name, rows, cols, row-major little-endian f64 payload) records, and a
// trailing FNV-1a 64 checksum over every byte after the magic+version words.
// Checkpoints and dataset dumps both use it. Round trips are bitwise.

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_tensors(const NamedTensors& tensors, const std::filesystem::path& path);
NamedTensors load_tensors(const std::filesystem::path& path);

/// Encoder checkpoint: canonical parameter names, plus the layer structure
/// recoverable from the tensor shapes.
void save_checkpoint(const DualEncoderParams& params, const std::filesystem::path& path);
DualEncoderParams load_checkpoint(const std::filesystem::path& path);

/// Dataset dump: images, texts, true_labels and poison_flags as tensors.
void save_dataset(const PairedDataset& dataset, const std::filesystem::path& path);
PairedDataset load_dataset(const std::filesystem::path& path);

} // namespace plab
