#pragma once

#include <filesystem>

#include "fpdhf/linops.hpp"

namespace fpdhf {

// Binary graymaps ("P5"), 8 or 16 bits per sample. Samples are mapped
// linearly between [0, maxval] and [0, x_max].

/// Throws std::runtime_error with the path on I/O or format errors.
ImageGrid read_pgm(const std::filesystem::path& path, double x_max);

/// Values are clamped to [0, x_max] and rounded half-to-even. maxval <= 255
/// writes one byte per sample, otherwise two (big-endian).
void write_pgm(const std::filesystem::path& path, const ImageGrid& img,
               double x_max, int maxval = 255);

}  // namespace fpdhf
