#pragma once

#include <filesystem>

#include "advx/image.hpp"

namespace advx {

/// Reads a binary 8-bit PGM (P5) or a grayscale/RGB PNG. Colour input is
/// converted with to_grayscale. Throws IoError on unreadable or unsupported files.
GrayImage read_gray_image(const std::filesystem::path& path);

/// Writes a binary P5 PGM with maxval 255.
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

/// Writes an 8-bit grayscale PNG.
void write_png(const std::filesystem::path& path, const GrayImage& img);

/// Writes an 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const RgbImage& img);

/// True for extensions read_gray_image understands (.pgm, .png; case-insensitive).
bool is_supported_image(const std::filesystem::path& path);

}  // namespace advx
