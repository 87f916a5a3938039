#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "advx/image.hpp"

namespace advx {

/// Texture statistics of a generated corpus. "R" is smooth with low sensor
/// noise, "V" is busier with stronger noise, so detectors trained on one see
/// a shifted distribution on the other.
enum class SynthProfile { R, V };

SynthProfile synth_profile_from_string(const std::string& name);
std::string to_string(SynthProfile profile);

/// One deterministic textured image: gradient + filtered noise + shapes + sensor noise.
GrayImage synth_image(Index size, SynthProfile profile, std::uint64_t seed);

/// Writes `count` images as <dir>/<profile>_<index>.pgm and returns their paths.
std::vector<std::filesystem::path> synth_corpus(const std::filesystem::path& dir, int count, Index size,
                                                SynthProfile profile, std::uint64_t seed);

}  // namespace advx
