#include "advx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "advx/image_io.hpp"
#include "advx/rng.hpp"

namespace advx {

namespace {

struct ProfileParams {
  int blur_radius;
  double texture_amplitude;
  int shapes;
  double noise_sigma;
};

ProfileParams params_for(SynthProfile p) {
  switch (p) {
    case SynthProfile::R: return {6, 28.0, 4, 2.0};
    case SynthProfile::V: return {5, 30.0, 6, 2.2};
  }
  return {6, 28.0, 4, 2.0};
}

using ArrayD = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Separable box blur with edge clamping.
ArrayD box_blur(const ArrayD& in, int r) {
  const Index h = in.rows(), w = in.cols();
  ArrayD tmp(h, w), out(h, w);
  const double norm = 1.0 / (2 * r + 1);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double s = 0;
      for (int d = -r; d <= r; ++d) s += in(y, std::clamp<Index>(x + d, 0, w - 1));
      tmp(y, x) = s * norm;
    }
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double s = 0;
      for (int d = -r; d <= r; ++d) s += tmp(std::clamp<Index>(y + d, 0, h - 1), x);
      out(y, x) = s * norm;
    }
  return out;
}

}  // namespace

SynthProfile synth_profile_from_string(const std::string& name) {
  if (name == "R" || name == "r") return SynthProfile::R;
  if (name == "V" || name == "v") return SynthProfile::V;
  throw ConfigError("unknown synthetic profile '" + name + "' (expected R or V)");
}

std::string to_string(SynthProfile profile) { return profile == SynthProfile::R ? "R" : "V"; }

GrayImage synth_image(Index size, SynthProfile profile, std::uint64_t seed) {
  if (size < 1) throw ConfigError("synth_image: size must be positive");
  const ProfileParams p = params_for(profile);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ArrayD img(size, size);
  const double base = 60.0 + 120.0 * unit(rng);
  const double gx = (unit(rng) - 0.5) * 80.0 / static_cast<double>(size);
  const double gy = (unit(rng) - 0.5) * 80.0 / static_cast<double>(size);
  for (Index y = 0; y < size; ++y)
    for (Index x = 0; x < size; ++x) img(y, x) = base + gx * static_cast<double>(x) + gy * static_cast<double>(y);

  ArrayD noise(size, size);
  for (Index i = 0; i < noise.size(); ++i) noise.data()[i] = gauss(rng);
  for (int pass = 0; pass < 3; ++pass) noise = box_blur(noise, p.blur_radius);
  const double sd = std::sqrt((noise - noise.mean()).square().mean());
  if (sd > 0) img += noise / sd * p.texture_amplitude;

  for (int s = 0; s < p.shapes; ++s) {
    const double cx = unit(rng) * static_cast<double>(size), cy = unit(rng) * static_cast<double>(size);
    const double rx = (0.05 + 0.2 * unit(rng)) * static_cast<double>(size);
    const double ry = (0.05 + 0.2 * unit(rng)) * static_cast<double>(size);
    const double delta = (unit(rng) - 0.5) * 120.0;
    const bool ellipse = unit(rng) < 0.5;
    for (Index y = 0; y < size; ++y)
      for (Index x = 0; x < size; ++x) {
        const double dx = (static_cast<double>(x) - cx) / rx, dy = (static_cast<double>(y) - cy) / ry;
        const bool inside = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (inside) img(y, x) += delta;
      }
  }

  for (Index i = 0; i < img.size(); ++i) img.data()[i] += p.noise_sigma * gauss(rng);

  GrayImage out(size, size);
  for (Index i = 0; i < img.size(); ++i)
    out.data()[i] = static_cast<std::uint8_t>(std::clamp(std::floor(img.data()[i] + 0.5), 0.0, 255.0));
  return out;
}

std::vector<std::filesystem::path> synth_corpus(const std::filesystem::path& dir, int count, Index size,
                                                SynthProfile profile, std::uint64_t seed) {
  if (count < 1) throw ConfigError("synth_corpus: count must be at least 1");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (int i = 0; i < count; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%05d.pgm", to_string(profile).c_str(), i);
    const auto path = dir / name;
    write_pgm(path, synth_image(size, profile, derive_seed(seed, static_cast<std::uint64_t>(i))));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace advx
