#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "advx/image.hpp"

namespace advx {

/// Manipulation-detection task; the manipulated class is produced by this operator.
enum class Task { Median, Resize };
enum class Manipulation { None, Median, Resize };
enum class Split { Train, Val, Test };

inline constexpr int kPristineLabel = 0;
inline constexpr int kManipulatedLabel = 1;

std::string to_string(Task t);            // "med" / "res"
std::string to_string(Manipulation m);    // "none" / "med" / "res"
std::string to_string(Split s);           // "train" / "val" / "test"
Task task_from_string(const std::string& s);
Manipulation manipulation_from_string(const std::string& s);
Split split_from_string(const std::string& s);
Manipulation manipulation_for(Task t);

/// Top-left corner of a square extraction window.
struct PatchWindow {
  Index x = 0;
  Index y = 0;
  friend bool operator==(const PatchWindow&, const PatchWindow&) = default;
};

/// Up to `max_count` distinct size x size windows drawn uniformly over all
/// valid top-left positions. Deterministic for a given seed.
std::vector<PatchWindow> extract_patches(Index width, Index height, Index size, int max_count,
                                         std::uint64_t seed);
inline std::vector<PatchWindow> extract_patches(const GrayImage& img, Index size, int max_count,
                                                std::uint64_t seed) {
  return extract_patches(img.cols(), img.rows(), size, max_count, seed);
}

/// One (source image, class) pair and the windows cut from it.
struct ManifestRecord {
  std::string source;  // relative to DatasetManifest::root
  int label = kPristineLabel;
  Manipulation manipulation = Manipulation::None;
  Split split = Split::Train;
  std::uint64_t seed = 0;
  std::vector<PatchWindow> patches;
};

struct DatasetManifest {
  static constexpr int kVersion = 1;
  std::string corpus_id;
  Task task = Task::Median;
  std::uint64_t seed = 0;
  std::string root;
  Index patch_size = 128;
  int median_window = 5;
  ResizeOptions resize;
  std::vector<ManifestRecord> records;
};

struct ManifestOptions {
  Task task = Task::Median;
  std::array<double, 3> fractions{0.7, 0.1, 0.2};  // train, val, test
  std::uint64_t seed = 1;
  int patches_per_image = 100;
  Index patch_size = 128;
  std::string corpus_id = "corpus";
  int median_window = 5;
  ResizeOptions resize;
};

/// Image counts per split for n images under the given fractions
/// (largest-remainder rounding).
std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& fractions);

/// Scans `pristine_dir` for PGM/PNG files, assigns each source image to one
/// split, derives its manipulated counterpart, and records patch windows for
/// both classes. Unreadable or too-small files are skipped with a warning.
DatasetManifest build_manifest(const std::filesystem::path& pristine_dir, const ManifestOptions& options);

void write_manifest(std::ostream& out, const DatasetManifest& manifest);
DatasetManifest read_manifest(std::istream& in);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Applies the record's manipulation to a pristine source image.
GrayImage apply_manipulation(const GrayImage& pristine, Manipulation m, const DatasetManifest& manifest);

/// Materialised patches of one split, in manifest order.
struct PatchSet {
  std::vector<GrayImage> patches;
  std::vector<int> labels;
  std::vector<std::string> ids;  // "<source>:<class>:<window index>"

  std::size_t size() const { return patches.size(); }
  std::size_t count(int label) const;
};

PatchSet load_patches(const DatasetManifest& manifest, Split split);

}  // namespace advx
