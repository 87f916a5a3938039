#include "advx/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "advx/image_io.hpp"
#include "advx/rng.hpp"

namespace advx {

std::string to_string(Task t) { return t == Task::Median ? "med" : "res"; }

std::string to_string(Manipulation m) {
  switch (m) {
    case Manipulation::None: return "none";
    case Manipulation::Median: return "med";
    case Manipulation::Resize: return "res";
  }
  return "none";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Task task_from_string(const std::string& s) {
  if (s == "med") return Task::Median;
  if (s == "res") return Task::Resize;
  throw ConfigError("unknown task '" + s + "' (expected med or res)");
}

Manipulation manipulation_from_string(const std::string& s) {
  if (s == "none") return Manipulation::None;
  if (s == "med") return Manipulation::Median;
  if (s == "res") return Manipulation::Resize;
  throw InputError("unknown manipulation '" + s + "'");
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw InputError("unknown split '" + s + "'");
}

Manipulation manipulation_for(Task t) { return t == Task::Median ? Manipulation::Median : Manipulation::Resize; }

std::vector<PatchWindow> extract_patches(Index width, Index height, Index size, int max_count,
                                         std::uint64_t seed) {
  if (size < 1 || max_count < 1) throw ConfigError("extract_patches: size and max_count must be positive");
  if (width < size || height < size)
    throw InputError("extract_patches: image " + std::to_string(width) + "x" + std::to_string(height) +
                     " smaller than patch size " + std::to_string(size));
  const Index nx = width - size + 1, ny = height - size + 1;
  const Index positions = nx * ny;
  std::mt19937_64 rng(seed);
  std::vector<Index> chosen;
  if (positions <= max_count) {
    chosen.resize(static_cast<std::size_t>(positions));
    std::iota(chosen.begin(), chosen.end(), Index{0});
    std::shuffle(chosen.begin(), chosen.end(), rng);
  } else {
    std::uniform_int_distribution<Index> pick(0, positions - 1);
    std::set<Index> seen;
    while (static_cast<int>(chosen.size()) < max_count) {
      const Index p = pick(rng);
      if (seen.insert(p).second) chosen.push_back(p);
    }
  }
  std::vector<PatchWindow> windows;
  windows.reserve(chosen.size());
  for (Index p : chosen) windows.push_back({p % nx, p / nx});
  return windows;
}

std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& fractions) {
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ConfigError("split fractions must sum to 1");
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    const auto it = std::max_element(remainder.begin(), remainder.end());
    ++counts[static_cast<std::size_t>(it - remainder.begin())];
    *it = -1.0;
    ++assigned;
  }
  return counts;
}

GrayImage apply_manipulation(const GrayImage& pristine, Manipulation m, const DatasetManifest& manifest) {
  switch (m) {
    case Manipulation::None: return pristine;
    case Manipulation::Median: return median_filter(pristine, manifest.median_window);
    case Manipulation::Resize: {
      ResizeOptions opt = manifest.resize;
      opt.min_output_extent = manifest.patch_size;
      return resize_down(pristine, opt);
    }
  }
  return pristine;
}

DatasetManifest build_manifest(const std::filesystem::path& pristine_dir, const ManifestOptions& options) {
  namespace fs = std::filesystem;
  if (options.patches_per_image < 1 || options.patches_per_image > 100)
    throw ConfigError("patches_per_image must lie in 1..100");
  if (!fs::is_directory(pristine_dir)) throw IoError("corpus directory not found: " + pristine_dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(pristine_dir))
    if (entry.is_regular_file() && is_supported_image(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("corpus directory has no PGM/PNG images: " + pristine_dir.string());

  DatasetManifest manifest;
  manifest.corpus_id = options.corpus_id;
  manifest.task = options.task;
  manifest.seed = options.seed;
  manifest.root = pristine_dir.string();
  manifest.patch_size = options.patch_size;
  manifest.median_window = options.median_window;
  manifest.resize = options.resize;

  // Probe every file first so skipped images do not shift the split counts.
  struct Usable {
    std::string name;
    GrayImage pristine;
    GrayImage manipulated;
  };
  std::vector<Usable> usable;
  const Manipulation manip = manipulation_for(options.task);
  for (const auto& f : files) {
    try {
      GrayImage img = read_gray_image(f);
      if (img.rows() < options.patch_size || img.cols() < options.patch_size)
        throw InputError("smaller than patch size");
      GrayImage m = apply_manipulation(img, manip, manifest);
      usable.push_back({f.filename().string(), std::move(img), std::move(m)});
    } catch (const std::exception& e) {
      spdlog::warn("build_manifest: skipping {}: {}", f.string(), e.what());
    }
  }
  if (usable.empty()) throw InputError("no usable images in " + pristine_dir.string());

  std::vector<std::size_t> order(usable.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto counts = split_counts(usable.size(), options.fractions);

  std::vector<Split> split_of(usable.size());
  std::size_t k = 0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < counts[static_cast<std::size_t>(s)]; ++i) split_of[order[k++]] = static_cast<Split>(s);

  for (std::size_t i = 0; i < usable.size(); ++i) {
    for (int label : {kPristineLabel, kManipulatedLabel}) {
      ManifestRecord rec;
      rec.source = usable[i].name;
      rec.label = label;
      rec.manipulation = label == kPristineLabel ? Manipulation::None : manip;
      rec.split = split_of[i];
      rec.seed = derive_seed(options.seed, 2 * i + static_cast<std::size_t>(label));
      const GrayImage& img = label == kPristineLabel ? usable[i].pristine : usable[i].manipulated;
      rec.patches = extract_patches(img, options.patch_size, options.patches_per_image, rec.seed);
      manifest.records.push_back(std::move(rec));
    }
  }
  return manifest;
}

void write_manifest(std::ostream& out, const DatasetManifest& m) {
  out << "#advx-manifest\tversion=" << DatasetManifest::kVersion << "\n";
  out << "#corpus_id=" << m.corpus_id << "\ttask=" << to_string(m.task) << "\tseed=" << m.seed
      << "\troot=" << m.root << "\tpatch_size=" << m.patch_size << "\tmedian_window=" << m.median_window
      << "\tresize_factor=" << m.resize.factor
      << "\tresize_kernel=" << (m.resize.kernel == ResizeKernel::Bilinear ? "bilinear" : "bicubic") << "\n";
  out << "source\tclass\tmanipulation\tsplit\tseed\tpatches\n";
  for (const auto& r : m.records) {
    out << r.source << '\t' << (r.label == kPristineLabel ? "pristine" : "manipulated") << '\t'
        << to_string(r.manipulation) << '\t' << to_string(r.split) << '\t' << r.seed << '\t';
    for (std::size_t i = 0; i < r.patches.size(); ++i)
      out << (i ? ";" : "") << r.patches[i].x << ',' << r.patches[i].y;
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

DatasetManifest read_manifest(std::istream& in) {
  DatasetManifest m;
  std::string line;
  if (!std::getline(in, line) || line.rfind("#advx-manifest", 0) != 0)
    throw InputError("manifest: missing format header");
  if (line.find("version=" + std::to_string(DatasetManifest::kVersion)) == std::string::npos)
    throw InputError("manifest: unsupported version in '" + line + "'");
  if (!std::getline(in, line) || line.empty() || line[0] != '#') throw InputError("manifest: missing metadata line");
  std::map<std::string, std::string> meta;
  for (const auto& tok : split_on(line.substr(1), '\t')) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) meta[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  try {
    m.corpus_id = meta.at("corpus_id");
    m.task = task_from_string(meta.at("task"));
    m.seed = std::stoull(meta.at("seed"));
    m.root = meta.at("root");
    m.patch_size = std::stol(meta.at("patch_size"));
    m.median_window = std::stoi(meta.at("median_window"));
    m.resize.factor = std::stod(meta.at("resize_factor"));
    m.resize.kernel = meta.at("resize_kernel") == "bicubic" ? ResizeKernel::Bicubic : ResizeKernel::Bilinear;
  } catch (const std::out_of_range&) {
    throw InputError("manifest: incomplete metadata line");
  }
  if (!std::getline(in, line)) throw InputError("manifest: missing column header");
  std::size_t row = 3;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = split_on(line, '\t');
    if (f.size() != 6) throw InputError("manifest line " + std::to_string(row) + ": expected 6 fields");
    ManifestRecord r;
    r.source = f[0];
    if (f[1] == "pristine") r.label = kPristineLabel;
    else if (f[1] == "manipulated") r.label = kManipulatedLabel;
    else throw InputError("manifest line " + std::to_string(row) + ": bad class '" + f[1] + "'");
    r.manipulation = manipulation_from_string(f[2]);
    r.split = split_from_string(f[3]);
    r.seed = std::stoull(f[4]);
    if (!f[5].empty()) {
      for (const auto& xy : split_on(f[5], ';')) {
        const auto comma = xy.find(',');
        if (comma == std::string::npos) throw InputError("manifest line " + std::to_string(row) + ": bad window");
        r.patches.push_back({std::stol(xy.substr(0, comma)), std::stol(xy.substr(comma + 1))});
      }
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  write_manifest(out, manifest);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return read_manifest(in);
}

std::size_t PatchSet::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

PatchSet load_patches(const DatasetManifest& manifest, Split split) {
  PatchSet set;
  std::string cached_source;
  GrayImage pristine;
  for (const auto& r : manifest.records) {
    if (r.split != split) continue;
    if (r.source != cached_source) {
      pristine = read_gray_image(std::filesystem::path(manifest.root) / r.source);
      cached_source = r.source;
    }
    const GrayImage img = apply_manipulation(pristine, r.manipulation, manifest);
    const std::string cls = r.label == kPristineLabel ? "pristine" : "manipulated";
    for (std::size_t i = 0; i < r.patches.size(); ++i) {
      const PatchWindow& w = r.patches[i];
      if (w.x < 0 || w.y < 0 || w.x + manifest.patch_size > img.cols() || w.y + manifest.patch_size > img.rows())
        throw InputError("manifest window outside image bounds for " + r.source);
      set.patches.push_back(crop(img, w.x, w.y, manifest.patch_size, manifest.patch_size));
      set.labels.push_back(r.label);
      set.ids.push_back(r.source + ":" + cls + ":" + std::to_string(i));
    }
  }
  return set;
}

}  // namespace advx
