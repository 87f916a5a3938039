#include "advx/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <type_traits>
#include <fstream>
#include <istream>
#include <ostream>

namespace advx {

namespace {

template <typename U>
void put(std::ostream& out, U v) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (!in) throw IoError("checkpoint: unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  if (n > (1u << 20)) throw IoError("checkpoint: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw IoError("checkpoint: unexpected end of file");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const TrainedNetwork& det) {
  const NetworkSpec& spec = det.net.spec();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, det.meta.architecture);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.widths.size()));
  for (Index w : spec.widths) put<std::uint64_t>(out, static_cast<std::uint64_t>(w));
  put_string(out, to_string(det.meta.task));
  put_string(out, det.meta.corpus_id);
  put<std::uint64_t>(out, det.meta.seed);
  put<std::uint32_t>(out, det.meta.epochs);
  for (int i = 0; i < 3; ++i) put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.input_shape[i]));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.num_classes));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
    for (Index v : {l.kernel_h, l.kernel_w, l.stride, l.padding, l.width})
      put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  const auto params = det.net.parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    const Shape& s = p.shape();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.rank()));
    for (int i = 0; i < s.rank(); ++i) put<std::uint32_t>(out, static_cast<std::uint32_t>(s[i]));
    put<std::uint8_t>(out, sizeof(Real));
    for (Index i = 0; i < p.value().size(); ++i) {
      using Bits = std::conditional_t<sizeof(Real) == 4, std::uint32_t, std::uint64_t>;
      put<Bits>(out, std::bit_cast<Bits>(p.value()[i]));
    }
  }
  if (!out) throw IoError("checkpoint: write failed");
}

TrainedNetwork read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw IoError("checkpoint: bad magic");
  if (const auto v = get<std::uint32_t>(in); v != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(v));

  NetworkMetadata meta;
  NetworkSpec spec;
  meta.architecture = get_string(in);
  spec.name = meta.architecture;
  const auto nw = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nw; ++i) spec.widths.push_back(static_cast<Index>(get<std::uint64_t>(in)));
  meta.task = task_from_string(get_string(in));
  meta.corpus_id = get_string(in);
  meta.seed = get<std::uint64_t>(in);
  meta.epochs = get<std::uint32_t>(in);
  const Index c = get<std::uint32_t>(in), h = get<std::uint32_t>(in), w = get<std::uint32_t>(in);
  spec.input_shape = Shape{c, h, w};
  spec.num_classes = get<std::uint32_t>(in);
  const auto nl = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < nl; ++i) {
    LayerSpec l;
    const auto kind = get<std::uint8_t>(in);
    if (kind > static_cast<std::uint8_t>(LayerKind::Flatten)) throw IoError("checkpoint: bad layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.kernel_h = get<std::uint32_t>(in);
    l.kernel_w = get<std::uint32_t>(in);
    l.stride = get<std::uint32_t>(in);
    l.padding = get<std::uint32_t>(in);
    l.width = get<std::uint32_t>(in);
    spec.layers.push_back(l);
  }
  if (spec.name == "BS" || spec.name == "GC") {
    if (!(build_architecture(spec.name, spec.widths).layers == spec.layers))
      throw IoError("checkpoint: layer schedule does not match the " + spec.name + " builder");
  }

  TrainedNetwork det{Network<Real>(spec), meta};
  auto params = det.net.parameters();
  if (get<std::uint32_t>(in) != params.size()) throw IoError("checkpoint: parameter count mismatch");
  for (auto& p : params) {
    const auto rank = get<std::uint32_t>(in);
    if (rank != static_cast<std::uint32_t>(p.shape().rank())) throw IoError("checkpoint: parameter rank mismatch");
    for (int i = 0; i < p.shape().rank(); ++i)
      if (get<std::uint32_t>(in) != static_cast<std::uint32_t>(p.shape()[i]))
        throw IoError("checkpoint: parameter shape mismatch");
    const auto scalar_size = get<std::uint8_t>(in);
    auto values = p.values();
    for (Index i = 0; i < values.size(); ++i) {
      if (scalar_size == 4) values[i] = static_cast<Real>(std::bit_cast<float>(get<std::uint32_t>(in)));
      else if (scalar_size == 8) values[i] = static_cast<Real>(std::bit_cast<double>(get<std::uint64_t>(in)));
      else throw IoError("checkpoint: unsupported scalar size");
    }
    require_finite(p.value(), "checkpoint parameter");
  }
  return det;
}

void save_checkpoint(const std::filesystem::path& path, const TrainedNetwork& det) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  write_checkpoint(out, det);
}

TrainedNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace advx
