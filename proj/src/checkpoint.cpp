#include "mbd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace mbd {

namespace {

constexpr char kMagic[4] = {'M', 'B', 'C', 'P'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw CheckpointError(std::string("checkpoint: truncated ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("checkpoint: cannot open " + path.string());
  out.write(kMagic, 4);
  put<uint32_t>(out, kVersion);
  put<uint32_t>(out, static_cast<uint32_t>(p.encodings));
  const uint32_t dims[5] = {static_cast<uint32_t>(p.input_dim()),
                            static_cast<uint32_t>(p.hidden),
                            static_cast<uint32_t>(p.hidden),
                            static_cast<uint32_t>(p.hidden), 1};
  put<uint32_t>(out, 5);
  for (uint32_t d : dims) put(out, d);
  put<uint64_t>(out, p.seed);
  put<double>(out, p.scene_scale);
  out.write(reinterpret_cast<const char*>(p.w.data()),
            static_cast<std::streamsize>(p.w.size() * sizeof(double)));
  if (!out) throw CheckpointError("checkpoint: write failed " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("checkpoint: bad magic in " + path.string());
  }
  const auto version = get<uint32_t>(in, "version");
  if (version != kVersion) {
    throw CheckpointError("checkpoint: unsupported version " +
                          std::to_string(version));
  }
  MlpParams p;
  p.encodings = static_cast<int>(get<uint32_t>(in, "encoding count"));
  const auto ndims = get<uint32_t>(in, "dim count");
  if (ndims != 5) throw CheckpointError("checkpoint: unexpected layer count");
  uint32_t dims[5];
  for (auto& d : dims) d = get<uint32_t>(in, "layer dims");
  p.hidden = static_cast<int>(dims[1]);
  if (dims[0] != static_cast<uint32_t>(p.input_dim()) || dims[2] != dims[1] ||
      dims[3] != dims[1] || dims[4] != 1) {
    throw CheckpointError("checkpoint: layer dims do not match header");
  }
  p.seed = get<uint64_t>(in, "seed");
  p.scene_scale = get<double>(in, "scene scale");
  p.w.resize(p.size());
  in.read(reinterpret_cast<char*>(p.w.data()),
          static_cast<std::streamsize>(p.w.size() * sizeof(double)));
  if (!in) throw CheckpointError("checkpoint: truncated weights");
  return p;
}

}  // namespace mbd
