#include "voxport/ad/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "voxport/errors.hpp"

namespace voxport::ad {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'V', 'X', 'P', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  Reader(std::vector<char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T v;
    read(&v, sizeof v);
    return v;
  }
  void read(void* dst, std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      throw CorruptFileError(path_ + ": truncated at byte " + std::to_string(pos_));
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::vector<char> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.values().size()));
  for (const auto& [name, t] : store.values()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}), path.string());

  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw CorruptFileError(path.string() + ": not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw UnsupportedFormatError(path.string() + ": checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>();
  ParamStore store;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = r.get<std::uint32_t>();
    if (len > r.remaining()) throw CorruptFileError(path.string() + ": bad name length");
    std::string name(len, '\0');
    r.read(name.data(), len);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CorruptFileError(path.string() + ": implausible rank for '" + name + "'");
    Shape shape(rank);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.get<std::uint64_t>());
      total *= d;
    }
    if (total > r.remaining() / sizeof(double)) throw CorruptFileError(path.string() + ": truncated '" + name + "'");
    std::vector<double> data(total);
    r.read(data.data(), total * sizeof(double));
    if (store.contains(name)) throw CorruptFileError(path.string() + ": duplicate record '" + name + "'");
    store.add(name, Tensor(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) throw CorruptFileError(path.string() + ": trailing bytes");
  return store;
}

void load_checkpoint_into(const std::filesystem::path& path, ParamStore& store) {
  ParamStore loaded = load_checkpoint(path);
  for (const auto& name : store.names()) {
    if (!loaded.contains(name)) throw CorruptFileError(path.string() + ": missing parameter '" + name + "'");
    if (loaded.value(name).shape() != store.value(name).shape()) {
      throw ShapeError(path.string() + ": parameter '" + name + "' has shape " +
                       to_string(loaded.value(name).shape()) + ", expected " + to_string(store.value(name).shape()));
    }
  }
  if (loaded.values().size() != store.values().size()) {
    throw CorruptFileError(path.string() + ": unexpected extra parameters");
  }
  for (const auto& name : store.names()) store.value(name) = loaded.value(name);
}

}  // namespace voxport::ad
