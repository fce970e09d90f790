#include "clade/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "clade/error.hpp"

namespace clade {
namespace {

constexpr char kMagic[8] = {'C', 'L', 'A', 'D', 'E', 'C', 'K', 'P'};

template <typename U>
void write_le(std::string& out, U v) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
  out.append(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U read_le(const unsigned char* p) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
  U v;
  std::memcpy(&v, b, sizeof(U));
  return v;
}

std::string dtype_name(DType d) { return d == DType::float32 ? "float32" : "float64"; }

}  // namespace

void write_le_f32(std::string& out, float v) { write_le(out, v); }
void write_le_f64(std::string& out, double v) { write_le(out, v); }
float read_le_f32(const unsigned char* p) { return read_le<float>(p); }
double read_le_f64(const unsigned char* p) { return read_le<double>(p); }

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = path.string() + ".tmp";
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move '" + tmp + "' to '" + path.string() + "': " + ec.message());
}

template <typename T>
void Checkpoint::add(const std::string& name, const Array<T>& values) {
  if (contains(name)) throw ContractError("checkpoint: duplicate tensor name '" + name + "'");
  entries_.push_back({name, values.shape(), std::vector<double>(values.values().begin(), values.values().end())});
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const CheckpointEntry& Checkpoint::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw FormatError("checkpoint: no tensor named '" + name + "'");
}

template <typename T>
Array<T> Checkpoint::array(const std::string& name) const {
  const auto& e = at(name);
  return Array<T>(e.shape, std::vector<T>(e.values.begin(), e.values.end()));
}

std::string Checkpoint::serialize() const {
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["dtype"] = dtype_name(dtype);
  manifest["tensors"] = nlohmann::json::array();
  for (const auto& e : entries_) manifest["tensors"].push_back({{"name", e.name}, {"shape", e.shape}});
  manifest["meta"] = meta;
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, kFormatVersion);
  write_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& e : entries_) {
    for (double v : e.values) {
      if (dtype == DType::float32) {
        write_le<float>(out, static_cast<float>(v));
      } else {
        write_le<double>(out, v);
      }
    }
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 20 || std::memcmp(p, kMagic, 8) != 0) throw FormatError("checkpoint: bad magic");
  const auto version = read_le<std::uint32_t>(p + 8);
  if (version != kFormatVersion) throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  const auto len = read_le<std::uint64_t>(p + 12);
  if (20 + len > bytes.size()) throw FormatError("checkpoint: truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + 20, bytes.begin() + 20 + static_cast<long>(len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: manifest is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  const std::string dt = manifest.value("dtype", "");
  if (dt == "float32") {
    ck.dtype = DType::float32;
  } else if (dt == "float64") {
    ck.dtype = DType::float64;
  } else {
    throw FormatError("checkpoint: unknown dtype '" + dt + "'");
  }
  ck.meta = manifest.value("meta", nlohmann::json::object());
  const std::size_t width = ck.dtype == DType::float32 ? 4 : 8;
  std::size_t off = 20 + len;
  for (const auto& t : manifest.at("tensors")) {
    CheckpointEntry e;
    e.name = t.at("name").get<std::string>();
    e.shape = t.at("shape").get<Shape>();
    const std::size_t n = numel(e.shape);
    if (off + n * width > bytes.size()) throw FormatError("checkpoint: payload for '" + e.name + "' is truncated");
    e.values.resize(n);
    for (std::size_t i = 0; i < n; ++i, off += width) {
      e.values[i] = width == 4 ? static_cast<double>(read_le<float>(p + off)) : read_le<double>(p + off);
    }
    ck.entries_.push_back(std::move(e));
  }
  if (off != bytes.size()) throw FormatError("checkpoint: trailing bytes after payload");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file_bytes(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return deserialize(read_file_bytes(path)); }

template void Checkpoint::add<float>(const std::string&, const Array<float>&);
template void Checkpoint::add<double>(const std::string&, const Array<double>&);
template Array<float> Checkpoint::array<float>(const std::string&) const;
template Array<double> Checkpoint::array<double>(const std::string&) const;

}  // namespace clade
