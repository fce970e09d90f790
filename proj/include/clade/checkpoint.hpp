#pragma once

// Parameter checkpoint container. Byte layout (all integers little-endian):
//
//   offset 0   8 bytes   magic "CLADECKP"
//   offset 8   u32       format version (currently 1)
//   offset 12  u64       manifest length L in bytes
//   offset 20  L bytes   UTF-8 JSON manifest
//   offset 20+L          tensor payloads, in manifest order, little-endian
//                        IEEE-754 values of the manifest dtype, row-major
//
// The manifest is {"format_version":1, "dtype":"float32"|"float64",
// "tensors":[{"name":..., "shape":[...]}, ...], "meta":{...}}. "meta" is
// free-form (architecture description, optimizer counters, ...). The JSON is
// written with sorted keys and no whitespace so the byte stream depends only
// on content. See docs/checkpoint_format.md.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "clade/array.hpp"

namespace clade {

enum class DType { float32, float64 };

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

class Checkpoint {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  DType dtype = DType::float32;
  nlohmann::json meta = nlohmann::json::object();

  template <typename T>
  void add(const std::string& name, const Array<T>& values);
  bool contains(const std::string& name) const;
  const CheckpointEntry& at(const std::string& name) const;
  template <typename T>
  Array<T> array(const std::string& name) const;
  const std::vector<CheckpointEntry>& entries() const { return entries_; }

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::vector<CheckpointEntry> entries_;
};

// Little-endian I/O helpers shared with the volume format.
void write_le_f32(std::string& out, float v);
void write_le_f64(std::string& out, double v);
float read_le_f32(const unsigned char* p);
double read_le_f64(const unsigned char* p);

std::string read_file_bytes(const std::filesystem::path& path);
// Writes via a temporary sibling and rename; surfaces any I/O failure.
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace clade
