#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace clade {

// Collects non-fatal conditions (constant volume, spline fallback, skipped
// slices). Functions take an optional pointer; nullptr discards.
struct Warnings {
  std::vector<std::string> messages;
  void add(std::string msg) { messages.push_back(std::move(msg)); }
  bool empty() const { return messages.empty(); }
};

// Row-major 2-D image.
struct Image {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Scalar 3-D image. Voxel (i,j,k) sits at data[(i*n1 + j)*n2 + k] (axis 2
// fastest) and its centre is at ((i+0.5)*s0, (j+0.5)*s1, (k+0.5)*s2) mm.
struct Volume3D {
  std::array<std::size_t, 3> dims{};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<double> data;
  int lr_axis = 2;
  // (min,max) of the intensities before normalize_intensity; for a volume
  // that was never normalised it is its own value range.
  std::array<double, 2> intensity_range{0.0, 0.0};

  Volume3D() = default;
  Volume3D(std::array<std::size_t, 3> d, std::array<double, 3> s, double fill = 0.0);

  std::size_t size() const { return data.size(); }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * dims[1] + j) * dims[2] + k; }
  double& at(std::size_t i, std::size_t j, std::size_t k) { return data[index(i, j, k)]; }
  double at(std::size_t i, std::size_t j, std::size_t k) const { return data[index(i, j, k)]; }
  // Trilinear sample at a continuous voxel-index position, edge-clamped.
  double sample(double i, double j, double k) const;
  void refresh_range();
  // Throws ContractError if dims < 2 or spacing <= 0.
  void validate() const;
};

// Axis with the largest spacing (lowest index wins ties).
int infer_lr_axis(const std::array<double, 3>& spacing);

// "<name>.vol" holds little-endian float32 voxels, axis 2 fastest;
// "<name>.vol.json" holds {format_version, dims, spacing_mm, lr_axis,
// intensity_range}.
void save_volume(const Volume3D& v, const std::filesystem::path& path);
Volume3D load_volume(const std::filesystem::path& path);

// Clips to the [lo_pct, hi_pct] percentiles (linear interpolation between
// order statistics) and maps affinely onto [-1, 1]. The clip bounds are
// recorded in intensity_range for denormalize_intensity.
Volume3D normalize_intensity(const Volume3D& v, double lo_pct = 0.5, double hi_pct = 99.5,
                             Warnings* warnings = nullptr);
Volume3D denormalize_intensity(const Volume3D& v);
double percentile(std::vector<double> values, double pct);

// Natural cubic spline along lr_axis onto the smallest in-plane spacing.
Volume3D resample_to_isotropic(const Volume3D& v, Warnings* warnings = nullptr);

enum class Plane { hr, lr_primary, lr_secondary };
Plane parse_plane(const std::string& name);
std::string plane_name(Plane p);
// Axis the slices of `plane` are perpendicular to.
int plane_normal_axis(const Volume3D& v, Plane p);

// Slices perpendicular to the plane's normal axis, ordered by index along it.
// Image rows run along the lower remaining axis, columns along the higher.
std::vector<Image> extract_slices(const Volume3D& v, Plane plane);
// Inverse of extract_slices: writes the slices back into a copy of `like`.
Volume3D assemble_slices(const Volume3D& like, Plane plane, const std::vector<Image>& slices);

}  // namespace clade
