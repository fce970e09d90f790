#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "clade/volume.hpp"

namespace clade {

inline constexpr std::size_t kPatchSize = 32;

struct PatchOrigin {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const PatchOrigin&) const = default;
};

// Sliding-window layout over an m x n slice: origins at multiples of the
// stride plus a final origin clamped to m-32 / n-32 so every pixel is
// covered. Origins are row-major.
struct PatchGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stride = kPatchSize;
  std::vector<PatchOrigin> origins;
  // Distinct row / column origin values, ascending.
  std::vector<std::size_t> row_starts;
  std::vector<std::size_t> col_starts;
};

PatchGrid build_patch_grid(std::size_t rows, std::size_t cols, std::size_t stride);
// Number of patches build_patch_grid would produce, without allocating.
std::size_t patch_count(std::size_t rows, std::size_t cols, std::size_t stride);
// How many patches of the grid cover each pixel.
Image coverage_counts(const PatchGrid& grid);

enum class Domain { X_lowres, Y_highres };

struct PatchProvenance {
  std::size_t volume = 0;
  std::size_t slice = 0;
  PatchOrigin origin;
};

struct PatchSet {
  Domain domain = Domain::X_lowres;
  std::vector<Image> patches;  // each kPatchSize x kPatchSize
  std::vector<PatchProvenance> provenance;
  std::size_t skipped_slices = 0;

  std::size_t size() const { return patches.size(); }
  void append(const PatchSet& other);
};

Image extract_patch(const Image& slice, PatchOrigin origin);
std::vector<Image> extract_patches(const Image& slice, const PatchGrid& grid);

// Accumulates each patch at its origin and divides by the coverage count.
Image stitch_patches(const PatchGrid& grid, const std::vector<Image>& patches);

// Uniform over the (rows-31) x (cols-31) valid origins.
PatchOrigin random_patch_origin(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

// patches_per_slice uniformly random origins per slice of at least 32 x 32;
// smaller slices are skipped and counted. Deterministic in seed.
PatchSet sample_training_patches(const std::vector<Image>& slices, std::size_t patches_per_slice,
                                 std::uint64_t seed, Domain domain, std::size_t volume_id = 0,
                                 Warnings* warnings = nullptr);

struct TrainingCorpora {
  PatchSet x;  // lr_primary slices (low-resolution domain)
  PatchSet y;  // hr slices (high-resolution domain)
};
// Normalises (0.5/99.5 percentiles) and resamples v to isotropic, then
// samples patches_per_slice patches from every lr_primary slice into X and
// every hr slice into Y. The two draws use independent streams of seed.
TrainingCorpora prepare_training_corpora(const Volume3D& v, std::size_t patches_per_slice, std::uint64_t seed,
                                         std::size_t volume_id = 0, Warnings* warnings = nullptr);

// Patch dumps use the volume format with dims [k, 32, 32].
void save_patch_set(const PatchSet& set, const std::string& path);
PatchSet load_patch_set(const std::string& path, Domain domain);

}  // namespace clade
