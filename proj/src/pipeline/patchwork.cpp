#include "clade/patchwork.hpp"

#include <random>

#include "clade/error.hpp"
#include "clade/kernels.hpp"

namespace clade {
namespace {

std::vector<std::size_t> axis_starts(std::size_t extent, std::size_t stride) {
  std::vector<std::size_t> starts;
  const std::size_t last = extent - kPatchSize;
  for (std::size_t s = 0; s <= last; s += stride) starts.push_back(s);
  if (starts.back() != last) starts.push_back(last);
  return starts;
}

void check_grid_args(std::size_t rows, std::size_t cols, std::size_t stride) {
  if (rows < kPatchSize || cols < kPatchSize) {
    throw ShapeError("patch grid: slice " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " is smaller than the 32x32 patch");
  }
  if (stride < 1 || stride > kPatchSize) throw ContractError("patch grid: stride must be in [1, 32]");
}

}  // namespace

PatchGrid build_patch_grid(std::size_t rows, std::size_t cols, std::size_t stride) {
  check_grid_args(rows, cols, stride);
  PatchGrid g;
  g.rows = rows;
  g.cols = cols;
  g.stride = stride;
  g.row_starts = axis_starts(rows, stride);
  g.col_starts = axis_starts(cols, stride);
  g.origins.reserve(g.row_starts.size() * g.col_starts.size());
  for (auto r : g.row_starts)
    for (auto c : g.col_starts) g.origins.push_back({r, c});
  return g;
}

std::size_t patch_count(std::size_t rows, std::size_t cols, std::size_t stride) {
  check_grid_args(rows, cols, stride);
  auto per_axis = [stride](std::size_t extent) { return (extent - kPatchSize + stride - 1) / stride + 1; };
  return per_axis(rows) * per_axis(cols);
}

Image coverage_counts(const PatchGrid& grid) {
  Image count(grid.rows, grid.cols, 0.0);
  for (const auto& o : grid.origins)
    for (std::size_t r = 0; r < kPatchSize; ++r)
      for (std::size_t c = 0; c < kPatchSize; ++c) count.at(o.row + r, o.col + c) += 1.0;
  return count;
}

void PatchSet::append(const PatchSet& other) {
  patches.insert(patches.end(), other.patches.begin(), other.patches.end());
  provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
  skipped_slices += other.skipped_slices;
}

Image extract_patch(const Image& slice, PatchOrigin o) {
  if (o.row + kPatchSize > slice.rows || o.col + kPatchSize > slice.cols) {
    throw ShapeError("extract_patch: origin out of bounds");
  }
  Image p(kPatchSize, kPatchSize);
  for (std::size_t r = 0; r < kPatchSize; ++r)
    for (std::size_t c = 0; c < kPatchSize; ++c) p.at(r, c) = slice.at(o.row + r, o.col + c);
  return p;
}

std::vector<Image> extract_patches(const Image& slice, const PatchGrid& grid) {
  if (slice.rows != grid.rows || slice.cols != grid.cols) throw ShapeError("extract_patches: grid/slice size mismatch");
  std::vector<Image> out;
  out.reserve(grid.origins.size());
  for (const auto& o : grid.origins) out.push_back(extract_patch(slice, o));
  return out;
}

Image stitch_patches(const PatchGrid& grid, const std::vector<Image>& patches) {
  if (patches.size() != grid.origins.size()) {
    throw ShapeError("stitch_patches: " + std::to_string(patches.size()) + " patches for " +
                     std::to_string(grid.origins.size()) + " origins");
  }
  Image acc(grid.rows, grid.cols, 0.0);
  Image count(grid.rows, grid.cols, 0.0);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Image& p = patches[i];
    if (p.rows != kPatchSize || p.cols != kPatchSize) throw ShapeError("stitch_patches: patch is not 32x32");
    const auto& o = grid.origins[i];
    for (std::size_t r = 0; r < kPatchSize; ++r) {
      double* dst = &acc.at(o.row + r, o.col);
      kernels::axpy<double>(kPatchSize, 1.0, &p.data[r * kPatchSize], dst);
      double* cnt = &count.at(o.row + r, o.col);
      for (std::size_t c = 0; c < kPatchSize; ++c) cnt[c] += 1.0;
    }
  }
  // Grid construction guarantees count >= 1 everywhere.
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] /= count.data[i];
  return acc;
}

PatchOrigin random_patch_origin(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  if (rows < kPatchSize || cols < kPatchSize) throw ShapeError("random_patch_origin: slice smaller than 32x32");
  std::uniform_int_distribution<std::size_t> row_dist(0, rows - kPatchSize);
  std::uniform_int_distribution<std::size_t> col_dist(0, cols - kPatchSize);
  const std::size_t r = row_dist(rng);
  return {r, col_dist(rng)};
}

PatchSet sample_training_patches(const std::vector<Image>& slices, std::size_t patches_per_slice,
                                 std::uint64_t seed, Domain domain, std::size_t volume_id, Warnings* warnings) {
  PatchSet set;
  set.domain = domain;
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const Image& img = slices[s];
    if (img.rows < kPatchSize || img.cols < kPatchSize) {
      ++set.skipped_slices;
      continue;
    }
    for (std::size_t k = 0; k < patches_per_slice; ++k) {
      const PatchOrigin o = random_patch_origin(img.rows, img.cols, rng);
      set.patches.push_back(extract_patch(img, o));
      set.provenance.push_back({volume_id, s, o});
    }
  }
  if (set.skipped_slices > 0 && warnings) {
    warnings->add("sample_training_patches: skipped " + std::to_string(set.skipped_slices) +
                  " slices smaller than 32x32");
  }
  if (set.skipped_slices == slices.size()) throw ContractError("sample_training_patches: no slice is at least 32x32");
  return set;
}

void save_patch_set(const PatchSet& set, const std::string& path) {
  // The volume format needs every extent >= 2.
  if (set.patches.size() < 2) throw ContractError("save_patch_set: need at least 2 patches");
  Volume3D v({set.patches.size(), kPatchSize, kPatchSize}, {1.0, 1.0, 1.0});
  v.lr_axis = 0;
  for (std::size_t i = 0; i < set.patches.size(); ++i)
    std::copy(set.patches[i].data.begin(), set.patches[i].data.end(), v.data.begin() + i * kPatchSize * kPatchSize);
  v.refresh_range();
  save_volume(v, path);
}

PatchSet load_patch_set(const std::string& path, Domain domain) {
  const Volume3D v = load_volume(path);
  if (v.dims[1] != kPatchSize || v.dims[2] != kPatchSize) throw FormatError("patch file '" + path + "' is not [k,32,32]");
  PatchSet set;
  set.domain = domain;
  for (std::size_t i = 0; i < v.dims[0]; ++i) {
    Image p(kPatchSize, kPatchSize);
    std::copy(v.data.begin() + i * kPatchSize * kPatchSize, v.data.begin() + (i + 1) * kPatchSize * kPatchSize,
              p.data.begin());
    set.patches.push_back(std::move(p));
    set.provenance.push_back({0, i, {0, 0}});
  }
  return set;
}

TrainingCorpora prepare_training_corpora(const Volume3D& v, std::size_t patches_per_slice, std::uint64_t seed,
                                         std::size_t volume_id, Warnings* warnings) {
  const Volume3D iso = resample_to_isotropic(normalize_intensity(v, 0.5, 99.5, warnings), warnings);
  TrainingCorpora c;
  c.x = sample_training_patches(extract_slices(iso, Plane::lr_primary), patches_per_slice, seed, Domain::X_lowres,
                                volume_id, warnings);
  c.y = sample_training_patches(extract_slices(iso, Plane::hr), patches_per_slice,
                                seed ^ 0x9e3779b97f4a7c15ULL, Domain::Y_highres, volume_id, warnings);
  return c;
}

}  // namespace clade
