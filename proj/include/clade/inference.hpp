#pragma once

#include <functional>
#include <string>
#include <vector>

#include "clade/net.hpp"
#include "clade/patchwork.hpp"
#include "clade/volume.hpp"

namespace clade {

// Maps a batch of 32x32 patches (in [-1,1]) to same-size outputs.
using PatchMapper = std::function<std::vector<Image>(const std::vector<Image>&)>;

// The generator must outlive the returned mapper.
template <typename T>
PatchMapper generator_mapper(const Generator<T>& g);
PatchMapper identity_mapper();

struct InferenceOptions {
  std::size_t stride = 12;
  std::size_t batch = 16;  // patches per forward call; results do not depend on it
  double lo_pct = 0.5;
  double hi_pct = 99.5;
  Plane plane = Plane::lr_primary;
};

// normalise -> resample to isotropic -> slices of options.plane -> patch
// grid -> mapper -> count-normalised stitch -> reassemble -> denormalise.
// Output dims equal the resampled input dims; intensity_range holds the
// clip window used for normalisation.
Volume3D super_resolve_volume(const Volume3D& v, const PatchMapper& mapper, const InferenceOptions& options,
                              Warnings* warnings = nullptr);
// Slice-level step, operating on a single normalised slice.
Image super_resolve_slice(const Image& slice, const PatchMapper& mapper, std::size_t stride, std::size_t batch);

struct StrideSweepRow {
  std::size_t stride = 0;
  std::size_t patches_per_slice = 0;
  double score_mean = 0;
  double score_std = 0;
  double seconds_mean = 0;
  double seconds_std = 0;
};

// Runs inference `repeats` times per stride, timing each, and scores the
// output's lr_primary plane over the normalisation window.
std::vector<StrideSweepRow> stride_sweep(const Volume3D& v, const PatchMapper& mapper,
                                         const std::vector<std::size_t>& strides, std::size_t repeats = 3,
                                         const InferenceOptions& base = {});
std::string stride_sweep_csv(const std::vector<StrideSweepRow>& rows);

}  // namespace clade
