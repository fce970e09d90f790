#include "clade/inference.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "clade/error.hpp"
#include "clade/metrics.hpp"
#include "clade/parallel.hpp"

namespace clade {

template <typename T>
PatchMapper generator_mapper(const Generator<T>& g) {
  return [&g](const std::vector<Image>& patches) {
    const std::size_t n = patches.size(), px = kPatchSize * kPatchSize;
    Array<T> in({n, 1, kPatchSize, kPatchSize});
    for (std::size_t b = 0; b < n; ++b) {
      if (patches[b].rows != kPatchSize || patches[b].cols != kPatchSize) throw ShapeError("patch must be 32x32");
      for (std::size_t i = 0; i < px; ++i) in[b * px + i] = static_cast<T>(patches[b].data[i]);
    }
    NoGradGuard guard;
    const Tensor<T> out = g.forward(Tensor<T>::constant(std::move(in)));
    if (out.shape() != Shape{n, 1, kPatchSize, kPatchSize}) {
      throw ShapeError("generator output " + shape_str(out.shape()) + " does not match its input");
    }
    std::vector<Image> result(n, Image(kPatchSize, kPatchSize));
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < px; ++i) result[b].data[i] = static_cast<double>(out.data()[b * px + i]);
    return result;
  };
}

template PatchMapper generator_mapper<float>(const Generator<float>&);
template PatchMapper generator_mapper<double>(const Generator<double>&);

PatchMapper identity_mapper() {
  return [](const std::vector<Image>& patches) { return patches; };
}

Image super_resolve_slice(const Image& slice, const PatchMapper& mapper, std::size_t stride, std::size_t batch) {
  if (stride < 1 || stride > kPatchSize) throw ContractError("stride must be in [1, 32]");
  if (batch < 1) throw ContractError("batch must be >= 1");
  const PatchGrid grid = build_patch_grid(slice.rows, slice.cols, stride);
  const std::vector<Image> patches = extract_patches(slice, grid);
  std::vector<Image> outputs;
  outputs.reserve(patches.size());
  for (std::size_t s = 0; s < patches.size(); s += batch) {
    const std::size_t e = std::min(patches.size(), s + batch);
    std::vector<Image> chunk(patches.begin() + static_cast<std::ptrdiff_t>(s),
                             patches.begin() + static_cast<std::ptrdiff_t>(e));
    std::vector<Image> mapped = mapper(chunk);
    if (mapped.size() != chunk.size()) throw ContractError("patch mapper changed the batch size");
    for (Image& m : mapped) outputs.push_back(std::move(m));
  }
  return stitch_patches(grid, outputs);
}

Volume3D super_resolve_volume(const Volume3D& v, const PatchMapper& mapper, const InferenceOptions& options,
                              Warnings* warnings) {
  const Volume3D norm = normalize_intensity(v, options.lo_pct, options.hi_pct, warnings);
  const Volume3D iso = resample_to_isotropic(norm, warnings);
  const std::vector<Image> slices = extract_slices(iso, options.plane);
  for (const Image& s : slices) {
    if (s.rows < kPatchSize || s.cols < kPatchSize) {
      throw ShapeError("slice " + std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                       " is smaller than the 32x32 patch");
    }
  }
  std::vector<Image> out(slices.size());
  parallel_for(slices.size(),
               [&](std::size_t i) { out[i] = super_resolve_slice(slices[i], mapper, options.stride, options.batch); });
  return denormalize_intensity(assemble_slices(iso, options.plane, out));
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double m = 0, ss = 0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(xs.size()))};
}

}  // namespace

std::vector<StrideSweepRow> stride_sweep(const Volume3D& v, const PatchMapper& mapper,
                                         const std::vector<std::size_t>& strides, std::size_t repeats,
                                         const InferenceOptions& base) {
  if (strides.empty()) throw ContractError("stride_sweep: empty stride list");
  if (repeats < 1) throw ContractError("stride_sweep: repeats must be >= 1");
  std::vector<StrideSweepRow> rows;
  for (std::size_t stride : strides) {
    InferenceOptions opt = base;
    opt.stride = stride;
    std::vector<double> seconds;
    Volume3D out;
    for (std::size_t r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      out = super_resolve_volume(v, mapper, opt);
      seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    StrideSweepRow row;
    row.stride = stride;
    const Image probe = extract_slices(out, Plane::lr_primary).front();
    row.patches_per_slice = patch_count(probe.rows, probe.cols, stride);
    double lo = out.intensity_range[0], hi = out.intensity_range[1];
    if (!(hi > lo)) hi = lo + 1.0;
    const NrVolumeScore score = nr_score_volume(out, Plane::lr_primary, lo, hi);
    row.score_mean = score.mean;
    row.score_std = score.stddev;
    std::tie(row.seconds_mean, row.seconds_std) = mean_std(seconds);
    rows.push_back(row);
  }
  return rows;
}

std::string stride_sweep_csv(const std::vector<StrideSweepRow>& rows) {
  std::ostringstream os;
  os.precision(8);
  os << "stride,score_mean,score_std,seconds_mean,seconds_std\n";
  for (const auto& r : rows)
    os << r.stride << ',' << r.score_mean << ',' << r.score_std << ',' << r.seconds_mean << ',' << r.seconds_std
       << '\n';
  return os.str();
}

}  // namespace clade
