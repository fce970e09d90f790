#include "clade/diagnostics.hpp"

#include <cmath>
#include <set>

#include "clade/error.hpp"

namespace clade {

namespace {

// Seam positions along one axis: the first and last index of every patch,
// except at the image border.
std::vector<bool> seam_mask(const std::vector<std::size_t>& starts, std::size_t extent) {
  std::vector<bool> mask(extent, false);
  for (std::size_t s : starts) {
    if (s > 0) {
      mask[s - 1] = true;
      mask[s] = true;
    }
    const std::size_t e = s + kPatchSize;
    if (e < extent) {
      mask[e - 1] = true;
      mask[e] = true;
    }
  }
  return mask;
}

}  // namespace

double detect_block_artifacts(const Image& slice, const PatchGrid& grid) {
  if (slice.rows != grid.rows || slice.cols != grid.cols) throw ShapeError("detect_block_artifacts: grid mismatch");
  if (slice.rows < 3 || slice.cols < 3) throw ShapeError("detect_block_artifacts: slice too small");
  const auto col_seam = seam_mask(grid.col_starts, slice.cols);
  const auto row_seam = seam_mask(grid.row_starts, slice.rows);
  double seam_sum = 0, other_sum = 0;
  std::size_t seam_n = 0, other_n = 0;
  for (std::size_t r = 0; r < slice.rows; ++r) {
    for (std::size_t c = 1; c + 1 < slice.cols; ++c) {
      const double d = std::abs(slice.at(r, c - 1) - 2 * slice.at(r, c) + slice.at(r, c + 1));
      if (col_seam[c]) {
        seam_sum += d;
        ++seam_n;
      } else {
        other_sum += d;
        ++other_n;
      }
    }
  }
  for (std::size_t r = 1; r + 1 < slice.rows; ++r) {
    for (std::size_t c = 0; c < slice.cols; ++c) {
      const double d = std::abs(slice.at(r - 1, c) - 2 * slice.at(r, c) + slice.at(r + 1, c));
      if (row_seam[r]) {
        seam_sum += d;
        ++seam_n;
      } else {
        other_sum += d;
        ++other_n;
      }
    }
  }
  // A single-patch grid has no seams.
  if (seam_n == 0 || other_n == 0) return 0.0;
  return seam_sum / static_cast<double>(seam_n) - other_sum / static_cast<double>(other_n);
}

double mean_pairwise_l1(const std::vector<Image>& images) {
  if (images.size() < 2) throw ContractError("mean_pairwise_l1: need at least two images");
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < images.size(); ++a) {
    for (std::size_t b = a + 1; b < images.size(); ++b) {
      if (images[a].data.size() != images[b].data.size()) throw ShapeError("mean_pairwise_l1: size mismatch");
      double s = 0;
      for (std::size_t i = 0; i < images[a].data.size(); ++i) s += std::abs(images[a].data[i] - images[b].data[i]);
      total += s / static_cast<double>(images[a].data.size());
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

ModeCollapseReport detect_mode_collapse(const std::vector<Image>& probes, const std::vector<Image>& outputs) {
  if (probes.size() < kMinProbes) {
    throw ContractError("detect_mode_collapse: need at least " + std::to_string(kMinProbes) + " probes");
  }
  if (outputs.size() != probes.size()) throw ContractError("detect_mode_collapse: one output per probe");
  ModeCollapseReport r;
  r.input_distance = mean_pairwise_l1(probes);
  if (r.input_distance == 0) throw ContractError("detect_mode_collapse: probes must be distinct");
  r.output_distance = mean_pairwise_l1(outputs);
  r.ratio = r.output_distance / r.input_distance;
  r.collapsed = r.ratio < kCollapseRatio;
  return r;
}

ModeCollapseReport detect_mode_collapse(const std::function<Image(const Image&)>& generator,
                                        const std::vector<Image>& probes) {
  std::vector<Image> outputs;
  outputs.reserve(probes.size());
  for (const Image& p : probes) outputs.push_back(generator(p));
  return detect_mode_collapse(probes, outputs);
}

}  // namespace clade
