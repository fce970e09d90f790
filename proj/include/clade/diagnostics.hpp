#pragma once

#include <functional>
#include <vector>

#include "clade/patchwork.hpp"
#include "clade/volume.hpp"

namespace clade {

// Mean |second difference| centred on either side of every grid seam
// (patch start and end positions) minus the mean at all other positions,
// pooled over rows and columns. Positive values mean grid-aligned
// discontinuities.
double detect_block_artifacts(const Image& slice, const PatchGrid& grid);

struct ModeCollapseReport {
  double input_distance = 0;   // mean pairwise mean-L1 over probe inputs
  double output_distance = 0;  // same over generator outputs
  double ratio = 0;
  bool collapsed = false;
};

inline constexpr double kCollapseRatio = 0.01;
inline constexpr std::size_t kMinProbes = 16;

// Mean over unordered pairs of mean |a - b|.
double mean_pairwise_l1(const std::vector<Image>& images);
// Flags collapse when the output spread falls below 1% of the input spread.
ModeCollapseReport detect_mode_collapse(const std::vector<Image>& probes, const std::vector<Image>& outputs);
ModeCollapseReport detect_mode_collapse(const std::function<Image(const Image&)>& generator,
                                        const std::vector<Image>& probes);

}  // namespace clade
