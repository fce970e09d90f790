#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clade/phantom.hpp"
#include "clade/volume.hpp"

namespace clade {

inline constexpr std::size_t kNrBlock = 16;
inline constexpr double kNrActiveStd = 0.005;

struct NrBlock {
  std::size_t row = 0;  // top-left pixel
  std::size_t col = 0;
  bool active = false;
  double blockiness = 0;
  double noise_term = 0;
  double distortion = 0;
};

// Per-block terms of nr_score on a slice clipped to [0,1]. Only complete
// 16x16 blocks are scored.
std::vector<NrBlock> nr_score_blocks(const Image& slice);
// 100 * (sum of active-block distortions + 1) / (active blocks + 1).
// Lower is better. Requires at least 32x32.
double nr_score(const Image& slice);

struct NrVolumeScore {
  double mean = 0;
  double stddev = 0;  // population
  std::vector<double> per_slice;
};
// Scores every slice of `plane` after mapping [lo, hi] onto [0, 1].
NrVolumeScore nr_score_volume(const Volume3D& v, Plane plane, double lo, double hi);

struct LineProfile {
  std::vector<double> samples;
  double spacing_mm = 1.0;
  std::array<double, 3> start{};  // voxel-index coordinates
  std::array<double, 3> end{};
};

// Window-5 cubic Savitzky-Golay coefficients: row r evaluates the fitted
// cubic at offset r-2 of the window. Row 2 is the interior smoothing kernel.
const std::array<std::array<double, 5>, 5>& savgol_coefficients();
// Interior samples use the centred kernel; the two samples at each end take
// the cubic fitted to the outermost window. Needs >= 5 samples.
LineProfile savgol_filter(const LineProfile& p);
// max |central difference| / spacing of the filtered profile (mm^-1).
// Needs >= 7 samples.
double edge_sharpness(const LineProfile& p);

// Half-open voxel box [lo, hi).
struct Box {
  std::array<std::size_t, 3> lo{};
  std::array<std::size_t, 3> hi{};
};
Box parse_box(const std::string& s);  // "i0,j0,k0,i1,j1,k1"

struct RoiStats {
  double signal_mean = 0;
  double noise_std = 0;
  double snr = 0;
};
// mean(signal) / population std(noise). Throws NumericError when the noise
// box is constant.
RoiStats snr(const Volume3D& v, const Box& signal, const Box& noise);

inline constexpr double kPsnrCapDb = 99.0;
// 10 log10(peak^2 / MSE), capped at 99 dB.
double psnr(const Volume3D& reconstruction, const Volume3D& reference, double peak = 1.0);

// Profiles of length `length` centred on each ellipsoid pole whose normal
// lies along `axis`, in a volume with the phantom's geometry. Profiles that
// leave the volume are dropped.
std::vector<LineProfile> phantom_edge_profiles(const Volume3D& v, const PhantomSpec& spec, int axis,
                                               std::size_t length = 15);

struct QualityReport {
  std::string model;
  std::string orientation;
  NrVolumeScore nr;
  std::vector<double> edge_sharpness;
  double edge_sharpness_mean = 0;
  std::optional<RoiStats> roi;
  std::optional<double> psnr_db;
  std::optional<double> block_artifacts;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

}  // namespace clade
