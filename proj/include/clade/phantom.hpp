#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clade/volume.hpp"

namespace clade {

enum class PrimitiveKind { ellipsoid, slab };

// Ellipsoid: semi-axes radii_mm around center_mm. Slab: axis-aligned box
// with half-extents radii_mm (a radius beyond the field of view makes it an
// infinite slab along that axis).
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::ellipsoid;
  std::array<double, 3> center_mm{};
  std::array<double, 3> radii_mm{};
  double intensity = 1.0;
};

struct PhantomSpec {
  std::uint64_t seed = 0;
  std::array<std::size_t, 3> dims{64, 64, 64};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  int lr_axis = 2;
  // Slice spacing of the simulated acquisition; must be an integer multiple
  // of spacing[lr_axis].
  double lr_spacing_mm = 4.0;
  std::vector<Primitive> primitives;
  double noise_std = 0.0;
  double edge_blur_mm = 0.0;

  void validate() const;
  // Integer through-plane factor f = lr_spacing_mm / spacing[lr_axis].
  std::size_t factor() const;
};

PhantomSpec phantom_spec_from_json(const nlohmann::json& j);
nlohmann::json phantom_spec_to_json(const PhantomSpec& s);

// Renders the isotropic ground truth (edge blur + Gaussian noise) and the
// thick-slice acquisition obtained by boxcar-averaging f consecutive slices.
std::pair<Volume3D, Volume3D> generate_phantom(const PhantomSpec& spec);

// Signed distance (mm, negative inside) to the primitive's surface,
// first-order accurate near the surface for ellipsoids.
double signed_distance(const Primitive& p, const std::array<double, 3>& point_mm);

// Random abdominal-like scene: a large body ellipsoid plus `n_organs`
// smaller ellipsoids of varied contrast. Deterministic in seed.
PhantomSpec random_phantom_spec(std::uint64_t seed, std::array<std::size_t, 3> dims, double spacing_mm,
                                std::size_t factor, int lr_axis = 2, std::size_t n_organs = 6,
                                double noise_std = 0.02, double edge_blur_mm = 0.6);

// Block-averages `hr` along `axis` by `factor` (a trailing partial block is
// averaged over the slices it has) and scales that spacing by factor.
Volume3D block_average(const Volume3D& hr, int axis, std::size_t factor);

}  // namespace clade
