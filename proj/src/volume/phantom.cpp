#include "clade/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "clade/error.hpp"

namespace clade {

void PhantomSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2) throw ContractError("phantom: dims must be >= 2");
    if (!(spacing[a] > 0)) throw ContractError("phantom: spacing must be positive");
  }
  if (lr_axis < 0 || lr_axis > 2) throw ContractError("phantom: lr_axis must be 0, 1 or 2");
  if (noise_std < 0 || edge_blur_mm < 0) throw ContractError("phantom: noise_std and edge_blur_mm must be >= 0");
  for (const auto& p : primitives) {
    if (p.intensity < 0 || p.intensity > 1) throw ContractError("phantom: primitive intensity outside [0,1]");
    for (int a = 0; a < 3; ++a) {
      const double extent = static_cast<double>(dims[a]) * spacing[a];
      if (p.center_mm[a] < 0 || p.center_mm[a] > extent) throw ContractError("phantom: primitive centre outside the field of view");
      if (!(p.radii_mm[a] > 0)) throw ContractError("phantom: primitive radii must be positive");
    }
  }
  factor();
}

std::size_t PhantomSpec::factor() const {
  const double ratio = lr_spacing_mm / spacing[lr_axis];
  const double rounded = std::round(ratio);
  if (rounded < 1 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ContractError("phantom: anisotropy factor " + std::to_string(ratio) + " is not a positive integer");
  }
  return static_cast<std::size_t>(rounded);
}

PhantomSpec phantom_spec_from_json(const nlohmann::json& j) {
  PhantomSpec s;
  try {
    s.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("dims")) s.dims = j.at("dims").get<std::array<std::size_t, 3>>();
    if (j.contains("spacing_mm")) s.spacing = j.at("spacing_mm").get<std::array<double, 3>>();
    s.lr_axis = j.value("lr_axis", 2);
    s.lr_spacing_mm = j.value("lr_spacing_mm", s.spacing[s.lr_axis] * 4.0);
    s.noise_std = j.value("noise_std", 0.0);
    s.edge_blur_mm = j.value("edge_blur_mm", 0.0);
    for (const auto& pj : j.value("primitives", nlohmann::json::array())) {
      Primitive p;
      const std::string kind = pj.value("kind", "ellipsoid");
      if (kind == "ellipsoid") {
        p.kind = PrimitiveKind::ellipsoid;
      } else if (kind == "slab") {
        p.kind = PrimitiveKind::slab;
      } else {
        throw FormatError("phantom: unknown primitive kind '" + kind + "'");
      }
      p.center_mm = pj.at("center_mm").get<std::array<double, 3>>();
      p.radii_mm = pj.at("radii_mm").get<std::array<double, 3>>();
      p.intensity = pj.value("intensity", 1.0);
      s.primitives.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("phantom spec is malformed: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json phantom_spec_to_json(const PhantomSpec& s) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["dims"] = s.dims;
  j["spacing_mm"] = s.spacing;
  j["lr_axis"] = s.lr_axis;
  j["lr_spacing_mm"] = s.lr_spacing_mm;
  j["noise_std"] = s.noise_std;
  j["edge_blur_mm"] = s.edge_blur_mm;
  j["primitives"] = nlohmann::json::array();
  for (const auto& p : s.primitives) {
    j["primitives"].push_back({{"kind", p.kind == PrimitiveKind::ellipsoid ? "ellipsoid" : "slab"},
                               {"center_mm", p.center_mm},
                               {"radii_mm", p.radii_mm},
                               {"intensity", p.intensity}});
  }
  return j;
}

double signed_distance(const Primitive& p, const std::array<double, 3>& x) {
  if (p.kind == PrimitiveKind::slab) {
    double d = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) d = std::max(d, std::abs(x[a] - p.center_mm[a]) - p.radii_mm[a]);
    return d;
  }
  // f(x) = sum ((x-c)/r)^2 - 1, distance ~ f / |grad f|.
  double f = -1.0, g2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double u = (x[a] - p.center_mm[a]) / p.radii_mm[a];
    f += u * u;
    const double g = 2.0 * u / p.radii_mm[a];
    g2 += g * g;
  }
  const double g = std::sqrt(g2);
  const double rmin = std::min({p.radii_mm[0], p.radii_mm[1], p.radii_mm[2]});
  if (g < 1e-12) return -rmin;
  return std::max(f / g, -rmin);
}

Volume3D block_average(const Volume3D& hr, int axis, std::size_t factor) {
  if (factor < 1) throw ContractError("block_average: factor must be >= 1");
  Volume3D lr = hr;
  const std::size_t n = hr.dims[axis];
  lr.dims[axis] = (n + factor - 1) / factor;
  lr.spacing[axis] = hr.spacing[axis] * static_cast<double>(factor);
  lr.lr_axis = axis;
  lr.data.assign(lr.dims[0] * lr.dims[1] * lr.dims[2], 0.0);
  std::vector<double> count(lr.dims[axis], 0.0);
  for (std::size_t i = 0; i < n; ++i) count[i / factor] += 1.0;
  for (std::size_t i = 0; i < hr.dims[0]; ++i)
    for (std::size_t j = 0; j < hr.dims[1]; ++j)
      for (std::size_t k = 0; k < hr.dims[2]; ++k) {
        std::array<std::size_t, 3> t{i, j, k};
        t[axis] /= factor;
        lr.at(t[0], t[1], t[2]) += hr.at(i, j, k) / count[t[axis]];
      }
  lr.refresh_range();
  return lr;
}

std::pair<Volume3D, Volume3D> generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const std::size_t f = spec.factor();
  Volume3D hr(spec.dims, spec.spacing, 0.0);
  hr.lr_axis = spec.lr_axis;
  const double blur = spec.edge_blur_mm;
  for (std::size_t i = 0; i < spec.dims[0]; ++i)
    for (std::size_t j = 0; j < spec.dims[1]; ++j)
      for (std::size_t k = 0; k < spec.dims[2]; ++k) {
        const std::array<double, 3> x{(i + 0.5) * spec.spacing[0], (j + 0.5) * spec.spacing[1],
                                      (k + 0.5) * spec.spacing[2]};
        double v = 0.0;
        for (const auto& p : spec.primitives) {
          const double d = signed_distance(p, x);
          double occ;
          if (blur > 0) {
            occ = 0.5 * std::erfc(d / (blur * std::sqrt(2.0)));
          } else {
            occ = d <= 0 ? 1.0 : 0.0;
          }
          v = v * (1.0 - occ) + p.intensity * occ;
        }
        hr.at(i, j, k) = v;
      }
  if (spec.noise_std > 0) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    for (double& v : hr.data) v += noise(rng);
  }
  hr.refresh_range();
  Volume3D lr = block_average(hr, spec.lr_axis, f);
  return {std::move(hr), std::move(lr)};
}

PhantomSpec random_phantom_spec(std::uint64_t seed, std::array<std::size_t, 3> dims, double spacing_mm,
                                std::size_t factor, int lr_axis, std::size_t n_organs, double noise_std,
                                double edge_blur_mm) {
  PhantomSpec s;
  s.seed = seed;
  s.dims = dims;
  s.spacing = {spacing_mm, spacing_mm, spacing_mm};
  s.lr_axis = lr_axis;
  s.lr_spacing_mm = spacing_mm * static_cast<double>(factor);
  s.noise_std = noise_std;
  s.edge_blur_mm = edge_blur_mm;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<double, 3> extent{};
  for (int a = 0; a < 3; ++a) extent[a] = static_cast<double>(dims[a]) * spacing_mm;

  Primitive body;
  body.kind = PrimitiveKind::ellipsoid;
  for (int a = 0; a < 3; ++a) {
    body.center_mm[a] = extent[a] * (0.47 + 0.06 * unit(rng));
    body.radii_mm[a] = extent[a] * (0.38 + 0.06 * unit(rng));
  }
  body.intensity = 0.35 + 0.1 * unit(rng);
  s.primitives.push_back(body);

  for (std::size_t o = 0; o < n_organs; ++o) {
    Primitive p;
    p.kind = PrimitiveKind::ellipsoid;
    for (int a = 0; a < 3; ++a) {
      p.radii_mm[a] = extent[a] * (0.05 + 0.10 * unit(rng));
      const double lo = body.center_mm[a] - 0.6 * body.radii_mm[a];
      const double hi = body.center_mm[a] + 0.6 * body.radii_mm[a];
      p.center_mm[a] = lo + (hi - lo) * unit(rng);
    }
    p.intensity = unit(rng) < 0.3 ? 0.05 + 0.15 * unit(rng) : 0.6 + 0.35 * unit(rng);
    s.primitives.push_back(p);
  }
  return s;
}

}  // namespace clade
