#include "clade/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "clade/checkpoint.hpp"
#include "clade/error.hpp"
#include "clade/spline.hpp"

namespace clade {

Volume3D::Volume3D(std::array<std::size_t, 3> d, std::array<double, 3> s, double fill)
    : dims(d), spacing(s), data(d[0] * d[1] * d[2], fill), lr_axis(infer_lr_axis(s)), intensity_range{fill, fill} {}

double Volume3D::sample(double i, double j, double k) const {
  auto clampd = [](double x, std::size_t n) { return std::clamp(x, 0.0, static_cast<double>(n - 1)); };
  i = clampd(i, dims[0]);
  j = clampd(j, dims[1]);
  k = clampd(k, dims[2]);
  const std::size_t i0 = std::min<std::size_t>(static_cast<std::size_t>(i), dims[0] - 1);
  const std::size_t j0 = std::min<std::size_t>(static_cast<std::size_t>(j), dims[1] - 1);
  const std::size_t k0 = std::min<std::size_t>(static_cast<std::size_t>(k), dims[2] - 1);
  const std::size_t i1 = std::min(i0 + 1, dims[0] - 1), j1 = std::min(j0 + 1, dims[1] - 1),
                    k1 = std::min(k0 + 1, dims[2] - 1);
  const double fi = i - i0, fj = j - j0, fk = k - k0;
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double c00 = lerp(at(i0, j0, k0), at(i0, j0, k1), fk);
  const double c01 = lerp(at(i0, j1, k0), at(i0, j1, k1), fk);
  const double c10 = lerp(at(i1, j0, k0), at(i1, j0, k1), fk);
  const double c11 = lerp(at(i1, j1, k0), at(i1, j1, k1), fk);
  return lerp(lerp(c00, c01, fj), lerp(c10, c11, fj), fi);
}

void Volume3D::refresh_range() {
  if (data.empty()) return;
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  intensity_range = {*lo, *hi};
}

void Volume3D::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2) throw ContractError("volume: dims must be >= 2 on every axis");
    if (!(spacing[a] > 0) || !std::isfinite(spacing[a])) throw ContractError("volume: spacing must be positive");
  }
  if (lr_axis < 0 || lr_axis > 2) throw ContractError("volume: lr_axis must be 0, 1 or 2");
  if (data.size() != dims[0] * dims[1] * dims[2]) throw ShapeError("volume: data size does not match dims");
}

int infer_lr_axis(const std::array<double, 3>& spacing) {
  int best = 0;
  for (int a = 1; a < 3; ++a)
    if (spacing[a] > spacing[best]) best = a;
  return best;
}

namespace {
std::filesystem::path sidecar_path(const std::filesystem::path& path) { return path.string() + ".json"; }
}  // namespace

void save_volume(const Volume3D& v, const std::filesystem::path& path) {
  v.validate();
  nlohmann::json side;
  side["format_version"] = 1;
  side["dims"] = v.dims;
  side["spacing_mm"] = v.spacing;
  side["lr_axis"] = v.lr_axis;
  side["intensity_range"] = v.intensity_range;
  std::string bytes;
  bytes.reserve(v.size() * 4);
  for (double x : v.data) write_le_f32(bytes, static_cast<float>(x));
  write_file_bytes(path, bytes);
  write_file_bytes(sidecar_path(path), side.dump(2) + "\n");
}

Volume3D load_volume(const std::filesystem::path& path) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_file_bytes(sidecar_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("volume header '" + sidecar_path(path).string() + "' is not valid JSON: " + e.what());
  }
  Volume3D v;
  try {
    if (side.at("format_version").get<int>() != 1) throw FormatError("volume header: unsupported format_version");
    v.dims = side.at("dims").get<std::array<std::size_t, 3>>();
    v.spacing = side.at("spacing_mm").get<std::array<double, 3>>();
    if (side.contains("lr_axis") && !side["lr_axis"].is_null()) {
      v.lr_axis = side["lr_axis"].get<int>();
    } else {
      v.lr_axis = infer_lr_axis(v.spacing);
    }
    if (side.contains("intensity_range")) v.intensity_range = side["intensity_range"].get<std::array<double, 2>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("volume header '" + sidecar_path(path).string() + "' is malformed: " + e.what());
  }
  for (int a = 0; a < 3; ++a) {
    if (!(v.spacing[a] > 0)) throw FormatError("volume header: non-positive spacing on axis " + std::to_string(a));
    if (v.dims[a] < 2) throw FormatError("volume header: dims must be >= 2");
  }
  if (v.lr_axis < 0 || v.lr_axis > 2) throw FormatError("volume header: lr_axis out of range");
  const std::string bytes = read_file_bytes(path);
  const std::size_t n = v.dims[0] * v.dims[1] * v.dims[2];
  if (bytes.size() != n * 4) {
    throw FormatError("volume '" + path.string() + "': header dims need " + std::to_string(n) + " float32 values (" +
                      std::to_string(n * 4) + " bytes), file has " + std::to_string(bytes.size()) + " bytes");
  }
  v.data.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t i = 0; i < n; ++i) v.data[i] = read_le_f32(p + 4 * i);
  return v;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw ContractError("percentile of empty set");
  const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<long>(lo), values.end());
  const double vlo = values[lo];
  double vhi = vlo;
  if (hi != lo) vhi = *std::min_element(values.begin() + static_cast<long>(lo) + 1, values.end());
  return vlo + (rank - static_cast<double>(lo)) * (vhi - vlo);
}

Volume3D normalize_intensity(const Volume3D& v, double lo_pct, double hi_pct, Warnings* warnings) {
  if (!(lo_pct >= 0 && lo_pct < hi_pct && hi_pct <= 100)) {
    throw ContractError("normalize_intensity: need 0 <= lo_pct < hi_pct <= 100");
  }
  Volume3D out = v;
  const double lo = percentile(v.data, lo_pct);
  const double hi = percentile(v.data, hi_pct);
  out.intensity_range = {lo, hi};
  if (!(hi > lo)) {
    if (warnings) warnings->add("normalize_intensity: constant volume mapped to zeros");
    std::fill(out.data.begin(), out.data.end(), 0.0);
    return out;
  }
  const double scale = 2.0 / (hi - lo);
  for (double& x : out.data) x = (std::clamp(x, lo, hi) - lo) * scale - 1.0;
  return out;
}

Volume3D denormalize_intensity(const Volume3D& v) {
  Volume3D out = v;
  const double lo = v.intensity_range[0], hi = v.intensity_range[1];
  for (double& x : out.data) x = lo + (x + 1.0) * 0.5 * (hi - lo);
  return out;
}

Volume3D resample_to_isotropic(const Volume3D& v, Warnings* warnings) {
  v.validate();
  const int L = v.lr_axis;
  double target = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a)
    if (a != L) target = std::min(target, v.spacing[a]);
  const double src = v.spacing[L];
  const std::size_t n = v.dims[L];
  const auto n_new = static_cast<std::size_t>(std::llround(static_cast<double>(n) * src / target));
  if (n_new == n && std::abs(src - target) <= 1e-12 * target) {
    Volume3D out = v;
    out.spacing[L] = target;
    return out;
  }
  if (n < 4 && warnings) warnings->add("resample_to_isotropic: fewer than 4 samples along lr axis, using linear");

  Volume3D out = v;
  out.dims[L] = n_new;
  out.spacing[L] = target;
  out.data.assign(out.dims[0] * out.dims[1] * out.dims[2], 0.0);

  // Sample index positions of the new voxel centres in the old grid.
  std::vector<double> pos(n_new);
  for (std::size_t i = 0; i < n_new; ++i) pos[i] = (static_cast<double>(i) + 0.5) * target / src - 0.5;

  const NaturalSplineSolver solver(n);
  const bool linear = n < 4;
  std::array<std::size_t, 3> stride_old{v.dims[1] * v.dims[2], v.dims[2], 1};
  std::array<std::size_t, 3> stride_new{out.dims[1] * out.dims[2], out.dims[2], 1};
  const int a1 = L == 0 ? 1 : 0;
  const int a2 = L == 2 ? 1 : 2;
  std::vector<double> line(n), m(n, 0.0);
  for (std::size_t p = 0; p < v.dims[a1]; ++p)
    for (std::size_t q = 0; q < v.dims[a2]; ++q) {
      const std::size_t base_old = p * stride_old[a1] + q * stride_old[a2];
      const std::size_t base_new = p * stride_new[a1] + q * stride_new[a2];
      for (std::size_t i = 0; i < n; ++i) line[i] = v.data[base_old + i * stride_old[L]];
      if (!linear) solver.solve(line, m);
      for (std::size_t i = 0; i < n_new; ++i) out.data[base_new + i * stride_new[L]] = eval_natural_spline(line, m, pos[i]);
    }
  return out;
}

Plane parse_plane(const std::string& name) {
  if (name == "hr") return Plane::hr;
  if (name == "lr_primary") return Plane::lr_primary;
  if (name == "lr_secondary") return Plane::lr_secondary;
  throw ContractError("unknown plane '" + name + "' (expected hr, lr_primary or lr_secondary)");
}

std::string plane_name(Plane p) {
  switch (p) {
    case Plane::hr: return "hr";
    case Plane::lr_primary: return "lr_primary";
    case Plane::lr_secondary: return "lr_secondary";
  }
  return "?";
}

int plane_normal_axis(const Volume3D& v, Plane p) {
  if (p == Plane::hr) return v.lr_axis;
  std::array<int, 2> others{};
  int k = 0;
  for (int a = 0; a < 3; ++a)
    if (a != v.lr_axis) others[k++] = a;
  if (p == Plane::lr_primary) return others[0];
  if (p == Plane::lr_secondary) return others[1];
  throw ContractError("invalid plane tag");
}

namespace {
struct SliceAxes {
  int normal, row, col;
};
SliceAxes slice_axes(const Volume3D& v, Plane p) {
  const int n = plane_normal_axis(v, p);
  const int r = n == 0 ? 1 : 0;
  const int c = n == 2 ? 1 : 2;
  return {n, r, c};
}
}  // namespace

std::vector<Image> extract_slices(const Volume3D& v, Plane plane) {
  const auto ax = slice_axes(v, plane);
  const std::array<std::size_t, 3> stride{v.dims[1] * v.dims[2], v.dims[2], 1};
  std::vector<Image> slices;
  slices.reserve(v.dims[ax.normal]);
  for (std::size_t s = 0; s < v.dims[ax.normal]; ++s) {
    Image img(v.dims[ax.row], v.dims[ax.col]);
    for (std::size_t r = 0; r < img.rows; ++r)
      for (std::size_t c = 0; c < img.cols; ++c)
        img.at(r, c) = v.data[s * stride[ax.normal] + r * stride[ax.row] + c * stride[ax.col]];
    slices.push_back(std::move(img));
  }
  return slices;
}

Volume3D assemble_slices(const Volume3D& like, Plane plane, const std::vector<Image>& slices) {
  const auto ax = slice_axes(like, plane);
  if (slices.size() != like.dims[ax.normal]) throw ShapeError("assemble_slices: slice count does not match volume");
  Volume3D out = like;
  const std::array<std::size_t, 3> stride{like.dims[1] * like.dims[2], like.dims[2], 1};
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const Image& img = slices[s];
    if (img.rows != like.dims[ax.row] || img.cols != like.dims[ax.col]) throw ShapeError("assemble_slices: slice shape mismatch");
    for (std::size_t r = 0; r < img.rows; ++r)
      for (std::size_t c = 0; c < img.cols; ++c)
        out.data[s * stride[ax.normal] + r * stride[ax.row] + c * stride[ax.col]] = img.at(r, c);
  }
  return out;
}

}  // namespace clade
