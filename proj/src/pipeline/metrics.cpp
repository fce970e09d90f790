#include "clade/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clade/error.hpp"

namespace clade {

namespace {

// Per-pixel floor keeping the ratio terms finite on flat blocks.
constexpr double kRatioFloor = 1e-6;

struct Accum {
  double sum = 0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
};

Image clip01(const Image& in) {
  Image out = in;
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

// |I(c-1) - 2 I(c) + I(c+1)| along a row or a column.
double d2_col(const Image& im, std::size_t r, std::size_t c) {
  return std::abs(im.at(r, c - 1) - 2 * im.at(r, c) + im.at(r, c + 1));
}
double d2_row(const Image& im, std::size_t r, std::size_t c) {
  return std::abs(im.at(r - 1, c) - 2 * im.at(r, c) + im.at(r + 1, c));
}

NrBlock score_block(const Image& im, std::size_t r0, std::size_t c0) {
  NrBlock b;
  b.row = r0;
  b.col = c0;
  const std::size_t n = kNrBlock;
  double s = 0, ss = 0;
  for (std::size_t r = r0; r < r0 + n; ++r)
    for (std::size_t c = c0; c < c0 + n; ++c) s += im.at(r, c);
  const double mu = s / static_cast<double>(n * n);
  for (std::size_t r = r0; r < r0 + n; ++r)
    for (std::size_t c = c0; c < c0 + n; ++c) ss += (im.at(r, c) - mu) * (im.at(r, c) - mu);
  b.active = std::sqrt(ss / static_cast<double>(n * n)) >= kNrActiveStd;
  if (!b.active) return b;

  // Second differences centred on the block's first/last row and column
  // (the outer boundary) versus those strictly inside it.
  Accum boundary, interior;
  for (std::size_t r = r0; r < r0 + n; ++r) {
    for (std::size_t c = c0; c < c0 + n; ++c) {
      const bool edge_c = (c == c0 || c == c0 + n - 1);
      const bool edge_r = (r == r0 || r == r0 + n - 1);
      if (c >= 1 && c + 1 < im.cols) (edge_c ? boundary : interior).add(d2_col(im, r, c));
      if (r >= 1 && r + 1 < im.rows) (edge_r ? boundary : interior).add(d2_row(im, r, c));
    }
  }
  const double bb = boundary.mean(), bi = interior.mean();
  b.blockiness = std::max(0.0, bb - bi) / (bb + 1e-3);

  // Laplacian energy against forward-gradient energy. For white noise
  // E[lap^2] = 20 s^2 and E[|grad|^2] = 4 s^2, so the factor 5 maps it to 1.
  double lap = 0, grad = 0;
  std::size_t count = 0;
  for (std::size_t r = r0; r < r0 + n; ++r) {
    for (std::size_t c = c0; c < c0 + n; ++c) {
      if (r >= 1 && r + 1 < im.rows && c >= 1 && c + 1 < im.cols) {
        const double l =
            4 * im.at(r, c) - im.at(r - 1, c) - im.at(r + 1, c) - im.at(r, c - 1) - im.at(r, c + 1);
        lap += l * l;
        ++count;
      }
      if (r + 1 < im.rows && c + 1 < im.cols) {
        const double gx = im.at(r, c + 1) - im.at(r, c);
        const double gy = im.at(r + 1, c) - im.at(r, c);
        grad += gx * gx + gy * gy;
      }
    }
  }
  b.noise_term = lap / (5 * grad + kRatioFloor * static_cast<double>(std::max<std::size_t>(count, 1)));
  b.distortion = std::clamp(0.5 * b.blockiness + 0.5 * b.noise_term, 0.0, 1.0);
  return b;
}

}  // namespace

std::vector<NrBlock> nr_score_blocks(const Image& slice) {
  if (slice.rows < 2 * kNrBlock || slice.cols < 2 * kNrBlock) {
    throw ShapeError("nr_score: slice " + std::to_string(slice.rows) + "x" + std::to_string(slice.cols) +
                     " is smaller than 32x32");
  }
  const Image im = clip01(slice);
  std::vector<NrBlock> blocks;
  for (std::size_t r0 = 0; r0 + kNrBlock <= im.rows; r0 += kNrBlock)
    for (std::size_t c0 = 0; c0 + kNrBlock <= im.cols; c0 += kNrBlock) blocks.push_back(score_block(im, r0, c0));
  return blocks;
}

double nr_score(const Image& slice) {
  double sum = 0;
  std::size_t active = 0;
  for (const NrBlock& b : nr_score_blocks(slice)) {
    if (!b.active) continue;
    sum += b.distortion;
    ++active;
  }
  return 100.0 * (sum + 1.0) / (static_cast<double>(active) + 1.0);
}

NrVolumeScore nr_score_volume(const Volume3D& v, Plane plane, double lo, double hi) {
  if (!(hi > lo)) throw ContractError("nr_score_volume: empty intensity window");
  NrVolumeScore out;
  for (Image s : extract_slices(v, plane)) {
    for (double& x : s.data) x = (x - lo) / (hi - lo);
    out.per_slice.push_back(nr_score(s));
  }
  double sum = 0, ss = 0;
  for (double x : out.per_slice) sum += x;
  out.mean = sum / static_cast<double>(out.per_slice.size());
  for (double x : out.per_slice) ss += (x - out.mean) * (x - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(out.per_slice.size()));
  return out;
}

const std::array<std::array<double, 5>, 5>& savgol_coefficients() {
  // Hat matrix A (A^T A)^{-1} A^T of the cubic Vandermonde on t = -2..2.
  static const std::array<std::array<double, 5>, 5> coeffs = [] {
    double a[5][4];
    for (int i = 0; i < 5; ++i)
      for (int p = 0; p < 4; ++p) a[i][p] = std::pow(static_cast<double>(i - 2), p);
    double g[4][8] = {};
    for (int p = 0; p < 4; ++p) {
      for (int q = 0; q < 4; ++q)
        for (int i = 0; i < 5; ++i) g[p][q] += a[i][p] * a[i][q];
      g[p][4 + p] = 1.0;
    }
    for (int p = 0; p < 4; ++p) {  // Gauss-Jordan; A^T A is positive definite
      const double piv = g[p][p];
      for (int q = 0; q < 8; ++q) g[p][q] /= piv;
      for (int r = 0; r < 4; ++r) {
        if (r == p) continue;
        const double f = g[r][p];
        for (int q = 0; q < 8; ++q) g[r][q] -= f * g[p][q];
      }
    }
    std::array<std::array<double, 5>, 5> h{};
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 5; ++c)
        for (int p = 0; p < 4; ++p)
          for (int q = 0; q < 4; ++q) h[r][c] += a[r][p] * g[p][4 + q] * a[c][q];
    return h;
  }();
  return coeffs;
}

LineProfile savgol_filter(const LineProfile& p) {
  const std::size_t n = p.samples.size();
  if (n < 5) throw ContractError("savgol_filter: need at least 5 samples, got " + std::to_string(n));
  const auto& h = savgol_coefficients();
  LineProfile out = p;
  auto apply = [&](std::size_t window_start, std::size_t row) {
    double acc = 0;
    for (std::size_t c = 0; c < 5; ++c) acc += h[row][c] * p.samples[window_start + c];
    return acc;
  };
  for (std::size_t i = 2; i + 2 < n; ++i) out.samples[i] = apply(i - 2, 2);
  out.samples[0] = apply(0, 0);
  out.samples[1] = apply(0, 1);
  out.samples[n - 2] = apply(n - 5, 3);
  out.samples[n - 1] = apply(n - 5, 4);
  return out;
}

double edge_sharpness(const LineProfile& p) {
  if (p.samples.size() < 7) {
    throw ContractError("edge_sharpness: need at least 7 samples, got " + std::to_string(p.samples.size()));
  }
  if (!(p.spacing_mm > 0)) throw ContractError("edge_sharpness: spacing must be positive");
  const LineProfile f = savgol_filter(p);
  double best = 0;
  for (std::size_t i = 1; i + 1 < f.samples.size(); ++i) {
    best = std::max(best, std::abs(f.samples[i + 1] - f.samples[i - 1]) / (2 * p.spacing_mm));
  }
  return best;
}

Box parse_box(const std::string& s) {
  std::vector<std::size_t> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      const long long x = std::stoll(tok, &used);
      if (used != tok.size() || x < 0) throw std::invalid_argument(tok);
      v.push_back(static_cast<std::size_t>(x));
    } catch (const std::exception&) {
      throw ContractError("box: '" + tok + "' is not a non-negative integer");
    }
  }
  if (v.size() != 6) throw ContractError("box must be i0,j0,k0,i1,j1,k1");
  for (int a = 0; a < 3; ++a)
    if (v[a + 3] <= v[a]) throw ContractError("box '" + s + "' is empty along axis " + std::to_string(a));
  return Box{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
}

namespace {

std::vector<double> box_values(const Volume3D& v, const Box& b, const char* what) {
  for (int a = 0; a < 3; ++a) {
    if (b.lo[a] >= b.hi[a] || b.hi[a] > v.dims[a]) {
      throw ContractError(std::string(what) + " ROI is empty or outside the volume");
    }
  }
  std::vector<double> out;
  for (std::size_t i = b.lo[0]; i < b.hi[0]; ++i)
    for (std::size_t j = b.lo[1]; j < b.hi[1]; ++j)
      for (std::size_t k = b.lo[2]; k < b.hi[2]; ++k) out.push_back(v.at(i, j, k));
  return out;
}

}  // namespace

RoiStats snr(const Volume3D& v, const Box& signal, const Box& noise) {
  const auto sv = box_values(v, signal, "signal");
  const auto nv = box_values(v, noise, "noise");
  RoiStats r;
  for (double x : sv) r.signal_mean += x;
  r.signal_mean /= static_cast<double>(sv.size());
  double mu = 0, ss = 0;
  for (double x : nv) mu += x;
  mu /= static_cast<double>(nv.size());
  for (double x : nv) ss += (x - mu) * (x - mu);
  r.noise_std = std::sqrt(ss / static_cast<double>(nv.size()));
  if (r.noise_std == 0) throw NumericError("snr: noise ROI has zero variance");
  r.snr = r.signal_mean / r.noise_std;
  return r;
}

double psnr(const Volume3D& reconstruction, const Volume3D& reference, double peak) {
  if (reconstruction.dims != reference.dims) throw ShapeError("psnr: volume dims differ");
  double se = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reconstruction.data[i] - reference.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(reference.size());
  if (mse == 0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

std::vector<LineProfile> phantom_edge_profiles(const Volume3D& v, const PhantomSpec& spec, int axis,
                                               std::size_t length) {
  if (axis < 0 || axis > 2) throw ContractError("phantom_edge_profiles: axis out of range");
  std::vector<LineProfile> out;
  const double h = v.spacing[axis];
  const double half = 0.5 * static_cast<double>(length - 1);
  for (const Primitive& p : spec.primitives) {
    if (p.kind != PrimitiveKind::ellipsoid) continue;
    for (double sign : {-1.0, 1.0}) {
      // Pole on `axis`; the surface normal there is parallel to the axis.
      std::array<double, 3> centre;
      for (int a = 0; a < 3; ++a) centre[a] = p.center_mm[a] / v.spacing[a] - 0.5;
      centre[axis] = (p.center_mm[axis] + sign * p.radii_mm[axis]) / h - 0.5;
      LineProfile lp;
      lp.spacing_mm = h;
      lp.start = centre;
      lp.end = centre;
      lp.start[axis] -= half;
      lp.end[axis] += half;
      bool inside = true;
      for (int a = 0; a < 3; ++a) {
        const double lo = std::min(lp.start[a], lp.end[a]), hi = std::max(lp.start[a], lp.end[a]);
        if (lo < 0 || hi > static_cast<double>(v.dims[a] - 1)) inside = false;
      }
      if (!inside) continue;
      for (std::size_t s = 0; s < length; ++s) {
        std::array<double, 3> q = lp.start;
        q[axis] += static_cast<double>(s);
        lp.samples.push_back(v.sample(q[0], q[1], q[2]));
      }
      out.push_back(std::move(lp));
    }
  }
  return out;
}

nlohmann::json QualityReport::to_json() const {
  nlohmann::json j;
  j["model"] = model;
  j["orientation"] = orientation;
  j["nr_score"] = {{"mean", nr.mean}, {"std", nr.stddev}, {"per_slice", nr.per_slice}};
  j["edge_sharpness"] = {{"profiles", edge_sharpness}, {"mean", edge_sharpness_mean}};
  if (roi) {
    j["signal"] = roi->signal_mean;
    j["noise"] = roi->noise_std;
    j["snr"] = roi->snr;
  } else {
    j["snr"] = nullptr;
  }
  j["psnr_db"] = psnr_db ? nlohmann::json(*psnr_db) : nlohmann::json(nullptr);
  if (block_artifacts) j["block_artifacts"] = *block_artifacts;
  return j;
}

std::string QualityReport::csv_header() {
  return "model,orientation,score_mean,score_std,es_mean,signal,noise,snr,psnr_db";
}

std::string QualityReport::csv_row() const {
  std::ostringstream os;
  os.precision(8);
  os << model << ',' << orientation << ',' << nr.mean << ',' << nr.stddev << ',' << edge_sharpness_mean << ',';
  if (roi)
    os << roi->signal_mean << ',' << roi->noise_std << ',' << roi->snr;
  else
    os << ",,";
  os << ',';
  if (psnr_db) os << *psnr_db;
  return os.str();
}

}  // namespace clade
