#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "clade/diagnostics.hpp"
#include "clade/error.hpp"
#include "clade/metrics.hpp"
#include "support.hpp"

using namespace clade;

namespace {

Image step_image(std::size_t n) {
  Image im(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) im.at(r, c) = (c + r / 3) % 40 < 20 ? 0.2 : 0.8;
  return im;
}

LineProfile profile(std::vector<double> s, double spacing = 1.0) {
  LineProfile p;
  p.samples = std::move(s);
  p.spacing_mm = spacing;
  return p;
}

// Least-squares projection onto cubics at t = -2..2 via Gram-Schmidt.
std::array<std::array<double, 5>, 5> savgol_oracle() {
  std::vector<std::array<double, 5>> basis;
  for (int d = 0; d <= 3; ++d) {
    std::array<double, 5> v{};
    for (int i = 0; i < 5; ++i) v[i] = std::pow(i - 2.0, d);
    for (const auto& q : basis) {
      double dot = 0;
      for (int i = 0; i < 5; ++i) dot += v[i] * q[i];
      for (int i = 0; i < 5; ++i) v[i] -= dot * q[i];
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    for (double& x : v) x /= std::sqrt(norm);
    basis.push_back(v);
  }
  std::array<std::array<double, 5>, 5> p{};
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c)
      for (const auto& q : basis) p[r][c] += q[r] * q[c];
  return p;
}

Volume3D random_volume(std::array<std::size_t, 3> dims, std::uint64_t seed) {
  Volume3D v(dims, {1, 1, 1});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  for (double& x : v.data) x = u(rng);
  return v;
}

// Every first/last row and column of a patch that is not on the border.
double block_artifact_oracle(const Image& im, const PatchGrid& g) {
  std::set<std::size_t> seam_rows, seam_cols;
  for (const auto& o : g.origins) {
    for (std::size_t r : {o.row, o.row + kPatchSize - 1})
      if (r > 0 && r + 1 < im.rows) {
        seam_rows.insert(r);
        seam_rows.insert(r == o.row ? r - 1 : r + 1);
      }
    for (std::size_t c : {o.col, o.col + kPatchSize - 1})
      if (c > 0 && c + 1 < im.cols) {
        seam_cols.insert(c);
        seam_cols.insert(c == o.col ? c - 1 : c + 1);
      }
  }
  double s = 0, o = 0;
  double ns = 0, no = 0;
  for (std::size_t r = 0; r < im.rows; ++r)
    for (std::size_t c = 0; c < im.cols; ++c) {
      if (c >= 1 && c + 1 < im.cols) {
        const double d = std::abs(im.at(r, c - 1) - 2 * im.at(r, c) + im.at(r, c + 1));
        (seam_cols.count(c) ? s : o) += d;
        (seam_cols.count(c) ? ns : no) += 1;
      }
      if (r >= 1 && r + 1 < im.rows) {
        const double d = std::abs(im.at(r - 1, c) - 2 * im.at(r, c) + im.at(r + 1, c));
        (seam_rows.count(r) ? s : o) += d;
        (seam_rows.count(r) ? ns : no) += 1;
      }
    }
  return ns == 0 ? 0.0 : s / ns - o / no;
}

}  // namespace

TEST_CASE("nr_score examples") {
  CHECK(nr_score(Image(64, 64, 0.5)) == 100.0);
  Image ramp(144, 176);
  for (std::size_t r = 0; r < 144; ++r)
    for (std::size_t c = 0; c < 176; ++c) ramp.at(r, c) = static_cast<double>(c) / 200.0;
  const auto blocks = nr_score_blocks(ramp);
  CHECK(blocks.size() == 99);
  for (const auto& b : blocks) CHECK(b.active);
  CHECK(nr_score(ramp) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(nr_score(Image(31, 64)), ShapeError);
  // Only complete blocks count.
  CHECK(nr_score_blocks(Image(40, 50)).size() == 2 * 3);
}

TEST_CASE("nr_score ranks a clean edge above its noisy copy") {
  const Image clean = step_image(96);
  const double s_clean = nr_score(clean);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Image noisy = clean;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0, 0.1);
    for (double& v : noisy.data) v += n(rng);
    const double s = nr_score(noisy);
    CHECK(s_clean < s);
    CHECK(s <= 100.0);
  }
}

TEST_CASE("nr_score bounds and inversion invariance") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Image im = testing::random_image(64, 80, seed);
    Image inv = im;
    for (double& v : inv.data) v = 1.0 - v;
    const double a = nr_score(im);
    CHECK(a >= 0.0);
    CHECK(a <= 100.0);
    CHECK(nr_score(inv) == doctest::Approx(a).epsilon(1e-9));
  }
}

TEST_CASE("nr_score over a volume") {
  Volume3D v = random_volume({40, 36, 34}, 1);
  for (double& x : v.data) x *= 200;
  v.lr_axis = 2;
  REQUIRE(plane_normal_axis(v, Plane::hr) == 2);
  const auto s = nr_score_volume(v, Plane::hr, 0, 200);
  CHECK(s.per_slice.size() == 34);
  double m = 0;
  for (double x : s.per_slice) m += x;
  CHECK(s.mean == doctest::Approx(m / 34));
  Image first(40, 36);
  for (std::size_t i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < 36; ++j) first.at(i, j) = v.at(i, j, 0) / 200;
  CHECK(s.per_slice[0] == doctest::Approx(nr_score(first)));
}

TEST_CASE("savitzky-golay coefficients") {
  const auto& k = savgol_coefficients();
  const double expect[5] = {-3, 12, 17, 12, -3};
  for (int i = 0; i < 5; ++i) CHECK(k[2][i] == doctest::Approx(expect[i] / 35).epsilon(1e-12));
  const auto oracle = savgol_oracle();
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) CHECK(std::abs(k[r][c] - oracle[r][c]) < 1e-12);
}

TEST_CASE("savitzky-golay filtering") {
  std::vector<double> cubic, flat(9, 2.5);
  for (int i = 0; i < 11; ++i) {
    const double t = i * 0.7 - 3;
    cubic.push_back(0.3 * t * t * t - t * t + 2 * t - 1);
  }
  const auto fc = savgol_filter(profile(cubic));
  for (std::size_t i = 0; i < cubic.size(); ++i) CHECK(std::abs(fc.samples[i] - cubic[i]) < 1e-9);
  const auto ff = savgol_filter(profile(flat));
  for (double v : ff.samples) CHECK(std::abs(v - 2.5) < 1e-12);
  CHECK_THROWS(savgol_filter(profile({1, 2, 3, 4})));
}

TEST_CASE("edge sharpness") {
  CHECK(edge_sharpness(profile(std::vector<double>(15, 0.3))) == doctest::Approx(0.0));
  std::vector<double> ramp;
  for (int i = 0; i < 15; ++i) ramp.push_back(0.1 * i * 0.5);
  CHECK(std::abs(edge_sharpness(profile(ramp, 0.5)) - 0.1) < 1e-9);
  // Unit step between samples 7 and 8. Filtered values around the edge:
  // -3/35, 9/35, 26/35, 38/35; steepest central difference is 29/70.
  std::vector<double> step(15, 0.0);
  for (std::size_t i = 8; i < 15; ++i) step[i] = 1.0;
  CHECK(std::abs(edge_sharpness(profile(step)) - 29.0 / 70.0) < 1e-12);
  // Shift invariance and linear scaling.
  const auto base = testing::random_image(1, 15, 3).data;
  std::vector<double> shifted = base, scaled = base;
  for (double& v : shifted) v += 7;
  for (double& v : scaled) v *= 3;
  const double e = edge_sharpness(profile(base));
  CHECK(edge_sharpness(profile(shifted)) == doctest::Approx(e));
  CHECK(edge_sharpness(profile(scaled)) == doctest::Approx(3 * e));
  CHECK(e >= 0);
  CHECK_THROWS(edge_sharpness(profile({0, 0, 0, 1, 1, 1})));
}

TEST_CASE("phantom edge profiles cross the surface") {
  PhantomSpec spec;
  spec.dims = {32, 32, 32};
  Primitive p;
  p.center_mm = {16, 16, 16};
  p.radii_mm = {8, 8, 8};
  spec.primitives = {p};
  const auto [hr, lr] = generate_phantom(spec);
  (void)lr;
  for (int axis = 0; axis < 3; ++axis) {
    const auto profs = phantom_edge_profiles(hr, spec, axis);
    REQUIRE(profs.size() == 2);
    for (const auto& pr : profs) {
      CHECK(pr.samples.size() == 15);
      const double lo = std::min(pr.samples.front(), pr.samples.back());
      const double hi = std::max(pr.samples.front(), pr.samples.back());
      CHECK(lo < 0.1);
      CHECK(hi > 0.9);
      CHECK(edge_sharpness(pr) > 0.2);
    }
  }
}

TEST_CASE("snr") {
  Volume3D v({10, 10, 10}, {1, 1, 1}, 100.0);
  for (std::size_t i = 5; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j)
      for (std::size_t k = 0; k < 10; ++k) v.at(i, j, k) = (j + k) % 2 ? 2.0 : -2.0;
  const Box signal{{0, 0, 0}, {5, 10, 10}}, noise{{5, 0, 0}, {10, 10, 10}};
  const RoiStats s = snr(v, signal, noise);
  CHECK(s.signal_mean == 100.0);
  CHECK(s.noise_std == doctest::Approx(2.0));
  CHECK(s.snr == doctest::Approx(50.0));
  CHECK_THROWS_AS(snr(v, noise, signal), NumericError);

  const Volume3D r = random_volume({8, 9, 10}, 4);
  const Box a = parse_box("1,2,3,5,7,9"), b = parse_box("0,0,0,8,4,5");
  double sm = 0, n = 0;
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t j = 2; j < 7; ++j)
      for (std::size_t k = 3; k < 9; ++k, ++n) sm += r.at(i, j, k);
  sm /= n;
  double nm = 0, nn = 0, nv = 0;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 5; ++k, ++nn) nm += r.at(i, j, k);
  nm /= nn;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 5; ++k) nv += (r.at(i, j, k) - nm) * (r.at(i, j, k) - nm);
  const RoiStats rs = snr(r, a, b);
  CHECK(std::abs(rs.signal_mean - sm) < 1e-9);
  CHECK(std::abs(rs.noise_std - std::sqrt(nv / nn)) < 1e-9);
  CHECK(std::abs(rs.snr - sm / std::sqrt(nv / nn)) < 1e-9);
  CHECK_THROWS(parse_box("1,2,3"));
  CHECK_THROWS(parse_box("5,0,0,1,4,4"));
  CHECK_THROWS(snr(r, parse_box("0,0,0,9,1,1"), b));
}

TEST_CASE("psnr") {
  const Volume3D a = random_volume({6, 7, 8}, 1);
  CHECK(psnr(a, a) == kPsnrCapDb);
  Volume3D b = a;
  for (double& v : b.data) v += 0.1;
  CHECK(psnr(b, a) == doctest::Approx(20.0));
  const Volume3D c = random_volume({6, 7, 8}, 2);
  double mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a.data[i] - c.data[i]) * (a.data[i] - c.data[i]);
  mse /= static_cast<double>(a.size());
  CHECK(std::abs(psnr(c, a, 2.0) - 10 * std::log10(4.0 / mse)) < 1e-9);
  CHECK_THROWS_AS(psnr(a, random_volume({6, 7, 9}, 1)), ShapeError);
}

TEST_CASE("quality report serialization") {
  QualityReport q;
  q.model = "clade";
  q.orientation = "coronal";
  q.nr.mean = 20;
  q.nr.stddev = 1.5;
  q.edge_sharpness = {0.2, 0.3};
  q.edge_sharpness_mean = 0.25;
  auto j = q.to_json();
  CHECK(j["nr_score"]["mean"] == 20.0);
  CHECK(j["snr"].is_null());
  CHECK(j["psnr_db"].is_null());
  CHECK(QualityReport::csv_header() == "model,orientation,score_mean,score_std,es_mean,signal,noise,snr,psnr_db");
  CHECK(q.csv_row() == "clade,coronal,20,1.5,0.25,,,,");
  q.roi = RoiStats{100, 2, 50};
  q.psnr_db = 31.5;
  j = q.to_json();
  CHECK(j["snr"] == 50.0);
  CHECK(j["psnr_db"] == 31.5);
  CHECK(q.csv_row() == "clade,coronal,20,1.5,0.25,100,2,50,31.5");
}

TEST_CASE("block artifact detector") {
  Image ramp(96, 96);
  for (std::size_t r = 0; r < 96; ++r)
    for (std::size_t c = 0; c < 96; ++c) ramp.at(r, c) = 0.003 * static_cast<double>(r + 2 * c);
  const PatchGrid g32 = build_patch_grid(96, 96, 32);
  CHECK(std::abs(detect_block_artifacts(ramp, g32)) < 1e-12);
  Image tiles = ramp;
  for (std::size_t r = 0; r < 96; ++r)
    for (std::size_t c = 0; c < 96; ++c) tiles.at(r, c) += 0.1 * static_cast<double>((r / 32 + c / 32) % 2);
  CHECK(detect_block_artifacts(tiles, g32) > 0.05);
  CHECK(detect_block_artifacts(Image(32, 32, 1.0), build_patch_grid(32, 32, 8)) == 0.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Image im = testing::random_image(70, 90, seed);
    for (std::size_t s : {8u, 12u, 32u}) {
      const PatchGrid g = build_patch_grid(70, 90, s);
      CHECK(std::abs(detect_block_artifacts(im, g) - block_artifact_oracle(im, g)) < 1e-12);
    }
  }
  CHECK_THROWS_AS(detect_block_artifacts(ramp, build_patch_grid(64, 96, 32)), ShapeError);
}

TEST_CASE("mode collapse detector") {
  std::vector<Image> probes;
  for (std::uint64_t s = 0; s < 16; ++s) probes.push_back(testing::random_image(32, 32, s, -1, 1));
  const auto ident = detect_mode_collapse([](const Image& im) { return im; }, probes);
  CHECK(ident.ratio == doctest::Approx(1.0));
  CHECK_FALSE(ident.collapsed);
  const auto flat = detect_mode_collapse([](const Image&) { return Image(32, 32, 0.3); }, probes);
  CHECK(flat.ratio == 0.0);
  CHECK(flat.collapsed);
  // Outputs that are nearly the same image with a faint copy of the input.
  const auto faint = detect_mode_collapse(
      [](const Image& im) {
        Image out = im;
        for (double& v : out.data) v = 0.5 + 0.001 * v;
        return out;
      },
      probes);
  CHECK(faint.ratio == doctest::Approx(0.001));
  CHECK(faint.collapsed);
  CHECK_THROWS(detect_mode_collapse([](const Image& im) { return im; },
                                    std::vector<Image>(probes.begin(), probes.begin() + 8)));
  // Brute-force mean pairwise distance.
  double total = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = a + 1; b < 16; ++b, ++pairs) {
      double s = 0;
      for (std::size_t i = 0; i < 1024; ++i) s += std::abs(probes[a].data[i] - probes[b].data[i]);
      total += s / 1024;
    }
  CHECK(mean_pairwise_l1(probes) == doctest::Approx(total / static_cast<double>(pairs)));
}
