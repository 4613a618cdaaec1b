#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "loi/image_io.hpp"
#include "loi/render2d.hpp"
#include "loi/scalespace.hpp"

using namespace loi;

namespace {

ImageBuffer random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuffer img(w, h, 1);
  for (double& v : img.data()) v = rng.uniform();
  return img;
}

// Random field blurred a little so that it is smooth but not constant.
ImageBuffer smooth_image(int w, int h, std::uint64_t seed) {
  ImageBuffer img = blur(random_image(w, h, seed), 2.0);
  for (double& v : img.data()) v = 0.1 + 0.8 * v;
  return img;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

LOIField random_field(int w, int h, int bins, std::uint64_t seed) {
  Rng rng(seed);
  LOIField f(w, h, bins, 0.0, 0.0, 1.0 / bins);
  for (double& v : f.data) v = rng.uniform(-1.0, 1.0);
  return f;
}

}  // namespace

TEST_CASE("gaussian kernel") {
  const Kernel1D id = gaussian_kernel(0.0);
  CHECK(id.radius == 0);
  CHECK(id.weights == std::vector<double>{1.0});
  for (double s : {0.3, 1.0, 2.5, 5.0, 15.0, 45.0}) {
    const Kernel1D k = gaussian_kernel(s);
    CHECK(k.radius == static_cast<int>(std::ceil(3 * s)));
    double sum = 0;
    for (double w : k.weights) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    for (int i = 0; i < k.radius; ++i) {
      CHECK(k.weights[i] == k.weights[2 * k.radius - i]);
    }
  }
  const Kernel1D one = gaussian_kernel(1.0);
  CHECK(std::abs(one.weights[one.radius] / one.weights[one.radius + 1] - std::exp(0.5)) < 1e-9);
  CHECK_THROWS_AS(gaussian_kernel(-1.0), Error);
}

TEST_CASE("mirror index") {
  CHECK(mirror_index(-1, 5) == 1);
  CHECK(mirror_index(-2, 5) == 2);
  CHECK(mirror_index(5, 5) == 3);
  CHECK(mirror_index(6, 5) == 2);
  CHECK(mirror_index(3, 5) == 3);
  CHECK(mirror_index(-9, 5) == 1);
  CHECK(mirror_index(17, 5) == 1);
  CHECK(mirror_index(4, 1) == 0);
  CHECK(mirror_index(-3, 2) == 1);
}

TEST_CASE("line operator rows sum to one") {
  for (int n : {1, 2, 3, 7, 64}) {
    for (double s : {0.0, 1.0, 5.0, 45.0}) {
      const LineOperator op = LineOperator::convolution(gaussian_kernel(s), n);
      for (int i = 0; i < n; ++i) {
        double sum = 0;
        for (double w : op.row(i)) sum += w;
        CHECK(std::abs(sum - 1.0) < 1e-12);
      }
      const LineOperator t = op.transpose();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) CHECK(t.row(i)[j] == op.row(j)[i]);
      }
    }
  }
}

TEST_CASE("blur basics") {
  const ImageBuffer flat(23, 17, 1, 0.37);
  for (double s : {1.0, 5.0, 15.0, 45.0}) {
    const ImageBuffer b = blur(flat, s);
    for (double v : b.data()) CHECK(std::abs(v - 0.37) < 1e-12);
  }
  const ImageBuffer r = random_image(19, 11, 3);
  CHECK(blur(r, 0.0) == r);
  CHECK(blur_transpose(r, 0.0) == r);

  ImageBuffer impulse(65, 1, 1, 0.0);
  impulse.at(32, 0) = 1.0;
  const ImageBuffer out = blur(impulse, 5.0);
  const Kernel1D k = gaussian_kernel(5.0);
  for (int x = 0; x < 65; ++x) {
    const int off = x - 32;
    const double expected = std::abs(off) <= k.radius ? k.weights[off + k.radius] : 0.0;
    CHECK(std::abs(out.at(x, 0) - expected) < 1e-12);
  }
}

TEST_CASE("blur is separable horizontal then vertical") {
  const ImageBuffer img = random_image(30, 20, 8);
  const Kernel1D k = gaussian_kernel(2.0);
  ImageBuffer h(30, 20, 1), ref(30, 20, 1);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 30; ++x) {
      double s = 0;
      for (int j = -k.radius; j <= k.radius; ++j) {
        s += k.weights[j + k.radius] * img.at(mirror_index(x + j, 30), y);
      }
      h.at(x, y) = s;
    }
  }
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 30; ++x) {
      double s = 0;
      for (int j = -k.radius; j <= k.radius; ++j) {
        s += k.weights[j + k.radius] * h.at(x, mirror_index(y + j, 20));
      }
      ref.at(x, y) = s;
    }
  }
  const ImageBuffer out = blur(img, 2.0);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out.data()[i] - ref.data()[i]) < 1e-12);
}

TEST_CASE("blur semigroup away from the boundary") {
  const ImageBuffer img = random_image(96, 96, 4);
  const ImageBuffer twice = blur(blur(img, 3.0), 4.0);
  const ImageBuffer once = blur(img, 5.0);
  double mad = 0;
  int count = 0;
  for (int y = 32; y < 64; ++y) {
    for (int x = 32; x < 64; ++x) {
      mad += std::abs(twice.at(x, y) - once.at(x, y));
      ++count;
    }
  }
  CHECK(mad / count < 1e-3);
}

TEST_CASE("blur adjoint dot product") {
  for (auto [w, h, s] : {std::tuple{31, 17, 2.0}, std::tuple{64, 64, 15.0}, std::tuple{9, 5, 45.0},
                         std::tuple{128, 1, 45.0}}) {
    const ImageBuffer x = random_image(w, h, 11), y = random_image(w, h, 12);
    const double lhs = dot(blur(x, s).data(), y.data());
    const double rhs = dot(x.data(), blur_transpose(y, s).data());
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::abs(lhs));
  }
}

TEST_CASE("tonal weight") {
  const double beta = 0.125;
  CHECK(tonal_weight(0.0, beta) == 1.0);
  CHECK(tonal_weight(2 * beta, beta) == doctest::Approx(std::exp(-2.0)));
  CHECK(tonal_weight(1.3 * beta, beta) == doctest::Approx(std::exp(-0.5 * 1.3 * 1.3)));
  CHECK(tonal_weight(3 * beta, beta) == 0.0);
  CHECK(tonal_weight(-3.2 * beta, beta) == 0.0);
  CHECK(tonal_weight(-0.7 * beta, beta) == tonal_weight(0.7 * beta, beta));
  for (double u = -3.4; u <= 3.4; u += 0.05) {
    const double d = u * beta, h = 1e-7;
    const double fd = (tonal_weight(d + h, beta) - tonal_weight(d - h, beta)) / (2 * h);
    CHECK(tonal_weight_derivative(d, beta) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
  }
  // Continuous value and slope where the taper starts.
  const double e = 1e-9;
  CHECK(std::abs(tonal_weight(2 * beta - e, beta) - tonal_weight(2 * beta + e, beta)) < 1e-8);
  CHECK(std::abs(tonal_weight_derivative(2 * beta - e, beta) -
                 tonal_weight_derivative(2 * beta + e, beta)) < 1e-6);
  CHECK(std::abs(tonal_weight_derivative(3 * beta - e, beta)) < 1e-6);
}

TEST_CASE("soft binning") {
  const double beta = 0.125;
  ImageBuffer at_center(4, 3, 1, 0.5625);  // center of bin 4
  const LOIField f = soft_bin(at_center, beta);
  REQUIRE(f.bins == 8);
  for (int k = 0; k < 8; ++k) CHECK(f.at(1, 1, k) <= f.at(1, 1, 4));
  for (int d = 1; d <= 3; ++d) CHECK(f.at(2, 2, 4 - d) == doctest::Approx(f.at(2, 2, 4 + d)));

  const LOIField r = soft_bin(random_image(20, 20, 5), beta);
  CHECK(field_stats(r).max_sum_error < 1e-6);
  CHECK(field_stats(r).min_mass >= 0.0);

  const LOIField half = soft_bin(ImageBuffer(1, 1, 1, 0.5), beta);
  const double d1 = 0.4375 - 0.5, d2 = 0.3125 - 0.5;
  CHECK(std::abs(half.at(0, 0, 3) / half.at(0, 0, 2) -
                 std::exp((d2 * d2 - d1 * d1) / (2 * beta * beta))) < 1e-9);

  // Bins farther than 3 beta get nothing.
  const LOIField low = soft_bin(ImageBuffer(2, 2, 1, 0.05), beta);
  for (int k = 3; k < 8; ++k) CHECK(low.at(1, 1, k) == 0.0);

  ScaleConfig cfg;
  cfg.betas = {0.25};
  CHECK(soft_bin(at_center, cfg).bins == 4);
}

TEST_CASE("soft bin backward") {
  const double beta = 0.125;
  const ImageBuffer img = smooth_image(12, 10, 21);
  const LOIField zero(12, 10, 8, 0.0, 0.0, beta);
  const ImageBuffer none = soft_bin_backward(img, beta, zero);
  for (double v : none.data()) CHECK(v == 0.0);

  LOIField flat(12, 10, 8, 0.0, 0.0, beta);
  for (int k = 0; k < 8; ++k) {
    for (double& v : flat.plane(k)) v = 0.7;
  }
  const ImageBuffer level = soft_bin_backward(img, beta, flat);
  for (double v : level.data()) CHECK(std::abs(v) < 1e-12);

  const LOIField g = random_field(12, 10, 8, 22);
  const ImageBuffer analytic = soft_bin_backward(img, beta, g);
  for (int p = 0; p < img.pixel_count(); p += 7) {
    const double h = 1e-4;
    ImageBuffer up = img, down = img;
    up.data()[p] += h;
    down.data()[p] -= h;
    const double fd =
        (dot(soft_bin(up, beta).data, g.data) - dot(soft_bin(down, beta).data, g.data)) / (2 * h);
    const double a = analytic.data()[p];
    CHECK(std::abs(a - fd) <= 1e-3 * std::max(std::abs(a), std::abs(fd)) + 1e-10);
  }
  CHECK_THROWS_AS(soft_bin_backward(img, beta, LOIField(12, 9, 8, 0, 0, beta)), Error);
  CHECK_THROWS_AS(soft_bin_backward(img, beta, LOIField(12, 10, 4, 0, 0, beta)), Error);
}

TEST_CASE("extent blur") {
  const LOIField p = soft_bin(random_image(16, 16, 30), 0.125);
  const LOIField same = extent_blur(p, 0.0);
  CHECK(same.data == p.data);
  for (double a : {1.0, 5.0, 15.0}) {
    const LOIField h = extent_blur(p, a);
    CHECK(h.alpha == a);
    const FieldStats s = field_stats(h);
    CHECK(s.max_sum_error < 1e-6);
    CHECK(s.min_mass >= 0.0);
  }

  // Two pixels, one mode each: a wide aperture gives both the 50/50 mixture.
  LOIField strip(2, 1, 8, 0.0, 0.0, 0.125);
  strip.at(0, 0, 1) = 1.0;
  strip.at(1, 0, 6) = 1.0;
  const LOIField mixed = extent_blur(strip, 50.0);
  for (int x = 0; x < 2; ++x) {
    CHECK(std::abs(mixed.at(x, 0, 1) - 0.5) < 1e-3);
    CHECK(std::abs(mixed.at(x, 0, 6) - 0.5) < 1e-3);
    for (int k : {0, 2, 3, 4, 5, 7}) CHECK(mixed.at(x, 0, k) == 0.0);
  }
}

TEST_CASE("extent blur keeps the modes of a two-intensity image") {
  DiskScene s;
  s.background = {0.9};
  s.disks = {{20, 20, 9, {0.15}}, {44, 40, 7, {0.15}}};
  const ImageBuffer img = render(s, 64, 64);
  // Pixels in the edge bands are mixtures, so take a hard two-level image.
  ImageBuffer two(64, 64, 1);
  for (std::size_t i = 0; i < img.size(); ++i) two.data()[i] = img.data()[i] < 0.5 ? 0.15 : 0.9;
  const LOIField p = soft_bin(two, 0.125);
  const auto centers = ScaleConfig::bin_centers(0.125);
  for (double a : {1.0, 5.0, 15.0, 45.0}) {
    const LOIField h = extent_blur(p, a);
    for (int k = 0; k < h.bins; ++k) {
      if (std::abs(centers[k] - 0.15) < 3 * 0.125 || std::abs(centers[k] - 0.9) < 3 * 0.125) continue;
      for (double v : h.plane(k)) CHECK(v == 0.0);
    }
  }
}

TEST_CASE("extent blur adjoint dot product") {
  const LOIField x = random_field(21, 13, 8, 40), y = random_field(21, 13, 8, 41);
  for (double a : {1.0, 5.0, 15.0}) {
    const double lhs = dot(extent_blur(x, a).data, y.data);
    const double rhs = dot(x.data, extent_blur_transpose(y, a).data);
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::abs(lhs));
  }
}

TEST_CASE("build loi") {
  const ImageBuffer img = smooth_image(32, 24, 50);
  const ScaleConfig cfg;
  const auto fields = build_loi(img, cfg);
  REQUIRE(fields.size() == 12);
  std::size_t i = 0;
  for (double s : cfg.sigmas) {
    for (double a : cfg.alphas) {
      CHECK(fields[i].sigma == s);
      CHECK(fields[i].alpha == a);
      CHECK(fields[i].beta == 0.125);
      CHECK(fields[i].channel == 0);
      const FieldStats st = field_stats(fields[i]);
      CHECK(st.max_sum_error < 1e-6);
      CHECK(st.min_mass >= 0.0);
      ++i;
    }
  }

  ImageBuffer rgb(16, 16, 3);
  for (int c = 0; c < 3; ++c) rgb.set_channel(c, smooth_image(16, 16, 60 + c));
  const auto colored = build_loi(rgb, cfg);
  REQUIRE(colored.size() == 36);
  CHECK(colored[12].channel == 1);
  CHECK(colored[35].channel == 2);

  const auto flat = build_loi(ImageBuffer(20, 20, 1, 0.42), cfg);
  for (const LOIField& f : flat) {
    for (int k = 0; k < f.bins; ++k) {
      const auto plane = f.plane(k);
      for (double v : plane) CHECK(std::abs(v - plane[0]) < 1e-12);
    }
  }
}

TEST_CASE("bin plane dump") {
  const auto dir = std::filesystem::temp_directory_path() / "loi_test_scalespace";
  std::filesystem::create_directories(dir);
  const LOIField f = soft_bin(smooth_image(10, 6, 70), 0.125);
  dump_field_png(dir / "planes.png", f);
  const ImageBuffer back = read_png(dir / "planes.png");
  CHECK(back.width() == 10 * 8);
  CHECK(back.height() == 6);
}
