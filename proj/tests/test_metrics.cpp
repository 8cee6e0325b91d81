#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "far/metrics.hpp"
#include "support.hpp"

using namespace far;

namespace {

// ---- definition-level MS-SSIM oracle: non-separable windows, direct
// translation of the published construction, independent of the production
// code path. ----

struct OracleStats {
  double cs_mean;
  double ssim_mean;
};

OracleStats oracle_scale(const Plane& x, const Plane& y) {
  const int win = 11;
  const double sigma = 1.5;
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double c2 = (0.03 * 255) * (0.03 * 255);
  double w[11][11];
  double wsum = 0.0;
  for (int a = 0; a < win; ++a) {
    for (int b = 0; b < win; ++b) {
      const double da = a - 5, db = b - 5;
      w[a][b] = std::exp(-(da * da + db * db) / (2 * sigma * sigma));
      wsum += w[a][b];
    }
  }
  for (int a = 0; a < win; ++a)
    for (int b = 0; b < win; ++b) w[a][b] /= wsum;

  double cs_sum = 0.0, ssim_sum = 0.0;
  int count = 0;
  for (int oy = 0; oy + win <= x.h; ++oy) {
    for (int ox = 0; ox + win <= x.w; ++ox) {
      double mx = 0, my = 0;
      for (int a = 0; a < win; ++a)
        for (int b = 0; b < win; ++b) {
          mx += w[a][b] * x.at(oy + a, ox + b);
          my += w[a][b] * y.at(oy + a, ox + b);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int a = 0; a < win; ++a)
        for (int b = 0; b < win; ++b) {
          const double dx = x.at(oy + a, ox + b) - mx;
          const double dy = y.at(oy + a, ox + b) - my;
          vx += w[a][b] * dx * dx;
          vy += w[a][b] * dy * dy;
          cxy += w[a][b] * dx * dy;
        }
      const double cs = (2 * cxy + c2) / (vx + vy + c2);
      const double lum = (2 * mx * my + c1) / (mx * mx + my * my + c1);
      cs_sum += cs;
      ssim_sum += lum * cs;
      ++count;
    }
  }
  return {cs_sum / count, ssim_sum / count};
}

Plane oracle_half(const Plane& p) {
  Plane out((p.h + 1) / 2, (p.w + 1) / 2);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      const int y0 = 2 * y, x0 = 2 * x;
      const int y1 = std::min(y0 + 1, p.h - 1);
      const int x1 = std::min(x0 + 1, p.w - 1);
      out.at(y, x) =
          (p.at(y0, x0) + p.at(y0, x1) + p.at(y1, x0) + p.at(y1, x1)) / 4.0;
    }
  return out;
}

double oracle_msssim(const ImageU8& ref, const ImageU8& test) {
  const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  Plane x = luma_bt601(ref);
  Plane y = luma_bt601(test);
  int scales = 5;
  while (scales > 1 && (std::min(x.h, x.w) >> (scales - 1)) < 11) --scales;
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += weights[s];
  double value = 1.0;
  for (int s = 0; s < scales; ++s) {
    OracleStats st = oracle_scale(x, y);
    const double term =
        s + 1 == scales ? std::max(st.ssim_mean, 0.0) : std::max(st.cs_mean, 0.0);
    value *= std::pow(term, weights[s] / wsum);
    if (s + 1 < scales) {
      x = oracle_half(x);
      y = oracle_half(y);
    }
  }
  return value;
}

ImageU8 distort(const ImageU8& img, std::uint64_t seed, double amount) {
  Rng rng(seed);
  ImageU8 out = img;
  for (std::size_t i = 0; i < out.rgb.size(); ++i) {
    const double noisy = out.rgb[i] + rng.uniform(-amount, amount);
    out.rgb[i] = std::uint8_t(std::clamp(noisy, 0.0, 255.0));
  }
  return out;
}

RdCurve make_curve(std::initializer_list<std::pair<double, double>> pts) {
  RdCurve c;
  for (const auto& [bpp, q] : pts) {
    RdPoint p;
    p.bpp = bpp;
    p.psnr = q;
    p.msssim = 1.0 - std::exp(-q / 10.0);
    c.points.push_back(p);
  }
  return c;
}

// Quadrature oracle: cubic interpolation/least-squares via an independent
// Vandermonde solve, then trapezoid integration on a 10^4-point grid.
double oracle_bd(const RdCurve& anchor, const RdCurve& test) {
  auto fit = [](const RdCurve& c, double coeff[4]) {
    const std::size_t n = c.points.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(4));
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double q = c.points[i].psnr;
      a[i][0] = 1;
      a[i][1] = q;
      a[i][2] = q * q;
      a[i][3] = q * q * q;
      b[i] = std::log10(c.points[i].bpp);
    }
    // Normal equations built explicitly (independent code path).
    double ata[4][4] = {}, atb[4] = {};
    for (std::size_t i = 0; i < n; ++i) {
      for (int r = 0; r < 4; ++r) {
        for (int s = 0; s < 4; ++s) ata[r][s] += a[i][r] * a[i][s];
        atb[r] += a[i][r] * b[i];
      }
    }
    // Solve with unpivoted Gauss (well-behaved for these magnitudes after
    // scaling columns).
    double m[4][5];
    for (int r = 0; r < 4; ++r) {
      for (int s = 0; s < 4; ++s) m[r][s] = ata[r][s];
      m[r][4] = atb[r];
    }
    for (int col = 0; col < 4; ++col) {
      int piv = col;
      for (int r = col + 1; r < 4; ++r)
        if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
      for (int s = 0; s < 5; ++s) std::swap(m[piv][s], m[col][s]);
      for (int r = 0; r < 4; ++r) {
        if (r == col) continue;
        const double f = m[r][col] / m[col][col];
        for (int s = col; s < 5; ++s) m[r][s] -= f * m[col][s];
      }
    }
    for (int r = 0; r < 4; ++r) coeff[r] = m[r][4] / m[r][r];
  };

  double ca[4], ct[4];
  fit(anchor, ca);
  fit(test, ct);

  auto minmax_q = [](const RdCurve& c) {
    double lo = c.points[0].psnr, hi = c.points[0].psnr;
    for (const RdPoint& p : c.points) {
      lo = std::min(lo, p.psnr);
      hi = std::max(hi, p.psnr);
    }
    return std::pair<double, double>(lo, hi);
  };
  const auto [alo, ahi] = minmax_q(anchor);
  const auto [tlo, thi] = minmax_q(test);
  const double lo = std::max(alo, tlo), hi = std::min(ahi, thi);

  const int grid = 10000;
  auto eval = [](const double c[4], double q) {
    return c[0] + c[1] * q + c[2] * q * q + c[3] * q * q * q;
  };
  double sum = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double q0 = lo + (hi - lo) * i / grid;
    const double q1 = lo + (hi - lo) * (i + 1) / grid;
    const double d0 = eval(ct, q0) - eval(ca, q0);
    const double d1 = eval(ct, q1) - eval(ca, q1);
    sum += 0.5 * (d0 + d1) * (q1 - q0);
  }
  return (std::pow(10.0, sum / (hi - lo)) - 1.0) * 100.0;
}

}  // namespace

TEST_CASE("psnr of a uniform +1 offset") {
  ImageU8 a(16, 16), b(16, 16);
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    a.rgb[i] = 100;
    b.rgb[i] = 101;
  }
  CHECK(psnr(a, b) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
}

TEST_CASE("psnr of black vs white is zero") {
  ImageU8 a(8, 8), b(8, 8);
  std::fill(b.rgb.begin(), b.rgb.end(), std::uint8_t(255));
  CHECK(psnr(a, b) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("psnr matches a direct-summation oracle and is symmetric") {
  ImageU8 a = test::synthetic_image(32, 61);
  ImageU8 b = distort(a, 62, 9.0);
  double se = 0.0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) {
        const double d = double(a.at(y, x, c)) - double(b.at(y, x, c));
        se += d * d;
      }
  const double want = 10.0 * std::log10(255.0 * 255.0 / (se / (32.0 * 32 * 3)));
  CHECK(std::fabs(psnr(a, b) - want) < 1e-9);
  CHECK(psnr(a, b) == psnr(b, a));
}

TEST_CASE("psnr of identical images is the infinite sentinel") {
  ImageU8 a = test::synthetic_image(16, 63);
  CHECK(std::isinf(psnr(a, a)));
  ImageU8 wrong(8, 16);
  CHECK_THROWS_AS(psnr(a, wrong), ShapeError);
}

TEST_CASE("ms_ssim of identical images is exactly 1") {
  ImageU8 a = test::synthetic_image(192, 64);
  CHECK(ms_ssim(a, a) == 1.0);
}

TEST_CASE("ms_ssim of an inverted image collapses") {
  ImageU8 a = test::synthetic_image(192, 65);
  ImageU8 neg = a;
  for (auto& v : neg.rgb) v = std::uint8_t(255 - v);
  CHECK(ms_ssim(a, neg) < 0.3);
}

TEST_CASE("ms_ssim agrees with the definition-level oracle") {
  for (int i = 0; i < 10; ++i) {
    ImageU8 a = test::synthetic_image(96, 70 + std::uint64_t(i));
    ImageU8 b = distort(a, 90 + std::uint64_t(i), 6.0 + 3.0 * i);
    const double got = ms_ssim(a, b);
    const double want = oracle_msssim(a, b);
    CHECK(std::fabs(got - want) < 1e-4);
    CHECK(got > 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("total_bpp arithmetic") {
  CHECK(total_bpp(4096 * 8, 0, 256 * 256) == 0.5);
  CHECK(total_bpp(4096 * 8, 800, 256 * 256) ==
        doctest::Approx((32768.0 + 800.0) / 65536.0).epsilon(1e-15));
  CHECK_THROWS_AS(total_bpp(100, 0, 0), ConfigError);
}

TEST_CASE("bd_rate of a curve against itself is zero") {
  RdCurve a = make_curve({{0.25, 28.0}, {0.5, 32.0}, {1.0, 36.0}, {2.0, 40.0}});
  CHECK(std::fabs(bd_rate(a, a)) < 1e-12);
  CHECK(std::fabs(bd_rate(a, a, QualityAxis::MsSsim)) < 1e-12);
}

TEST_CASE("halving every rate gives exactly -50 percent") {
  RdCurve a = make_curve({{0.25, 28.0}, {0.5, 32.0}, {1.0, 36.0}, {2.0, 40.0}});
  RdCurve half = a;
  for (RdPoint& p : half.points) p.bpp /= 2.0;
  CHECK(bd_rate(a, half) == doctest::Approx(-50.0).epsilon(1e-9));
}

TEST_CASE("bd_rate is invariant to a common rate scale") {
  RdCurve a = make_curve({{0.3, 27.0}, {0.6, 31.0}, {1.1, 34.5}, {2.2, 39.0}});
  RdCurve b = make_curve({{0.2, 26.0}, {0.5, 30.5}, {0.9, 34.0}, {1.9, 38.5}});
  const double base = bd_rate(a, b);
  for (double c : {0.1, 3.0, 42.0}) {
    RdCurve as = a, bs = b;
    for (RdPoint& p : as.points) p.bpp *= c;
    for (RdPoint& p : bs.points) p.bpp *= c;
    CHECK(bd_rate(as, bs) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("bd_rate matches the quadrature oracle on random monotone curves") {
  Rng rng(66);
  for (int trial = 0; trial < 100; ++trial) {
    auto random_curve = [&](double q0) {
      RdCurve c;
      double bpp = rng.uniform(0.1, 0.4);
      double q = q0;
      const int extra = int(rng.below(2));  // 4 or 5 points
      for (int i = 0; i < 4 + extra; ++i) {
        RdPoint p;
        p.bpp = bpp;
        p.psnr = q;
        p.msssim = 0.5;
        c.points.push_back(p);
        bpp *= rng.uniform(1.5, 2.5);
        q += rng.uniform(1.5, 4.0);
      }
      return c;
    };
    RdCurve anchor = random_curve(rng.uniform(27.0, 30.0));
    RdCurve test_curve = random_curve(rng.uniform(27.0, 30.0));
    const double got = bd_rate(anchor, test_curve);
    const double want = oracle_bd(anchor, test_curve);
    CHECK(std::fabs(got - want) < 0.1);
  }
}

TEST_CASE("bd_rate error paths") {
  RdCurve a = make_curve({{0.25, 28.0}, {0.5, 32.0}, {1.0, 36.0}, {2.0, 40.0}});
  RdCurve disjoint =
      make_curve({{0.25, 50.0}, {0.5, 54.0}, {1.0, 58.0}, {2.0, 62.0}});
  CHECK_THROWS_AS(bd_rate(a, disjoint), ConfigError);

  RdCurve dup = a;
  dup.points[1].psnr = dup.points[0].psnr;
  CHECK_THROWS_AS(bd_rate(a, dup), ConfigError);

  RdCurve short_curve =
      make_curve({{0.25, 28.0}, {0.5, 32.0}, {1.0, 36.0}});
  CHECK_THROWS_AS(bd_rate(a, short_curve), ConfigError);
}

TEST_CASE("infinite-psnr points are excluded from the fit") {
  RdCurve a = make_curve({{0.25, 28.0}, {0.5, 32.0}, {1.0, 36.0}, {2.0, 40.0}});
  RdCurve b = a;
  RdPoint lossless;
  lossless.bpp = 4.0;
  lossless.psnr = std::numeric_limits<double>::infinity();
  lossless.msssim = 1.0;
  b.points.push_back(lossless);
  CHECK(std::fabs(bd_rate(a, b)) < 1e-12);
}

TEST_CASE("curve JSON round trip") {
  CurveReport r;
  r.codec = "jpeg";
  r.image = "kodim01";
  r.parameterization = "far";
  r.curve = make_curve({{0.25, 28.0}, {0.5, 32.0}, {1.0, 36.0}, {2.0, 40.0}});
  r.curve.points[0].label = "15";
  r.bd_rate_psnr = -12.5;
  r.bd_rate_msssim = -10.0;
  r.has_bd = true;

  CurveReport back = curve_report_from_json(curve_report_to_json(r));
  CHECK(back.codec == "jpeg");
  CHECK(back.image == "kodim01");
  CHECK(back.parameterization == "far");
  REQUIRE(back.curve.points.size() == 4);
  CHECK(back.curve.points[0].bpp == doctest::Approx(0.25));
  CHECK(back.curve.points[0].label == "15");
  CHECK(back.bd_rate_psnr == doctest::Approx(-12.5));
  CHECK(back.has_bd);

  CHECK_THROWS_AS(curve_report_from_json("{not json"), ConfigError);
}

TEST_CASE("curve normalize sorts and validates") {
  RdCurve c = make_curve({{1.0, 36.0}, {0.25, 28.0}, {2.0, 40.0}, {0.5, 32.0}});
  c.normalize();
  CHECK(c.points.front().bpp == doctest::Approx(0.25));
  CHECK(c.points.back().bpp == doctest::Approx(2.0));

  RdCurve dup = make_curve(
      {{0.25, 28.0}, {0.25, 29.0}, {1.0, 36.0}, {2.0, 40.0}});
  CHECK_THROWS_AS(dup.normalize(), ConfigError);
}
