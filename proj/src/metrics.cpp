#include "far/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

namespace far {

namespace {

void check_same_dims(const ImageU8& a, const ImageU8& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError(std::string(what) + ": dimension mismatch " +
                     std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height));
  }
}

}  // namespace

void RdCurve::normalize() {
  std::sort(points.begin(), points.end(),
            [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  if (points.size() < 4) {
    throw ConfigError("RdCurve: need at least 4 points, have " +
                      std::to_string(points.size()));
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i].bpp > points[i - 1].bpp)) {
      throw ConfigError("RdCurve: bpp values must be strictly increasing");
    }
  }
}

double psnr(const ImageU8& reference, const ImageU8& test) {
  check_same_dims(reference, test, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < reference.rgb.size(); ++i) {
    const double d = double(reference.rgb[i]) - double(test.rgb[i]);
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / double(reference.rgb.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
constexpr double kC2 = (0.03 * 255) * (0.03 * 255);
constexpr double kMsWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

std::vector<double> gaussian_window() {
  std::vector<double> w(kWin);
  const int mid = kWin / 2;
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - mid;
    w[std::size_t(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[std::size_t(i)];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable valid-mode Gaussian filter; output is (h-10) x (w-10).
Plane gauss_valid(const Plane& p, const std::vector<double>& win) {
  const int oh = p.h - kWin + 1;
  const int ow = p.w - kWin + 1;
  Plane tmp(p.h, ow);
  for (int y = 0; y < p.h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += win[std::size_t(k)] * p.at(y, x + k);
      tmp.at(y, x) = acc;
    }
  }
  Plane out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k)
        acc += win[std::size_t(k)] * tmp.at(y + k, x);
      out.at(y, x) = acc;
    }
  }
  return out;
}

Plane multiply(const Plane& a, const Plane& b) {
  Plane out(a.h, a.w);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
  return out;
}

// 2x2 mean downsampling with edge replication for odd extents
// (the classic MS-SSIM pyramid step).
Plane half(const Plane& p) {
  const int oh = (p.h + 1) / 2;
  const int ow = (p.w + 1) / 2;
  Plane out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    const int y0 = 2 * y;
    const int y1 = std::min(2 * y + 1, p.h - 1);
    for (int x = 0; x < ow; ++x) {
      const int x0 = 2 * x;
      const int x1 = std::min(2 * x + 1, p.w - 1);
      out.at(y, x) = 0.25 * (p.at(y0, x0) + p.at(y0, x1) + p.at(y1, x0) +
                             p.at(y1, x1));
    }
  }
  return out;
}

struct ScaleScore {
  double cs;    // mean contrast-structure
  double ssim;  // mean full SSIM (luminance * cs)
};

ScaleScore ssim_scale(const Plane& x, const Plane& y,
                      const std::vector<double>& win) {
  const Plane mx = gauss_valid(x, win);
  const Plane my = gauss_valid(y, win);
  const Plane mxx = gauss_valid(multiply(x, x), win);
  const Plane myy = gauss_valid(multiply(y, y), win);
  const Plane mxy = gauss_valid(multiply(x, y), win);

  double cs_sum = 0.0;
  double ssim_sum = 0.0;
  for (std::size_t i = 0; i < mx.v.size(); ++i) {
    const double mux = mx.v[i];
    const double muy = my.v[i];
    const double vx = mxx.v[i] - mux * mux;
    const double vy = myy.v[i] - muy * muy;
    const double cxy = mxy.v[i] - mux * muy;
    // Numerators mirror the denominators' expression shape so identical
    // inputs give exactly 1 under any FP contraction.
    const double cs = (cxy + cxy + kC2) / (vx + vy + kC2);
    const double lum =
        (mux * muy + mux * muy + kC1) / (mux * mux + muy * muy + kC1);
    cs_sum += cs;
    ssim_sum += lum * cs;
  }
  const double n = double(mx.v.size());
  return {cs_sum / n, ssim_sum / n};
}

}  // namespace

double ms_ssim(const ImageU8& reference, const ImageU8& test) {
  check_same_dims(reference, test, "ms_ssim");
  if (reference.rgb == test.rgb) return 1.0;

  Plane x = luma_bt601(reference);
  Plane y = luma_bt601(test);

  int scales = 5;
  while (scales > 1 && (std::min(x.h, x.w) >> (scales - 1)) < kWin) {
    --scales;
  }
  if (std::min(x.h, x.w) < kWin) {
    throw ShapeError("ms_ssim: image smaller than the 11x11 window");
  }
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += kMsWeights[s];

  const std::vector<double> win = gaussian_window();
  double value = 1.0;
  for (int s = 0; s < scales; ++s) {
    const ScaleScore score = ssim_scale(x, y, win);
    const double w = kMsWeights[s] / weight_sum;
    // Luminance enters only at the coarsest scale.
    const double term =
        s + 1 == scales ? std::max(score.ssim, 0.0) : std::max(score.cs, 0.0);
    value *= std::pow(term, w);
    if (s + 1 < scales) {
      x = half(x);
      y = half(y);
    }
  }
  return value;
}

double total_bpp(std::uint64_t codec_bits, std::uint64_t weight_bits,
                 std::uint64_t pixels) {
  if (pixels == 0) throw ConfigError("total_bpp: pixel count must be > 0");
  return double(codec_bits + weight_bits) / double(pixels);
}

namespace {

// Least-squares cubic fit of y(x); quality values are shifted by their mean
// before building the normal equations.
struct CubicFit {
  double shift;
  double c[4];  // c0 + c1 t + c2 t^2 + c3 t^3 with t = x - shift

  double integral(double lo, double hi) const {
    auto anti = [&](double xv) {
      const double t = xv - shift;
      return c[0] * t + c[1] * t * t / 2.0 + c[2] * t * t * t / 3.0 +
             c[3] * t * t * t * t / 4.0;
    };
    return anti(hi) - anti(lo);
  }
};

CubicFit fit_cubic(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double shift = 0.0;
  for (double v : xs) shift += v;
  shift /= double(n);

  // Normal equations A c = b for the shifted Vandermonde system.
  double a[4][5] = {};
  for (std::size_t k = 0; k < n; ++k) {
    const double t = xs[k] - shift;
    double powt[7];
    powt[0] = 1.0;
    for (int i = 1; i < 7; ++i) powt[i] = powt[i - 1] * t;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) a[i][j] += powt[i + j];
      a[i][4] += powt[i] * ys[k];
    }
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (std::fabs(a[pivot][col]) < 1e-30) {
      throw ConfigError("bd_rate: singular fit (degenerate quality values)");
    }
    if (pivot != col) {
      for (int j = 0; j < 5; ++j) std::swap(a[pivot][j], a[col][j]);
    }
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int j = col; j < 5; ++j) a[r][j] -= f * a[col][j];
    }
  }
  CubicFit fit;
  fit.shift = shift;
  for (int i = 0; i < 4; ++i) fit.c[i] = a[i][4] / a[i][i];
  return fit;
}

struct CurveSamples {
  std::vector<double> quality;
  std::vector<double> log_rate;
};

CurveSamples extract(const RdCurve& curve, QualityAxis axis,
                     const char* which) {
  CurveSamples s;
  for (const RdPoint& p : curve.points) {
    const double q = axis == QualityAxis::Psnr ? p.psnr : p.msssim;
    if (!std::isfinite(q)) {
      std::fprintf(stderr,
                   "bd_rate: dropping non-finite quality point (bpp=%g) from "
                   "%s curve\n",
                   p.bpp, which);
      continue;
    }
    if (!(p.bpp > 0.0)) {
      throw ConfigError("bd_rate: bpp must be positive");
    }
    s.quality.push_back(q);
    s.log_rate.push_back(std::log10(p.bpp));
  }
  if (s.quality.size() < 4) {
    throw ConfigError(std::string("bd_rate: ") + which +
                      " curve needs >= 4 finite points, has " +
                      std::to_string(s.quality.size()));
  }
  for (std::size_t i = 0; i < s.quality.size(); ++i) {
    for (std::size_t j = i + 1; j < s.quality.size(); ++j) {
      if (s.quality[i] == s.quality[j]) {
        throw ConfigError(std::string("bd_rate: duplicate quality value in ") +
                          which + " curve");
      }
    }
  }
  return s;
}

}  // namespace

double bd_rate(const RdCurve& anchor, const RdCurve& test, QualityAxis axis) {
  const CurveSamples a = extract(anchor, axis, "anchor");
  const CurveSamples t = extract(test, axis, "test");

  const auto [a_lo, a_hi] =
      std::minmax_element(a.quality.begin(), a.quality.end());
  const auto [t_lo, t_hi] =
      std::minmax_element(t.quality.begin(), t.quality.end());
  const double lo = std::max(*a_lo, *t_lo);
  const double hi = std::min(*a_hi, *t_hi);
  if (!(hi > lo)) {
    throw ConfigError("bd_rate: empty quality overlap");
  }

  const CubicFit fa = fit_cubic(a.quality, a.log_rate);
  const CubicFit ft = fit_cubic(t.quality, t.log_rate);
  const double avg_diff =
      (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
  return (std::pow(10.0, avg_diff) - 1.0) * 100.0;
}

std::string curve_report_to_json(const CurveReport& report) {
  nlohmann::json j;
  j["codec"] = report.codec;
  j["image"] = report.image;
  j["parameterization"] = report.parameterization;
  nlohmann::json pts = nlohmann::json::array();
  for (const RdPoint& p : report.curve.points) {
    nlohmann::json jp;
    jp["bpp"] = p.bpp;
    jp["psnr"] = std::isfinite(p.psnr) ? p.psnr : -1.0;
    jp["msssim"] = p.msssim;
    jp["label"] = p.label;
    pts.push_back(jp);
  }
  j["points"] = pts;
  if (report.has_bd) {
    j["bd_rate_psnr"] = report.bd_rate_psnr;
    j["bd_rate_msssim"] = report.bd_rate_msssim;
  }
  j["variant_metadata"] = {
      {"bd_fit", "cubic-polynomial"},
      {"msssim_axis", "raw"},
      {"psnr_channels", "rgb-joint"},
  };
  return j.dump(2);
}

CurveReport curve_report_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad curve JSON: ") + e.what());
  }
  CurveReport r;
  r.codec = j.value("codec", "");
  r.image = j.value("image", "");
  r.parameterization = j.value("parameterization", "");
  if (!j.contains("points") || !j["points"].is_array()) {
    throw ConfigError("curve JSON missing points array");
  }
  for (const auto& jp : j["points"]) {
    RdPoint p;
    p.bpp = jp.at("bpp").get<double>();
    p.psnr = jp.at("psnr").get<double>();
    if (p.psnr < 0) p.psnr = std::numeric_limits<double>::infinity();
    p.msssim = jp.value("msssim", 0.0);
    p.label = jp.value("label", "");
    r.curve.points.push_back(p);
  }
  if (j.contains("bd_rate_psnr")) {
    r.bd_rate_psnr = j["bd_rate_psnr"].get<double>();
    r.bd_rate_msssim = j.value("bd_rate_msssim", 0.0);
    r.has_bd = true;
  }
  return r;
}

}  // namespace far
