#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "far/image.hpp"

namespace far {

// One rate-distortion measurement. Both quality metrics are carried so either
// can serve as the BD quality axis.
struct RdPoint {
  double bpp = 0.0;
  double psnr = 0.0;    // dB; +inf for identical images
  double msssim = 0.0;  // (0, 1]
  std::string label;    // quality-setting identifier
};

struct RdCurve {
  std::vector<RdPoint> points;

  // Sorts by bpp and checks the BD preconditions (>= 4 points, strictly
  // increasing bpp).
  void normalize();
};

// 10*log10(255^2 / MSE) over all pixels and channels of 8-bit RGB images;
// +infinity for identical inputs.
double psnr(const ImageU8& reference, const ImageU8& test);

// Five-scale MS-SSIM on BT.601 luma: 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range 255, scale weights
// (0.0448, 0.2856, 0.3001, 0.2363, 0.1333). Inputs too small for five dyadic
// scales use fewer scales with renormalized weights. Negative
// contrast-structure means clamp to zero.
double ms_ssim(const ImageU8& reference, const ImageU8& test);

// (codec_bits + weight_bits) / pixels.
double total_bpp(std::uint64_t codec_bits, std::uint64_t weight_bits,
                 std::uint64_t pixels);

enum class QualityAxis { Psnr, MsSsim };

// Classic Bjontegaard delta-rate: cubic least-squares fit of log10(bpp) in
// quality per curve, integrated over the overlapping quality interval;
// returns percent (negative = test needs fewer bits). Non-finite-quality
// points are dropped with a warning; duplicate qualities or an empty overlap
// raise ConfigError.
double bd_rate(const RdCurve& anchor, const RdCurve& test,
               QualityAxis axis = QualityAxis::Psnr);

// JSON round trip for curves and BD results:
// {codec, image, parameterization, points: [{bpp, psnr, msssim, label}],
//  bd_rate_psnr, bd_rate_msssim, variant_metadata}
struct CurveReport {
  std::string codec;
  std::string image;
  std::string parameterization;
  RdCurve curve;
  double bd_rate_psnr = 0.0;
  double bd_rate_msssim = 0.0;
  bool has_bd = false;
};

std::string curve_report_to_json(const CurveReport& report);
CurveReport curve_report_from_json(const std::string& json_text);

}  // namespace far
