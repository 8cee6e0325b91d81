#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "far/image.hpp"
#include "far/metrics.hpp"
#include "far/restore_net.hpp"
#include "far/trainer.hpp"

namespace far {

// An external codec driven through shell command templates. Encode templates
// must contain {input}, {output} and {quality} exactly once; decode templates
// {input} and {output} exactly once ({quality} is optional there).
struct CodecSpec {
  std::string name;
  std::string encode_command;
  std::string decode_command;
  std::vector<double> qualities;
  std::string pixel_format = "4:2:0";  // recorded as metadata only
  int channels = 0;                    // 0 = default by codec name

  void validate() const;
};

struct CodecRoundtrip {
  ImageU8 decoded;
  std::uint64_t codec_bits = 0;
  std::filesystem::path encoded_path;
  std::filesystem::path decoded_path;
};

// Runs encode then decode as subprocesses inside `workdir`; codec_bits is
// 8x the encoded file size. Throws SubprocessError with the command line and
// captured output on failure.
CodecRoundtrip codec_roundtrip(const CodecSpec& spec,
                               const std::filesystem::path& image_path,
                               double quality,
                               const std::filesystem::path& workdir);

struct ExperimentConfig {
  std::vector<std::filesystem::path> images;
  std::vector<CodecSpec> codecs;
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path out_dir = "out";
  std::vector<Parameterization> parameterizations = {Parameterization::Far,
                                                     Parameterization::Vanilla};
  bool l1_ablation = false;  // additionally run every variant with lambda = 0
  int crop = 0;              // center-crop size; 0 keeps the full image
  int workers = 1;
  int quant_levels = 127;
  bool save_artifacts = true;

  void validate() const;
  // Channels for a codec: explicit spec value, else the per-codec default
  // (jpeg 64, heif 32, vvc 16), else the model default.
  int channels_for(const CodecSpec& codec) const;
};

// Parsed from / written to the declarative JSON config file; defaults match
// the reference training recipe.
ExperimentConfig config_from_json_file(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

// All curves for one (image, codec) cell: the codec-only anchor plus one test
// curve per variant ("far", "vanilla", and "*-nol1" when ablating).
struct CurveSet {
  std::string image;
  std::string codec;
  RdCurve anchor;
  std::vector<std::pair<std::string, RdCurve>> tests;
  std::vector<std::string> errors;  // per-job failures, job kept isolated
};

std::vector<CurveSet> run_rd_sweep(const ExperimentConfig& config);

struct BdCell {
  std::string image;
  std::string codec;
  std::string variant;
  double bd_psnr = 0.0;
  double bd_msssim = 0.0;
  bool worse_than_codec = false;  // bd_psnr > 0
  bool valid = false;
  std::string error;
};

struct BdReport {
  std::vector<BdCell> cells;
  // mean over images, keyed (codec, variant)
  std::map<std::pair<std::string, std::string>, double> mean_bd_psnr;
  std::map<std::pair<std::string, std::string>, double> mean_bd_msssim;
};

BdReport compare_bd(const std::vector<CurveSet>& curves);

std::string bd_report_to_json(const BdReport& report);
// Aligned text table, one row per cell plus means.
std::string bd_report_table(const BdReport& report);

struct ConvergencePoint {
  int budget = 0;
  std::string variant;
  double mean_bd_psnr = 0.0;
};

// Re-runs the sweep at each iteration budget (the linear LR schedule rescales
// with the budget) and reports the mean BD-rate per variant.
std::vector<ConvergencePoint> convergence_study(ExperimentConfig config,
                                                const std::vector<int>& budgets);

// Built-in JPEG codec spec backed by the bundled jpegcodec tool; `tool` is
// the path to the binary.
CodecSpec jpeg_codec_spec(const std::filesystem::path& tool,
                          const std::string& pixel_format = "4:2:0");

}  // namespace far
