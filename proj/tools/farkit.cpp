// Experiment driver: over-fits restoration networks on codec-decoded images,
// packs their weights into bitstreams and reports rate-distortion results.

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "far/harness.hpp"
#include "far/image.hpp"
#include "far/metrics.hpp"
#include "far/plot.hpp"
#include "far/spectral.hpp"
#include "far/trainer.hpp"
#include "far/weight_codec.hpp"

namespace fs = std::filesystem;
using namespace far;

namespace {

fs::path self_directory() {
  char buf[4096];
  const ssize_t n = readlink("/proc/self/exe", buf, sizeof buf - 1);
  if (n <= 0) return fs::current_path();
  buf[n] = '\0';
  return fs::path(buf).parent_path();
}

fs::path default_jpegcodec() {
  const fs::path local = self_directory() / "jpegcodec";
  return local;
}

std::vector<Parameterization> parse_params(const std::string& s) {
  if (s == "both") {
    return {Parameterization::Far, Parameterization::Vanilla};
  }
  return {parameterization_from_string(s)};
}

struct CommonOverrides {
  std::int64_t seed = -1;
  int iterations = 0;
  int channels = 0;
  double l1 = -1.0;
  std::string parameterization;
  int workers = 0;
  std::string out;
};

void add_common_flags(CLI::App* cmd, CommonOverrides& ov) {
  cmd->add_option("--seed", ov.seed, "Training seed");
  cmd->add_option("--iterations", ov.iterations, "Training iterations");
  cmd->add_option("--channels", ov.channels, "Bulk channel count");
  cmd->add_option("--l1", ov.l1, "L1 penalty weight");
  cmd->add_option("--parameterization", ov.parameterization,
                  "far | vanilla | both");
  cmd->add_option("--workers", ov.workers, "Parallel jobs");
  cmd->add_option("--out", ov.out, "Output directory");
}

void apply_overrides(ExperimentConfig& cfg, const CommonOverrides& ov) {
  if (ov.seed >= 0) cfg.train.seed = std::uint64_t(ov.seed);
  if (ov.iterations > 0) cfg.train.iterations = ov.iterations;
  if (ov.channels > 0) {
    cfg.model.channels = ov.channels;
    for (CodecSpec& c : cfg.codecs) c.channels = ov.channels;
  }
  if (ov.l1 >= 0.0) cfg.train.l1_lambda = ov.l1;
  if (!ov.parameterization.empty()) {
    cfg.parameterizations = parse_params(ov.parameterization);
  }
  if (ov.workers > 0) cfg.workers = ov.workers;
  if (!ov.out.empty()) cfg.out_dir = ov.out;
}

void write_rd_plots(const std::vector<CurveSet>& curves, const fs::path& dir) {
  fs::create_directories(dir);
  const std::uint8_t palette[][3] = {
      {200, 30, 30}, {30, 90, 200}, {30, 160, 60}, {170, 120, 20},
      {120, 40, 160}};
  for (const CurveSet& set : curves) {
    LinePlot plot;
    plot.title = set.image + " / " + set.codec;
    plot.x_label = "BPP";
    plot.y_label = "PSNR DB";
    PlotSeries anchor;
    anchor.label = set.codec;
    std::memcpy(anchor.color, palette[0], 3);
    for (const RdPoint& p : set.anchor.points) {
      if (!std::isfinite(p.psnr)) continue;
      anchor.x.push_back(p.bpp);
      anchor.y.push_back(p.psnr);
    }
    plot.series.push_back(std::move(anchor));
    std::size_t color = 1;
    for (const auto& [key, curve] : set.tests) {
      PlotSeries s;
      s.label = key;
      std::memcpy(s.color, palette[color++ % 5], 3);
      for (const RdPoint& p : curve.points) {
        if (!std::isfinite(p.psnr)) continue;
        s.x.push_back(p.bpp);
        s.y.push_back(p.psnr);
      }
      plot.series.push_back(std::move(s));
    }
    save_png(dir / (set.image + "_" + set.codec + "_rd.png"),
             render_plot(plot));
  }
}

ExperimentConfig default_config(const fs::path& jpegcodec) {
  ExperimentConfig cfg;
  cfg.codecs.push_back(jpeg_codec_spec(jpegcodec));
  cfg.model.channels = 16;
  cfg.crop = 128;
  cfg.workers = 2;
  return cfg;
}

int cmd_overfit(const std::string& image, double quality,
                std::string encode_tmpl, std::string decode_tmpl,
                const CommonOverrides& ov) {
  const fs::path out = ov.out.empty() ? fs::path("overfit-out") : fs::path(ov.out);
  fs::create_directories(out);

  CodecSpec codec;
  codec.name = "jpeg";
  if (encode_tmpl.empty()) {
    codec = jpeg_codec_spec(default_jpegcodec());
  } else {
    codec.encode_command = encode_tmpl;
    codec.decode_command = decode_tmpl;
    codec.qualities = {quality};
  }
  codec.validate();

  ImageU8 raw = load_image(image);
  const fs::path raw_path = out / "raw.png";
  save_png(raw_path, raw);

  CodecRoundtrip rt = codec_roundtrip(codec, raw_path, quality, out);
  std::printf("codec: %s q=%g  bits=%llu  bpp=%.4f  psnr=%.3f  msssim=%.5f\n",
              codec.name.c_str(), quality,
              (unsigned long long)rt.codec_bits,
              total_bpp(rt.codec_bits, 0, std::uint64_t(raw.pixels())),
              psnr(raw, rt.decoded), ms_ssim(raw, rt.decoded));

  ModelConfig mc;
  mc.channels = ov.channels > 0 ? ov.channels : 16;
  TrainConfig tc;
  if (ov.iterations > 0) tc.iterations = ov.iterations;
  if (ov.seed >= 0) tc.seed = std::uint64_t(ov.seed);
  if (ov.l1 >= 0.0) tc.l1_lambda = ov.l1;

  std::vector<Parameterization> params =
      ov.parameterization.empty() ? parse_params("both")
                                  : parse_params(ov.parameterization);

  Tensor raw_t = tensor_from_image(raw);
  Tensor dec_t = tensor_from_image(rt.decoded);
  const int orig_h = dec_t.h(), orig_w = dec_t.w();
  const int div = 1 << (mc.scales - 1);
  raw_t = reflect_pad_to_multiple(raw_t, div);
  dec_t = reflect_pad_to_multiple(dec_t, div);

  for (Parameterization p : params) {
    mc.parameterization = p;
    TrainResult tr = train_overfit(raw_t, dec_t, mc, tc);
    QuantizedModel q = quantize(tr.state);
    WeightBitstream stream = entropy_encode(q);
    QuantizedModel q2 =
        entropy_decode(std::span<const std::uint8_t>(stream.bytes));
    ModelState eval_state = tr.state;
    apply_dequantized(q2, eval_state);
    Tensor restored =
        crop_spatial(restore_image(eval_state, dec_t), orig_h, orig_w);
    ImageU8 restored_img = image_from_tensor(restored);
    save_png(out / (std::string(to_string(p)) + "_restored.png"),
             restored_img);
    save_bitstream(out / (std::string(to_string(p)) + ".farw"), stream);
    std::printf(
        "%-8s params=%lld  weight_bits=%llu  bpp=%.4f  psnr=%.3f  "
        "msssim=%.5f\n",
        to_string(p), (long long)tr.state.parameter_count(),
        (unsigned long long)weight_bits(stream),
        total_bpp(rt.codec_bits, weight_bits(stream),
                  std::uint64_t(raw.pixels())),
        psnr(raw, restored_img), ms_ssim(raw, restored_img));
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& emit_path,
              const CommonOverrides& ov) {
  if (!emit_path.empty()) {
    ExperimentConfig cfg = default_config(default_jpegcodec());
    std::ofstream f(emit_path);
    f << config_to_json(cfg) << "\n";
    std::printf("wrote default config to %s\n", emit_path.c_str());
    return 0;
  }
  ExperimentConfig cfg = config_from_json_file(config_path);
  apply_overrides(cfg, ov);

  const std::vector<CurveSet> curves = run_rd_sweep(cfg);
  const BdReport report = compare_bd(curves);
  std::ofstream(cfg.out_dir / "report.json") << bd_report_to_json(report);
  const std::string table = bd_report_table(report);
  std::ofstream(cfg.out_dir / "report.txt") << table;
  write_rd_plots(curves, cfg.out_dir / "plots");
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_bdrate(const std::vector<std::string>& files) {
  if (files.size() < 2) {
    std::fprintf(stderr, "bdrate: need an anchor JSON and >= 1 test JSON\n");
    return 1;
  }
  auto load = [](const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return curve_report_from_json(ss.str());
  };
  CurveReport anchor = load(files[0]);
  std::printf("anchor: %s/%s (%s)\n", anchor.image.c_str(),
              anchor.codec.c_str(), anchor.parameterization.c_str());
  for (std::size_t i = 1; i < files.size(); ++i) {
    CurveReport test = load(files[i]);
    const double bd_p = bd_rate(anchor.curve, test.curve, QualityAxis::Psnr);
    const double bd_m = bd_rate(anchor.curve, test.curve, QualityAxis::MsSsim);
    std::printf("%-28s BD-PSNR %8.2f%%   BD-MSSSIM %8.2f%%\n",
                (test.image + "/" + test.parameterization).c_str(), bd_p,
                bd_m);
  }
  return 0;
}

int cmd_spectra(const std::string& image, double quality, bool toy,
                std::string encode_tmpl, std::string decode_tmpl,
                const CommonOverrides& ov) {
  const fs::path out = ov.out.empty() ? fs::path("spectra-out") : fs::path(ov.out);
  fs::create_directories(out);

  CodecSpec codec = jpeg_codec_spec(default_jpegcodec());
  if (!encode_tmpl.empty()) {
    codec.encode_command = encode_tmpl;
    codec.decode_command = decode_tmpl;
  }
  codec.validate();

  ImageU8 raw = load_image(image);
  const fs::path raw_path = out / "raw.png";
  save_png(raw_path, raw);
  CodecRoundtrip rt = codec_roundtrip(codec, raw_path, quality, out);

  ModelConfig mc;
  TrainConfig tc;
  tc.trace_every = 1;
  tc.trace_subbands = true;
  if (toy) {
    // Reduced-scale long-run mode: single scale, no normalization, direct
    // image fit, constant small learning rate.
    mc.channels = 64;
    mc.scales = 1;
    mc.instance_norm = false;
    mc.predict_residual = false;
    tc.iterations = 5000;
    tc.initial_lr = 1e-5;
    tc.decay = TrainConfig::LrDecay::Constant;
    tc.l1_lambda = 0.0;
    tc.trace_every = 10;
  } else {
    mc.channels = 16;
  }
  if (ov.channels > 0) mc.channels = ov.channels;
  if (ov.iterations > 0) tc.iterations = ov.iterations;
  if (ov.seed >= 0) tc.seed = std::uint64_t(ov.seed);
  if (ov.l1 >= 0.0) tc.l1_lambda = ov.l1;

  Tensor raw_t = tensor_from_image(raw);
  Tensor dec_t = tensor_from_image(rt.decoded);
  const int div = 1 << (mc.scales - 1);
  raw_t = reflect_pad_to_multiple(raw_t, div);
  dec_t = reflect_pad_to_multiple(dec_t, div);

  LinePlot psnr_plot;
  psnr_plot.title = "PSNR VS ITERATION";
  psnr_plot.x_label = "ITERATION";
  psnr_plot.y_label = "PSNR DB";
  const std::uint8_t colors[2][3] = {{30, 90, 200}, {30, 160, 60}};

  int color = 0;
  for (Parameterization p : parse_params(
           ov.parameterization.empty() ? "both" : ov.parameterization)) {
    mc.parameterization = p;
    TrainResult tr = train_overfit(raw_t, dec_t, mc, tc);
    std::ofstream trace_file(out /
                             (std::string(to_string(p)) + "_trace.csv"));
    write_trace_csv(trace_file, tr.trace);

    PlotSeries s;
    s.label = to_string(p);
    std::memcpy(s.color, colors[color++ % 2], 3);
    s.markers = false;
    for (const TraceRecord& r : tr.trace) {
      if (!std::isfinite(r.psnr)) continue;
      s.x.push_back(r.iteration);
      s.y.push_back(r.psnr);
    }
    psnr_plot.series.push_back(std::move(s));
    std::printf("%-8s final loss %.6g, traced %zu records -> %s\n",
                to_string(p), tr.trace.back().loss, tr.trace.size(),
                (out / (std::string(to_string(p)) + "_trace.csv")).c_str());
  }
  save_png(out / "psnr_trace.png", render_plot(psnr_plot));
  return 0;
}

int cmd_converge(const std::string& config_path, std::vector<int> budgets,
                 const CommonOverrides& ov) {
  ExperimentConfig cfg = config_from_json_file(config_path);
  apply_overrides(cfg, ov);
  const std::vector<ConvergencePoint> points =
      convergence_study(cfg, budgets);

  std::ofstream csv(cfg.out_dir / "convergence.csv");
  csv << "budget,variant,mean_bd_rate_psnr\n";
  std::map<std::string, PlotSeries> series;
  for (const ConvergencePoint& p : points) {
    csv << p.budget << "," << p.variant << "," << p.mean_bd_psnr << "\n";
    std::printf("budget %5d  %-13s mean BD-PSNR %8.2f%%\n", p.budget,
                p.variant.c_str(), p.mean_bd_psnr);
    PlotSeries& s = series[p.variant];
    s.label = p.variant;
    s.x.push_back(p.budget);
    s.y.push_back(p.mean_bd_psnr);
  }
  LinePlot plot;
  plot.title = "BD-RATE VS ITERATIONS";
  plot.x_label = "ITERATIONS";
  plot.y_label = "BD-PSNR %";
  const std::uint8_t palette[][3] = {
      {30, 90, 200}, {30, 160, 60}, {200, 30, 30}, {170, 120, 20}};
  std::size_t color = 0;
  for (auto& [key, s] : series) {
    std::memcpy(s.color, palette[color++ % 4], 3);
    plot.series.push_back(std::move(s));
  }
  save_png(cfg.out_dir / "convergence.png", render_plot(plot));
  return 0;
}

int cmd_decode_weights(const std::string& path, int levels,
                       const std::string& csv_path) {
  WeightBitstream stream = load_bitstream(path);
  QuantizedModel q =
      entropy_decode(std::span<const std::uint8_t>(stream.bytes), levels);
  std::printf("stream: %s\n", path.c_str());
  std::printf("  total bits: %llu\n",
              (unsigned long long)weight_bits(stream));
  std::printf("  parameterization: %s\n", to_string(q.parameterization));
  std::printf("  step: %.12g\n", q.step);
  std::printf("  tensors: %zu, levels: %lld\n", q.tensors.size(),
              (long long)q.level_count());
  for (const QuantizedTensor& t : q.tensors) {
    int nonzero = 0;
    std::int32_t lo = 0, hi = 0;
    for (std::int32_t v : t.levels) {
      if (v != 0) ++nonzero;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    std::printf("  %-16s %-14s nonzero %6d / %6zu   range [%d, %d]\n",
                t.name.c_str(), t.shape.str().c_str(), nonzero,
                t.levels.size(), lo, hi);
  }
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    csv << "tensor,index,level,value\n";
    for (const QuantizedTensor& t : q.tensors) {
      for (std::size_t i = 0; i < t.levels.size(); ++i) {
        csv << t.name << "," << i << "," << t.levels[i] << ","
            << double(t.levels[i]) * q.step << "\n";
      }
    }
    std::printf("  levels dumped to %s\n", csv_path.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Over-fitting image restoration with frequency-domain "
               "re-parameterized convolutions"};
  app.require_subcommand(1);

  // overfit
  auto* overfit = app.add_subcommand(
      "overfit", "Train on a single image end-to-end and report the RD point");
  std::string image, encode_tmpl, decode_tmpl;
  double quality = 15;
  CommonOverrides overfit_ov;
  overfit->add_option("--image", image, "Raw input image (PNG/PPM)")
      ->required();
  overfit->add_option("--quality", quality, "Codec quality setting");
  overfit->add_option("--encode-command", encode_tmpl,
                      "Codec encode template with {input} {output} {quality}");
  overfit->add_option("--decode-command", decode_tmpl,
                      "Codec decode template with {input} {output}");
  add_common_flags(overfit, overfit_ov);

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep", "Run the RD sweep described by a config file");
  std::string sweep_config, emit_config;
  CommonOverrides sweep_ov;
  sweep->add_option("--config", sweep_config, "Experiment config JSON");
  sweep->add_option("--emit-config", emit_config,
                    "Write a default config file and exit");
  add_common_flags(sweep, sweep_ov);

  // bdrate
  auto* bdrate_cmd = app.add_subcommand(
      "bdrate", "BD-rates of test curve JSONs against an anchor curve JSON");
  std::vector<std::string> bd_files;
  bdrate_cmd->add_option("files", bd_files, "anchor.json test.json...")
      ->required();

  // spectra
  auto* spectra = app.add_subcommand(
      "spectra", "Per-iteration frequency-domain traces (CSV + plots)");
  std::string sp_image, sp_encode, sp_decode;
  double sp_quality = 15;
  bool toy = false;
  CommonOverrides sp_ov;
  spectra->add_option("--image", sp_image, "Raw input image")->required();
  spectra->add_option("--quality", sp_quality, "Codec quality setting");
  spectra->add_flag("--toy", toy,
                    "Reduced-scale long-run mode (direct fit, constant LR)");
  spectra->add_option("--encode-command", sp_encode, "Codec encode template");
  spectra->add_option("--decode-command", sp_decode, "Codec decode template");
  add_common_flags(spectra, sp_ov);

  // converge
  auto* converge = app.add_subcommand(
      "converge", "BD-rate as a function of the total iteration budget");
  std::string cv_config;
  std::vector<int> budgets;
  CommonOverrides cv_ov;
  converge->add_option("--config", cv_config, "Experiment config JSON")
      ->required();
  converge->add_option("--budgets", budgets, "Iteration budgets, increasing")
      ->required();
  add_common_flags(converge, cv_ov);

  // decode-weights
  auto* decw = app.add_subcommand("decode-weights",
                                  "Inspect a weight bitstream");
  std::string stream_path, dump_csv;
  int dec_levels = 127;
  decw->add_option("stream", stream_path, "Weight bitstream (.farw)")
      ->required();
  decw->add_option("--levels", dec_levels, "Level bound L used when encoding");
  decw->add_option("--dump-csv", dump_csv, "Write all levels to a CSV file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (overfit->parsed()) {
      return cmd_overfit(image, quality, encode_tmpl, decode_tmpl, overfit_ov);
    }
    if (sweep->parsed()) {
      if (sweep_config.empty() && emit_config.empty()) {
        std::fprintf(stderr, "sweep: --config or --emit-config required\n");
        return 1;
      }
      return cmd_sweep(sweep_config, emit_config, sweep_ov);
    }
    if (bdrate_cmd->parsed()) return cmd_bdrate(bd_files);
    if (spectra->parsed()) {
      return cmd_spectra(sp_image, sp_quality, toy, sp_encode, sp_decode,
                         sp_ov);
    }
    if (converge->parsed()) return cmd_converge(cv_config, budgets, cv_ov);
    if (decw->parsed()) {
      return cmd_decode_weights(stream_path, dec_levels, dump_csv);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "farkit: %s\n", e.what());
    return 1;
  }
  return 0;
}
