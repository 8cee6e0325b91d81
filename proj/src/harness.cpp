#include "far/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "far/weight_codec.hpp"

namespace far {

namespace fs = std::filesystem;

namespace {

int count_placeholder(const std::string& tmpl, const std::string& key) {
  int count = 0;
  std::size_t pos = 0;
  while ((pos = tmpl.find(key, pos)) != std::string::npos) {
    ++count;
    pos += key.size();
  }
  return count;
}

std::string substitute(std::string tmpl, const std::string& key,
                       const std::string& value) {
  std::size_t pos;
  while ((pos = tmpl.find(key)) != std::string::npos) {
    tmpl.replace(pos, key.size(), value);
  }
  return tmpl;
}

std::string format_quality(double q) {
  // Integral qualities print without a decimal point (codec CLIs are picky).
  if (q == std::floor(q) && std::fabs(q) < 1e9) {
    return std::to_string(long(q));
  }
  std::ostringstream os;
  os << q;
  return os.str();
}

// Runs a shell command capturing interleaved stdout/stderr.
void run_command(const std::string& command) {
  const std::string wrapped = command + " 2>&1";
  std::FILE* pipe = popen(wrapped.c_str(), "r");
  if (!pipe) throw SubprocessError(command, -1, "popen failed");
  std::string output;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) {
    output.append(buf, n);
  }
  const int status = pclose(pipe);
  const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (exit_code != 0) {
    throw SubprocessError(command, exit_code, output);
  }
}

}  // namespace

void CodecSpec::validate() const {
  if (name.empty()) throw ConfigError("codec: name must not be empty");
  for (const char* key : {"{input}", "{output}", "{quality}"}) {
    if (count_placeholder(encode_command, key) != 1) {
      throw ConfigError("codec '" + name + "': encode template must contain " +
                        key + " exactly once: " + encode_command);
    }
  }
  for (const char* key : {"{input}", "{output}"}) {
    if (count_placeholder(decode_command, key) != 1) {
      throw ConfigError("codec '" + name + "': decode template must contain " +
                        key + " exactly once: " + decode_command);
    }
  }
  if (qualities.empty()) {
    throw ConfigError("codec '" + name + "': needs at least one quality");
  }
}

CodecRoundtrip codec_roundtrip(const CodecSpec& spec,
                               const fs::path& image_path, double quality,
                               const fs::path& workdir) {
  spec.validate();
  fs::create_directories(workdir);
  CodecRoundtrip rt;
  rt.encoded_path = workdir / "encoded.bin";
  rt.decoded_path = workdir / "decoded.png";

  const std::string q = format_quality(quality);
  std::string enc = spec.encode_command;
  enc = substitute(enc, "{input}", image_path.string());
  enc = substitute(enc, "{output}", rt.encoded_path.string());
  enc = substitute(enc, "{quality}", q);
  run_command(enc);
  if (!fs::exists(rt.encoded_path)) {
    throw SubprocessError(enc, 0, "encoder produced no output file");
  }
  rt.codec_bits = std::uint64_t(fs::file_size(rt.encoded_path)) * 8;

  std::string dec = spec.decode_command;
  dec = substitute(dec, "{input}", rt.encoded_path.string());
  dec = substitute(dec, "{output}", rt.decoded_path.string());
  dec = substitute(dec, "{quality}", q);
  run_command(dec);
  if (!fs::exists(rt.decoded_path)) {
    throw SubprocessError(dec, 0, "decoder produced no output file");
  }
  rt.decoded = load_image(rt.decoded_path);
  return rt;
}

void ExperimentConfig::validate() const {
  if (images.empty()) throw ConfigError("experiment: needs at least one image");
  if (codecs.empty()) throw ConfigError("experiment: needs at least one codec");
  if (parameterizations.empty()) {
    throw ConfigError("experiment: needs at least one parameterization");
  }
  for (const CodecSpec& c : codecs) c.validate();
  model.validate();
  train.validate();
  if (workers < 1) throw ConfigError("experiment: workers must be >= 1");
  if (quant_levels < 1) throw ConfigError("experiment: levels must be >= 1");
}

int ExperimentConfig::channels_for(const CodecSpec& codec) const {
  if (codec.channels > 0) return codec.channels;
  if (codec.name == "jpeg") return 64;
  if (codec.name == "heif") return 32;
  if (codec.name == "vvc") return 16;
  return model.channels;
}

namespace {

struct Job {
  std::size_t image_idx;
  std::size_t codec_idx;
  std::size_t quality_idx;
  // Variant index into the expanded list; SIZE_MAX marks the anchor job.
  std::size_t variant_idx;
};

struct Variant {
  std::string key;
  Parameterization parameterization;
  double l1_lambda;
};

struct JobResult {
  bool ok = false;
  std::string error;
  RdPoint point;
};

std::vector<Variant> expand_variants(const ExperimentConfig& cfg) {
  std::vector<Variant> vs;
  for (Parameterization p : cfg.parameterizations) {
    vs.push_back({to_string(p), p, cfg.train.l1_lambda});
  }
  if (cfg.l1_ablation) {
    for (Parameterization p : cfg.parameterizations) {
      vs.push_back({std::string(to_string(p)) + "-nol1", p, 0.0});
    }
  }
  return vs;
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

}  // namespace

std::vector<CurveSet> run_rd_sweep(const ExperimentConfig& config) {
  config.validate();
  const std::vector<Variant> variants = expand_variants(config);

  fs::create_directories(config.out_dir);

  // Prepare per-image working copies (cropped raw image, saved once).
  struct ImageEntry {
    std::string name;
    ImageU8 raw;
    fs::path raw_path;
  };
  std::vector<ImageEntry> image_entries;
  for (const fs::path& p : config.images) {
    ImageEntry e;
    e.name = stem_of(p);
    e.raw = load_image(p);
    if (config.crop > 0) e.raw = center_crop(e.raw, config.crop);
    const fs::path dir = config.out_dir / e.name;
    fs::create_directories(dir);
    e.raw_path = dir / "raw.png";
    save_png(e.raw_path, e.raw);
    image_entries.push_back(std::move(e));
  }

  // Anchor round trips run first (sequentially; cheap next to training) so
  // every training job can reuse the decoded image.
  struct CellData {
    std::vector<CodecRoundtrip> roundtrips;  // per quality
    std::vector<std::string> errors;
  };
  std::vector<std::vector<CellData>> cells(image_entries.size());
  for (std::size_t ii = 0; ii < image_entries.size(); ++ii) {
    cells[ii].resize(config.codecs.size());
    for (std::size_t ci = 0; ci < config.codecs.size(); ++ci) {
      const CodecSpec& codec = config.codecs[ci];
      CellData& cell = cells[ii][ci];
      cell.roundtrips.resize(codec.qualities.size());
      for (std::size_t qi = 0; qi < codec.qualities.size(); ++qi) {
        const fs::path workdir = config.out_dir / image_entries[ii].name /
                                 codec.name /
                                 ("q" + format_quality(codec.qualities[qi]));
        try {
          cell.roundtrips[qi] = codec_roundtrip(
              codec, image_entries[ii].raw_path, codec.qualities[qi], workdir);
        } catch (const std::exception& e) {
          cell.errors.push_back(e.what());
        }
      }
    }
  }

  // Training jobs: (image, codec, quality, variant), embarrassingly parallel.
  std::vector<Job> jobs;
  for (std::size_t ii = 0; ii < image_entries.size(); ++ii) {
    for (std::size_t ci = 0; ci < config.codecs.size(); ++ci) {
      for (std::size_t qi = 0; qi < config.codecs[ci].qualities.size(); ++qi) {
        if (cells[ii][ci].roundtrips[qi].codec_bits == 0) continue;
        for (std::size_t vi = 0; vi < variants.size(); ++vi) {
          jobs.push_back({ii, ci, qi, vi});
        }
      }
    }
  }

  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};

  auto run_job = [&](const Job& job) -> JobResult {
    const ImageEntry& entry = image_entries[job.image_idx];
    const CodecSpec& codec = config.codecs[job.codec_idx];
    const CodecRoundtrip& rt = cells[job.image_idx][job.codec_idx]
                                   .roundtrips[job.quality_idx];
    const Variant& variant = variants[job.variant_idx];

    ModelConfig mc = config.model;
    mc.channels = config.channels_for(codec);
    mc.parameterization = variant.parameterization;
    TrainConfig tc = config.train;
    tc.l1_lambda = variant.l1_lambda;

    const int div = 1 << (mc.scales - 1);
    Tensor raw = tensor_from_image(entry.raw);
    Tensor decoded = tensor_from_image(rt.decoded);
    const int orig_h = decoded.h();
    const int orig_w = decoded.w();
    raw = reflect_pad_to_multiple(raw, div);
    decoded = reflect_pad_to_multiple(decoded, div);

    TrainResult tr = train_overfit(raw, decoded, mc, tc);

    QuantizedModel q = quantize(tr.state, config.quant_levels);
    WeightBitstream stream = entropy_encode(q);
    QuantizedModel q2 = entropy_decode(
        std::span<const std::uint8_t>(stream.bytes), config.quant_levels);
    ModelState eval_state = tr.state;
    apply_dequantized(q2, eval_state);

    Tensor restored = restore_image(eval_state, decoded);
    restored = crop_spatial(restored, orig_h, orig_w);
    ImageU8 restored_img = image_from_tensor(restored);

    const fs::path workdir = config.out_dir / entry.name / codec.name /
                             ("q" + format_quality(
                                        codec.qualities[job.quality_idx]));
    if (config.save_artifacts) {
      save_bitstream(workdir / (variant.key + ".farw"), stream);
      save_png(workdir / (variant.key + "_restored.png"), restored_img);
      if (!tr.trace.empty()) {
        std::ofstream trace_file(workdir / (variant.key + "_trace.csv"));
        write_trace_csv(trace_file, tr.trace);
      }
    }

    JobResult res;
    res.ok = true;
    res.point.bpp = total_bpp(rt.codec_bits, weight_bits(stream),
                              std::uint64_t(entry.raw.pixels()));
    res.point.psnr = psnr(entry.raw, restored_img);
    res.point.msssim = ms_ssim(entry.raw, restored_img);
    res.point.label = format_quality(codec.qualities[job.quality_idx]);
    return res;
  };

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        results[i] = run_job(jobs[i]);
      } catch (const std::exception& e) {
        results[i].ok = false;
        results[i].error = e.what();
      }
    }
  };

  const int nworkers =
      std::max(1, std::min<int>(config.workers, int(jobs.size())));
  if (nworkers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nworkers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Deterministic assembly, job completion order does not matter.
  std::vector<CurveSet> out;
  for (std::size_t ii = 0; ii < image_entries.size(); ++ii) {
    for (std::size_t ci = 0; ci < config.codecs.size(); ++ci) {
      const CodecSpec& codec = config.codecs[ci];
      CurveSet set;
      set.image = image_entries[ii].name;
      set.codec = codec.name;
      set.errors = cells[ii][ci].errors;
      for (std::size_t qi = 0; qi < codec.qualities.size(); ++qi) {
        const CodecRoundtrip& rt = cells[ii][ci].roundtrips[qi];
        if (rt.codec_bits == 0) continue;
        RdPoint p;
        p.bpp = total_bpp(rt.codec_bits, 0, std::uint64_t(image_entries[ii].raw.pixels()));
        p.psnr = psnr(image_entries[ii].raw, rt.decoded);
        p.msssim = ms_ssim(image_entries[ii].raw, rt.decoded);
        p.label = format_quality(codec.qualities[qi]);
        set.anchor.points.push_back(std::move(p));
      }
      for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        RdCurve curve;
        for (std::size_t ji = 0; ji < jobs.size(); ++ji) {
          const Job& job = jobs[ji];
          if (job.image_idx != ii || job.codec_idx != ci ||
              job.variant_idx != vi) {
            continue;
          }
          if (results[ji].ok) {
            curve.points.push_back(results[ji].point);
          } else {
            set.errors.push_back(variants[vi].key + " q" +
                                 format_quality(
                                     codec.qualities[job.quality_idx]) +
                                 ": " + results[ji].error);
          }
        }
        set.tests.emplace_back(variants[vi].key, std::move(curve));
      }
      for (const std::string& err : set.errors) {
        std::fprintf(stderr, "[sweep] %s/%s job failed: %s\n",
                     set.image.c_str(), set.codec.c_str(), err.c_str());
      }
      out.push_back(std::move(set));
    }
  }

  if (config.save_artifacts) {
    for (const CurveSet& set : out) {
      const fs::path dir = config.out_dir / set.image / set.codec;
      fs::create_directories(dir);
      CurveReport anchor_report;
      anchor_report.codec = set.codec;
      anchor_report.image = set.image;
      anchor_report.parameterization = "anchor";
      anchor_report.curve = set.anchor;
      std::ofstream(dir / "anchor.json") << curve_report_to_json(anchor_report);
      for (const auto& [key, curve] : set.tests) {
        CurveReport rep;
        rep.codec = set.codec;
        rep.image = set.image;
        rep.parameterization = key;
        rep.curve = curve;
        std::ofstream(dir / (key + ".json")) << curve_report_to_json(rep);
      }
    }
  }
  return out;
}

BdReport compare_bd(const std::vector<CurveSet>& curves) {
  BdReport report;
  struct Acc {
    double psnr_sum = 0.0;
    double msssim_sum = 0.0;
    int count = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;

  for (const CurveSet& set : curves) {
    for (const auto& [key, curve] : set.tests) {
      BdCell cell;
      cell.image = set.image;
      cell.codec = set.codec;
      cell.variant = key;
      try {
        cell.bd_psnr = bd_rate(set.anchor, curve, QualityAxis::Psnr);
        cell.bd_msssim = bd_rate(set.anchor, curve, QualityAxis::MsSsim);
        cell.worse_than_codec = cell.bd_psnr > 0.0;
        cell.valid = true;
        Acc& a = acc[{set.codec, key}];
        a.psnr_sum += cell.bd_psnr;
        a.msssim_sum += cell.bd_msssim;
        a.count += 1;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      report.cells.push_back(std::move(cell));
    }
  }
  for (const auto& [key, a] : acc) {
    if (a.count > 0) {
      report.mean_bd_psnr[key] = a.psnr_sum / a.count;
      report.mean_bd_msssim[key] = a.msssim_sum / a.count;
    }
  }
  return report;
}

std::string bd_report_to_json(const BdReport& report) {
  nlohmann::json j;
  nlohmann::json cells = nlohmann::json::array();
  for (const BdCell& c : report.cells) {
    nlohmann::json jc;
    jc["image"] = c.image;
    jc["codec"] = c.codec;
    jc["variant"] = c.variant;
    if (c.valid) {
      jc["bd_rate_psnr"] = c.bd_psnr;
      jc["bd_rate_msssim"] = c.bd_msssim;
      jc["worse_than_codec"] = c.worse_than_codec;
    } else {
      jc["error"] = c.error;
    }
    cells.push_back(jc);
  }
  j["cells"] = cells;
  nlohmann::json means = nlohmann::json::array();
  for (const auto& [key, v] : report.mean_bd_psnr) {
    nlohmann::json jm;
    jm["codec"] = key.first;
    jm["variant"] = key.second;
    jm["mean_bd_rate_psnr"] = v;
    auto it = report.mean_bd_msssim.find(key);
    if (it != report.mean_bd_msssim.end()) {
      jm["mean_bd_rate_msssim"] = it->second;
    }
    means.push_back(jm);
  }
  j["means"] = means;
  j["variant_metadata"] = {
      {"bd_fit", "cubic-polynomial"},
      {"msssim_axis", "raw"},
      {"psnr_channels", "rgb-joint"},
  };
  return j.dump(2);
}

std::string bd_report_table(const BdReport& report) {
  std::ostringstream os;
  os << "image            codec     variant        BD-PSNR%   BD-MSSSIM%\n";
  auto row = [&](const std::string& a, const std::string& b,
                 const std::string& c, double p, double m, bool worse) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %-9s %-13s %9.2f %11.2f%s\n",
                  a.c_str(), b.c_str(), c.c_str(), p, m,
                  worse ? "  (worse)" : "");
    os << buf;
  };
  for (const BdCell& c : report.cells) {
    if (c.valid) {
      row(c.image, c.codec, c.variant, c.bd_psnr, c.bd_msssim,
          c.worse_than_codec);
    } else {
      os << c.image << " " << c.codec << " " << c.variant
         << "  error: " << c.error << "\n";
    }
  }
  for (const auto& [key, v] : report.mean_bd_psnr) {
    double m = 0.0;
    auto it = report.mean_bd_msssim.find(key);
    if (it != report.mean_bd_msssim.end()) m = it->second;
    row("(mean)", key.first, key.second, v, m, v > 0.0);
  }
  return os.str();
}

std::vector<ConvergencePoint> convergence_study(
    ExperimentConfig config, const std::vector<int>& budgets) {
  if (budgets.empty()) throw ConfigError("convergence: no budgets given");
  for (std::size_t i = 1; i < budgets.size(); ++i) {
    if (budgets[i] <= budgets[i - 1]) {
      throw ConfigError("convergence: budgets must be strictly increasing");
    }
  }
  if (budgets.front() < 1) throw ConfigError("convergence: budgets must be >= 1");

  const fs::path base_out = config.out_dir;
  std::vector<ConvergencePoint> out;
  for (int budget : budgets) {
    config.train.iterations = budget;
    config.out_dir = base_out / ("iters" + std::to_string(budget));
    const std::vector<CurveSet> curves = run_rd_sweep(config);
    const BdReport report = compare_bd(curves);
    std::map<std::string, std::pair<double, int>> by_variant;
    for (const auto& [key, v] : report.mean_bd_psnr) {
      auto& [sum, count] = by_variant[key.second];
      sum += v;
      count += 1;
    }
    for (const auto& [variant, sc] : by_variant) {
      out.push_back({budget, variant, sc.first / sc.second});
    }
  }
  return out;
}

CodecSpec jpeg_codec_spec(const fs::path& tool,
                          const std::string& pixel_format) {
  CodecSpec spec;
  spec.name = "jpeg";
  const std::string fmt_flag = pixel_format == "4:4:4" ? " 444" : " 420";
  spec.encode_command =
      tool.string() + " encode {input} {output} {quality}" + fmt_flag;
  spec.decode_command = tool.string() + " decode {input} {output}";
  spec.qualities = {15, 40, 65, 90};
  spec.pixel_format = pixel_format;
  return spec;
}

namespace {

TrainConfig train_from_json(const nlohmann::json& j) {
  TrainConfig tc;
  tc.iterations = j.value("iterations", 200);
  tc.initial_lr = j.value("initial_lr", 0.05);
  tc.l1_lambda = j.value("l1_lambda", 1e-3);
  tc.seed = j.value("seed", std::uint64_t(0));
  tc.trace_every = j.value("trace_every", 0);
  tc.trace_subbands = j.value("trace_subbands", false);
  if (j.value("lr_decay", std::string("linear")) == "constant") {
    tc.decay = TrainConfig::LrDecay::Constant;
  }
  return tc;
}

ModelConfig model_from_json(const nlohmann::json& j) {
  ModelConfig mc;
  mc.channels = j.value("channels", 16);
  mc.kernel_size = j.value("kernel_size", 3);
  mc.scales = j.value("scales", 3);
  mc.instance_norm = j.value("instance_norm", true);
  mc.predict_residual = j.value("predict_residual", true);
  mc.zero_init = j.value("zero_init", false);
  return mc;
}

}  // namespace

ExperimentConfig config_from_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config JSON (" + path.string() + "): " + e.what());
  }

  ExperimentConfig cfg;
  if (j.contains("images")) {
    for (const auto& p : j["images"]) {
      cfg.images.emplace_back(p.get<std::string>());
    }
  }
  if (j.contains("codecs")) {
    for (const auto& jc : j["codecs"]) {
      CodecSpec spec;
      spec.name = jc.value("name", "");
      spec.encode_command = jc.value("encode", "");
      spec.decode_command = jc.value("decode", "");
      if (jc.contains("qualities")) {
        for (const auto& q : jc["qualities"]) {
          spec.qualities.push_back(q.get<double>());
        }
      } else {
        spec.qualities = {15, 40, 65, 90};
      }
      spec.pixel_format = jc.value("pixel_format", "4:2:0");
      spec.channels = jc.value("channels", 0);
      cfg.codecs.push_back(std::move(spec));
    }
  }
  if (j.contains("model")) cfg.model = model_from_json(j["model"]);
  if (j.contains("train")) cfg.train = train_from_json(j["train"]);
  if (j.contains("seed")) cfg.train.seed = j["seed"].get<std::uint64_t>();
  cfg.out_dir = j.value("out", std::string("out"));
  if (j.contains("parameterizations")) {
    cfg.parameterizations.clear();
    for (const auto& p : j["parameterizations"]) {
      cfg.parameterizations.push_back(
          parameterization_from_string(p.get<std::string>()));
    }
  }
  cfg.l1_ablation = j.value("l1_ablation", false);
  cfg.crop = j.value("crop", 0);
  cfg.workers = j.value("workers", 1);
  cfg.quant_levels = j.value("levels", 127);
  cfg.save_artifacts = j.value("save_artifacts", true);
  return cfg;
}

std::string config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  nlohmann::json images = nlohmann::json::array();
  for (const fs::path& p : config.images) images.push_back(p.string());
  j["images"] = images;
  nlohmann::json codecs = nlohmann::json::array();
  for (const CodecSpec& c : config.codecs) {
    nlohmann::json jc;
    jc["name"] = c.name;
    jc["encode"] = c.encode_command;
    jc["decode"] = c.decode_command;
    jc["qualities"] = c.qualities;
    jc["pixel_format"] = c.pixel_format;
    if (c.channels > 0) jc["channels"] = c.channels;
    codecs.push_back(jc);
  }
  j["codecs"] = codecs;
  j["model"] = {
      {"channels", config.model.channels},
      {"kernel_size", config.model.kernel_size},
      {"scales", config.model.scales},
      {"instance_norm", config.model.instance_norm},
      {"predict_residual", config.model.predict_residual},
  };
  j["train"] = {
      {"iterations", config.train.iterations},
      {"initial_lr", config.train.initial_lr},
      {"l1_lambda", config.train.l1_lambda},
      {"trace_every", config.train.trace_every},
      {"trace_subbands", config.train.trace_subbands},
      {"lr_decay", config.train.decay == TrainConfig::LrDecay::Linear
                       ? "linear"
                       : "constant"},
  };
  j["seed"] = config.train.seed;
  j["out"] = config.out_dir.string();
  nlohmann::json params = nlohmann::json::array();
  for (Parameterization p : config.parameterizations) {
    params.push_back(to_string(p));
  }
  j["parameterizations"] = params;
  j["l1_ablation"] = config.l1_ablation;
  j["crop"] = config.crop;
  j["workers"] = config.workers;
  j["levels"] = config.quant_levels;
  return j.dump(2);
}

}  // namespace far
