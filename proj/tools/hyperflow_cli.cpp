// SPDX-License-Identifier: Apache-2.0
//
// hyperflow command line: wires the library into reproducible pipelines.
// Every artifact write is deterministic given the config and seeds; a
// single machine-readable JSON summary line goes to stdout on success.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hyperflow/hyperflow.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace hyperflow;

namespace {

std::string frame_name(const char* prefix, std::size_t t, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04zu.%s", prefix, t, ext);
  return buf;
}

std::vector<fs::path> list_sorted(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir))
    throw InputError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext)
      out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  if (out.empty())
    throw InputError("no *" + ext + " files in " + dir.string());
  return out;
}

SensorModel parse_sensor(const std::string& spec) {
  SensorModel s;
  if (spec == "identity" || spec.empty()) return s;
  auto split = [](const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t colon = text.find(':', start);
      if (colon == std::string::npos) {
        parts.push_back(text.substr(start));
        break;
      }
      parts.push_back(text.substr(start, colon - start));
      start = colon + 1;
    }
    return parts;
  };
  auto parts = split(spec);
  if (parts[0] == "quant") {
    s.kind = SensorModel::Kind::clamp_quantize;
    if (parts.size() > 1) s.bits = std::stoi(parts[1]);
    if (parts.size() > 2) s.full_scale = std::stod(parts[2]);
  } else if (parts[0] == "logistic") {
    s.kind = SensorModel::Kind::logistic;
    if (parts.size() > 1) s.gain = std::stod(parts[1]);
    if (parts.size() > 2) s.offset = std::stod(parts[2]);
  } else {
    throw UsageError("unknown sensor spec '" + spec + "'");
  }
  s.validate();
  return s;
}

MosaicLayout parse_layout(const std::string& spec, std::size_t n_encoders) {
  if (spec.empty()) return default_layout(n_encoders);
  if (spec.front() == '@') {
    std::ifstream in(spec.substr(1));
    if (!in) throw IoError("cannot open layout file " + spec.substr(1));
    MosaicLayout l;
    if (!(in >> l.rows >> l.cols))
      throw FormatError("layout file: bad header");
    l.tile.resize(l.rows * l.cols);
    for (auto& k : l.tile)
      if (!(in >> k)) throw TruncationError("layout file: truncated tile");
    l.validate(n_encoders);
    return l;
  }
  std::size_t x = spec.find('x');
  if (x == std::string::npos)
    throw UsageError("layout must be RxC or @file, got '" + spec + "'");
  MosaicLayout l;
  l.rows = std::stoul(spec.substr(0, x));
  l.cols = std::stoul(spec.substr(x + 1));
  if (l.rows * l.cols != n_encoders)
    throw UsageError("layout " + spec + " does not cover " +
                     std::to_string(n_encoders) + " encoders");
  l.tile.resize(n_encoders);
  for (std::size_t k = 0; k < n_encoders; ++k) l.tile[k] = std::uint32_t(k);
  l.validate(n_encoders);
  return l;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out.good()) throw IoError("write failed: " + path.string());
}

void emit(const json& summary) { std::cout << summary.dump() << "\n"; }

// cube -> feature frame for the VOS pipelines:
//   bands:  use the cube's bands directly
//   recon:  hardware twin (mosaic encode, demosaic, least-squares decode)
//   rgb:    CMF-integrated XYZ (the simulated color camera)
struct FeatureSource {
  std::string mode = "bands";
  std::optional<TransmissionBank> bank;
  MosaicLayout layout;
  SensorModel sensor;
  int workers = 1;

  FeatureFrame features(const SpectralCube& cube) const {
    if (mode == "bands") return feature_frame_from_cube(cube);
    if (mode == "recon") {
      RawFrame raw = mosaic_sample(cube, *bank, layout, sensor, workers);
      FeatureFrame feats = demosaic(raw, workers);
      SpectralCube rec = decode_spectra(feats, *bank, true, workers);
      return feature_frame_from_cube(rec, "recon");
    }
    if (mode == "rgb") {
      static const CmfTable cmf = cie1931_cmf();
      CmfMatrix m = cmf_matrix_for_grid(cmf, cube.grid);
      FeatureFrame f;
      f.height = cube.height;
      f.width = cube.width;
      f.channels = 3;
      f.bank_id = "rgb";
      f.values.resize(cube.pixels() * 3);
      for (std::size_t p = 0; p < cube.pixels(); ++p) {
        std::span<const float> s(cube.data.data() + p * cube.bands(),
                                 cube.bands());
        Xyz v = apply_cmf_matrix<float>(m, s);
        f.values[p * 3 + 0] = v.x;
        f.values[p * 3 + 1] = v.y;
        f.values[p * 3 + 2] = v.z;
      }
      return f;
    }
    throw UsageError("unknown feature mode '" + mode + "'");
  }
};

void add_feature_flags(CLI::App* cmd, FeatureSource& src, std::string& bank_path,
                       std::string& layout_spec, std::string& sensor_spec) {
  cmd->add_option("--features", src.mode,
                  "feature source: bands | recon | rgb")
      ->default_str("bands");
  cmd->add_option("--bank", bank_path, "bank file for --features recon");
  cmd->add_option("--layout", layout_spec, "mosaic tile RxC or @file");
  cmd->add_option("--sensor", sensor_spec,
                  "identity | quant:BITS:FULL | logistic:GAIN:OFFSET");
}

void finish_feature_source(FeatureSource& src, const std::string& bank_path,
                           const std::string& layout_spec,
                           const std::string& sensor_spec, int workers) {
  src.workers = workers;
  src.sensor = parse_sensor(sensor_spec);
  if (src.mode == "recon") {
    if (bank_path.empty())
      throw UsageError("--features recon requires --bank");
    src.bank = load_bank(bank_path);
    src.layout = parse_layout(layout_spec, src.bank->n_encoders);
  }
}

std::string vos_index_csv(const std::vector<Mask>& masks, std::size_t n_classes) {
  std::string csv = "frame,class,pixel_count\n";
  for (std::size_t t = 0; t < masks.size(); ++t) {
    std::vector<std::size_t> counts(n_classes, 0);
    for (std::uint8_t id : masks[t].ids) ++counts[id];
    for (std::size_t c = 0; c < n_classes; ++c)
      csv += std::to_string(t) + "," + std::to_string(c) + "," +
             std::to_string(counts[c]) + "\n";
  }
  return csv;
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, std::size_t n_frames,
              long seed_override, const std::string& out_dir, bool masks) {
  SceneSetup setup = scene_from_config(load_config(config_path));
  if (seed_override >= 0) setup.desc.seed = std::uint64_t(seed_override);
  fs::create_directories(out_dir);
  auto frames = render_scene_video(setup.desc, setup.library, n_frames);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    store_cube(frames[t].cube, fs::path(out_dir) / frame_name("frame", t, "hsc1"));
    if (masks)
      write_pgm(fs::path(out_dir) / frame_name("mask", t, "pgm"),
                setup.desc.height, setup.desc.width, frames[t].mask);
  }
  emit({{"command", "synth"},
        {"frames", frames.size()},
        {"height", setup.desc.height},
        {"width", setup.desc.width},
        {"bands", setup.desc.grid.bands()},
        {"out", out_dir}});
  return 0;
}

int cmd_train_bank(const std::string& input_dir, std::size_t components,
                   std::size_t max_samples, long seed, bool centered,
                   bool physical, const std::string& out_path) {
  std::vector<SpectralCube> cubes;
  for (const auto& path : list_sorted(input_dir, ".hsc1"))
    cubes.push_back(load_cube(path));
  TrainingMatrix tm = build_training_matrix(cubes, max_samples,
                                            std::uint64_t(seed), centered);
  PcaResult pca = train_pca_bank(tm, components);
  TransmissionBank bank =
      physical ? project_physical(pca.bank) : pca.bank;
  save_bank(bank, out_path);
  emit({{"command", "train-bank"},
        {"components", components},
        {"samples", tm.columns},
        {"bands", tm.bands},
        {"mode", physical ? "physical" : "signed"},
        {"out", out_path}});
  return 0;
}

int cmd_encode(const std::string& input_dir, const std::string& bank_path,
               const std::string& layout_spec, const std::string& sensor_spec,
               const std::string& out_dir, int workers) {
  TransmissionBank bank = load_bank(bank_path);
  MosaicLayout layout = parse_layout(layout_spec, bank.n_encoders);
  SensorModel sensor = parse_sensor(sensor_spec);
  fs::create_directories(out_dir);
  auto paths = list_sorted(input_dir, ".hsc1");
  std::size_t t = 0;
  for (const auto& path : paths) {
    SpectralCube cube = load_cube(path);
    RawFrame raw = mosaic_sample(cube, bank, layout, sensor, workers,
                                 fs::path(bank_path).filename().string());
    save_raw(raw, fs::path(out_dir) / frame_name("raw", t, "hfr"));
    ++t;
  }
  emit({{"command", "encode"},
        {"frames", t},
        {"encoders", bank.n_encoders},
        {"out", out_dir}});
  return 0;
}

int cmd_reconstruct(const std::string& input_dir, const std::string& bank_path,
                    const std::string& ref_dir, const std::string& out_dir,
                    std::size_t hist_bins, bool clamp, int workers) {
  TransmissionBank bank = load_bank(bank_path);
  fs::create_directories(out_dir);
  auto paths = list_sorted(input_dir, ".hfr");
  std::vector<fs::path> refs;
  if (!ref_dir.empty()) refs = list_sorted(ref_dir, ".hsc1");
  double mean_sum = 0.0;
  std::size_t mean_count = 0;
  std::string hist_csv = "bin_low,bin_high,count\n";
  std::size_t t = 0;
  for (const auto& path : paths) {
    RawFrame raw = load_raw(path);
    FeatureFrame feats = demosaic(raw, workers);
    SpectralCube rec = decode_spectra(feats, bank, clamp, workers);
    store_cube(rec, fs::path(out_dir) / frame_name("recon", t, "hsc1"));
    if (!refs.empty()) {
      if (t >= refs.size())
        throw InputError("reconstruct: more raw frames than reference cubes");
      DeltaSummary delta = spectral_difference(load_cube(refs[t]), rec);
      mean_sum += delta.mean;
      ++mean_count;
      if (t == 0)
        for (const auto& bin : delta.histogram(hist_bins))
          hist_csv += format_double(bin.lo) + "," + format_double(bin.hi) + "," +
                      std::to_string(bin.count) + "\n";
    }
    ++t;
  }
  json summary = {{"command", "reconstruct"}, {"frames", t}, {"out", out_dir}};
  if (mean_count > 0) {
    write_text(fs::path(out_dir) / "delta_hist.csv", hist_csv);
    summary["delta_mean"] = mean_sum / double(mean_count);
  }
  emit(summary);
  return 0;
}

int cmd_cluster(const std::string& input_path, const std::string& depth_path,
                std::size_t k, long seed, double depth_weight,
                const std::string& out_dir) {
  SpectralCube cube = load_cube(input_path);
  std::vector<double> depth;
  if (!depth_path.empty()) {
    SpectralCube d = load_cube(depth_path);
    if (d.bands() != 1 || d.height != cube.height || d.width != cube.width)
      throw InputError("cluster: depth cube must be H x W x 1");
    depth.assign(d.data.begin(), d.data.end());
  }
  ClusterMap map =
      cluster_map(cube, depth, k, std::uint64_t(seed), depth_weight);
  fs::create_directories(out_dir);
  std::vector<std::uint8_t> labels8(map.labels.size());
  for (std::size_t i = 0; i < map.labels.size(); ++i)
    labels8[i] = std::uint8_t(map.labels[i]);
  write_pgm(fs::path(out_dir) / "labels.pgm", cube.height, cube.width, labels8);
  std::string csv = "cluster_id,wavelength,mean_value\n";
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t b = 0; b < cube.bands(); ++b)
      csv += std::to_string(c) + "," +
             format_double(cube.grid.wavelengths[b]) + "," +
             format_double(map.spectra[c][b]) + "\n";
  write_text(fs::path(out_dir) / "spectra.csv", csv);
  emit({{"command", "cluster"},
        {"k", k},
        {"iterations", map.result.iterations},
        {"inertia", map.result.inertia},
        {"out", out_dir}});
  return 0;
}

int cmd_ovos(const std::string& input_dir, const std::string& seed_mask_path,
             FeatureSource& src, std::size_t patch, std::size_t key_channels,
             double temperature, std::size_t stride, std::size_t capacity,
             long seed, const std::string& out_dir) {
  auto paths = list_sorted(input_dir, ".hsc1");
  GrayImage seed_img = read_pgm(seed_mask_path);
  Mask seed_mask{seed_img.height, seed_img.width, seed_img.pixels};

  OvosConfig cfg;
  cfg.patch = patch;
  cfg.key_channels = key_channels;
  cfg.temperature = temperature;
  cfg.stride = stride;
  cfg.capacity = capacity;
  cfg.seed = std::uint64_t(seed);
  OvosEngine engine(cfg);

  fs::create_directories(out_dir);
  std::vector<Mask> preds;
  for (std::size_t t = 0; t < paths.size(); ++t) {
    FeatureFrame frame = src.features(load_cube(paths[t]));
    Mask pred = t == 0 ? engine.step(frame, 0, seed_mask)
                       : engine.step(frame, long(t));
    write_pgm(fs::path(out_dir) / frame_name("pred", t, "pgm"), pred.height,
              pred.width, pred.ids);
    preds.push_back(std::move(pred));
  }
  write_text(fs::path(out_dir) / "index.csv",
             vos_index_csv(preds, engine.n_classes()));
  emit({{"command", "ovos"},
        {"frames", preds.size()},
        {"classes", engine.n_classes()},
        {"out", out_dir}});
  return 0;
}

int cmd_train_readout(const std::string& input_dir, const std::string& mask_dir,
                      FeatureSource& src, std::size_t patch,
                      std::size_t key_channels, std::size_t every,
                      std::size_t epochs, double lr, long seed,
                      const std::string& out_path) {
  auto cube_paths = list_sorted(input_dir, ".hsc1");
  auto mask_paths = list_sorted(mask_dir, ".pgm");
  if (mask_paths.size() < cube_paths.size())
    throw InputError("train-readout: fewer masks than frames");

  ZvosConfig cfg;
  cfg.patch = patch;
  cfg.key_channels = key_channels;
  cfg.seed = std::uint64_t(seed);
  ZvosEngine engine(cfg);

  std::size_t n_classes = 0;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;
  for (std::size_t t = 0; t < cube_paths.size(); ++t) {
    FeatureFrame frame = src.features(load_cube(cube_paths[t]));
    auto feats = engine.features(frame, long(t));  // bank policy advances on every frame
    if (every != 0 && t % every != 0) continue;
    GrayImage img = read_pgm(mask_paths[t]);
    Mask mask{img.height, img.width, img.pixels};
    for (std::uint8_t id : mask.ids)
      n_classes = std::max<std::size_t>(n_classes, std::size_t(id) + 1);
    auto frame_labels = patch_majority_labels(mask, patch, 256);
    features.insert(features.end(), feats.values.begin(), feats.values.end());
    labels.insert(labels.end(), frame_labels.begin(), frame_labels.end());
  }
  ReadoutTraining training =
      train_readout(features, labels, engine.feature_dim(),
                    std::max<std::size_t>(n_classes, 2), epochs, lr,
                    std::uint64_t(seed));
  save_readout(training.model, out_path);
  emit({{"command", "train-readout"},
        {"samples", labels.size()},
        {"classes", training.model.n_classes},
        {"final_loss", training.loss_trace.back()},
        {"out", out_path}});
  return 0;
}

int cmd_zvos(const std::string& input_dir, const std::string& readout_path,
             FeatureSource& src, std::size_t patch, std::size_t key_channels,
             long seed, const std::string& out_dir) {
  auto paths = list_sorted(input_dir, ".hsc1");
  ZvosConfig cfg;
  cfg.patch = patch;
  cfg.key_channels = key_channels;
  cfg.seed = std::uint64_t(seed);
  ZvosEngine engine(cfg);
  engine.set_readout(load_readout(readout_path));

  fs::create_directories(out_dir);
  std::vector<Mask> preds;
  for (std::size_t t = 0; t < paths.size(); ++t) {
    FeatureFrame frame = src.features(load_cube(paths[t]));
    Mask pred = engine.step(frame, long(t));
    write_pgm(fs::path(out_dir) / frame_name("pred", t, "pgm"), pred.height,
              pred.width, pred.ids);
    preds.push_back(std::move(pred));
  }
  write_text(fs::path(out_dir) / "index.csv",
             vos_index_csv(preds, engine.readout().n_classes));
  emit({{"command", "zvos"},
        {"frames", preds.size()},
        {"classes", engine.readout().n_classes},
        {"out", out_dir}});
  return 0;
}

int cmd_rate(std::size_t width, std::size_t height, std::size_t bands, int bits,
             double fps, const std::string& csv_path) {
  RateReport r = data_rate(width, height, bands, bits, fps);
  std::fprintf(stderr,
               "%zu x %zu px, %zu bands, %d bits @ %g fps -> %.6g b/s "
               "(%.4g Gb/s, %.4g Tb/s)\n",
               width, height, bands, bits, fps, r.bits_per_second,
               r.gbits_per_second, r.tbits_per_second);
  if (!csv_path.empty()) {
    std::string csv =
        "width,height,bands,bit_depth,fps,bits_per_second,gb_per_second,tb_per_"
        "second\n";
    csv += std::to_string(width) + "," + std::to_string(height) + "," +
           std::to_string(bands) + "," + std::to_string(bits) + "," +
           format_double(fps) + "," + format_double(r.bits_per_second) + "," +
           format_double(r.gbits_per_second) + "," +
           format_double(r.tbits_per_second) + "\n";
    write_text(csv_path, csv);
  }
  emit({{"command", "rate"},
        {"bits_per_second", r.bits_per_second},
        {"gb_per_second", r.gbits_per_second},
        {"tb_per_second", r.tbits_per_second}});
  return 0;
}

int cmd_bench(const std::string& stage_name, std::size_t width,
              std::size_t height, std::size_t bands, std::size_t n_frames,
              std::size_t reps, long seed, double fps, int bits,
              const std::string& bank_path, int workers,
              const std::string& out_path) {
  // synthetic stream: smooth seeded frames. A supplied bank dictates the
  // stream's grid so the stages compose.
  std::optional<TransmissionBank> loaded;
  if (!bank_path.empty()) {
    loaded = load_bank(bank_path);
    bands = loaded->bands();
  }
  WavelengthGrid grid =
      loaded ? loaded->grid : uniform_grid(400.0, 700.0, bands);
  std::vector<SpectralCube> frames;
  Rng rng(hash_combine(std::uint64_t(seed), 0xbe7cULL));
  for (std::size_t t = 0; t < n_frames; ++t) {
    SpectralCube cube = make_cube(height, width, grid);
    double phase = rng.uniform(0.0, 6.28);
    for (std::size_t i = 0; i < height; ++i)
      for (std::size_t j = 0; j < width; ++j) {
        auto px = cube.at(i, j);
        for (std::size_t b = 0; b < bands; ++b)
          px[b] = float(1.0 +
                        std::sin(phase + 0.1 * double(i) + 0.07 * double(j) +
                                 0.05 * double(b)));
      }
    frames.push_back(std::move(cube));
  }

  TransmissionBank bank;
  if (loaded) {
    bank = std::move(*loaded);
  } else {
    TrainingMatrix tm = build_training_matrix(
        std::span<const SpectralCube>(frames.data(), 1), 512, 7);
    bank = train_pca_bank(tm, std::min<std::size_t>(4, bands)).bank;
  }
  MosaicLayout layout = default_layout(bank.n_encoders);
  SensorModel sensor;

  BenchStage stage;
  stage.name = stage_name;
  if (stage_name == "encode") {
    stage.run = [&](const SpectralCube& c) {
      return mosaic_sample(c, bank, layout, sensor, workers).values;
    };
  } else if (stage_name == "demosaic") {
    stage.run = [&](const SpectralCube& c) {
      return demosaic(mosaic_sample(c, bank, layout, sensor, workers), workers)
          .values;
    };
  } else if (stage_name == "reconstruct") {
    stage.run = [&](const SpectralCube& c) {
      RawFrame raw = mosaic_sample(c, bank, layout, sensor, workers);
      SpectralCube rec =
          decode_spectra(demosaic(raw, workers), bank, true, workers);
      return std::vector<double>(rec.data.begin(), rec.data.end());
    };
  } else {
    throw UsageError("unknown bench stage '" + stage_name + "'");
  }

  BenchResult result = throughput_bench(stage, frames, reps, fps, bits);
  if (result.report.measured_samples_per_second >= 0.0)
    std::fprintf(stderr,
                 "%s: %.4g Msamples/s over %zu reps x %zu frames "
                 "(%zu x %zu x %zu), formula rate %.4g Gb/s\n",
                 stage_name.c_str(),
                 result.report.measured_samples_per_second / 1e6, reps,
                 result.frames, width, height, bands,
                 result.report.gbits_per_second);
  else
    std::fprintf(stderr, "%s: formula rate %.4g Gb/s (no timed repetitions)\n",
                 stage_name.c_str(), result.report.gbits_per_second);
  std::string csv =
      "stage,width,height,bands,bit_depth,fps,formula_bits_per_second,frames,"
      "repetitions,output_hash\n";
  csv += stage_name + "," + std::to_string(width) + "," +
         std::to_string(height) + "," + std::to_string(bands) + "," +
         std::to_string(bits) + "," + format_double(fps) + "," +
         format_double(result.report.bits_per_second) + "," +
         std::to_string(result.frames) + "," + std::to_string(reps) + "," +
         std::to_string(result.output_hash) + "\n";
  if (!out_path.empty()) write_text(out_path, csv);

  json summary = {{"command", "bench"},
                  {"stage", stage_name},
                  {"formula_bits_per_second", result.report.bits_per_second},
                  {"repetitions", reps},
                  {"workers", workers}};
  if (result.report.measured_samples_per_second >= 0.0) {
    summary["measured_samples_per_second"] =
        result.report.measured_samples_per_second;
    summary["seconds"] = result.seconds;
  }
  emit(summary);
  return 0;
}

int cmd_render_rgb(const std::string& input_path, const std::string& out_path) {
  SpectralCube cube = load_cube(input_path);
  RgbImage img = cube_to_rgb(cube, cie1931_cmf());
  write_ppm(out_path, img.height, img.width, quantize_rgb(img));
  emit({{"command", "render-rgb"},
        {"height", img.height},
        {"width", img.width},
        {"out", out_path}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperspectral video understanding toolchain"};
  app.require_subcommand(1);
  app.set_config("--config-file", "", "key = value config with [sections]");

  int workers = default_workers();
  app.add_option("--workers", workers, "worker thread count")
      ->envname("HYPERFLOW_WORKERS");

  // synth
  auto* synth = app.add_subcommand("synth", "render a synthetic labeled scene");
  std::string synth_config, synth_out;
  std::size_t synth_frames = 1;
  long synth_seed = -1;
  bool synth_masks = true;
  synth->add_option("--scene", synth_config, "scene config file")->required();
  synth->add_option("--frames", synth_frames, "frame count");
  synth->add_option("--seed", synth_seed, "override scene seed");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_flag("--masks,!--no-masks", synth_masks, "write ground-truth masks");

  // train-bank
  auto* train = app.add_subcommand("train-bank", "train a PCA encoder bank");
  std::string train_in, train_out;
  std::size_t train_components = 9, train_max = 4096;
  long train_seed = 1;
  bool train_centered = false, train_physical = false;
  train->add_option("--input", train_in, "directory of .hsc1 cubes")->required();
  train->add_option("--components", train_components, "encoder count");
  train->add_option("--max-samples", train_max, "pixel sample budget");
  train->add_option("--seed", train_seed, "subsampling seed");
  train->add_flag("--centered", train_centered, "mean-center before PCA");
  train->add_flag("--physical", train_physical, "project rows into [0,1]");
  train->add_option("--out", train_out, "bank file")->required();

  // encode
  auto* encode = app.add_subcommand("encode", "mosaic-sample cubes to raw frames");
  std::string enc_in, enc_bank, enc_layout, enc_sensor = "identity", enc_out;
  encode->add_option("--input", enc_in, "directory of .hsc1 cubes")->required();
  encode->add_option("--bank", enc_bank, "bank file")->required();
  encode->add_option("--layout", enc_layout, "mosaic tile RxC or @file");
  encode->add_option("--sensor", enc_sensor, "sensor model spec");
  encode->add_option("--out", enc_out, "output directory")->required();

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct",
                                   "demosaic + decode raw frames to cubes");
  std::string rec_in, rec_bank, rec_ref, rec_out;
  std::size_t rec_bins = 50;
  bool rec_clamp = true;
  recon->add_option("--input", rec_in, "directory of .hfr raw frames")->required();
  recon->add_option("--bank", rec_bank, "bank file")->required();
  recon->add_option("--ref", rec_ref, "reference cubes for delta metrics");
  recon->add_option("--hist-bins", rec_bins, "delta histogram bins");
  recon->add_flag("--clamp,!--no-clamp", rec_clamp, "clamp negatives to 0");
  recon->add_option("--out", rec_out, "output directory")->required();

  // cluster
  auto* cluster = app.add_subcommand("cluster", "k-means map of a cube");
  std::string clu_in, clu_depth, clu_out;
  std::size_t clu_k = 4;
  long clu_seed = 1;
  double clu_dw = 1.0;
  cluster->add_option("--input", clu_in, "cube file")->required();
  cluster->add_option("--depth", clu_depth, "optional H x W x 1 depth cube");
  cluster->add_option("--k", clu_k, "cluster count");
  cluster->add_option("--seed", clu_seed, "k-means++ seed");
  cluster->add_option("--depth-weight", clu_dw, "depth dimension weight");
  cluster->add_option("--out", clu_out, "output directory")->required();

  // ovos
  auto* ovos = app.add_subcommand("ovos", "one-shot mask propagation");
  std::string ov_in, ov_mask, ov_out, ov_bank, ov_layout, ov_sensor = "identity";
  FeatureSource ov_src;
  std::size_t ov_patch = 8, ov_ck = 32, ov_stride = 5, ov_cap = 8;
  double ov_temp = 16.0;
  long ov_seed = 1;
  ovos->add_option("--input", ov_in, "directory of .hsc1 cubes")->required();
  ovos->add_option("--seed-mask", ov_mask, "first-frame mask PGM")->required();
  add_feature_flags(ovos, ov_src, ov_bank, ov_layout, ov_sensor);
  ovos->add_option("--patch", ov_patch, "patch size");
  ovos->add_option("--key-channels", ov_ck, "key channels");
  ovos->add_option("--temperature", ov_temp, "affinity temperature");
  ovos->add_option("--stride", ov_stride, "memory insertion stride");
  ovos->add_option("--capacity", ov_cap, "memory capacity");
  ovos->add_option("--seed", ov_seed, "projection seed");
  ovos->add_option("--out", ov_out, "output directory")->required();

  // train-readout
  auto* tr = app.add_subcommand("train-readout", "fit the ZVOS class readout");
  std::string tr_in, tr_masks, tr_out, tr_bank, tr_layout, tr_sensor = "identity";
  FeatureSource tr_src;
  std::size_t tr_patch = 2, tr_ck = 16, tr_every = 4, tr_epochs = 300;
  double tr_lr = 2.0;
  long tr_seed = 1;
  tr->add_option("--input", tr_in, "directory of .hsc1 cubes")->required();
  tr->add_option("--masks", tr_masks, "directory of ground-truth PGM masks")
      ->required();
  add_feature_flags(tr, tr_src, tr_bank, tr_layout, tr_sensor);
  tr->add_option("--patch", tr_patch, "patch size");
  tr->add_option("--key-channels", tr_ck, "key channels");
  tr->add_option("--every", tr_every, "train on every n-th frame");
  tr->add_option("--epochs", tr_epochs, "gradient descent epochs");
  tr->add_option("--lr", tr_lr, "learning rate");
  tr->add_option("--seed", tr_seed, "init/projection seed");
  tr->add_option("--out", tr_out, "readout file")->required();

  // zvos
  auto* zvos = app.add_subcommand("zvos", "zero-shot semantic segmentation");
  std::string zv_in, zv_readout, zv_out, zv_bank, zv_layout, zv_sensor = "identity";
  FeatureSource zv_src;
  std::size_t zv_patch = 2, zv_ck = 16;
  long zv_seed = 1;
  zvos->add_option("--input", zv_in, "directory of .hsc1 cubes")->required();
  zvos->add_option("--readout", zv_readout, "trained readout file")->required();
  add_feature_flags(zvos, zv_src, zv_bank, zv_layout, zv_sensor);
  zvos->add_option("--patch", zv_patch, "patch size");
  zvos->add_option("--key-channels", zv_ck, "key channels");
  zvos->add_option("--seed", zv_seed, "projection seed");
  zvos->add_option("--out", zv_out, "output directory")->required();

  // rate
  auto* rate = app.add_subcommand("rate", "data-rate figure of merit");
  std::size_t ra_w = 3840, ra_h = 2160, ra_bands = 204;
  int ra_bits = 12;
  double ra_fps = 30.0;
  std::string ra_csv;
  rate->add_option("--width", ra_w, "pixels");
  rate->add_option("--height", ra_h, "pixels");
  rate->add_option("--bands", ra_bands, "spectral bands");
  rate->add_option("--bits", ra_bits, "bits per band");
  rate->add_option("--fps", ra_fps, "frames per second");
  rate->add_option("--csv", ra_csv, "also write a CSV report");

  // bench
  auto* bench = app.add_subcommand("bench", "throughput benchmark harness");
  std::string be_stage = "encode", be_bank, be_out;
  std::size_t be_w = 256, be_h = 256, be_bands = 64, be_frames = 2, be_reps = 3;
  long be_seed = 1;
  double be_fps = 30.0;
  int be_bits = 12;
  bench->add_option("--stage", be_stage, "encode | demosaic | reconstruct");
  bench->add_option("--width", be_w, "frame width");
  bench->add_option("--height", be_h, "frame height");
  bench->add_option("--bands", be_bands, "spectral bands");
  bench->add_option("--frames", be_frames, "frames per pass");
  bench->add_option("--reps", be_reps, "timed repetitions (0: formula only)");
  bench->add_option("--seed", be_seed, "stream seed");
  bench->add_option("--fps", be_fps, "figure-of-merit frame rate");
  bench->add_option("--bits", be_bits, "figure-of-merit bit depth");
  bench->add_option("--bank", be_bank, "bank file (default: self-trained)");
  bench->add_option("--out", be_out, "CSV report path");

  // render-rgb
  auto* rgb = app.add_subcommand("render-rgb", "colorimetric PPM of a cube");
  std::string rgb_in, rgb_out;
  rgb->add_option("--input", rgb_in, "cube file")->required();
  rgb->add_option("--out", rgb_out, "PPM path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth)
      return cmd_synth(synth_config, synth_frames, synth_seed, synth_out,
                       synth_masks);
    if (*train)
      return cmd_train_bank(train_in, train_components, train_max, train_seed,
                            train_centered, train_physical, train_out);
    if (*encode)
      return cmd_encode(enc_in, enc_bank, enc_layout, enc_sensor, enc_out,
                        workers);
    if (*recon)
      return cmd_reconstruct(rec_in, rec_bank, rec_ref, rec_out, rec_bins,
                             rec_clamp, workers);
    if (*cluster)
      return cmd_cluster(clu_in, clu_depth, clu_k, clu_seed, clu_dw, clu_out);
    if (*ovos) {
      finish_feature_source(ov_src, ov_bank, ov_layout, ov_sensor, workers);
      return cmd_ovos(ov_in, ov_mask, ov_src, ov_patch, ov_ck, ov_temp,
                      ov_stride, ov_cap, ov_seed, ov_out);
    }
    if (*tr) {
      finish_feature_source(tr_src, tr_bank, tr_layout, tr_sensor, workers);
      return cmd_train_readout(tr_in, tr_masks, tr_src, tr_patch, tr_ck,
                               tr_every, tr_epochs, tr_lr, tr_seed, tr_out);
    }
    if (*zvos) {
      finish_feature_source(zv_src, zv_bank, zv_layout, zv_sensor, workers);
      return cmd_zvos(zv_in, zv_readout, zv_src, zv_patch, zv_ck, zv_seed,
                      zv_out);
    }
    if (*rate) return cmd_rate(ra_w, ra_h, ra_bands, ra_bits, ra_fps, ra_csv);
    if (*bench)
      return cmd_bench(be_stage, be_w, be_h, be_bands, be_frames, be_reps,
                       be_seed, be_fps, be_bits, be_bank, workers, be_out);
    if (*rgb) return cmd_render_rgb(rgb_in, rgb_out);
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
