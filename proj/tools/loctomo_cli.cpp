// loctomo command line: simulate, fbp, train, reconstruct, fsc, slice.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "loctomo/loctomo.hpp"

namespace fs = std::filesystem;
using namespace loctomo;

namespace {

enum Exit { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

struct Options {
  std::string config;
  std::optional<std::string> angles;
  std::optional<std::string> noise;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> filter;
  std::optional<int> threads;
  std::optional<int> steps;
  std::optional<int> batch_size;
  std::optional<std::size_t> chunk;
  std::string out_dir = ".";
  std::string out;
  std::string tilts;
  std::string pairs;
  std::string model;
  std::string a, b;
  std::string volume;
  std::string reference;
  int nz = 0;
  int downsample = 1;
};

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

// angle_range: --angles is a start:stop:count spec rather than a sidecar path.
RunConfig resolve(const Options& o, bool angle_range = false) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (angle_range && o.angles) c.angles = *o.angles;
  if (o.seed) {
    c.phantom.seed = *o.seed;
    c.noise.seed = *o.seed;
    c.train.seed = *o.seed;
  }
  if (o.noise) c.noise = NoiseModel::parse(*o.noise, c.noise.seed);
  if (o.filter) c.filter.kind = parse_filter_kind(*o.filter);
  if (o.threads) c.threads = *o.threads;
  if (o.steps) c.train.steps = *o.steps;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.chunk) c.chunk = *o.chunk;
  if (c.threads < 0) throw UsageError("--threads must be non-negative");
  if (c.threads > 0) omp_set_num_threads(c.threads);
  return c;
}

fs::path output_dir_of(const fs::path& file) {
  const fs::path parent = file.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

// The angle sidecar sits next to the stack unless --angles names a file.
fs::path sidecar_for(const fs::path& stack, const std::optional<std::string>& angles) {
  if (angles) return *angles;
  fs::path p = stack;
  p.replace_extension(".tlt");
  return p;
}

TiltSeries load_series(const Options& o) {
  if (o.tilts.empty()) throw UsageError("--tilts is required");
  const fs::path sidecar = sidecar_for(o.tilts, o.angles);
  if (!fs::exists(sidecar)) throw DataError("missing angle sidecar " + sidecar.string());
  TiltSeries series = read_tilt_series(o.tilts, sidecar);
  if (o.downsample != 1) series = downsample_stack(series, o.downsample);
  return series;
}

GridSpec grid_for(const TiltSeries& series, int nz) {
  GridSpec g{series.det_u(), series.det_v(), nz > 0 ? nz : series.det_u(), series.pixel_size()};
  g.validate();
  return g;
}

int run_simulate(const Options& o, const std::string& cmd) {
  const RunConfig c = resolve(o, true);
  c.phantom.validate();
  c.noise.validate();
  const TiltGeometry geometry = parse_angle_range(c.angles);
  const fs::path dir = o.out_dir;
  ensure_dir(dir);

  const Volume phantom = generate_phantom(c.phantom);
  const TiltSeries clean = project(phantom, geometry, c.phantom.grid.nx, c.phantom.grid.ny, c.ray_step);
  const TiltSeries measured = c.noise.kind == NoiseKind::none ? clean : apply_noise(clean, c.noise);

  write_volume(dir / "phantom.mrc", phantom);
  write_tilt_series(dir / "tilts.mrc", dir / "tilts.tlt", measured);
  write_resolved_config(dir / "resolved_config.json", c, cmd);
  std::printf("wrote %s (%zu tilts)\n", dir.string().c_str(), geometry.size());
  return kOk;
}

int run_fbp(const Options& o, const std::string& cmd) {
  const RunConfig c = resolve(o);
  if (o.out.empty()) throw UsageError("--out is required");
  const TiltSeries series = load_series(o);
  const GridSpec grid = grid_for(series, o.nz);
  ensure_dir(output_dir_of(o.out));

  const auto t0 = std::chrono::steady_clock::now();
  const Volume volume = fbp(series, grid, c.filter);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_volume(o.out, volume);
  write_resolved_config(output_dir_of(o.out) / "resolved_config.json", c, cmd);
  std::printf("fbp wall-clock %.3f s\n", seconds);
  if (!o.reference.empty()) {
    // Score what was written, so the figure matches a later metrics run on the file.
    const Volume stored = read_volume(o.out);
    std::printf("psnr %.17g dB\n", psnr(stored, read_volume(o.reference)));
  }
  return kOk;
}

struct ManifestRow {
  std::string reference, tilts, angles;
};

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open manifest " + path.string());
  const fs::path base = output_dir_of(path);
  auto resolve_path = [&](const std::string& s) { return fs::path(s).is_absolute() ? s : (base / s).string(); };

  std::vector<ManifestRow> rows;
  std::string line;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (header) {
      if (fields != std::vector<std::string>{"reference", "tilts", "angles"}) {
        throw UsageError("manifest header must be 'reference,tilts,angles'");
      }
      header = false;
      continue;
    }
    if (fields.size() != 3) throw UsageError("manifest line " + std::to_string(line_no) + " needs three fields");
    rows.push_back({resolve_path(fields[0]), resolve_path(fields[1]), resolve_path(fields[2])});
  }
  if (rows.empty()) throw UsageError("manifest " + path.string() + " lists no training pairs");
  return rows;
}

int run_train(const Options& o, const std::string& cmd) {
  RunConfig c = resolve(o);
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.pairs.empty()) throw UsageError("--pairs is required");
  c.train.validate();
  const std::vector<ManifestRow> rows = read_manifest(o.pairs);

  std::vector<TrainingPair> pairs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string label = "manifest row " + std::to_string(i + 1) + " (" + rows[i].tilts + ")";
    TrainingPair p;
    p.id = label;
    p.reference = read_volume(rows[i].reference);
    const TiltSeries series = read_tilt_series(rows[i].tilts, rows[i].angles);
    if (!pairs.empty() && series.tilt_count() != pairs.front().measurements.tilt_count()) {
      throw DataError(label + " has " + std::to_string(series.tilt_count()) + " tilts, expected " +
                      std::to_string(pairs.front().measurements.tilt_count()));
    }
    if (series.det_u() != p.reference.grid().nx || series.det_v() != p.reference.grid().ny) {
      throw DataError(label + " detector does not match its reference volume");
    }
    p.measurements = ramp_filter(series, c.filter);
    pairs.push_back(std::move(p));
  }

  const fs::path out = o.out;
  ensure_dir(output_dir_of(out));
  const TrainResult result = train(pairs, c.train, [](const LogRow& r) {
    if (r.val_mse) std::printf("step %d train %.6g val %.6g\n", r.step, r.train_mse, *r.val_mse);
  });
  save_checkpoint(out, result.model);
  fs::path log = out;
  log.replace_extension(".log.csv");
  write_training_log(log, result.log);
  write_resolved_config(output_dir_of(out) / "resolved_config.json", c, cmd);
  std::printf("best step %d, wrote %s\n", result.best_step, out.string().c_str());
  return kOk;
}

int run_reconstruct(const Options& o, const std::string& cmd) {
  const RunConfig c = resolve(o);
  if (o.out.empty()) throw UsageError("--out is required");
  if (o.model.empty()) throw UsageError("--model is required");
  const Model model = load_checkpoint(o.model);
  const TiltSeries series = load_series(o);
  const GridSpec grid = grid_for(series, o.nz);
  ensure_dir(output_dir_of(o.out));

  const auto t0 = std::chrono::steady_clock::now();
  const Volume volume = reconstruct(series, model, grid, c.chunk, c.filter);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_volume(o.out, volume);
  write_resolved_config(output_dir_of(o.out) / "resolved_config.json", c, cmd);
  std::printf("reconstruct wall-clock %.3f s\n", seconds);
  return kOk;
}

int run_fsc(const Options& o, const std::string& cmd) {
  const RunConfig c = resolve(o);
  if (o.a.empty() || o.b.empty() || o.out.empty()) throw UsageError("--a, --b and --out are required");
  const FscCurve curve = fsc(read_volume(o.a), read_volume(o.b));
  ensure_dir(output_dir_of(o.out));
  write_fsc_csv(o.out, curve);
  write_resolved_config(output_dir_of(o.out) / "resolved_config.json", c, cmd);
  std::printf("fsc auc %.10g\n", fsc_auc(curve));
  return kOk;
}

int run_slice(const Options& o, const std::string& cmd) {
  const RunConfig c = resolve(o);
  if (o.volume.empty()) throw UsageError("--volume is required");
  ensure_dir(o.out_dir);
  write_orthoslices(read_volume(o.volume), o.out_dir);
  write_resolved_config(fs::path(o.out_dir) / "resolved_config.json", c, cmd);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned local tomographic reconstruction"};
  app.set_version_flag("--version", LOCTOMO_VERSION);
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config,--spec", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--threads", o.threads, "Worker thread cap (0: library default)");
  };
  auto series_inputs = [&](CLI::App* sub) {
    sub->add_option("--tilts", o.tilts, "Tilt series MRC stack")->required();
    sub->add_option("--angles", o.angles, "Angle sidecar (default: stack path with .tlt)");
    sub->add_option("--nz", o.nz, "Output depth (default: detector width)");
    sub->add_option("--downsample", o.downsample, "Fourier-crop the stack by this factor first");
    sub->add_option("--filter", o.filter, "ramlak or hann");
    sub->add_option("--out", o.out, "Output volume MRC")->required();
  };

  CLI::App* simulate = app.add_subcommand("simulate", "Phantom, projections and noise");
  common(simulate);
  simulate->add_option("--angles", o.angles, "start:stop:count, both ends included");
  simulate->add_option("--noise", o.noise, "none, gaussian:<sigma> or poisson:<dose>");
  simulate->add_option("--seed", o.seed, "Seed for phantom and noise");
  simulate->add_option("--out-dir", o.out_dir, "Output directory");

  CLI::App* fbp_cmd = app.add_subcommand("fbp", "Filtered backprojection");
  common(fbp_cmd);
  series_inputs(fbp_cmd);
  fbp_cmd->add_option("--reference", o.reference, "Ground truth volume; prints PSNR");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a voxel-wise network");
  common(train_cmd);
  train_cmd->add_option("--pairs", o.pairs, "Manifest CSV (reference,tilts,angles)")->required();
  train_cmd->add_option("--out", o.out, "Checkpoint path (.lmlp)")->required();
  train_cmd->add_option("--seed", o.seed, "Training seed");
  train_cmd->add_option("--steps", o.steps, "Optimizer steps");
  train_cmd->add_option("--batch-size", o.batch_size, "Minibatch size");
  train_cmd->add_option("--filter", o.filter, "ramlak or hann");

  CLI::App* recon = app.add_subcommand("reconstruct", "Apply a trained network");
  common(recon);
  series_inputs(recon);
  recon->add_option("--model", o.model, "Checkpoint (.lmlp)")->required();
  recon->add_option("--chunk", o.chunk, "Voxels evaluated per batch");

  CLI::App* fsc_cmd = app.add_subcommand("fsc", "Fourier shell correlation curve");
  common(fsc_cmd);
  fsc_cmd->add_option("--a", o.a, "First volume")->required();
  fsc_cmd->add_option("--b", o.b, "Second volume")->required();
  fsc_cmd->add_option("--out", o.out, "Curve CSV")->required();

  CLI::App* slice = app.add_subcommand("slice", "Central orthoslices as PNG");
  common(slice);
  slice->add_option("--volume", o.volume, "Volume MRC")->required();
  slice->add_option("--out-dir", o.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  const std::string cmd = command_line(argc, argv);
  try {
    if (simulate->parsed()) return run_simulate(o, cmd);
    if (fbp_cmd->parsed()) return run_fbp(o, cmd);
    if (train_cmd->parsed()) return run_train(o, cmd);
    if (recon->parsed()) return run_reconstruct(o, cmd);
    if (fsc_cmd->parsed()) return run_fsc(o, cmd);
    if (slice->parsed()) return run_slice(o, cmd);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
