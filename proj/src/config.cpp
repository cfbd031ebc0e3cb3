#include "loctomo/config.hpp"

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "loctomo/error.hpp"

namespace loctomo {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw UsageError("config section '" + std::string(section) + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw UsageError("unknown config key '" + std::string(section) + "." + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename Enum, typename Parse>
void read_enum(const json& obj, const char* key, Enum& out, Parse parse) {
  if (!obj.contains(key)) return;
  std::string name;
  read(obj, key, name);
  out = parse(name);
}

}  // namespace

RunConfig parse_config(std::string_view json_text, const RunConfig& base) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed config: ") + e.what());
  }
  RunConfig c = base;
  reject_unknown(root, "root",
                 {"phantom", "geometry", "noise", "filter", "patch", "mlp", "train", "reconstruct", "threads", "command",
                  "version"});

  if (root.contains("phantom")) {
    const json& p = root["phantom"];
    reject_unknown(p, "phantom", {"size", "voxel_size", "seed", "n_blobs", "blob_kind", "density_range", "background"});
    if (p.contains("size")) {
      std::vector<int> size;
      read(p, "size", size);
      if (size.size() != 3) throw UsageError("phantom.size must list nx, ny, nz");
      c.phantom.grid.nx = size[0];
      c.phantom.grid.ny = size[1];
      c.phantom.grid.nz = size[2];
    }
    read(p, "voxel_size", c.phantom.grid.voxel_size);
    read(p, "seed", c.phantom.seed);
    read(p, "n_blobs", c.phantom.n_blobs);
    read_enum(p, "blob_kind", c.phantom.blob_kind, parse_blob_kind);
    if (p.contains("density_range")) {
      std::vector<double> range;
      read(p, "density_range", range);
      if (range.size() != 2) throw UsageError("phantom.density_range must be [lo, hi]");
      c.phantom.density_lo = range[0];
      c.phantom.density_hi = range[1];
    }
    read(p, "background", c.phantom.background);
  }
  if (root.contains("geometry")) {
    const json& g = root["geometry"];
    reject_unknown(g, "geometry", {"angles", "ray_step"});
    read(g, "angles", c.angles);
    read(g, "ray_step", c.ray_step);
  }
  if (root.contains("noise")) {
    const json& n = root["noise"];
    reject_unknown(n, "noise", {"kind", "sigma", "dose", "seed"});
    if (n.contains("kind")) {
      std::string kind;
      read(n, "kind", kind);
      c.noise.kind = NoiseModel::parse(kind, c.noise.seed).kind;
    }
    read(n, "sigma", c.noise.sigma);
    read(n, "dose", c.noise.dose);
    read(n, "seed", c.noise.seed);
  }
  if (root.contains("filter")) {
    const json& f = root["filter"];
    reject_unknown(f, "filter", {"kind", "pad_factor"});
    read_enum(f, "kind", c.filter.kind, parse_filter_kind);
    read(f, "pad_factor", c.filter.pad_factor);
  }
  if (root.contains("patch")) {
    const json& p = root["patch"];
    reject_unknown(p, "patch", {"size", "delta", "normalize"});
    read(p, "size", c.train.patch.size);
    read(p, "delta", c.train.patch.delta);
    read_enum(p, "normalize", c.train.patch.normalize, parse_patch_normalization);
  }
  if (root.contains("mlp")) {
    const json& m = root["mlp"];
    reject_unknown(m, "mlp", {"hidden", "activation"});
    read(m, "hidden", c.train.arch.hidden);
    read_enum(m, "activation", c.train.arch.activation, parse_activation);
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    reject_unknown(t, "train",
                   {"steps", "batch_size", "lr", "beta1", "beta2", "eps", "schedule", "seed", "val_fraction", "margin",
                    "target_norm", "val_interval", "val_max_voxels"});
    read(t, "steps", c.train.steps);
    read(t, "batch_size", c.train.batch_size);
    read(t, "lr", c.train.adam.lr);
    read(t, "beta1", c.train.adam.beta1);
    read(t, "beta2", c.train.adam.beta2);
    read(t, "eps", c.train.adam.eps);
    read_enum(t, "schedule", c.train.schedule, parse_lr_schedule);
    read(t, "seed", c.train.seed);
    read(t, "val_fraction", c.train.val_fraction);
    read(t, "margin", c.train.margin);
    read_enum(t, "target_norm", c.train.target_norm, parse_target_normalization);
    read(t, "val_interval", c.train.val_interval);
    read(t, "val_max_voxels", c.train.val_max_voxels);
  }
  if (root.contains("reconstruct")) {
    const json& r = root["reconstruct"];
    reject_unknown(r, "reconstruct", {"chunk"});
    read(r, "chunk", c.chunk);
  }
  read(root, "threads", c.threads);
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

namespace {

json to_json(const RunConfig& c) {
  json root;
  root["phantom"] = {{"size", {c.phantom.grid.nx, c.phantom.grid.ny, c.phantom.grid.nz}},
                     {"voxel_size", c.phantom.grid.voxel_size},
                     {"seed", c.phantom.seed},
                     {"n_blobs", c.phantom.n_blobs},
                     {"blob_kind", to_string(c.phantom.blob_kind)},
                     {"density_range", {c.phantom.density_lo, c.phantom.density_hi}},
                     {"background", c.phantom.background}};
  root["geometry"] = {{"angles", c.angles}, {"ray_step", c.ray_step}};
  root["noise"] = {{"kind", to_string(c.noise.kind)},
                   {"sigma", c.noise.sigma},
                   {"dose", c.noise.dose},
                   {"seed", c.noise.seed}};
  root["filter"] = {{"kind", to_string(c.filter.kind)}, {"pad_factor", c.filter.pad_factor}};
  root["patch"] = {{"size", c.train.patch.size},
                   {"delta", c.train.patch.delta},
                   {"normalize", to_string(c.train.patch.normalize)}};
  root["mlp"] = {{"hidden", c.train.arch.hidden}, {"activation", to_string(c.train.arch.activation)}};
  root["train"] = {{"steps", c.train.steps},
                   {"batch_size", c.train.batch_size},
                   {"lr", c.train.adam.lr},
                   {"beta1", c.train.adam.beta1},
                   {"beta2", c.train.adam.beta2},
                   {"eps", c.train.adam.eps},
                   {"schedule", to_string(c.train.schedule)},
                   {"seed", c.train.seed},
                   {"val_fraction", c.train.val_fraction},
                   {"margin", c.train.margin},
                   {"target_norm", to_string(c.train.target_norm)},
                   {"val_interval", c.train.val_interval},
                   {"val_max_voxels", c.train.val_max_voxels}};
  root["reconstruct"] = {{"chunk", c.chunk}};
  root["threads"] = c.threads;
  return root;
}

}  // namespace

std::string dump_config(const RunConfig& config) { return to_json(config).dump(2); }

void write_resolved_config(const std::filesystem::path& path, const RunConfig& config, std::string_view command) {
  json root = to_json(config);
  root["command"] = std::string(command);
  root["version"] = LOCTOMO_VERSION;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << root.dump(2) << '\n';
}

TiltGeometry parse_angle_range(std::string_view text) {
  double parts[3];
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? text.find(':', start) : text.size();
    if (end == std::string_view::npos) throw UsageError("angle range must be start:stop:count, got '" + std::string(text) + "'");
    const std::string_view field = text.substr(start, end - start);
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), parts[i]);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
      throw UsageError("invalid angle range '" + std::string(text) + "'");
    }
    start = end + 1;
  }
  const double count = parts[2];
  if (count < 1 || count != std::floor(count)) throw UsageError("angle count must be a positive integer");
  if (parts[1] < parts[0]) throw UsageError("angle range must be increasing");
  try {
    return TiltGeometry::uniform(parts[0], parts[1], static_cast<int>(count));
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

}  // namespace loctomo
