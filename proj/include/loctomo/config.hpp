#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "loctomo/filtering.hpp"
#include "loctomo/phantom.hpp"
#include "loctomo/pipeline.hpp"
#include "loctomo/projector.hpp"

namespace loctomo {

/// Every tunable of a run. Serialized as JSON with one object per module;
/// unknown keys are rejected.
struct RunConfig {
  PhantomSpec phantom;
  std::string angles = "-60:60:41";
  double ray_step = 1.0;
  NoiseModel noise{NoiseKind::gaussian, 0.5, 100.0, 0};
  FilterSpec filter;
  TrainConfig train;
  std::size_t chunk = 4096;
  int threads = 0;  // 0: library default
};

/// Overlays the keys present in `json_text` onto `base`. Throws UsageError on
/// malformed JSON, unknown keys or wrongly typed values.
RunConfig parse_config(std::string_view json_text, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});
std::string dump_config(const RunConfig& config);

/// Writes the resolved configuration plus the command and library version.
void write_resolved_config(const std::filesystem::path& path, const RunConfig& config, std::string_view command);

/// "start:stop:count", inclusive of both ends. Throws UsageError.
TiltGeometry parse_angle_range(std::string_view text);

}  // namespace loctomo
