#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "topoflow/model.hpp"

namespace topoflow::model {

/// Parameters as a .gfd container: one channel per tensor, H = 1, W = the
/// largest tensor size, zero padded; each channel's unit tag holds "RxC".
Field params_to_field(ParamStore& params);
/// Restores tensor values into a store of matching layout.
void params_from_field(const Field& f, ParamStore& params);

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::string config_echo;
};

/// Writes `<stem>.gfd` and the `<stem>.txt` sidecar (group -> tensor names,
/// config echo, seed, step).
void save_checkpoint(const std::filesystem::path& gfd_path, ParamStore& params, const CheckpointInfo& info);
/// Loads into a store initialised for the same config.
void load_checkpoint(const std::filesystem::path& gfd_path, ParamStore& params);

}  // namespace topoflow::model
