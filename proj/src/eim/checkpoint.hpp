#pragma once

#include "eim/models.hpp"
#include "eim/param_store.hpp"

#include <iosfwd>
#include <map>
#include <memory>
#include <string>

namespace eim {

/// Checkpoint file layout, all integers and floats little-endian:
///
///   8 bytes   magic "EIMCKPT\0"
///   u32       format version (1)
///   u32       metadata count M, then M x {u32 len, key bytes, u32 len, value bytes}
///   u32       tensor count N, then N x
///             {u32 len, name bytes, u8 trainable, u32 rank, rank x u64 extent,
///              prod(extent) x f64 value}
inline constexpr std::uint32_t kCheckpointVersion = 1;

using Metadata = std::map<std::string, std::string>;

struct CheckpointData {
  Metadata metadata;
  ParamStore params;
};

void write_checkpoint(std::ostream& out, const Metadata& metadata, const ParamStore& params);
CheckpointData read_checkpoint(std::istream& in);

Metadata model_metadata(const ModelSpec& spec);
ModelSpec spec_from_metadata(const Metadata& metadata);

/// Writes to path + ".tmp" and renames. `extra` entries are stored alongside
/// the model description.
void save_model(const EimModel& model, const std::string& path, const Metadata& extra = {});
std::unique_ptr<EimModel> load_model(const std::string& path, Metadata* metadata = nullptr);

}  // namespace eim
