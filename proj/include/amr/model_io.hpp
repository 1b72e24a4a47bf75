#pragma once

// Single-file model artifacts. Layout (all integers and reals little-endian):
//
//   magic        8 bytes  "AMRMODEL"
//   version      u32      = 1
//   kind         u8       ModelKind ordinal
//   n_features   u32
//   meta         u32 count, then (str key, f64 value) pairs; u64 epochs_run;
//                f64s val_mae_trace; f64s train_mae_trace
//   importances  u8 present flag, then f64s when present
//   payload      kind-specific, see docs/formats.md
//   checksum     u64 FNV-1a over every preceding byte
//
// str = u32 length + bytes; f64s = u64 count + count x f64.

#include <string>
#include <string_view>

#include "amr/models.hpp"

namespace amr {

inline constexpr std::string_view kModelMagic = "AMRMODEL";
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string serialize_model(const TrainedModel& m);
/// Throws CorruptModel on bad magic, version, checksum or truncation.
TrainedModel deserialize_model(std::string_view bytes);

void save_model(const TrainedModel& m, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace amr
