#pragma once

#include <filesystem>
#include <string>

#include "kdpg/policy.hpp"

namespace kdpg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint, all integers and floats little-endian:
///
///   "KDPGCKPT" | u32 version | u8 arch
///   u32 vocab size, then per token: u32 length + bytes
///   hyperparameters: arch Neural -> u64 context, embed, hidden
///                    arch Tabular -> u64 order
///   u32 block count, then per block: u32 name length + name,
///       u64 rows, u64 cols, rows*cols f64 values
///
/// Serialization is a pure function of the policy, so equal policies give
/// byte-identical files.
std::string serialize_policy(const Policy& policy);

/// Throws kdpg::Error("CheckpointError") on bad magic, version, or any
/// shape that disagrees with the declared hyperparameters.
Policy deserialize_policy(std::string_view bytes);

void save_policy(const Policy& policy, const std::filesystem::path& path);
Policy load_policy(const std::filesystem::path& path);

}  // namespace kdpg
