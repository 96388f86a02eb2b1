#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mgs/train.hpp"

namespace mgs {

inline constexpr char kCheckpointMagic[8] = {'M', 'G', 'S', 'S', '0', '0', '0', '1'};

// Layout: the 8-byte magic, then tagged records until end of file. A record
// is [u32 tag length][tag bytes][u8 type 'F' | 'I' | 'S'][u64 count][payload]
// with little-endian f64 ('F'), i64 ('I') or raw bytes ('S').

std::string serialize_checkpoint(const TrainState& state);
/// Throws BadMagic, TruncatedPayload or ParseError (missing/ill-typed record).
TrainState parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

/// Value of the "params_per_primitive" record.
long long checkpoint_params_per_primitive(std::string_view bytes);

}  // namespace mgs
