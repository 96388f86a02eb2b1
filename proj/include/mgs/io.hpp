#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mgs/volume.hpp"

namespace mgs {

/// Writes to a sibling temp file and renames it over `path`, so readers never
/// observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

// NIfTI-1 single-file (.nii) subset: little-endian, float32 or uint16 data,
// geometry from the sform rows. qform is ignored.

inline constexpr short kNiftiFloat32 = 16;
inline constexpr short kNiftiUint16 = 512;

/// Throws BadMagic, UnsupportedDatatype, TruncatedPayload, EndianMismatch
/// or IoError.
Volume read_volume(const std::filesystem::path& path);
Volume parse_volume(std::string_view bytes);

/// Float32 payload. The affine is stored in srow and, at full double
/// precision, in a header extension so that it round-trips exactly.
void write_volume(const std::filesystem::path& path, const Volume& vol);
std::string serialize_volume(const Volume& vol);

}  // namespace mgs
