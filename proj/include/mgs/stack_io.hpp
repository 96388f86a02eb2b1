#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mgs/simdata.hpp"
#include "mgs/volume.hpp"

namespace mgs {

/// Stack pixels as a (u, v, slice) volume whose affine maps voxel indices
/// to world mm (columns: u axis, v axis, normal scaled by the slice pitch).
Volume stack_to_volume(const SliceStack& stack);

/// Writes `<base>.nii` (pixels) and `<base>.json` (orientation, thickness,
/// gap, per-slice true and estimated motion).
void write_stack(const std::filesystem::path& nii_path, const SliceStack& stack);
/// Reads a stack written by write_stack; the sidecar sits next to the .nii.
SliceStack read_stack(const std::filesystem::path& nii_path);

std::string stack_sidecar_json(const SliceStack& stack);

struct ManifestEntry {
    std::string file;  // relative to the manifest's directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

/// Hashes the listed files (sorted by name) and writes `manifest.txt` lines
/// "<sha256>  <bytes>  <file>".
std::vector<ManifestEntry> write_manifest(const std::filesystem::path& dir, std::vector<std::string> files);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);

}  // namespace mgs
