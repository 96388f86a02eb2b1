#include "mgs/stack_io.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "mgs/io.hpp"

namespace mgs {

namespace {

using Json = nlohmann::ordered_json;

Json vec_json(const auto& v, int n) {
    Json a = Json::array();
    for (int i = 0; i < n; ++i) a.push_back(v[i]);
    return a;
}

template <class V>
V json_vec(const Json& j, int n) {
    if (!j.is_array() || static_cast<int>(j.size()) != n) {
        throw Error(ErrorCode::ParseError, "expected an array of " + std::to_string(n) + " numbers in stack sidecar");
    }
    V v;
    for (int i = 0; i < n; ++i) v[i] = j[i].get<double>();
    return v;
}

Json motions_json(const std::vector<RigidMotion>& motions) {
    Json a = Json::array();
    for (const RigidMotion& m : motions) {
        a.push_back({{"rotation", vec_json(m.rotation, 4)},
                     {"translation_mm", vec_json(m.translation_mm, 3)},
                     {"pivot_mm", vec_json(m.pivot_mm, 3)}});
    }
    return a;
}

std::vector<RigidMotion> json_motions(const Json& j) {
    std::vector<RigidMotion> out;
    for (const Json& m : j) {
        out.push_back({json_vec<Quat4>(m.at("rotation"), 4), json_vec<Vec3>(m.at("translation_mm"), 3),
                       json_vec<Vec3>(m.at("pivot_mm"), 3)});
    }
    return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& nii) {
    std::filesystem::path p = nii;
    return p.replace_extension(".json");
}

}  // namespace

Volume stack_to_volume(const SliceStack& stack) {
    Volume vol;
    vol.dims = {stack.width(), stack.height(), static_cast<int>(stack.slices.size())};
    vol.spacing = Vec3(stack.in_plane_spacing, stack.in_plane_spacing, stack.slice_pitch());
    vol.origin = stack.origin;
    vol.direction = stack.axes;
    vol.data.reserve(vol.voxel_count());
    for (const Image2D& img : stack.slices) vol.data.insert(vol.data.end(), img.data.begin(), img.data.end());
    return vol;
}

std::string stack_sidecar_json(const SliceStack& stack) {
    Json axes = Json::array();
    for (int c = 0; c < 3; ++c) axes.push_back(vec_json(stack.axes.col(c), 3));
    Json j = {{"orientation", std::string(to_string(stack.orientation))},
              {"in_plane_spacing_mm", stack.in_plane_spacing},
              {"slice_thickness_mm", stack.slice_thickness},
              {"slice_gap_mm", stack.slice_gap},
              {"origin_mm", vec_json(stack.origin, 3)},
              {"axes", axes},
              {"slices", stack.slices.size()},
              {"true_motion", motions_json(stack.true_motion)},
              {"estimated_motion", motions_json(stack.estimated_motion)}};
    return j.dump(2) + "\n";
}

void write_stack(const std::filesystem::path& nii_path, const SliceStack& stack) {
    stack.validate();
    write_volume(nii_path, stack_to_volume(stack));
    write_file_atomic(sidecar_path(nii_path), stack_sidecar_json(stack));
}

SliceStack read_stack(const std::filesystem::path& nii_path) {
    const Volume vol = read_volume(nii_path);
    Json j;
    try {
        j = Json::parse(read_file(sidecar_path(nii_path)));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ParseError, "stack sidecar for " + nii_path.string() + ": " + e.what());
    }
    SliceStack st;
    try {
        st.orientation = orientation_from_string(j.at("orientation").get<std::string>());
        st.in_plane_spacing = j.at("in_plane_spacing_mm").get<double>();
        st.slice_thickness = j.at("slice_thickness_mm").get<double>();
        st.slice_gap = j.at("slice_gap_mm").get<double>();
        st.origin = json_vec<Vec3>(j.at("origin_mm"), 3);
        for (int c = 0; c < 3; ++c) st.axes.col(c) = json_vec<Vec3>(j.at("axes").at(c), 3);
        st.true_motion = json_motions(j.at("true_motion"));
        st.estimated_motion = json_motions(j.at("estimated_motion"));
        if (j.at("slices").get<int>() != vol.dims[2]) {
            throw Error(ErrorCode::GeometryMismatch, "sidecar slice count disagrees with " + nii_path.string());
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::ParseError, "stack sidecar for " + nii_path.string() + ": " + e.what());
    }
    for (int k = 0; k < vol.dims[2]; ++k) {
        Image2D img(vol.dims[0], vol.dims[1]);
        const auto begin = vol.data.begin() + static_cast<std::ptrdiff_t>(k) * vol.dims[0] * vol.dims[1];
        std::copy(begin, begin + static_cast<std::ptrdiff_t>(img.size()), img.data.begin());
        st.slices.push_back(std::move(img));
    }
    for (const auto* motion : {&st.true_motion, &st.estimated_motion}) {
        if (!motion->empty() && motion->size() != st.slices.size()) {
            throw Error(ErrorCode::GeometryMismatch, "motion list length differs from slice count");
        }
    }
    st.validate();
    return st;
}

std::vector<ManifestEntry> write_manifest(const std::filesystem::path& dir, std::vector<std::string> files) {
    std::sort(files.begin(), files.end());
    std::vector<ManifestEntry> entries;
    std::string text;
    for (const std::string& f : files) {
        const std::string bytes = read_file(dir / f);
        ManifestEntry e{f, sha256_hex(bytes), bytes.size()};
        text += e.sha256 + "  " + std::to_string(e.bytes) + "  " + e.file + "\n";
        entries.push_back(std::move(e));
    }
    write_file_atomic(dir / "manifest.txt", text);
    return entries;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
    std::istringstream in(read_file(dir / "manifest.txt"));
    std::vector<ManifestEntry> entries;
    ManifestEntry e;
    while (in >> e.sha256 >> e.bytes >> e.file) entries.push_back(e);
    return entries;
}

}  // namespace mgs
