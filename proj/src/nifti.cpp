#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "mgs/error.hpp"
#include "mgs/io.hpp"

namespace mgs {

static_assert(std::endian::native == std::endian::little, "NIfTI io assumes a little-endian host");

namespace {

constexpr int kHeaderSize = 348;
constexpr int kExtensionCode = 0;  // NIFTI_ECODE_IGNORE: other readers skip it
constexpr char kExtensionTag[8] = {'M', 'G', 'S', 'A', 'F', 'F', '6', '4'};
// esize/ecode, tag, spacing + origin + direction as doubles, padding to a multiple of 16
constexpr int kExtensionSize = 8 + 8 + 15 * 8 + 8;

template <class T>
T get(std::string_view bytes, std::size_t offset) {
    T v;
    std::memcpy(&v, bytes.data() + offset, sizeof(T));
    return v;
}

template <class T>
void put(std::string& bytes, std::size_t offset, T v) {
    std::memcpy(bytes.data() + offset, &v, sizeof(T));
}

std::string datatype_name(short code) {
    switch (code) {
        case 2: return "UINT8";
        case 4: return "INT16";
        case 8: return "INT32";
        case 16: return "FLOAT32";
        case 64: return "FLOAT64";
        case 256: return "INT8";
        case 512: return "UINT16";
        case 768: return "UINT32";
        default: return "unknown";
    }
}

}  // namespace

Volume parse_volume(std::string_view bytes) {
    if (bytes.size() < static_cast<std::size_t>(kHeaderSize)) {
        throw Error(ErrorCode::TruncatedPayload, "file holds " + std::to_string(bytes.size()) +
                                                     " bytes, less than a NIfTI-1 header");
    }
    const int sizeof_hdr = get<int>(bytes, 0);
    if (sizeof_hdr != kHeaderSize) {
        if (static_cast<int>(__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr))) == kHeaderSize) {
            throw Error(ErrorCode::EndianMismatch, "big-endian NIfTI files are not supported");
        }
        throw Error(ErrorCode::BadMagic, "sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348");
    }
    if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0) {
        throw Error(ErrorCode::BadMagic, "magic is not \"n+1\"; only single-file NIfTI-1 is supported");
    }

    short dim[8];
    for (int i = 0; i < 8; ++i) dim[i] = get<short>(bytes, 40 + 2 * i);
    if (dim[0] < 1 || dim[0] > 7) throw Error(ErrorCode::BadMagic, "dim[0] = " + std::to_string(dim[0]));
    for (int i = 4; i <= dim[0]; ++i) {
        if (dim[i] != 1) throw Error(ErrorCode::GeometryMismatch, "only 3D volumes are supported");
    }
    Volume vol;
    for (int a = 0; a < 3; ++a) {
        vol.dims[a] = a < dim[0] ? dim[a + 1] : 1;
        if (vol.dims[a] < 1) throw Error(ErrorCode::GeometryMismatch, "non-positive dimension in header");
    }

    const short datatype = get<short>(bytes, 70);
    if (datatype != kNiftiFloat32 && datatype != kNiftiUint16) {
        throw Error(ErrorCode::UnsupportedDatatype, "datatype " + std::to_string(datatype) + " (" +
                                                        datatype_name(datatype) +
                                                        "); only FLOAT32 (16) and UINT16 (512) are supported");
    }
    const std::size_t elem = datatype == kNiftiFloat32 ? 4 : 2;
    const auto vox_offset = static_cast<std::size_t>(get<float>(bytes, 108));
    const std::size_t n = vol.voxel_count();
    if (vox_offset < static_cast<std::size_t>(kHeaderSize) || bytes.size() < vox_offset + n * elem) {
        throw Error(ErrorCode::TruncatedPayload, "payload needs " + std::to_string(n * elem) + " bytes at offset " +
                                                     std::to_string(vox_offset) + ", file has " +
                                                     std::to_string(bytes.size()));
    }

    Affine3x4 aff;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) aff(r, c) = get<float>(bytes, 280 + 16 * r + 4 * c);
    if (get<short>(bytes, 254) <= 0) {
        // no sform: fall back to pixdim scaling
        aff.setZero();
        for (int a = 0; a < 3; ++a) aff(a, a) = std::abs(get<float>(bytes, 80 + 4 * a)) > 0 ? get<float>(bytes, 80 + 4 * a) : 1.0;
    }
    vol.set_affine(aff);
    // Exact double geometry, when present and consistent with srow.
    if (bytes.size() >= 352 && bytes[348] != 0 && vox_offset >= static_cast<std::size_t>(352 + kExtensionSize)) {
        const int esize = get<int>(bytes, 352);
        const int ecode = get<int>(bytes, 356);
        if (esize == kExtensionSize && ecode == kExtensionCode &&
            std::memcmp(bytes.data() + 360, kExtensionTag, 8) == 0) {
            Volume exact;
            double v[15];
            for (int i = 0; i < 15; ++i) v[i] = get<double>(bytes, 368 + 8 * i);
            exact.spacing = Vec3(v[0], v[1], v[2]);
            exact.origin = Vec3(v[3], v[4], v[5]);
            for (int i = 0; i < 9; ++i) exact.direction(i % 3, i / 3) = v[6 + i];
            const Affine3x4 ea = exact.affine();
            bool consistent = true;
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 4; ++c) consistent = consistent && static_cast<float>(ea(r, c)) == static_cast<float>(aff(r, c));
            if (consistent) {
                vol.spacing = exact.spacing;
                vol.origin = exact.origin;
                vol.direction = exact.direction;
            }
        }
    }

    float slope = get<float>(bytes, 112);
    float inter = get<float>(bytes, 116);
    const bool scaled = slope != 0.0f && std::isfinite(slope) && (slope != 1.0f || inter != 0.0f);
    vol.data.resize(n);
    const char* src = bytes.data() + vox_offset;
    if (datatype == kNiftiFloat32) {
        std::memcpy(vol.data.data(), src, n * 4);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint16_t v;
            std::memcpy(&v, src + 2 * i, 2);
            vol.data[i] = static_cast<float>(v);
        }
    }
    if (scaled) {
        for (float& v : vol.data) v = v * slope + inter;
    }
    return vol;
}

Volume read_volume(const std::filesystem::path& path) { return parse_volume(read_file(path)); }

std::string serialize_volume(const Volume& vol) {
    for (int a = 0; a < 3; ++a) {
        if (vol.dims[a] < 1 || vol.dims[a] > 32767) {
            throw Error(ErrorCode::GeometryMismatch, "dimension " + std::to_string(vol.dims[a]) + " cannot be stored");
        }
    }
    if (vol.data.size() != vol.voxel_count()) throw Error(ErrorCode::ShapeMismatch, "volume data length mismatch");

    const std::size_t vox_offset = 352 + kExtensionSize;
    std::string bytes(vox_offset + 4 * vol.data.size(), '\0');
    put<int>(bytes, 0, kHeaderSize);
    put<char>(bytes, 38, 'r');
    put<short>(bytes, 40, 3);
    for (int a = 0; a < 3; ++a) put<short>(bytes, 42 + 2 * a, static_cast<short>(vol.dims[a]));
    for (int i = 4; i < 8; ++i) put<short>(bytes, 40 + 2 * i, 1);
    put<short>(bytes, 70, kNiftiFloat32);
    put<short>(bytes, 72, 32);
    put<float>(bytes, 76, 1.0f);
    for (int a = 0; a < 3; ++a) put<float>(bytes, 80 + 4 * a, static_cast<float>(vol.spacing[a]));
    put<float>(bytes, 108, static_cast<float>(vox_offset));
    put<float>(bytes, 112, 1.0f);
    put<char>(bytes, 123, 2);  // mm
    put<short>(bytes, 254, 1);  // sform: scanner anatomical
    const Affine3x4 aff = vol.affine();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) put<float>(bytes, 280 + 16 * r + 4 * c, static_cast<float>(aff(r, c)));
    std::memcpy(bytes.data() + 344, "n+1\0", 4);

    bytes[348] = 1;
    put<int>(bytes, 352, kExtensionSize);
    put<int>(bytes, 356, kExtensionCode);
    std::memcpy(bytes.data() + 360, kExtensionTag, 8);
    for (int a = 0; a < 3; ++a) put<double>(bytes, 368 + 8 * a, vol.spacing[a]);
    for (int a = 0; a < 3; ++a) put<double>(bytes, 392 + 8 * a, vol.origin[a]);
    for (int i = 0; i < 9; ++i) put<double>(bytes, 416 + 8 * i, vol.direction(i % 3, i / 3));

    std::memcpy(bytes.data() + vox_offset, vol.data.data(), 4 * vol.data.size());
    return bytes;
}

void write_volume(const std::filesystem::path& path, const Volume& vol) {
    for (float v : vol.data) {
        if (!std::isfinite(v)) throw Error(ErrorCode::ShapeMismatch, "refusing to write non-finite voxel data");
    }
    write_file_atomic(path, serialize_volume(vol));
}

}  // namespace mgs
