#include "mgs/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <map>

#include "mgs/config.hpp"
#include "mgs/io.hpp"

namespace mgs {

namespace {

class Writer {
public:
    Writer() { out_.append(kCheckpointMagic, 8); }

    void f64(std::string_view tag, std::span<const double> v) { record(tag, 'F', v.size(), v.data(), 8 * v.size()); }
    void i64(std::string_view tag, std::span<const std::int64_t> v) {
        record(tag, 'I', v.size(), v.data(), 8 * v.size());
    }
    void i64(std::string_view tag, std::int64_t v) { i64(tag, std::span<const std::int64_t>(&v, 1)); }
    void str(std::string_view tag, std::string_view s) { record(tag, 'S', s.size(), s.data(), s.size()); }

    std::string take() { return std::move(out_); }

private:
    template <class T>
    void raw(T v) {
        out_.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void record(std::string_view tag, char type, std::uint64_t count, const void* data, std::size_t bytes) {
        raw(static_cast<std::uint32_t>(tag.size()));
        out_.append(tag);
        out_.push_back(type);
        raw(count);
        out_.append(static_cast<const char*>(data), bytes);
    }

    std::string out_;
};

struct Record {
    char type = 0;
    std::uint64_t count = 0;
    std::string_view payload;
};

std::map<std::string, Record, std::less<>> read_records(std::string_view bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
        throw Error(ErrorCode::BadMagic, "not an MGSS0001 checkpoint");
    }
    std::map<std::string, Record, std::less<>> records;
    std::size_t pos = 8;
    auto need = [&](std::size_t n) {
        if (bytes.size() - pos < n) throw Error(ErrorCode::TruncatedPayload, "checkpoint ends inside a record");
    };
    while (pos < bytes.size()) {
        std::uint32_t tag_len;
        need(4);
        std::memcpy(&tag_len, bytes.data() + pos, 4);
        pos += 4;
        need(tag_len + 9);
        std::string tag(bytes.substr(pos, tag_len));
        pos += tag_len;
        Record r;
        r.type = bytes[pos++];
        std::memcpy(&r.count, bytes.data() + pos, 8);
        pos += 8;
        const std::size_t width = r.type == 'S' ? 1 : 8;
        if (r.type != 'F' && r.type != 'I' && r.type != 'S') {
            throw Error(ErrorCode::ParseError, "record \"" + tag + "\" has unknown type");
        }
        if (r.count > (bytes.size() - pos) / width) throw Error(ErrorCode::TruncatedPayload, "record \"" + tag + "\" is cut short");
        r.payload = bytes.substr(pos, r.count * width);
        pos += r.count * width;
        records[tag] = r;
    }
    return records;
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : records_(read_records(bytes)) {}

    const Record& get(std::string_view tag, char type) const {
        const auto it = records_.find(tag);
        if (it == records_.end()) throw Error(ErrorCode::ParseError, "checkpoint lacks record \"" + std::string(tag) + "\"");
        if (it->second.type != type) {
            throw Error(ErrorCode::ParseError, "checkpoint record \"" + std::string(tag) + "\" has the wrong type");
        }
        return it->second;
    }
    std::vector<double> f64(std::string_view tag) const {
        const Record& r = get(tag, 'F');
        std::vector<double> v(r.count);
        std::memcpy(v.data(), r.payload.data(), r.payload.size());
        return v;
    }
    std::vector<std::int64_t> i64s(std::string_view tag) const {
        const Record& r = get(tag, 'I');
        std::vector<std::int64_t> v(r.count);
        std::memcpy(v.data(), r.payload.data(), r.payload.size());
        return v;
    }
    std::int64_t i64(std::string_view tag) const {
        const auto v = i64s(tag);
        if (v.size() != 1) throw Error(ErrorCode::ParseError, "record \"" + std::string(tag) + "\" is not a scalar");
        return v[0];
    }
    std::string str(std::string_view tag) const { return std::string(get(tag, 'S').payload); }
    bool has(std::string_view tag) const { return records_.find(tag) != records_.end(); }

private:
    std::map<std::string, Record, std::less<>> records_;
};

void write_adam(Writer& w, const std::string& name, const AdamState& s) {
    w.f64("adam." + name + ".m", s.m);
    w.f64("adam." + name + ".v", s.v);
    w.i64("adam." + name + ".step", s.step);
}

AdamState read_adam(const Reader& r, const std::string& name) {
    AdamState s;
    s.m = r.f64("adam." + name + ".m");
    s.v = r.f64("adam." + name + ".v");
    s.step = r.i64("adam." + name + ".step");
    return s;
}

}  // namespace

std::string serialize_checkpoint(const TrainState& state) {
    Writer w;
    RunConfig rc;
    rc.train = state.config;
    w.str("config", to_config_text(rc));
    w.i64("iteration", state.iteration);
    w.i64("params_per_primitive", kParamsPerPrimitive);

    const GaussianField& f = state.field;
    w.i64("field.count", static_cast<std::int64_t>(f.size()));
    const std::int64_t dims[3] = {f.lattice_dims[0], f.lattice_dims[1], f.lattice_dims[2]};
    w.i64("field.lattice_dims", dims);
    std::vector<std::int64_t> lattice;
    lattice.reserve(3 * f.size());
    for (const Index3& li : f.lattice_index) lattice.insert(lattice.end(), {li[0], li[1], li[2]});
    w.i64("field.lattice_index", lattice);
    w.f64("field.positions", f.positions);
    w.f64("field.quaternions", f.quaternions);
    w.f64("field.log_scales", f.log_scales);
    w.f64("field.intensity_logits", f.intensity_logits);

    const ResidualField& nrf = state.residual;
    if (nrf.is_initialized()) {
        const auto& widths = nrf.layer_widths();
        const std::int64_t meta[3] = {nrf.frequency_bands(), widths.size() > 2 ? widths[1] : 0,
                                      static_cast<std::int64_t>(widths.size()) - 2};
        w.i64("nrf.shape", meta);
        const double bound = nrf.output_bound();
        w.f64("nrf.bound", std::span<const double>(&bound, 1));
        w.f64("nrf.params", nrf.parameters());
    }

    std::vector<double> tparams;
    std::vector<std::int64_t> tids;
    for (const RigidTransform& t : state.transforms) {
        tparams.insert(tparams.end(), {t.rotation_quat[0], t.rotation_quat[1], t.rotation_quat[2], t.rotation_quat[3],
                                       t.translation[0], t.translation[1], t.translation[2]});
        tids.push_back(t.slice_id);
    }
    w.f64("transforms.params", tparams);
    w.i64("transforms.slice_ids", tids);

    const OptimizerState& o = state.optimizer;
    write_adam(w, "position", o.position);
    write_adam(w, "rotation", o.rotation);
    write_adam(w, "scale", o.scale);
    write_adam(w, "intensity", o.intensity);
    write_adam(w, "transform", o.transform);
    write_adam(w, "nrf", o.nrf);
    return w.take();
}

TrainState parse_checkpoint(std::string_view bytes) {
    const Reader r(bytes);
    TrainState s;
    s.config = parse_config(r.str("config")).train;
    s.iteration = static_cast<int>(r.i64("iteration"));
    if (r.i64("params_per_primitive") != kParamsPerPrimitive) {
        throw Error(ErrorCode::ShapeMismatch, "checkpoint stores a different primitive layout");
    }

    GaussianField& f = s.field;
    const auto n = static_cast<std::size_t>(r.i64("field.count"));
    const auto dims = r.i64s("field.lattice_dims");
    if (dims.size() != 3) throw Error(ErrorCode::ParseError, "field.lattice_dims must hold 3 values");
    f.lattice_dims = {static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2])};
    const auto lattice = r.i64s("field.lattice_index");
    if (lattice.size() != 3 * n) throw Error(ErrorCode::ShapeMismatch, "field.lattice_index length mismatch");
    f.lattice_index.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.lattice_index[i] = {static_cast<int>(lattice[3 * i]), static_cast<int>(lattice[3 * i + 1]),
                              static_cast<int>(lattice[3 * i + 2])};
    }
    f.positions = r.f64("field.positions");
    f.quaternions = r.f64("field.quaternions");
    f.log_scales = r.f64("field.log_scales");
    f.intensity_logits = r.f64("field.intensity_logits");
    f.validate();

    if (r.has("nrf.params")) {
        const auto meta = r.i64s("nrf.shape");
        if (meta.size() != 3) throw Error(ErrorCode::ParseError, "nrf.shape must hold 3 values");
        const auto bound = r.f64("nrf.bound");
        if (bound.size() != 1) throw Error(ErrorCode::ParseError, "nrf.bound must be a scalar");
        s.residual = ResidualField::from_parameters(static_cast<int>(meta[0]), static_cast<int>(meta[1]),
                                                   static_cast<int>(meta[2]), bound[0], r.f64("nrf.params"));
    }

    const auto tparams = r.f64("transforms.params");
    const auto tids = r.i64s("transforms.slice_ids");
    if (tparams.size() != kTransformParams * tids.size()) {
        throw Error(ErrorCode::ShapeMismatch, "transform records disagree in length");
    }
    for (std::size_t k = 0; k < tids.size(); ++k) {
        const double* p = tparams.data() + kTransformParams * k;
        RigidTransform t;
        t.rotation_quat = Quat4(p[0], p[1], p[2], p[3]);
        t.translation = Vec3(p[4], p[5], p[6]);
        t.slice_id = static_cast<int>(tids[k]);
        s.transforms.push_back(t);
    }

    OptimizerState& o = s.optimizer;
    o.position = read_adam(r, "position");
    o.rotation = read_adam(r, "rotation");
    o.scale = read_adam(r, "scale");
    o.intensity = read_adam(r, "intensity");
    o.transform = read_adam(r, "transform");
    o.nrf = read_adam(r, "nrf");
    return s;
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
    write_file_atomic(path, serialize_checkpoint(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

long long checkpoint_params_per_primitive(std::string_view bytes) {
    return Reader(bytes).i64("params_per_primitive");
}

}  // namespace mgs
