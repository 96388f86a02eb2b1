#include <algorithm>
#include <cmath>
#include <string>

#include "mgs/train.hpp"

namespace mgs {

Quat4 nlerp(std::span<const Quat4> quats, std::span<const double> weights, const Quat4& reference) {
    const Quat4 ref = reference.normalized();
    Quat4 sum = Quat4::Zero();
    for (std::size_t c = 0; c < quats.size(); ++c) {
        Quat4 q = quats[c].normalized();
        if (q.dot(ref) < 0.0) q = -q;
        sum += weights[c] * q;
    }
    const double n = sum.norm();
    return n > kMinQuaternionNorm ? Quat4(sum / n) : ref;
}

namespace {

struct AxisWeights {
    int base = 0;
    double frac = 0.0;
};

AxisWeights axis_weights(int node, int new_res, int old_res) {
    if (old_res <= 1 || new_res <= 1) return {0, 0.0};
    const double u = static_cast<double>(node) * (old_res - 1) / static_cast<double>(new_res - 1);
    const int base = std::clamp(static_cast<int>(std::floor(u)), 0, old_res - 2);
    return {base, u - base};
}

}  // namespace

GaussianField progressive_upsample(const GaussianField& field, int new_resolution) {
    field.validate();
    const Index3 old_dims = field.lattice_dims;
    for (int a = 0; a < 3; ++a) {
        if (new_resolution < old_dims[a]) {
            throw Error(ErrorCode::ShrinkNotAllowed, "cannot resample a lattice of " + std::to_string(old_dims[a]) +
                                                         " nodes down to " + std::to_string(new_resolution));
        }
    }
    std::vector<std::size_t> lookup(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        const Index3& li = field.lattice_index[i];
        lookup[(static_cast<std::size_t>(li[2]) * old_dims[1] + li[1]) * old_dims[0] + li[0]] = i;
    }
    auto old_at = [&](int x, int y, int z) {
        return lookup[(static_cast<std::size_t>(z) * old_dims[1] + y) * old_dims[0] + x];
    };

    GaussianField out = GaussianField::uniform_lattice({new_resolution, new_resolution, new_resolution});
    std::vector<Quat4> corner_q;
    std::vector<double> corner_w;
    for (std::size_t j = 0; j < out.size(); ++j) {
        const Index3 node = out.lattice_index[j];
        AxisWeights aw[3];
        for (int a = 0; a < 3; ++a) aw[a] = axis_weights(node[a], new_resolution, old_dims[a]);

        corner_q.clear();
        corner_w.clear();
        double logit_acc = 0.0;
        Vec3 scale_acc = Vec3::Zero();
        std::size_t single = 0;
        for (int c = 0; c < 8; ++c) {
            const int off[3] = {c & 1, (c >> 1) & 1, (c >> 2) & 1};
            double w = 1.0;
            for (int a = 0; a < 3; ++a) w *= off[a] ? aw[a].frac : 1.0 - aw[a].frac;
            if (w == 0.0) continue;
            const std::size_t i = old_at(aw[0].base + off[0], aw[1].base + off[1], aw[2].base + off[2]);
            logit_acc += w * field.intensity_logits[i];
            scale_acc += w * field.log_scale(i);
            corner_q.push_back(field.quaternion(i));
            corner_w.push_back(w);
            single = i;
        }
        out.intensity_logits[j] = logit_acc;
        out.set_log_scale(j, scale_acc);
        if (corner_q.size() == 1) {
            out.set_quaternion(j, field.quaternion(single));  // node coincides with an old node
        } else {
            const Quat4 ref = field.quaternion(old_at(aw[0].base, aw[1].base, aw[2].base));
            out.set_quaternion(j, nlerp(corner_q, corner_w, ref));
        }
    }
    return out;
}

GaussianField initialize_field(std::span<const SamplePoint> samples, std::span<const RigidTransform> transforms,
                               int resolution) {
    GaussianField field = GaussianField::uniform_lattice({resolution, resolution, resolution});
    std::vector<double> sum(field.size(), 0.0);
    std::vector<std::size_t> hits(field.size(), 0);
    const std::vector<Vec3> pts = transform_samples(transforms, samples);
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const Index3 c = cell_index(pts[b], resolution);
        const std::size_t i = (static_cast<std::size_t>(c[2]) * resolution + c[1]) * resolution + c[0];
        sum[i] += samples[b].intensity;
        ++hits[i];
    }
    for (std::size_t i = 0; i < field.size(); ++i) {
        field.intensity_logits[i] = hits[i] ? logit(sum[i] / static_cast<double>(hits[i])) : 0.0;
    }
    return field;
}

}  // namespace mgs
