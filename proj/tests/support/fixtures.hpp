#pragma once

#include "mgs/config.hpp"
#include "mgs/pipeline.hpp"

namespace fixture {

/// Small but complete run: 24^3 phantom, three stacks, a 4 -> 6 lattice.
inline mgs::RunConfig tiny_config() {
    mgs::RunConfig c;
    c.sim.phantom_size = 24;
    c.sim.slice_thickness = 2.0;
    c.sim.motion_sigma = 0.5;
    c.sim.noise_sigma = 0.01;
    c.train.resolution_schedule = {{0, 6}, {4, 8}};
    c.train.total_iters = 10;
    c.train.nrf_activation_iter = 6;
    c.train.batch_points = 512;
    c.train.seed = 3;
    return c;
}

struct TinyData {
    mgs::Simulation sim;
    mgs::Dataset data;
};

inline const TinyData& tiny_data() {
    static const TinyData d = [] {
        TinyData t;
        t.sim = mgs::simulate(tiny_config());
        t.data = mgs::devoxelize(t.sim.stacks);
        return t;
    }();
    return d;
}

}  // namespace fixture
