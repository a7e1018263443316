#pragma once

#include <optional>
#include <vector>

#include "motionpred/grid_search.hpp"
#include "motionpred/optical_flow.hpp"

namespace motionpred {

struct FlowGrid {
    std::vector<double> sigma_init{0.2, 0.5, 1.0, 2.0};
    std::vector<double> sigma_sub{0.2, 0.5, 1.0, 2.0};
    std::vector<double> sigma_lk{1.0, 2.0, 3.0, 4.0};
    std::vector<int> n_layers{1, 2, 3, 4};
    std::vector<int> n_iter{1, 2, 3};

    std::vector<GridAxis> axes() const {
        auto to_d = [](const std::vector<int>& v) { return std::vector<double>(v.begin(), v.end()); };
        return {{"sigma_init", sigma_init}, {"sigma_sub", sigma_sub}, {"sigma_lk", sigma_lk},
                {"n_layers", to_d(n_layers)}, {"n_iter", to_d(n_iter)}};
    }
};

inline FlowParams flow_params_from(const std::vector<double>& t, FlowParams base = {}) {
    base.sigma_init = t[0];
    base.sigma_sub = t[1];
    base.sigma_lk = t[2];
    base.n_layers = static_cast<int>(t[3]);
    base.n_iter = static_cast<int>(t[4]);
    return base;
}

/// Registers every frame to the first for each tuple and records e_DVF.
/// Tuples whose pyramid does not fit the volume are left invalid. `voxels`
/// restricts the error to a subset of voxel indices (empty = all).
inline GridTable flow_grid_search(const std::vector<Volume3>& seq, const FlowGrid& grid,
                                  const std::vector<std::size_t>& voxels = {}, FlowParams base = {},
                                  int threads = 1) {
    require(seq.size() >= 2, "flow_grid_search needs at least two frames");
    return run_grid(
        grid.axes(), 1,
        [&](const std::vector<double>& t, int) -> std::optional<double> {
            const FlowParams p = flow_params_from(t, base);
            try {
                auto dvfs = register_sequence(seq, p);
                dvfs.erase(dvfs.begin());
                return registration_error(seq, dvfs, voxels);
            } catch (const PyramidTooDeep&) {
                return std::nullopt;
            }
        },
        threads);
}

}  // namespace motionpred
