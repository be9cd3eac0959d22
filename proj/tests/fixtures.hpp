#pragma once

#include <vector>

#include "vaxopt/trajectory.hpp"

namespace fixture {

// Piecewise-linear trajectory through the given daily node values.
inline vaxopt::Trajectory table_trajectory(std::size_t n_ages, const std::vector<std::vector<double>>& nodes) {
    using namespace vaxopt;
    const GridSpec grid = GridSpec::daily(static_cast<double>(nodes.size() - 1));
    Trajectory t;
    t.n_ages = n_ages;
    t.history = DenseHistory(grid, n_ages * kCompartments);
    t.policy = DosingPolicy::zeros(n_ages, 1, {0.0});
    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
        std::vector<double> slope(nodes[k].size());
        for (std::size_t c = 0; c < slope.size(); ++c) slope[c] = nodes[k + 1][c] - nodes[k][c];
        t.history.set_step(k, nodes[k], nodes[k + 1], slope, slope);
    }
    return t;
}

}  // namespace fixture
