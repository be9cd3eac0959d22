#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vaxopt/model.hpp"
#include "vaxopt/policy.hpp"

namespace vaxopt {

/// Uniform time grid. The step must divide one day so that every step lies inside one day.
struct GridSpec {
    double t0 = 0.0;
    double tf = 0.0;
    double step = 1.0;

    static GridSpec daily(double tf) { return GridSpec{0.0, tf, 1.0}; }

    void validate() const;
    std::size_t n_steps() const;
    double time(std::size_t node) const { return t0 + step * static_cast<double>(node); }
    /// Calendar day whose controls apply during step n.
    long day_of_step(std::size_t n) const;
    /// Node index of an integer day, or npos-like sentinel if the day is not on the grid.
    std::size_t node_of_day(long day) const;

    bool operator==(const GridSpec&) const = default;
};

/// Values on a grid plus per-step endpoint values and slopes, so that any time can be recovered
/// by cubic Hermite interpolation. Step endpoints are stored separately to allow jumps at nodes.
class DenseHistory {
public:
    DenseHistory() = default;
    DenseHistory(GridSpec grid, std::size_t dim);

    const GridSpec& grid() const { return grid_; }
    std::size_t dim() const { return dim_; }
    std::size_t n_steps() const { return n_steps_; }

    /// Value at a node (right limit for interior nodes with a jump).
    std::span<const double> node(std::size_t k) const;

    void set_step(std::size_t n, std::span<const double> y0, std::span<const double> y1,
                  std::span<const double> m0, std::span<const double> m1);

    /// Times before t0 return the t0 value; times after tf are an error.
    void interpolate(double t, std::span<double> out) const;
    double interpolate(double t, std::size_t component) const;
    /// Hermite value inside step n at local coordinate theta in [0, 1]. Unlike interpolate,
    /// theta = 0 and theta = 1 select this step's own one-sided limits at its end nodes.
    void interpolate_step(std::size_t n, double theta, std::span<double> out) const;

    std::span<const double> step_start(std::size_t n) const { return {&y0_[n * dim_], dim_}; }
    std::span<const double> step_end(std::size_t n) const { return {&y1_[n * dim_], dim_}; }
    std::span<const double> slope_start(std::size_t n) const { return {&m0_[n * dim_], dim_}; }
    std::span<const double> slope_end(std::size_t n) const { return {&m1_[n * dim_], dim_}; }

private:
    std::size_t locate(double t, double& theta) const;

    GridSpec grid_{};
    std::size_t dim_ = 0;
    std::size_t n_steps_ = 0;
    std::vector<double> y0_, y1_, m0_, m1_;
};

/// Forward solution of the epidemic model on a grid, with the policy that produced it.
struct Trajectory {
    DenseHistory history;
    std::size_t n_ages = 0;
    DosingPolicy policy;

    const GridSpec& grid() const { return history.grid(); }
    std::size_t n_nodes() const { return history.n_steps() + 1; }
    EpiState state(std::size_t node) const;
    double value(std::size_t node, std::size_t age, Compartment c) const {
        return history.node(node)[age * kCompartments + c];
    }
    /// Compartment series over all nodes for one age class.
    std::vector<double> series(std::size_t age, Compartment c) const;
    /// Node indices that fall on integer days, in order.
    std::vector<std::size_t> daily_nodes() const;
};

}  // namespace vaxopt
