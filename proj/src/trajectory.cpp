#include "vaxopt/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vaxopt/errors.hpp"

namespace vaxopt {

void GridSpec::validate() const {
    if (!(tf > t0)) throw InvalidArgument("grid needs tf > t0");
    if (!(step > 0.0) || step > 1.0) throw InvalidArgument("grid step must lie in (0, 1] days");
    const double per_day = 1.0 / step;
    if (std::abs(per_day - std::round(per_day)) > 1e-9)
        throw InvalidArgument("grid step must divide one day");
    const double steps = (tf - t0) / step;
    if (std::abs(steps - std::round(steps)) > 1e-9)
        throw InvalidArgument("(tf - t0) / step must be integral");
    if (std::abs(t0 - std::round(t0)) > 1e-12) throw InvalidArgument("t0 must be an integer day");
}

std::size_t GridSpec::n_steps() const {
    return static_cast<std::size_t>(std::llround((tf - t0) / step));
}

long GridSpec::day_of_step(std::size_t n) const {
    return static_cast<long>(std::floor(time(n) + 1e-9));
}

std::size_t GridSpec::node_of_day(long day) const {
    const double k = (static_cast<double>(day) - t0) / step;
    const double kr = std::round(k);
    if (std::abs(k - kr) > 1e-9 || kr < 0.0 || kr > static_cast<double>(n_steps()))
        return std::numeric_limits<std::size_t>::max();
    return static_cast<std::size_t>(kr);
}

DenseHistory::DenseHistory(GridSpec grid, std::size_t dim)
    : grid_(grid), dim_(dim), n_steps_(grid.n_steps()),
      y0_(n_steps_ * dim, 0.0), y1_(n_steps_ * dim, 0.0), m0_(n_steps_ * dim, 0.0),
      m1_(n_steps_ * dim, 0.0) {}

std::span<const double> DenseHistory::node(std::size_t k) const {
    if (k < n_steps_) return step_start(k);
    if (k == n_steps_ && n_steps_ > 0) return step_end(n_steps_ - 1);
    throw InvalidArgument("history node out of range");
}

void DenseHistory::set_step(std::size_t n, std::span<const double> y0, std::span<const double> y1,
                            std::span<const double> m0, std::span<const double> m1) {
    std::copy(y0.begin(), y0.end(), y0_.begin() + static_cast<std::ptrdiff_t>(n * dim_));
    std::copy(y1.begin(), y1.end(), y1_.begin() + static_cast<std::ptrdiff_t>(n * dim_));
    std::copy(m0.begin(), m0.end(), m0_.begin() + static_cast<std::ptrdiff_t>(n * dim_));
    std::copy(m1.begin(), m1.end(), m1_.begin() + static_cast<std::ptrdiff_t>(n * dim_));
}

std::size_t DenseHistory::locate(double t, double& theta) const {
    if (t <= grid_.t0) {
        theta = 0.0;
        return 0;
    }
    const double tol = 1e-9 * grid_.step;
    if (t > grid_.tf + tol) throw InvalidArgument("history lookup beyond final time");
    const double pos = (t - grid_.t0) / grid_.step;
    auto n = static_cast<std::size_t>(std::floor(pos));
    if (n >= n_steps_) n = n_steps_ - 1;
    theta = std::clamp(pos - static_cast<double>(n), 0.0, 1.0);
    return n;
}

void DenseHistory::interpolate(double t, std::span<double> out) const {
    double th = 0.0;
    const std::size_t n = locate(t, th);
    interpolate_step(n, th, out);
}

void DenseHistory::interpolate_step(std::size_t n, double th, std::span<double> out) const {
    if (n >= n_steps_) throw InvalidArgument("history step out of range");
    const double* a = &y0_[n * dim_];
    if (th == 0.0) {
        std::copy(a, a + dim_, out.begin());
        return;
    }
    const double* b = &y1_[n * dim_];
    if (th == 1.0) {
        std::copy(b, b + dim_, out.begin());
        return;
    }
    const double* ma = &m0_[n * dim_];
    const double* mb = &m1_[n * dim_];
    const double h = grid_.step;
    const double t2 = th * th, t3 = t2 * th;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + th;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    for (std::size_t c = 0; c < dim_; ++c)
        out[c] = h00 * a[c] + h10 * h * ma[c] + h01 * b[c] + h11 * h * mb[c];
}

double DenseHistory::interpolate(double t, std::size_t c) const {
    double th = 0.0;
    const std::size_t n = locate(t, th);
    const std::size_t k = n * dim_ + c;
    if (th == 0.0) return y0_[k];
    if (th == 1.0) return y1_[k];
    const double h = grid_.step;
    const double t2 = th * th, t3 = t2 * th;
    return (2 * t3 - 3 * t2 + 1) * y0_[k] + (t3 - 2 * t2 + th) * h * m0_[k] +
           (-2 * t3 + 3 * t2) * y1_[k] + (t3 - t2) * h * m1_[k];
}

EpiState Trajectory::state(std::size_t node) const {
    auto v = history.node(node);
    return EpiState(n_ages, std::vector<double>(v.begin(), v.end()));
}

std::vector<double> Trajectory::series(std::size_t age, Compartment c) const {
    std::vector<double> out(n_nodes());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = value(k, age, c);
    return out;
}

std::vector<std::size_t> Trajectory::daily_nodes() const {
    std::vector<std::size_t> nodes;
    const auto& g = grid();
    const long first = static_cast<long>(std::ceil(g.t0 - 1e-9));
    const long last = static_cast<long>(std::floor(g.tf + 1e-9));
    for (long d = first; d <= last; ++d) {
        const std::size_t k = g.node_of_day(d);
        if (k != std::numeric_limits<std::size_t>::max()) nodes.push_back(k);
    }
    return nodes;
}

}  // namespace vaxopt
