#pragma once

// Independent reference computations used by unit and acceptance tests.

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "vaxopt/policy.hpp"

namespace oracle {

/// Linear inequality description A x <= b of the dose polytope for a policy skeleton.
struct Polytope {
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
};

inline Polytope dose_polytope(const vaxopt::DosingPolicy& skel) {
    const auto n = static_cast<Eigen::Index>(skel.n_ages * skel.n_weeks);
    const auto weeks = static_cast<Eigen::Index>(skel.n_weeks);
    Polytope p{Eigen::MatrixXd::Zero(n + weeks, n), Eigen::VectorXd::Zero(n + weeks)};
    for (Eigen::Index k = 0; k < n; ++k) p.a(k, k) = -1.0;
    const auto shift = static_cast<std::size_t>(skel.delta_w / 7);
    for (std::size_t j = 0; j < skel.n_weeks; ++j) {
        const auto row = n + static_cast<Eigen::Index>(j);
        double ur = 0.0;
        for (std::size_t i = 0; i < skel.n_ages; ++i) {
            p.a(row, static_cast<Eigen::Index>(i * skel.n_weeks + j)) += 1.0;
            if (j >= shift) p.a(row, static_cast<Eigen::Index>(i * skel.n_weeks + j - shift)) += 1.0;
            ur += skel.recovered(i, j);
        }
        p.b(row) = skel.weekly_cap(j) / 7.0 - ur;
    }
    return p;
}

/// Exact Euclidean projection onto {A x <= b} by enumerating every active set. Each candidate
/// solves the equality-constrained least-squares problem through its KKT system; the closest
/// feasible candidate is the projection. Only usable for a dozen constraints or so.
inline Eigen::VectorXd qp_project(const Eigen::VectorXd& v, const Polytope& poly) {
    const auto m = poly.a.rows();
    const auto n = poly.a.cols();
    Eigen::VectorXd best = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    double best_dist = std::numeric_limits<double>::infinity();
    const double scale = std::max(1.0, poly.b.cwiseAbs().maxCoeff());
    for (unsigned long mask = 0; mask < (1ul << m); ++mask) {
        std::vector<Eigen::Index> act;
        for (Eigen::Index r = 0; r < m; ++r)
            if (mask & (1ul << r)) act.push_back(r);
        const auto k = static_cast<Eigen::Index>(act.size());
        if (k > n) continue;
        Eigen::VectorXd x;
        if (k == 0) {
            x = v;
        } else {
            Eigen::MatrixXd ae(k, n);
            Eigen::VectorXd be(k);
            for (Eigen::Index r = 0; r < k; ++r) {
                ae.row(r) = poly.a.row(act[static_cast<std::size_t>(r)]);
                be(r) = poly.b(act[static_cast<std::size_t>(r)]);
            }
            // x = v - A^T mu with A A^T mu = A v - b.
            const Eigen::MatrixXd gram = ae * ae.transpose();
            Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
            if (lu.rank() < k) continue;
            const Eigen::VectorXd mu = lu.solve(ae * v - be);
            x = v - ae.transpose() * mu;
        }
        if (((poly.a * x - poly.b).array() > 1e-10 * scale).any()) continue;
        const double d = (x - v).squaredNorm();
        if (d < best_dist) {
            best_dist = d;
            best = x;
        }
    }
    return best;
}

}  // namespace oracle
