#pragma once

#include <functional>

#include "nlsdn/harness.hpp"

namespace nlsdn::fx {

inline BoundaryData boundary_fn(const GridPtr& g, const std::function<cplx(double, const Vec3&)>& fn) {
    BoundaryData f(g);
    for (int k = 0; k < g->time_levels(); ++k)
        for (int b = 0; b < f.slots(); ++b) f.at(k, b) = fn(g->time(k), g->coord(g->boundary()[b]));
    return f;
}

inline SpaceTimeField field_fn(const GridPtr& g, const std::function<cplx(double, const Vec3&)>& fn) {
    SpaceTimeField u(g);
    for (int k = 0; k < g->time_levels(); ++k)
        for (int i = 0; i < g->num_nodes(); ++i)
            if (g->type(i) != Grid::NodeType::Inactive) u.at(k, i) = fn(g->time(k), g->coord(i));
    return u;
}

// smooth boundary data vanishing near t = 0 and after t1
inline BoundaryData pulse(const GridPtr& g, double t1, double k1, double k2) {
    return boundary_fn(g, [=](double t, const Vec3& x) {
        double on = smooth_step(t / (0.2 * t1)) * smooth_step((t1 - t) / (0.2 * t1));
        return on * std::exp(cplx(0, k1 * x[0] + k2 * x[1] - 3 * t)) * (1 + 0.3 * x[0] * x[1]);
    });
}

inline Potential bump(double amp, Vec3 c = Vec3(0.5, 0.5, 0), double r = 0.3) {
    return Potential::from_function(
        [=](double, const Vec3& x) { return cplx(amp * smooth_step((r - (x - c).head(2).norm()) / (0.5 * r))); }, true, true,
        std::abs(amp) * (1 + 1e-9));
}

inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double a = std::log(x[i]), b = std::log(y[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace nlsdn::fx
