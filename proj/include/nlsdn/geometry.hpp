#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nlsdn/jet.hpp"

namespace nlsdn {

using Vec3 = Eigen::Vector3d;
using cplx = std::complex<double>;

constexpr double kPi = 3.14159265358979323846;

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Axis-aligned box [0,L_0]x...x[0,L_{n-1}] or ball of radius R centred at the origin.
struct Domain {
    enum class Kind { Box, Ball };

    Kind kind = Kind::Box;
    int n = 2;
    std::array<double, 3> lengths{1.0, 1.0, 1.0};
    double radius = 1.0;

    static Domain box(std::vector<double> L) {
        if (L.size() < 2 || L.size() > 3) throw GeometryError("box dimension must be 2 or 3");
        Domain d;
        d.kind = Kind::Box;
        d.n = static_cast<int>(L.size());
        for (int i = 0; i < d.n; ++i) {
            if (!(L[i] > 0)) throw GeometryError("box extents must be positive");
            d.lengths[i] = L[i];
        }
        if (d.n == 2) d.lengths[2] = 0.0;
        return d;
    }
    static Domain unit_square() { return box({1.0, 1.0}); }
    static Domain ball(int n, double R) {
        if (n < 2 || n > 3) throw GeometryError("ball dimension must be 2 or 3");
        if (!(R > 0)) throw GeometryError("ball radius must be positive");
        Domain d;
        d.kind = Kind::Ball;
        d.n = n;
        d.radius = R;
        return d;
    }

    double scale() const {
        if (kind == Kind::Ball) return radius;
        double s = 0;
        for (int i = 0; i < n; ++i) s = std::max(s, lengths[i]);
        return s;
    }
    double tol() const { return 1e-9 * scale(); }

    Vec3 lo() const {
        if (kind == Kind::Ball) {
            Vec3 v(-radius, -radius, n == 3 ? -radius : 0.0);
            return v;
        }
        return Vec3::Zero();
    }
    Vec3 hi() const {
        if (kind == Kind::Ball) return Vec3(radius, radius, n == 3 ? radius : 0.0);
        return Vec3(lengths[0], lengths[1], n == 3 ? lengths[2] : 0.0);
    }
    Vec3 center() const { return 0.5 * (lo() + hi()); }
    double diameter() const { return (hi() - lo()).norm(); }
    double volume() const {
        if (kind == Kind::Ball) return n == 2 ? kPi * radius * radius : 4.0 / 3.0 * kPi * radius * radius * radius;
        double v = 1;
        for (int i = 0; i < n; ++i) v *= lengths[i];
        return v;
    }

    // signed distance to the boundary, positive inside
    double dist_to_boundary(const Vec3& x) const {
        if (kind == Kind::Ball) return radius - x.head(n).norm();
        double d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) d = std::min({d, x[i], lengths[i] - x[i]});
        return d;
    }
    bool contains(const Vec3& x, double eps = -1) const {
        if (eps < 0) eps = tol();
        return dist_to_boundary(x) >= -eps;
    }
    bool strictly_inside(const Vec3& x) const { return dist_to_boundary(x) > tol(); }
    bool on_boundary(const Vec3& x) const { return std::abs(dist_to_boundary(x)) <= 1e3 * tol(); }

    // faces of a box are numbered 2*axis + (0 for the low side, 1 for the high side)
    std::vector<int> faces_at(const Vec3& x) const {
        std::vector<int> f;
        if (kind != Kind::Box) return f;
        const double e = 1e3 * tol();
        for (int i = 0; i < n; ++i) {
            if (std::abs(x[i]) <= e) f.push_back(2 * i);
            if (std::abs(x[i] - lengths[i]) <= e) f.push_back(2 * i + 1);
        }
        return f;
    }

    Vec3 outward_normal(const Vec3& x) const {
        if (kind == Kind::Ball) {
            Vec3 v = x;
            if (n == 2) v[2] = 0;
            return v / v.norm();
        }
        auto f = faces_at(x);
        if (f.size() != 1) throw GeometryError("normal undefined at box edges and corners");
        Vec3 v = Vec3::Zero();
        v[f[0] / 2] = (f[0] % 2 == 0) ? -1.0 : 1.0;
        return v;
    }
};

// Tensor grid over the bounding box of the domain, times t_k = k*dt, k = 0..steps.
class Grid {
public:
    enum class NodeType : unsigned char { Inactive, Interior, Boundary };

    Grid(Domain domain, std::vector<int> cells, double T, int steps) : dom_(domain), T_(T), steps_(steps) {
        if (static_cast<int>(cells.size()) != dom_.n) throw GeometryError("cell count per axis must match dimension");
        if (!(T > 0) || steps < 1) throw GeometryError("horizon and step count must be positive");
        Vec3 lo = dom_.lo(), hi = dom_.hi();
        for (int d = 0; d < 3; ++d) {
            if (d < dom_.n) {
                if (cells[d] < 4) throw GeometryError("at least 4 cells per axis required");
                cells_[d] = cells[d];
                dims_[d] = cells[d] + 1;
                dx_[d] = (hi[d] - lo[d]) / cells[d];
            } else {
                cells_[d] = 0;
                dims_[d] = 1;
                dx_[d] = 1.0;
            }
        }
        lo_ = lo;
        dt_ = T / steps;
        build();
    }

    const Domain& domain() const { return dom_; }
    int n() const { return dom_.n; }
    double T() const { return T_; }
    int steps() const { return steps_; }
    int time_levels() const { return steps_ + 1; }
    double dt() const { return dt_; }
    double time(int k) const { return k * dt_; }
    double dx(int d) const { return dx_[d]; }
    double dx_min() const {
        double m = dx_[0];
        for (int d = 1; d < n(); ++d) m = std::min(m, dx_[d]);
        return m;
    }
    double dx_max() const {
        double m = dx_[0];
        for (int d = 1; d < n(); ++d) m = std::max(m, dx_[d]);
        return m;
    }
    int cells(int d) const { return cells_[d]; }
    int dim(int d) const { return dims_[d]; }
    int num_nodes() const { return dims_[0] * dims_[1] * dims_[2]; }
    int stride(int d) const { return d == 0 ? 1 : (d == 1 ? dims_[0] : dims_[0] * dims_[1]); }

    std::array<int, 3> index3(int node) const {
        std::array<int, 3> i{};
        i[0] = node % dims_[0];
        i[1] = (node / dims_[0]) % dims_[1];
        i[2] = node / (dims_[0] * dims_[1]);
        return i;
    }
    int node(int i0, int i1, int i2 = 0) const { return i0 + dims_[0] * (i1 + dims_[1] * i2); }
    Vec3 coord(int node) const {
        auto i = index3(node);
        Vec3 x;
        for (int d = 0; d < 3; ++d) x[d] = d < n() ? lo_[d] + i[d] * dx_[d] : 0.0;
        return x;
    }

    NodeType type(int node) const { return types_[node]; }
    const std::vector<int>& interior() const { return interior_; }
    const std::vector<int>& boundary() const { return boundary_; }
    // position of a node inside interior() / boundary(), or -1
    int interior_slot(int node) const { return islot_[node]; }
    int boundary_slot(int node) const { return bslot_[node]; }
    double volume_weight(int node) const { return vw_[node]; }
    double surface_weight(int bslot) const { return sw_[bslot]; }
    double time_weight(int k) const { return (k == 0 || k == steps_) ? 0.5 * dt_ : dt_; }

    // Boundary nodes with a well-defined outward normal (box edges and corners excluded).
    bool has_normal(int bslot) const { return normal_axis_[bslot] >= 0; }
    int normal_axis(int bslot) const { return normal_axis_[bslot]; }
    int normal_sign(int bslot) const { return normal_sign_[bslot]; }
    Vec3 normal(int bslot) const { return normals_[bslot]; }

    bool same_as(const Grid& o) const {
        if (n() != o.n() || steps_ != o.steps_ || std::abs(T_ - o.T_) > 1e-14 * T_) return false;
        for (int d = 0; d < 3; ++d)
            if (dims_[d] != o.dims_[d] || std::abs(dx_[d] - o.dx_[d]) > 1e-14 * dx_[d]) return false;
        return dom_.kind == o.dom_.kind;
    }

private:
    void build() {
        const int N = num_nodes();
        types_.assign(N, NodeType::Inactive);
        islot_.assign(N, -1);
        bslot_.assign(N, -1);
        vw_.assign(N, 0.0);
        if (dom_.kind == Domain::Kind::Box) {
            for (int k = 0; k < N; ++k) {
                auto i = index3(k);
                bool bnd = false;
                double w = 1.0;
                for (int d = 0; d < n(); ++d) {
                    bool edge = (i[d] == 0 || i[d] == cells_[d]);
                    bnd = bnd || edge;
                    w *= edge ? 0.5 * dx_[d] : dx_[d];
                }
                types_[k] = bnd ? NodeType::Boundary : NodeType::Interior;
                vw_[k] = w;
            }
        } else {
            const double R = dom_.radius;
            std::vector<char> active(N, 0);
            for (int k = 0; k < N; ++k) active[k] = coord(k).head(n()).norm() <= R * (1 + 1e-12);
            double cell = 1.0;
            for (int d = 0; d < n(); ++d) cell *= dx_[d];
            for (int k = 0; k < N; ++k) {
                if (!active[k]) continue;
                auto i = index3(k);
                bool all = true;
                for (int d = 0; d < n() && all; ++d) {
                    if (i[d] == 0 || i[d] == cells_[d]) {
                        all = false;
                        break;
                    }
                    all = active[k - stride(d)] && active[k + stride(d)];
                }
                types_[k] = all ? NodeType::Interior : NodeType::Boundary;
                vw_[k] = cell;
            }
        }
        for (int k = 0; k < N; ++k) {
            if (types_[k] == NodeType::Interior) {
                islot_[k] = static_cast<int>(interior_.size());
                interior_.push_back(k);
            } else if (types_[k] == NodeType::Boundary) {
                bslot_[k] = static_cast<int>(boundary_.size());
                boundary_.push_back(k);
            }
        }
        const int nb = static_cast<int>(boundary_.size());
        sw_.assign(nb, 0.0);
        normal_axis_.assign(nb, -1);
        normal_sign_.assign(nb, 0);
        normals_.assign(nb, Vec3::Zero());
        if (dom_.kind == Domain::Kind::Box) {
            for (int b = 0; b < nb; ++b) {
                auto i = index3(boundary_[b]);
                double wsum = 0;
                int faces = 0;
                for (int a = 0; a < n(); ++a) {
                    for (int side = 0; side < 2; ++side) {
                        if (i[a] != (side ? cells_[a] : 0)) continue;
                        ++faces;
                        double w = 1.0;
                        for (int d = 0; d < n(); ++d) {
                            if (d == a) continue;
                            bool edge = (i[d] == 0 || i[d] == cells_[d]);
                            w *= edge ? 0.5 * dx_[d] : dx_[d];
                        }
                        wsum += w;
                        if (faces == 1) {
                            normal_axis_[b] = a;
                            normal_sign_[b] = side ? 1 : -1;
                        }
                    }
                }
                sw_[b] = wsum;
                if (faces != 1) {
                    normal_axis_[b] = -1;
                    normal_sign_[b] = 0;
                } else {
                    normals_[b][normal_axis_[b]] = normal_sign_[b];
                }
            }
        } else {
            const double area = n() == 2 ? 2 * kPi * dom_.radius : 4 * kPi * dom_.radius * dom_.radius;
            for (int b = 0; b < nb; ++b) {
                sw_[b] = area / nb;
                Vec3 x = coord(boundary_[b]);
                double r = x.head(n()).norm();
                if (r > 0) {
                    normals_[b] = x / r;
                    normal_axis_[b] = 0;
                    for (int d = 1; d < n(); ++d)
                        if (std::abs(x[d]) > std::abs(x[normal_axis_[b]])) normal_axis_[b] = d;
                    normal_sign_[b] = x[normal_axis_[b]] > 0 ? 1 : -1;
                }
            }
        }
    }

    Domain dom_;
    double T_;
    int steps_;
    double dt_ = 0;
    std::array<int, 3> cells_{}, dims_{};
    std::array<double, 3> dx_{};
    Vec3 lo_;
    std::vector<NodeType> types_;
    std::vector<int> interior_, boundary_, islot_, bslot_;
    std::vector<double> vw_, sw_;
    std::vector<int> normal_axis_, normal_sign_;
    std::vector<Vec3> normals_;
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(Domain d, std::vector<int> cells, double T, int steps) {
    return std::make_shared<const Grid>(d, std::move(cells), T, steps);
}

// Subset of the boundary. Membership: on a listed face (or any face if none listed),
// outside every exclusion box, and inside the cap for balls.
struct BoundaryPatch {
    struct Box {
        Vec3 lo, hi;
    };
    std::vector<int> faces;
    std::vector<Box> excluded;
    std::optional<Vec3> cap_direction;
    double cap_cos = -1.0;

    static BoundaryPatch full() { return {}; }
    static BoundaryPatch from_faces(std::vector<int> f) {
        BoundaryPatch p;
        p.faces = std::move(f);
        return p;
    }
    BoundaryPatch& exclude(Vec3 lo, Vec3 hi) {
        excluded.push_back({lo, hi});
        return *this;
    }

    bool contains(const Domain& dom, const Vec3& x) const {
        if (!dom.on_boundary(x)) return false;
        if (!faces.empty()) {
            auto at = dom.faces_at(x);
            bool ok = false;
            for (int f : at)
                if (std::find(faces.begin(), faces.end(), f) != faces.end()) ok = true;
            if (!ok) return false;
        }
        const double e = dom.tol();
        for (const auto& b : excluded) {
            bool in = true;
            for (int d = 0; d < dom.n; ++d) in = in && x[d] >= b.lo[d] - e && x[d] <= b.hi[d] + e;
            if (in) return false;
        }
        if (cap_direction) {
            Vec3 u = x;
            if (dom.n == 2) u[2] = 0;
            if (u.norm() == 0 || u.dot(*cap_direction) / (u.norm() * cap_direction->norm()) < cap_cos) return false;
        }
        return true;
    }

    bool is_full() const { return faces.empty() && excluded.empty() && !cap_direction; }

    // Boundary slots of Γ nodes usable for traces (box edges/corners excluded).
    std::vector<int> trace_slots(const Grid& g) const {
        std::vector<int> s;
        for (int b = 0; b < static_cast<int>(g.boundary().size()); ++b)
            if (g.has_normal(b) && contains(g.domain(), g.coord(g.boundary()[b]))) s.push_back(b);
        return s;
    }
    // all boundary slots inside the patch, corners included
    std::vector<int> member_slots(const Grid& g) const {
        std::vector<int> s;
        for (int b = 0; b < static_cast<int>(g.boundary().size()); ++b)
            if (contains(g.domain(), g.coord(g.boundary()[b]))) s.push_back(b);
        return s;
    }
    double measure(const Grid& g) const {
        double m = 0;
        for (int b : member_slots(g)) m += g.surface_weight(b);
        return m;
    }
};

struct Line {
    Vec3 p;
    Vec3 omega;  // not normalised
    Vec3 unit() const { return omega / omega.norm(); }
};

inline std::pair<Vec3, Vec3> line_boundary_hits(const Domain& dom, const Line& line) {
    const double w = line.omega.norm();
    if (!(w > 0)) throw GeometryError("degenerate line direction");
    if (!dom.strictly_inside(line.p)) throw GeometryError("line base point must be interior");
    Vec3 u = line.omega / w;
    double sminus, splus;
    if (dom.kind == Domain::Kind::Ball) {
        double b = line.p.dot(u);
        double c = line.p.squaredNorm() - dom.radius * dom.radius;
        double disc = std::sqrt(b * b - c);
        sminus = -b - disc;
        splus = -b + disc;
    } else {
        splus = std::numeric_limits<double>::infinity();
        sminus = -splus;
        for (int d = 0; d < dom.n; ++d) {
            if (std::abs(u[d]) < 1e-15) continue;
            double a = (0 - line.p[d]) / u[d], b = (dom.lengths[d] - line.p[d]) / u[d];
            splus = std::min(splus, std::max(a, b));
            sminus = std::max(sminus, std::min(a, b));
        }
    }
    return {line.p + sminus * u, line.p + splus * u};
}

struct Visibility {
    bool member = false;
    Vec3 omega1 = Vec3::Zero(), omega2 = Vec3::Zero();
};

// Searches orthonormal pairs; the three lines along ω1, ω2, ω1+ω2 must exit through Γ.
inline Visibility in_visibility_set(const Domain& dom, const BoundaryPatch& gamma, const Vec3& p, int samples) {
    if (samples <= 0) throw GeometryError("direction sample count must be positive");
    if (!dom.strictly_inside(p)) throw GeometryError("visibility query point must be interior");
    auto exits = [&](const Vec3& w) {
        auto [a, b] = line_boundary_hits(dom, Line{p, w});
        return gamma.contains(dom, a) && gamma.contains(dom, b);
    };
    auto test = [&](const Vec3& w1, const Vec3& w2) -> Visibility {
        if (exits(w1) && exits(w2) && exits(w1 + w2)) return {true, w1, w2};
        return {};
    };
    if (dom.n == 2) {
        for (int k = 0; k < samples; ++k) {
            double th = 2 * kPi * k / samples;
            Vec3 w1(std::cos(th), std::sin(th), 0), w2(-std::sin(th), std::cos(th), 0);
            auto r = test(w1, w2);
            if (r.member) return r;
        }
        return {};
    }
    // n = 3: golden-spiral directions, each with a few in-plane rotations of the partner
    const int rot = 4;
    const int dirs = std::max(1, samples / rot);
    const double ga = kPi * (3 - std::sqrt(5.0));
    for (int k = 0; k < dirs; ++k) {
        double z = 1 - 2 * (k + 0.5) / dirs;
        double r = std::sqrt(std::max(0.0, 1 - z * z));
        Vec3 w1(r * std::cos(ga * k), r * std::sin(ga * k), z);
        Vec3 a = std::abs(w1[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
        Vec3 e1 = (a - a.dot(w1) * w1).normalized();
        Vec3 e2 = w1.cross(e1);
        for (int j = 0; j < rot; ++j) {
            double th = kPi * j / rot;
            Vec3 w2 = std::cos(th) * e1 + std::sin(th) * e2;
            auto res = test(w1, w2);
            if (res.member) return res;
        }
    }
    return {};
}

// ---- cutoffs ----

// B(s)/(B(s)+B(1-s)), B(s) = exp(-1/s); 0 for s <= 0, 1 for s >= 1.
inline RJet smooth_step(const RJet& s) {
    const int K = s.order();
    const double s0 = s.value();
    if (s0 <= 1e-3) return RJet(K, 0.0);
    if (s0 >= 1 - 1e-3) return RJet(K, 1.0);
    RJet one(K, 1.0);
    RJet b1 = exp(-(reciprocal(s)));
    RJet b2 = exp(-(reciprocal(one - s)));
    return b1 / (b1 + b2);
}
inline double smooth_step(double s) {
    if (s <= 0) return 0.0;
    if (s >= 1) return 1.0;
    double b1 = std::exp(-1 / s), b2 = std::exp(-1 / (1 - s));
    return b1 / (b1 + b2);
}

// Time plateau: 0 on [0,h] and [T-h,T], 1 on [2h,T-2h]. Used for θ_h and ι.
class TimePlateau {
public:
    TimePlateau() = default;
    TimePlateau(double h, double T) : h_(h), T_(T) {
        if (!(h > 0) || !(h < T / 4)) throw GeometryError("time cutoff requires 0 < h < T/4");
    }
    double h() const { return h_; }
    double horizon() const { return T_; }
    double operator()(double t) const { return smooth_step((t - h_) / h_) * smooth_step((T_ - h_ - t) / h_); }
    // value and derivatives up to `order` at t
    RJet jet(double t, int order) const {
        RJet tt = RJet::variable(order, t);
        RJet up = (tt + (-h_)) * (1.0 / h_);
        RJet down = ((-tt) + (T_ - h_)) * (1.0 / h_);
        return smooth_step(up) * smooth_step(down);
    }
    double derivative(double t, int k) const { return jet(t, k).derivative(k); }

private:
    double h_ = 0.1, T_ = 1.0;
};

// Spatial cutoff vanishing within d0/4 of the boundary and equal to 1 beyond d0/2.
class BoundaryCutoff {
public:
    BoundaryCutoff() = default;
    BoundaryCutoff(Domain dom, double d0) : dom_(dom), d0_(d0) {
        if (!(d0 > 0)) throw GeometryError("boundary cutoff width must be positive");
    }
    double d0() const { return d0_; }
    const Domain& domain() const { return dom_; }
    double operator()(const Vec3& x) const {
        const double a = d0_ / 4;
        if (dom_.kind == Domain::Kind::Ball) return smooth_step((dom_.radius - x.head(dom_.n).norm() - a) / a);
        double v = 1;
        for (int d = 0; d < dom_.n; ++d) v *= smooth_step((x[d] - a) / a) * smooth_step((dom_.lengths[d] - x[d] - a) / a);
        return v;
    }
    // boundary-distance shells O (d0), O1 (3/4 d0), O2 (d0/2), O3 (d0/4)
    bool in_shell(const Vec3& x, int j) const {
        static const double f[4] = {1.0, 0.75, 0.5, 0.25};
        return dom_.dist_to_boundary(x) < f[j] * d0_;
    }

private:
    Domain dom_;
    double d0_ = 0.1;
};

// Transverse cutoff: 1 for |z| <= eta/2, 0 for |z| >= eta.
class TubeCutoff {
public:
    TubeCutoff() = default;
    explicit TubeCutoff(double eta) : eta_(eta) {
        if (!(eta > 0)) throw GeometryError("tube width must be positive");
    }
    double eta() const { return eta_; }
    double operator()(double r) const { return smooth_step((eta_ - std::abs(r)) / (eta_ / 2)); }
    // value, d/dr and d^2/dr^2 as functions of r >= 0
    std::array<double, 3> radial(double r) const {
        RJet j = smooth_step((RJet(2, eta_) - RJet::variable(2, r)) * (2.0 / eta_));
        return {j.derivative(0), j.derivative(1), j.derivative(2)};
    }

private:
    double eta_ = 0.1;
};

struct CutoffFamily {
    BoundaryCutoff chi;
    TubeCutoff chi_eta;
    TimePlateau theta_h;
    TimePlateau iota;
};

enum class CutoffKind { Chi, ChiEta, ThetaH, Iota };

inline double eval_cutoff(const CutoffFamily& fam, CutoffKind which, const Vec3& x_or_t) {
    switch (which) {
        case CutoffKind::Chi:
            return fam.chi(x_or_t);
        case CutoffKind::ChiEta:
            return fam.chi_eta(x_or_t[0]);
        case CutoffKind::ThetaH:
            return fam.theta_h(x_or_t[0]);
        case CutoffKind::Iota:
            return fam.iota(x_or_t[0]);
    }
    return 0.0;
}

}  // namespace nlsdn
