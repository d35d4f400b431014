#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlsdn/geometry.hpp"

namespace nlsdn {

class FieldError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require_same_grid(const GridPtr& a, const GridPtr& b) {
    if (!a || !b) throw FieldError("field without grid");
    if (a != b && !a->same_as(*b)) throw FieldError("fields live on mismatched grids");
}

// Complex values on all nodes of the space-time grid, row-major in (time level, node).
class SpaceTimeField {
public:
    SpaceTimeField() = default;
    explicit SpaceTimeField(GridPtr g, std::string label = {})
        : grid_(std::move(g)), data_(static_cast<std::size_t>(grid_->time_levels()) * grid_->num_nodes()), label_(std::move(label)) {}

    const GridPtr& grid() const { return grid_; }
    const std::string& label() const { return label_; }
    void set_label(std::string s) { label_ = std::move(s); }
    std::size_t size() const { return data_.size(); }
    int nodes() const { return grid_->num_nodes(); }

    cplx& at(int k, int node) { return data_[static_cast<std::size_t>(k) * nodes() + node]; }
    const cplx& at(int k, int node) const { return data_[static_cast<std::size_t>(k) * nodes() + node]; }
    cplx* level(int k) { return data_.data() + static_cast<std::size_t>(k) * nodes(); }
    const cplx* level(int k) const { return data_.data() + static_cast<std::size_t>(k) * nodes(); }
    std::vector<cplx>& raw() { return data_; }
    const std::vector<cplx>& raw() const { return data_; }

    SpaceTimeField& operator+=(const SpaceTimeField& o) {
        require_same_grid(grid_, o.grid_);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    SpaceTimeField& operator-=(const SpaceTimeField& o) {
        require_same_grid(grid_, o.grid_);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    SpaceTimeField& operator*=(cplx s) {
        for (auto& v : data_) v *= s;
        return *this;
    }
    friend SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b) { return a += b; }
    friend SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b) { return a -= b; }
    friend SpaceTimeField operator*(cplx s, SpaceTimeField a) { return a *= s; }
    friend SpaceTimeField operator*(SpaceTimeField a, cplx s) { return a *= s; }

    SpaceTimeField conj() const {
        SpaceTimeField r = *this;
        for (auto& v : r.data_) v = std::conj(v);
        return r;
    }
    bool finite() const {
        for (const auto& v : data_)
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        return true;
    }
    double max_abs() const {
        double m = 0;
        for (const auto& v : data_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    GridPtr grid_;
    std::vector<cplx> data_;
    std::string label_;
};

// ∫_Q u conj(v) with tensor trapezoid weights
inline cplx inner(const SpaceTimeField& u, const SpaceTimeField& v) {
    require_same_grid(u.grid(), v.grid());
    const Grid& g = *u.grid();
    cplx s = 0;
    for (int k = 0; k < g.time_levels(); ++k) {
        cplx sk = 0;
        const cplx* a = u.level(k);
        const cplx* b = v.level(k);
        for (int i = 0; i < g.num_nodes(); ++i) sk += g.volume_weight(i) * a[i] * std::conj(b[i]);
        s += g.time_weight(k) * sk;
    }
    return s;
}
inline cplx integrate(const SpaceTimeField& u) {
    const Grid& g = *u.grid();
    cplx s = 0;
    for (int k = 0; k < g.time_levels(); ++k) {
        cplx sk = 0;
        const cplx* a = u.level(k);
        for (int i = 0; i < g.num_nodes(); ++i) sk += g.volume_weight(i) * a[i];
        s += g.time_weight(k) * sk;
    }
    return s;
}
inline double l2_norm(const SpaceTimeField& u) { return std::sqrt(std::max(0.0, inner(u, u).real())); }
// L²(Ω) norm at one time level
inline double l2_norm_at(const SpaceTimeField& u, int k) {
    const Grid& g = *u.grid();
    double s = 0;
    const cplx* a = u.level(k);
    for (int i = 0; i < g.num_nodes(); ++i) s += g.volume_weight(i) * std::norm(a[i]);
    return std::sqrt(s);
}

// Complex scalar field on (0,T)xΩ given as a callable, with support metadata.
struct Potential {
    std::function<cplx(double, const Vec3&)> fn;
    bool time_independent = true;
    std::optional<cplx> constant;   // set when the field is a spatial and temporal constant
    double m0 = std::numeric_limits<double>::infinity();
    double boundary_margin = 0.0;   // declared: vanishes where dist(x,∂Ω) < margin
    bool real_valued = true;
    std::string label;

    static Potential zero() { return uniform(0.0); }
    static Potential uniform(cplx c) {
        Potential p;
        p.fn = [c](double, const Vec3&) { return c; };
        p.constant = c;
        p.m0 = std::abs(c);
        p.real_valued = c.imag() == 0;
        p.label = "constant";
        return p;
    }
    static Potential from_function(std::function<cplx(double, const Vec3&)> f, bool time_indep, bool real = true,
                                   double m0 = std::numeric_limits<double>::infinity(), double margin = 0) {
        Potential p;
        p.fn = std::move(f);
        p.time_independent = time_indep;
        p.real_valued = real;
        p.m0 = m0;
        p.boundary_margin = margin;
        p.label = "function";
        return p;
    }

    cplx operator()(double t, const Vec3& x) const { return fn(t, x); }
    bool is_zero() const { return constant && *constant == cplx(0); }

    Potential conj() const {
        if (real_valued) return *this;
        Potential p = *this;
        auto f = fn;
        p.fn = [f](double t, const Vec3& x) { return std::conj(f(t, x)); };
        if (constant) p.constant = std::conj(*constant);
        return p;
    }
    Potential scaled(cplx s) const {
        Potential p = *this;
        auto f = fn;
        p.fn = [f, s](double t, const Vec3& x) { return s * f(t, x); };
        if (constant) p.constant = s * *constant;
        p.m0 = m0 * std::abs(s);
        p.real_valued = real_valued && s.imag() == 0;
        return p;
    }
    friend Potential operator-(const Potential& a, const Potential& b) {
        if (a.constant && b.constant) return uniform(*a.constant - *b.constant);
        Potential p;
        auto f = a.fn, g = b.fn;
        p.fn = [f, g](double t, const Vec3& x) { return f(t, x) - g(t, x); };
        p.time_independent = a.time_independent && b.time_independent;
        p.real_valued = a.real_valued && b.real_valued;
        p.m0 = a.m0 + b.m0;
        p.boundary_margin = std::min(a.boundary_margin, b.boundary_margin);
        p.label = a.label + "-" + b.label;
        return p;
    }

    // samples on the space-time grid; checks the declared bound and support
    SpaceTimeField sample(const GridPtr& g) const {
        SpaceTimeField out(g, label);
        const Domain& dom = g->domain();
        std::vector<cplx> space;
        if (time_independent) space = sample_space(*g, 0.0);
        for (int k = 0; k < g->time_levels(); ++k) {
            cplx* L = out.level(k);
            if (time_independent) {
                std::copy(space.begin(), space.end(), L);
                continue;
            }
            const double t = g->time(k);
            for (int i = 0; i < g->num_nodes(); ++i) {
                if (g->type(i) == Grid::NodeType::Inactive) continue;
                L[i] = fn(t, g->coord(i));
                check(L[i], dom, g->coord(i));
            }
        }
        return out;
    }
    std::vector<cplx> sample_space(const Grid& g, double t) const {
        std::vector<cplx> v(g.num_nodes(), 0.0);
        for (int i = 0; i < g.num_nodes(); ++i) {
            if (g.type(i) == Grid::NodeType::Inactive) continue;
            v[i] = fn(t, g.coord(i));
            check(v[i], g.domain(), g.coord(i));
        }
        return v;
    }

private:
    void check(cplx v, const Domain& dom, const Vec3& x) const {
        if (std::abs(v) > m0 * (1 + 1e-12)) throw FieldError("potential exceeds its declared bound m0 (" + label + ")");
        if (boundary_margin > 0 && dom.dist_to_boundary(x) < boundary_margin && v != cplx(0))
            throw FieldError("potential violates its declared boundary support (" + label + ")");
    }
};

// Dirichlet data on Σ: values on boundary nodes at every time level.
class BoundaryData {
public:
    BoundaryData() = default;
    explicit BoundaryData(GridPtr g)
        : grid_(std::move(g)), nb_(static_cast<int>(grid_->boundary().size())),
          data_(static_cast<std::size_t>(grid_->time_levels()) * nb_) {}

    const GridPtr& grid() const { return grid_; }
    int slots() const { return nb_; }
    cplx& at(int k, int b) { return data_[static_cast<std::size_t>(k) * nb_ + b]; }
    const cplx& at(int k, int b) const { return data_[static_cast<std::size_t>(k) * nb_ + b]; }
    const cplx* level(int k) const { return data_.data() + static_cast<std::size_t>(k) * nb_; }
    std::vector<cplx>& raw() { return data_; }
    const std::vector<cplx>& raw() const { return data_; }

    std::optional<BoundaryPatch> support;
    int compat_order = 0;
    std::string label;

    static BoundaryData trace_of(const SpaceTimeField& u) {
        BoundaryData f(u.grid());
        const auto& bn = u.grid()->boundary();
        for (int k = 0; k < u.grid()->time_levels(); ++k)
            for (int b = 0; b < f.nb_; ++b) f.at(k, b) = u.at(k, bn[b]);
        f.label = u.label();
        return f;
    }

    BoundaryData& operator+=(const BoundaryData& o) {
        require_same_grid(grid_, o.grid_);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    BoundaryData& operator*=(cplx s) {
        for (auto& v : data_) v *= s;
        return *this;
    }
    friend BoundaryData operator+(BoundaryData a, const BoundaryData& b) { return a += b; }
    friend BoundaryData operator*(cplx s, BoundaryData a) { return a *= s; }

    double max_abs() const {
        double m = 0;
        for (const auto& v : data_) m = std::max(m, std::abs(v));
        return m;
    }
    // L²(Σ) with trapezoid in time and surface weights
    double l2_norm() const {
        double s = 0;
        for (int k = 0; k < grid_->time_levels(); ++k) {
            double sk = 0;
            for (int b = 0; b < nb_; ++b) sk += grid_->surface_weight(b) * std::norm(at(k, b));
            s += grid_->time_weight(k) * sk;
        }
        return std::sqrt(s);
    }
    // largest value on boundary nodes outside the patch
    double max_outside(const BoundaryPatch& p) const {
        double m = 0;
        for (int b = 0; b < nb_; ++b) {
            if (p.contains(grid_->domain(), grid_->coord(grid_->boundary()[b]))) continue;
            for (int k = 0; k < grid_->time_levels(); ++k) m = std::max(m, std::abs(at(k, b)));
        }
        return m;
    }

private:
    GridPtr grid_;
    int nb_ = 0;
    std::vector<cplx> data_;
};

// Normal derivative samples on Σ♯ = (0,T)xΓ, stored per time level over the Γ trace slots.
class NeumannTrace {
public:
    NeumannTrace() = default;
    NeumannTrace(GridPtr g, std::vector<int> slots)
        : grid_(std::move(g)), slots_(std::move(slots)),
          data_(static_cast<std::size_t>(grid_->time_levels()) * slots_.size()) {}

    const GridPtr& grid() const { return grid_; }
    const std::vector<int>& slots() const { return slots_; }
    int count() const { return static_cast<int>(slots_.size()); }
    cplx& at(int k, int j) { return data_[static_cast<std::size_t>(k) * slots_.size() + j]; }
    const cplx& at(int k, int j) const { return data_[static_cast<std::size_t>(k) * slots_.size() + j]; }
    std::vector<cplx>& raw() { return data_; }
    const std::vector<cplx>& raw() const { return data_; }
    int stencil_order = 2;

    void check_compatible(const NeumannTrace& o) const {
        require_same_grid(grid_, o.grid_);
        if (slots_ != o.slots_) throw FieldError("traces defined on different boundary patches");
    }
    NeumannTrace& operator+=(const NeumannTrace& o) {
        check_compatible(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    NeumannTrace& operator-=(const NeumannTrace& o) {
        check_compatible(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    NeumannTrace& operator*=(cplx s) {
        for (auto& v : data_) v *= s;
        return *this;
    }
    friend NeumannTrace operator+(NeumannTrace a, const NeumannTrace& b) { return a += b; }
    friend NeumannTrace operator-(NeumannTrace a, const NeumannTrace& b) { return a -= b; }
    friend NeumannTrace operator*(cplx s, NeumannTrace a) { return a *= s; }

    double weight(int k, int j) const { return grid_->time_weight(k) * grid_->surface_weight(slots_[j]); }
    double l2_norm() const {
        double s = 0;
        for (int k = 0; k < grid_->time_levels(); ++k)
            for (int j = 0; j < count(); ++j) s += weight(k, j) * std::norm(at(k, j));
        return std::sqrt(s);
    }

private:
    GridPtr grid_;
    std::vector<int> slots_;
    std::vector<cplx> data_;
};

// ∫_{Σ♯} conj(f) g over the trace slots of g
inline cplx boundary_pairing(const BoundaryData& f, const NeumannTrace& g) {
    require_same_grid(f.grid(), g.grid());
    cplx s = 0;
    for (int k = 0; k < g.grid()->time_levels(); ++k)
        for (int j = 0; j < g.count(); ++j) s += g.weight(k, j) * std::conj(f.at(k, g.slots()[j])) * g.at(k, j);
    return s;
}

}  // namespace nlsdn
