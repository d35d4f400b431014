#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlsdn/fft.hpp"
#include "nlsdn/fields.hpp"

namespace nlsdn {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DivergenceError : public SolverError {
public:
    using SolverError::SolverError;
};

enum class Direction { Forward, Adjoint };

struct LinearOptions {
    enum class Backend { Auto, Spectral, Sparse };
    Backend backend = Backend::Auto;
    bool flip_explicit_potential = false;  // fault injection for test fixtures only
};

struct NonlinearOptions {
    double tol = 1e-10;
    int max_iter = 50;
    LinearOptions linear;
};

namespace detail {

// Solves (I + c (Δ_II + diag(q))) x = b on interior unknowns.
class ImplicitOperator {
public:
    virtual ~ImplicitOperator() = default;
    virtual void set_potential(const std::vector<cplx>& q_nodes) = 0;
    virtual void solve(std::vector<cplx>& x) = 0;
};

// Exact diagonalisation of the Dirichlet Laplacian on a box by DST-I; q must be constant.
class SpectralOperator final : public ImplicitOperator {
public:
    SpectralOperator(const Grid& g, cplx c, cplx q0) : n_(g.n()) {
        for (int d = n_ - 1; d >= 0; --d) dims_.push_back(g.cells(d) - 1);
        size_ = 1;
        for (int s : dims_) size_ *= static_cast<std::size_t>(s);
        re_ = fft::AlignedBuffer<double>(size_);
        im_ = fft::AlignedBuffer<double>(size_);
        plan_ = fft::plan_dst1(dims_, re_.ptr);
        inv_.resize(size_);
        double norm = 1;
        for (int d = 0; d < n_; ++d) norm *= 2.0 * g.cells(d);
        // eigenvalue of Δ_h for mode (k_0..k_{n-1}); row-major index has axis 0 fastest
        for (std::size_t idx = 0; idx < size_; ++idx) {
            std::size_t r = idx;
            double lam = 0;
            for (int d = 0; d < n_; ++d) {
                int m = g.cells(d) - 1;
                int k = static_cast<int>(r % m) + 1;
                r /= m;
                double s = std::sin(kPi * k / (2.0 * g.cells(d)));
                lam -= 4.0 * s * s / (g.dx(d) * g.dx(d));
            }
            cplx den = 1.0 + c * (lam + q0);
            if (std::abs(den) < 1e-300) throw SolverError("singular implicit system");
            inv_[idx] = 1.0 / (den * norm);
        }
    }
    void set_potential(const std::vector<cplx>&) override {}
    void solve(std::vector<cplx>& x) override {
        for (std::size_t i = 0; i < size_; ++i) {
            re_[i] = x[i].real();
            im_[i] = x[i].imag();
        }
        fftw_execute_r2r(plan_.get(), re_.ptr, re_.ptr);
        fftw_execute_r2r(plan_.get(), im_.ptr, im_.ptr);
        for (std::size_t i = 0; i < size_; ++i) {
            cplx v = cplx(re_[i], im_[i]) * inv_[i];
            re_[i] = v.real();
            im_[i] = v.imag();
        }
        fftw_execute_r2r(plan_.get(), re_.ptr, re_.ptr);
        fftw_execute_r2r(plan_.get(), im_.ptr, im_.ptr);
        for (std::size_t i = 0; i < size_; ++i) x[i] = cplx(re_[i], im_[i]);
    }

private:
    int n_;
    std::vector<int> dims_;
    std::size_t size_ = 0;
    fft::AlignedBuffer<double> re_, im_;
    fft::Plan plan_;
    std::vector<cplx> inv_;
};

class SparseOperator final : public ImplicitOperator {
public:
    SparseOperator(const Grid& g, cplx c) : c_(c) {
        const auto& in = g.interior();
        const int nI = static_cast<int>(in.size());
        std::vector<Eigen::Triplet<cplx>> trip;
        trip.reserve(static_cast<std::size_t>(nI) * (2 * g.n() + 1));
        for (int r = 0; r < nI; ++r) {
            const int node = in[r];
            double diag = 0;
            for (int d = 0; d < g.n(); ++d) {
                const double w = 1.0 / (g.dx(d) * g.dx(d));
                diag -= 2 * w;
                for (int s : {-1, 1}) {
                    int nb = node + s * g.stride(d);
                    int slot = g.interior_slot(nb);
                    if (slot >= 0) trip.emplace_back(r, slot, c * w);
                }
            }
            trip.emplace_back(r, r, 1.0 + c * diag);
        }
        base_.resize(nI, nI);
        base_.setFromTriplets(trip.begin(), trip.end());
        base_.makeCompressed();
        lu_.analyzePattern(base_);
        interior_ = in;
    }
    void set_potential(const std::vector<cplx>& q) override {
        Eigen::SparseMatrix<cplx> M = base_;
        for (int r = 0; r < M.rows(); ++r) M.coeffRef(r, r) += c_ * q[interior_[r]];
        lu_.factorize(M);
        if (lu_.info() != Eigen::Success) throw SolverError("sparse LU factorisation failed (singular implicit system)");
        ready_ = true;
    }
    void solve(std::vector<cplx>& x) override {
        if (!ready_) throw SolverError("potential not set");
        Eigen::Map<Eigen::VectorXcd> b(x.data(), static_cast<Eigen::Index>(x.size()));
        Eigen::VectorXcd y = lu_.solve(b);
        if (lu_.info() != Eigen::Success) throw SolverError("sparse LU solve failed");
        b = y;
    }

private:
    cplx c_;
    Eigen::SparseMatrix<cplx> base_;
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>, Eigen::COLAMDOrdering<int>> lu_;
    std::vector<int> interior_;
    bool ready_ = false;
};

// Laplacian of a full node vector evaluated at one interior node
inline cplx laplacian_at(const Grid& g, const cplx* u, int node) {
    cplx s = 0;
    for (int d = 0; d < g.n(); ++d) {
        const int st = g.stride(d);
        s += (u[node - st] - 2.0 * u[node] + u[node + st]) / (g.dx(d) * g.dx(d));
    }
    return s;
}

// Boundary couplings of interior rows: contribution of boundary values to Δ at interior nodes.
struct Coupling {
    int islot;
    int node;
    double w;
};
inline std::vector<Coupling> boundary_couplings(const Grid& g) {
    std::vector<Coupling> c;
    for (int r = 0; r < static_cast<int>(g.interior().size()); ++r) {
        int node = g.interior()[r];
        for (int d = 0; d < g.n(); ++d)
            for (int s : {-1, 1}) {
                int nb = node + s * g.stride(d);
                if (g.type(nb) == Grid::NodeType::Boundary) c.push_back({r, nb, 1.0 / (g.dx(d) * g.dx(d))});
            }
    }
    return c;
}

}  // namespace detail

// Source callback: full node vector of F at a time level (nullptr means zero).
using SourceFn = std::function<const cplx*(int)>;

// Crank–Nicolson march for (i∂t + Δ + q)u = F with Dirichlet data f.
// Forward: zero initial state. Adjoint: zero final state, stepping backward, potential conj(q).
inline SpaceTimeField march_linear(const GridPtr& gp, const Potential& q_in, const BoundaryData* f, const SourceFn& src,
                                   Direction dir, const LinearOptions& opt = {}) {
    const Grid& g = *gp;
    if (f) require_same_grid(gp, f->grid());
    const Potential q = dir == Direction::Adjoint ? q_in.conj() : q_in;
    const double tau = 0.5 * g.dt();
    const cplx I(0, 1);
    const cplx c_new = dir == Direction::Forward ? -I * tau : I * tau;  // matrix applied to the unknown level
    const cplx c_old = -c_new;

    bool spectral = q.constant.has_value() && g.domain().kind == Domain::Kind::Box;
    if (opt.backend == LinearOptions::Backend::Sparse) spectral = false;
    if (opt.backend == LinearOptions::Backend::Spectral && !spectral)
        throw SolverError("spectral backend needs a box domain and constant potential");

    std::unique_ptr<detail::ImplicitOperator> op;
    if (spectral)
        op = std::make_unique<detail::SpectralOperator>(g, c_new, *q.constant);
    else
        op = std::make_unique<detail::SparseOperator>(g, c_new);

    const bool tdep = !q.time_independent && !q.constant;
    std::vector<cplx> q_space;
    if (!tdep) {
        q_space = q.sample_space(g, 0.0);
        op->set_potential(q_space);
    }

    const auto couplings = detail::boundary_couplings(g);
    const auto& in = g.interior();
    const auto& bn = g.boundary();
    const int nI = static_cast<int>(in.size());
    const int L = g.time_levels();

    SpaceTimeField u(gp);
    auto set_boundary = [&](int k) {
        if (!f) return;
        cplx* uk = u.level(k);
        for (std::size_t b = 0; b < bn.size(); ++b) uk[bn[b]] = f->at(k, static_cast<int>(b));
    };

    std::vector<cplx> rhs(nI), q_old, q_new;
    const int k0 = dir == Direction::Forward ? 0 : L - 1;
    const int step = dir == Direction::Forward ? 1 : -1;
    set_boundary(k0);
    for (int k = k0; k + step >= 0 && k + step < L; k += step) {
        const int kn = k + step;
        set_boundary(kn);
        const cplx* uo = u.level(k);
        if (tdep) {
            q_old = q.sample_space(g, g.time(k));
            q_new = q.sample_space(g, g.time(kn));
        }
        const std::vector<cplx>& qo = tdep ? q_old : q_space;
        const cplx* Fo = src ? src(k) : nullptr;
        const cplx* Fn = src ? src(kn) : nullptr;
        // (I + c_new A_new) u_new = (I + c_old A_old) u_old + c_old (F_old + F_new) [+ boundary terms]
        for (int r = 0; r < nI; ++r) {
            const int node = in[r];
            cplx a = detail::laplacian_at(g, uo, node) + (opt.flip_explicit_potential ? -qo[node] : qo[node]) * uo[node];
            cplx v = uo[node] + c_old * a;
            cplx fs = 0;
            if (Fo) fs += Fo[node];
            if (Fn) fs += Fn[node];
            // forward: -iτ(F_old+F_new); adjoint: +iτ(F_old+F_new)
            v += (dir == Direction::Forward ? -I * tau : I * tau) * fs;
            rhs[r] = v;
        }
        if (f) {
            const cplx* un = u.level(kn);
            for (const auto& cpl : couplings) rhs[cpl.islot] -= c_new * cpl.w * un[cpl.node];
        }
        if (tdep) op->set_potential(q_new);
        op->solve(rhs);
        cplx* un = u.level(kn);
        for (int r = 0; r < nI; ++r) un[in[r]] = rhs[r];
    }
    return u;
}

inline SpaceTimeField solve_linear(const GridPtr& g, const Potential& q, const BoundaryData* f, const SpaceTimeField* F,
                                   Direction dir, const LinearOptions& opt = {}) {
    SourceFn src;
    if (F) {
        require_same_grid(g, F->grid());
        src = [F](int k) { return F->level(k); };
    }
    return march_linear(g, q, f, src, dir, opt);
}

struct NonlinearResult {
    SpaceTimeField u;
    int iterations = 0;
    std::vector<double> increments;
};

// Picard iteration w <- L^{-1}(-β (w + u_f)^2), u = u_f + w.
inline NonlinearResult solve_nonlinear(const GridPtr& gp, const Potential& q, const Potential& beta, const BoundaryData& f,
                                       const NonlinearOptions& opt = {}) {
    if (!(opt.tol > 0)) throw SolverError("Picard tolerance must be positive");
    const Grid& g = *gp;
    NonlinearResult res;
    SpaceTimeField uf = solve_linear(gp, q, &f, nullptr, Direction::Forward, opt.linear);
    if (beta.is_zero()) {
        res.u = std::move(uf);
        res.iterations = 1;
        res.increments.push_back(0.0);
        return res;
    }
    std::vector<cplx> b_space;
    SpaceTimeField b_field;
    if (beta.time_independent)
        b_space = beta.sample_space(g, 0.0);
    else
        b_field = beta.sample(gp);

    SpaceTimeField w(gp);
    const int N = g.num_nodes();
    std::vector<cplx> buf_a(N), buf_b(N);
    int buf_level[2] = {-1, -1};
    std::vector<cplx>* bufs[2] = {&buf_a, &buf_b};
    for (int it = 1; it <= opt.max_iter; ++it) {
        buf_level[0] = buf_level[1] = -1;
        int last = -1;
        // two-level cache: the marcher asks for k then k+1
        SourceFn src = [&](int k) -> const cplx* {
            for (int s = 0; s < 2; ++s)
                if (buf_level[s] == k) {
                    last = k;
                    return bufs[s]->data();
                }
            const int s = buf_level[0] == last ? 1 : 0;
            std::vector<cplx>& B = *bufs[s];
            const cplx* wl = w.level(k);
            const cplx* ul = uf.level(k);
            const cplx* bl = beta.time_independent ? b_space.data() : b_field.level(k);
            for (int i = 0; i < N; ++i) {
                cplx v = wl[i] + ul[i];
                B[i] = -bl[i] * v * v;
            }
            buf_level[s] = k;
            last = k;
            return B.data();
        };
        SpaceTimeField wn = march_linear(gp, q, nullptr, src, Direction::Forward, opt.linear);
        SpaceTimeField diff = wn - w;
        double inc = l2_norm(diff);
        res.increments.push_back(inc);
        w = std::move(wn);
        if (!std::isfinite(inc)) throw DivergenceError("Picard iteration produced non-finite values; data outside the well-posedness ball");
        if (inc < opt.tol) {
            res.iterations = it;
            res.u = std::move(uf);
            res.u += w;
            return res;
        }
        const auto& I = res.increments;
        if (I.size() >= 3 && I[I.size() - 1] > I[I.size() - 2] && I[I.size() - 2] > I[I.size() - 3])
            throw DivergenceError("Picard iteration is not contracting (increments growing); data outside the well-posedness ball");
    }
    throw DivergenceError("Picard iteration exceeded max_iter without converging");
}

// One-sided second-order normal derivative on the Γ trace nodes.
inline NeumannTrace neumann_trace(const SpaceTimeField& u, const BoundaryPatch& gamma) {
    const Grid& g = *u.grid();
    auto slots = gamma.trace_slots(g);
    if (slots.empty()) throw FieldError("boundary patch contains no trace nodes");
    NeumannTrace tr(u.grid(), slots);
    struct Stencil {
        int n0, n1, n2;
        double w;
    };
    std::vector<std::vector<Stencil>> st(slots.size());
    for (std::size_t j = 0; j < slots.size(); ++j) {
        const int b = slots[j];
        const int node = g.boundary()[b];
        if (g.domain().kind == Domain::Kind::Box) {
            const int a = g.normal_axis(b), s = g.normal_sign(b);
            const int o = s * g.stride(a);
            st[j].push_back({node, node - o, node - 2 * o, 1.0 / (2 * g.dx(a))});
        } else {
            Vec3 nu = g.normal(b);
            auto idx = g.index3(node);
            for (int d = 0; d < g.n(); ++d) {
                if (std::abs(nu[d]) < 1e-12) continue;
                const int s = nu[d] > 0 ? 1 : -1;
                const int o = s * g.stride(d);
                auto ok = [&](int steps) {
                    int i = idx[d] - s * steps;
                    if (i < 0 || i > g.cells(d)) return false;
                    return g.type(node - steps * o) != Grid::NodeType::Inactive;
                };
                if (ok(1) && ok(2))
                    st[j].push_back({node, node - o, node - 2 * o, std::abs(nu[d]) / (2 * g.dx(d))});
                else if (ok(1))
                    st[j].push_back({node, node - o, -1, std::abs(nu[d]) / g.dx(d)});
            }
        }
    }
    for (int k = 0; k < g.time_levels(); ++k) {
        const cplx* L = u.level(k);
        for (std::size_t j = 0; j < slots.size(); ++j) {
            cplx v = 0;
            for (const auto& s : st[j]) {
                if (s.n2 >= 0)
                    v += s.w * (3.0 * L[s.n0] - 4.0 * L[s.n1] + L[s.n2]);
                else
                    v += s.w * (L[s.n0] - L[s.n1]);
            }
            tr.at(k, static_cast<int>(j)) = v;
        }
    }
    return tr;
}

// Forward model bundle: evaluates Λ_{q,β} f = ∂_ν u|Σ♯.
struct Model {
    GridPtr grid;
    Potential q = Potential::zero();
    Potential beta = Potential::zero();
    BoundaryPatch gamma;
    NonlinearOptions options;

    NeumannTrace dn(const BoundaryData& f) const {
        auto r = solve_nonlinear(grid, q, beta, f, options);
        return neumann_trace(r.u, gamma);
    }
};

inline NeumannTrace dn_map(const GridPtr& g, const Potential& q, const Potential& beta, const BoundaryData& f,
                           const BoundaryPatch& gamma, const NonlinearOptions& opt = {}) {
    return Model{g, q, beta, gamma, opt}.dn(f);
}

using DNEvaluator = std::function<NeumannTrace(const BoundaryData&)>;

// ---- discrete Sobolev surrogates ----

namespace detail {

// tensor array with per-axis sizes and spacings; axis 0 slowest
struct Tensor {
    std::vector<int> size;
    std::vector<double> h;
    std::vector<cplx> v;

    std::size_t stride(int a) const {
        std::size_t s = 1;
        for (int j = static_cast<int>(size.size()) - 1; j > a; --j) s *= static_cast<std::size_t>(size[j]);
        return s;
    }
};

inline std::vector<cplx> diff_axis(const Tensor& T, const std::vector<cplx>& v, int a, int order) {
    std::vector<cplx> out(v.size());
    const int n = T.size[a];
    const std::size_t st = T.stride(a);
    const double h = T.h[a];
    const std::size_t outer = v.size() / (static_cast<std::size_t>(n) * st);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < st; ++in) {
            const std::size_t base = o * n * st + in;
            auto at = [&](int i) { return v[base + static_cast<std::size_t>(i) * st]; };
            for (int i = 0; i < n; ++i) {
                cplx d;
                if (n < 4) {
                    d = 0;
                } else if (order == 1) {
                    if (i == 0)
                        d = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2 * h);
                    else if (i == n - 1)
                        d = (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2 * h);
                    else
                        d = (at(i + 1) - at(i - 1)) / (2 * h);
                } else {
                    if (i == 0)
                        d = (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h);
                    else if (i == n - 1)
                        d = (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / (h * h);
                    else
                        d = (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (h * h);
                }
                out[base + static_cast<std::size_t>(i) * st] = d;
            }
        }
    return out;
}

inline double trapezoid_sum(const Tensor& T, const std::vector<cplx>& v) {
    const int D = static_cast<int>(T.size.size());
    double s = 0;
    std::vector<int> idx(D, 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t r = i;
        double w = 1;
        for (int a = D - 1; a >= 0; --a) {
            int k = static_cast<int>(r % T.size[a]);
            r /= T.size[a];
            w *= (k == 0 || k == T.size[a] - 1) ? 0.5 * T.h[a] : T.h[a];
        }
        s += w * std::norm(v[i]);
    }
    return s;
}

// sum over |α| <= order of ||D^α v||², finite differences (order <= 2)
inline double fd_sobolev_sq(const Tensor& T, int order) {
    const int D = static_cast<int>(T.size.size());
    double s = trapezoid_sum(T, T.v);
    if (order >= 1)
        for (int a = 0; a < D; ++a) {
            auto d1 = diff_axis(T, T.v, a, 1);
            s += trapezoid_sum(T, d1);
            if (order >= 2) {
                s += trapezoid_sum(T, diff_axis(T, T.v, a, 2));
                for (int b = a + 1; b < D; ++b) s += trapezoid_sum(T, diff_axis(T, d1, b, 1));
            }
        }
    return s;
}

// spectral surrogate: Σ_k W(k)|û_k|² with W(k) = Σ_{|α|<=order} Π κ_j^{2α_j}
inline double spectral_sobolev_sq(const Tensor& T, int order) {
    const int D = static_cast<int>(T.size.size());
    auto hat = fft::dft(T.size, T.v);
    const double npts = static_cast<double>(T.v.size());
    double cell = 1;
    for (double h : T.h) cell *= h;
    double s = 0;
    for (std::size_t i = 0; i < hat.size(); ++i) {
        std::size_t r = i;
        std::vector<double> poly(order + 1, 0.0);
        poly[0] = 1;
        for (int a = D - 1; a >= 0; --a) {
            int n = T.size[a];
            int k = static_cast<int>(r % n);
            r /= n;
            if (k > n / 2) k -= n;
            double kap = 2 * kPi * k / (n * T.h[a]);
            double x = kap * kap;
            std::vector<double> np(order + 1, 0.0);
            for (int d = 0; d <= order; ++d) {
                double xp = 1;
                for (int e = 0; e + d <= order; ++e) {
                    np[d + e] += poly[d] * xp;
                    xp *= x;
                }
            }
            poly = np;
        }
        double W = 0;
        for (double p : poly) W += p;
        s += W * std::norm(hat[i]);
    }
    return s * cell / npts;
}

inline std::vector<Tensor> boundary_faces(const BoundaryData& f) {
    const Grid& g = *f.grid();
    std::vector<Tensor> faces;
    for (int a = 0; a < g.n(); ++a)
        for (int side = 0; side < 2; ++side) {
            Tensor T;
            T.size.push_back(g.time_levels());
            T.h.push_back(g.dt());
            std::vector<int> tang;
            for (int d = g.n() - 1; d >= 0; --d)
                if (d != a) {
                    T.size.push_back(g.dim(d));
                    T.h.push_back(g.dx(d));
                    tang.push_back(d);
                }
            std::size_t per = 1;
            for (std::size_t j = 1; j < T.size.size(); ++j) per *= static_cast<std::size_t>(T.size[j]);
            T.v.assign(per * g.time_levels(), 0.0);
            for (int k = 0; k < g.time_levels(); ++k)
                for (std::size_t m = 0; m < per; ++m) {
                    std::array<int, 3> i3{0, 0, 0};
                    i3[a] = side ? g.cells(a) : 0;
                    std::size_t r = m;
                    for (int j = static_cast<int>(tang.size()) - 1; j >= 0; --j) {
                        int d = tang[j];
                        i3[d] = static_cast<int>(r % g.dim(d));
                        r /= g.dim(d);
                    }
                    int node = g.node(i3[0], i3[1], i3[2]);
                    T.v[k * per + m] = f.at(k, g.boundary_slot(node));
                }
            faces.push_back(std::move(T));
        }
    return faces;
}

}  // namespace detail

class NormError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline double discrete_norm(const SpaceTimeField& u, int order) {
    if (order < 0) throw NormError("negative Sobolev order");
    const Grid& g = *u.grid();
    if (g.domain().kind == Domain::Kind::Ball) {
        if (order > 2) throw NormError("orders above 2 are unsupported on the ball domain");
        // interior nodes only, central differences in space and time
        double s = 0;
        for (int k = 0; k < g.time_levels(); ++k) {
            const cplx* L = u.level(k);
            for (int i = 0; i < g.num_nodes(); ++i) {
                if (g.type(i) == Grid::NodeType::Inactive) continue;
                double w = g.time_weight(k) * g.volume_weight(i);
                s += w * std::norm(L[i]);
                if (order == 0 || g.type(i) != Grid::NodeType::Interior) continue;
                for (int d = 0; d < g.n(); ++d) {
                    int st = g.stride(d);
                    s += w * std::norm((L[i + st] - L[i - st]) / (2 * g.dx(d)));
                    if (order >= 2) s += w * std::norm((L[i + st] - 2.0 * L[i] + L[i - st]) / (g.dx(d) * g.dx(d)));
                }
                if (k > 0 && k < g.steps()) {
                    cplx dt = (u.at(k + 1, i) - u.at(k - 1, i)) / (2 * g.dt());
                    s += w * std::norm(dt);
                    if (order >= 2) s += w * std::norm((u.at(k + 1, i) - 2.0 * L[i] + u.at(k - 1, i)) / (g.dt() * g.dt()));
                }
            }
        }
        return std::sqrt(s);
    }
    detail::Tensor T;
    T.size.push_back(g.time_levels());
    T.h.push_back(g.dt());
    for (int d = g.n() - 1; d >= 0; --d) {
        T.size.push_back(g.dim(d));
        T.h.push_back(g.dx(d));
    }
    T.v = u.raw();
    return std::sqrt(order <= 2 ? detail::fd_sobolev_sq(T, order) : detail::spectral_sobolev_sq(T, order));
}

inline double discrete_norm(const BoundaryData& f, int order) {
    if (order < 0) throw NormError("negative Sobolev order");
    const Grid& g = *f.grid();
    if (g.domain().kind == Domain::Kind::Ball) {
        if (order > 0) throw NormError("boundary norms of positive order are unsupported on the ball domain");
        return f.l2_norm();
    }
    double s = 0;
    for (const auto& T : detail::boundary_faces(f))
        s += order <= 2 ? detail::fd_sobolev_sq(T, order) : detail::spectral_sobolev_sq(T, order);
    return std::sqrt(s);
}

struct Admissibility {
    bool admissible = false;
    std::string reason;
    double norm = 0;
    int order = 0;
};

// ||f|| in the integer surrogate of H^{2κ+3/2} against λ, plus vanishing of f near t = 0.
inline Admissibility admissibility_check(const BoundaryData& f, double lambda, int kappa) {
    Admissibility a;
    a.order = static_cast<int>(std::ceil(2.0 * kappa + 1.5));
    if (!(lambda > 0)) {
        a.reason = "invalid threshold: lambda must be positive";
        return a;
    }
    const double fmax = f.max_abs();
    if (fmax == 0) {
        a.admissible = true;
        a.reason = "zero data";
        return a;
    }
    const Grid& g = *f.grid();
    const int levels = std::min(a.order, g.time_levels());
    double head = 0;
    for (int k = 0; k < levels; ++k)
        for (int b = 0; b < f.slots(); ++b) head = std::max(head, std::abs(f.at(k, b)));
    if (head > 1e-12 * fmax) {
        a.reason = "compatibility: data does not vanish to order " + std::to_string(a.order) + " at t=0";
        return a;
    }
    try {
        a.norm = discrete_norm(f, a.order);
    } catch (const NormError& e) {
        a.reason = std::string("unsupported: ") + e.what();
        return a;
    }
    if (a.norm > lambda) {
        a.reason = "norm: surrogate H^" + std::to_string(a.order) + " norm " + std::to_string(a.norm) + " exceeds lambda " +
                   std::to_string(lambda);
        return a;
    }
    a.admissible = true;
    a.reason = "admissible";
    return a;
}

}  // namespace nlsdn
