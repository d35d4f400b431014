#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "nlsdn/fields.hpp"

namespace nlsdn {

using CMat = Eigen::MatrixXcd;

class ProbeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ResolutionError : public ProbeError {
public:
    using ProbeError::ProbeError;
};

// ---- Riccati equation |ω| H' + H² = 0 ----

inline double min_imag_eig(const CMat& H) {
    Eigen::MatrixXd P = H.imag();
    P = 0.5 * (P + P.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline void check_initial_hessian(const CMat& H0) {
    if (H0.rows() != H0.cols() || H0.rows() < 1) throw ProbeError("H0 must be square");
    if ((H0 - H0.transpose()).norm() > 1e-12 * (1 + H0.norm())) throw ProbeError("H0 must be complex symmetric");
    if (!(min_imag_eig(H0) > 0)) throw ProbeError("Im H0 must be positive definite");
}

// closed form H(s) = H0 (I + s H0/|ω|)^{-1}
inline CMat riccati_exact(const CMat& H0, double speed, double s) {
    const int m = static_cast<int>(H0.rows());
    CMat M = CMat::Identity(m, m) + (s / speed) * H0;
    return H0 * M.inverse();
}

struct RiccatiSolution {
    std::vector<double> s;
    std::vector<CMat> H;
    double speed = 1.0;
    double min_imag = 0.0;  // smallest eigenvalue of Im H over the trajectory

    // cubic Hermite interpolation using H' = -H²/|ω|
    CMat at(double x) const {
        if (s.empty()) throw ProbeError("empty Riccati solution");
        if (x <= s.front()) return H.front();
        if (x >= s.back()) return H.back();
        std::size_t j = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) - 1;
        const double h = s[j + 1] - s[j], u = (x - s[j]) / h;
        const CMat& a = H[j];
        const CMat& b = H[j + 1];
        CMat da = -a * a / speed * h, db = -b * b / speed * h;
        double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u, h01 = -2 * u * u * u + 3 * u * u,
               h11 = u * u * u - u * u;
        return h00 * a + h10 * da + h01 * b + h11 * db;
    }
};

namespace detail {

inline bool rk4_run(const CMat& H0, double speed, double s_end, double ds, std::vector<double>& ss, std::vector<CMat>& HH,
                    double& min_im) {
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(s_end) / ds - 1e-12)));
    const double h = s_end / steps;
    auto f = [speed](const CMat& H) -> CMat { return -H * H / speed; };
    CMat H = H0;
    ss.assign(1, 0.0);
    HH.assign(1, H0);
    for (int k = 0; k < steps; ++k) {
        CMat k1 = f(H), k2 = f(H + 0.5 * h * k1), k3 = f(H + 0.5 * h * k2), k4 = f(H + h * k3);
        H += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
        H = 0.5 * (H + H.transpose()).eval();
        double mi = min_imag_eig(H);
        if (!(mi > 0) || !H.allFinite()) return false;
        min_im = std::min(min_im, mi);
        ss.push_back((k + 1) * h);
        HH.push_back(H);
    }
    return true;
}

}  // namespace detail

// Classic RK4 from s = 0 in both directions over [s_min, s_max].
inline RiccatiSolution solve_riccati(const CMat& H0, double speed, double s_min, double s_max, double ds) {
    check_initial_hessian(H0);
    if (!(speed > 0)) throw ProbeError("speed |omega| must be positive");
    if (!(ds > 0) || s_min > 0 || s_max < 0 || s_min >= s_max) throw ProbeError("invalid s range (must contain 0) or step");
    RiccatiSolution sol;
    sol.speed = speed;
    for (int refine = 0; refine < 6; ++refine, ds *= 0.5) {
        double mi = min_imag_eig(H0);
        std::vector<double> sf, sb;
        std::vector<CMat> Hf, Hb;
        if (!detail::rk4_run(H0, speed, s_max, ds, sf, Hf, mi)) continue;
        if (s_min < 0 && !detail::rk4_run(H0, speed, s_min, ds, sb, Hb, mi)) continue;
        sol.s.clear();
        sol.H.clear();
        for (std::size_t j = sb.size(); j-- > 1;) {
            sol.s.push_back(sb[j]);
            sol.H.push_back(Hb[j]);
        }
        sol.s.insert(sol.s.end(), sf.begin(), sf.end());
        sol.H.insert(sol.H.end(), Hf.begin(), Hf.end());
        sol.min_imag = mi;
        return sol;
    }
    throw ProbeError("Riccati integration lost positive definiteness of Im H after step refinement");
}

// ---- Gaussian beams ----

struct BeamSpec {
    Vec3 p = Vec3::Zero();
    Vec3 omega = Vec3(1, 0, 0);
    double eta = 0.5;
    double rho = 10.0;
    int n_phase = 4;
    int n_amp = 1;
    CMat H0;  // empty means i·Identity
    TimePlateau iota{0.1, 1.0};
    int taylor_order = 12;
    double table_ds = 0.01;
};

// Per-node time-independent pieces of v and (i∂t+Δ)v; q handled separately.
struct BeamNode {
    cplx E = 0;          // e^{iρΘ}
    cplx X = 0, Y = 0;   // amplitude a = ι X + ι' Y
    cplx K0 = 0, K1 = 0; // K(X), K(Y)
    bool active = false;
};

class Beam {
public:
    const BeamSpec& spec() const { return spec_; }
    int n() const { return n_; }
    double speed() const { return speed_; }
    const Vec3& direction() const { return u_; }
    // lower bound of Im Θ / dist² measured along the axis inside the domain
    double imag_lower_bound() const { return c0_; }

    // axial coordinate s and transverse coordinates z'
    std::pair<double, Eigen::Vector2d> coords(const Vec3& x) const {
        Vec3 d = x - spec_.p;
        Eigen::Vector2d z(d.dot(e_[0]), n_ == 3 ? d.dot(e_[1]) : 0.0);
        return {d.dot(u_), z};
    }
    double distance_to_axis(const Vec3& x) const { return coords(x).second.norm(); }
    bool in_tube(const Vec3& x) const { return distance_to_axis(x) < spec_.eta; }

    cplx phase(const Vec3& x) const {
        auto [s, z] = coords(x);
        if (n_ == 3) {
            CMat H = riccati_exact(H0_, speed_, s);
            Eigen::Vector2cd zc = z.cast<cplx>();
            return speed_ * s + 0.5 * (zc.transpose() * H * zc)(0, 0);
        }
        const auto& T = tab(s);
        const double ds = s - T.s;
        cplx r = speed_ * s, zp = z[0] * z[0];
        for (int k = 2; k <= N_; ++k, zp *= z[0]) r += horner(T.c[k], ds) * zp;
        return r;
    }

    // a0 on the centre line: exp(-(1/2|ω|)∫_0^s tr H)
    cplx axis_amplitude(double s) const {
        if (n_ == 3) return axis3(s)[0];
        return horner(tab(s).a[0], s - tab(s).s);
    }

    BeamNode node(const Vec3& x) const { return n_ == 3 ? node3(x) : node2(x); }

    cplx time_phase(double t) const { return std::exp(cplx(0, -spec_.rho * spec_.rho * speed_ * speed_ * t)); }

    cplx value(double t, const Vec3& x) const {
        BeamNode b = node(x);
        if (!b.active) return 0.0;
        return b.E * time_phase(t) * (spec_.iota(t) * b.X + spec_.iota.derivative(t, 1) * b.Y);
    }

    SpaceTimeField sample(const GridPtr& g) const {
        SpaceTimeField v(g, "beam");
        std::vector<std::pair<int, BeamNode>> act;
        for (int i = 0; i < g->num_nodes(); ++i) {
            if (g->type(i) == Grid::NodeType::Inactive) continue;
            BeamNode b = node(g->coord(i));
            if (b.active) act.emplace_back(i, b);
        }
        for (int k = 0; k < g->time_levels(); ++k) {
            const double t = g->time(k);
            RJet io = spec_.iota.jet(t, 1);
            const cplx tp = time_phase(t);
            cplx* L = v.level(k);
            for (const auto& [i, b] : act) L[i] = b.E * tp * (io[0] * b.X + io[1] * b.Y);
        }
        return v;
    }

    BoundaryData trace(const GridPtr& g) const {
        BoundaryData f(g);
        const auto& bn = g->boundary();
        for (int b = 0; b < f.slots(); ++b) {
            BeamNode nd = node(g->coord(bn[b]));
            if (!nd.active) continue;
            for (int k = 0; k < g->time_levels(); ++k) {
                const double t = g->time(k);
                RJet io = spec_.iota.jet(t, 1);
                f.at(k, b) = nd.E * time_phase(t) * (io[0] * nd.X + io[1] * nd.Y);
            }
        }
        f.label = "beam-trace";
        return f;
    }

private:
    friend Beam build_beam(const BeamSpec&, const Potential&, const Domain&);

    struct TableNode {
        double s = 0;
        std::vector<std::vector<cplx>> c, a, b, cc;  // [k][taylor coefficient]
    };

    static cplx horner(const std::vector<cplx>& j, double d) {
        cplx r = 0;
        for (int i = static_cast<int>(j.size()) - 1; i >= 0; --i) r = r * d + j[i];
        return r;
    }
    static cplx horner1(const std::vector<cplx>& j, double d) {
        cplx r = 0;
        for (int i = static_cast<int>(j.size()) - 1; i >= 1; --i) r = r * d + j[i] * double(i);
        return r;
    }
    static cplx horner2(const std::vector<cplx>& j, double d) {
        cplx r = 0;
        for (int i = static_cast<int>(j.size()) - 1; i >= 2; --i) r = r * d + j[i] * double(i * (i - 1));
        return r;
    }

    const TableNode& tab(double s) const {
        long j = std::lround(s / spec_.table_ds) - jmin_;
        if (j < 0 || j >= static_cast<long>(table_.size())) throw ProbeError("beam evaluated outside its coefficient table");
        return table_[static_cast<std::size_t>(j)];
    }

    // value, d/ds, d²/ds² of a0 for n = 3
    std::array<cplx, 3> axis3(double s) const {
        Eigen::ComplexEigenSolver<CMat> es(H0_);
        cplx logdet = 0;
        for (int j = 0; j < es.eigenvalues().size(); ++j) logdet += std::log(1.0 + s * es.eigenvalues()[j] / speed_);
        cplx a0 = std::exp(-0.5 * logdet);
        CMat H = riccati_exact(H0_, speed_, s);
        cplx tr = H.trace();
        cplx trp = (-(H * H) / speed_).trace();
        cplx a1 = -tr / (2 * speed_) * a0;
        cplx a2 = (-trp / (2 * speed_) + (tr / (2 * speed_)) * (tr / (2 * speed_))) * a0;
        return {a0, a1, a2};
    }

    BeamNode node2(const Vec3& x) const {
        BeamNode out;
        auto [s, zz] = coords(x);
        const double z = zz[0], r = std::abs(z);
        if (r >= spec_.eta) return out;
        auto ch = chi_.radial(r);
        const double sg = z < 0 ? -1.0 : 1.0;
        const double chi = ch[0], chi_z = ch[1] * sg, chi_zz = ch[2];
        if (chi == 0 && chi_z == 0 && chi_zz == 0) return out;
        out.active = true;
        const auto& T = tab(s);
        const double d = s - T.s;
        const double rho = spec_.rho;
        // phase
        std::vector<double> zp(N_ + 2, 1.0);
        for (int k = 1; k <= N_ + 1; ++k) zp[k] = zp[k - 1] * z;
        cplx Th = speed_ * s, sig = 0, phz = 0, lap = 0;
        for (int k = 2; k <= N_; ++k) {
            cplx c = horner(T.c[k], d), c1 = horner1(T.c[k], d), c2 = horner2(T.c[k], d);
            Th += c * zp[k];
            sig += c1 * zp[k];
            phz += double(k) * c * zp[k - 1];
            lap += c2 * zp[k] + double(k * (k - 1)) * c * zp[k - 2];
        }
        const cplx phs = speed_ + sig;
        const cplx E = -(2.0 * speed_ * sig + sig * sig + phz * phz);  // |ω|² - |∇φ|²
        out.E = std::exp(cplx(0, rho) * Th);
        struct Poly {
            cplx v = 0, s = 0, ss = 0, z = 0, zzv = 0;
        };
        auto poly = [&](const std::vector<std::vector<cplx>>& co, double scale) {
            Poly P;
            for (int k = 0; k <= N_; ++k) {
                cplx b = horner(co[k], d) * scale, b1 = horner1(co[k], d) * scale, b2 = horner2(co[k], d) * scale;
                P.v += b * zp[k];
                P.s += b1 * zp[k];
                P.ss += b2 * zp[k];
                if (k >= 1) P.z += double(k) * b * zp[k - 1];
                if (k >= 2) P.zzv += double(k * (k - 1)) * b * zp[k - 2];
            }
            return P;
        };
        auto add = [](Poly a, const Poly& b) {
            a.v += b.v;
            a.s += b.s;
            a.ss += b.ss;
            a.z += b.z;
            a.zzv += b.zzv;
            return a;
        };
        auto K = [&](const Poly& P) {
            cplx X = chi * P.v, Xs = chi * P.s, Xss = chi * P.ss;
            cplx Xz = chi_z * P.v + chi * P.z;
            cplx Xzz = chi_zz * P.v + 2.0 * chi_z * P.z + chi * P.zzv;
            return rho * rho * E * X + cplx(0, rho) * (2.0 * (phs * Xs + phz * Xz) + X * lap) + Xss + Xzz;
        };
        Poly PX = poly(T.a, 1.0);
        Poly PY;
        if (spec_.n_amp >= 1) {
            PX = add(PX, poly(T.cc, 1.0 / rho));
            PY = poly(T.b, 1.0 / rho);
        }
        out.X = chi * PX.v;
        out.Y = chi * PY.v;
        out.K0 = K(PX);
        out.K1 = K(PY);
        return out;
    }

    BeamNode node3(const Vec3& x) const {
        BeamNode out;
        auto [s, z] = coords(x);
        const double r = z.norm();
        if (r >= spec_.eta) return out;
        auto ch = chi_.radial(r);
        if (ch[0] == 0 && ch[1] == 0 && ch[2] == 0) return out;
        out.active = true;
        const double rho = spec_.rho;
        CMat H = riccati_exact(H0_, speed_, s);
        CMat Hp = -(H * H) / speed_;
        CMat Hpp = 2.0 * (H * H * H) / (speed_ * speed_);
        Eigen::Vector2cd zc = z.cast<cplx>();
        const cplx w = (zc.transpose() * Hp * zc)(0, 0);
        const cplx Th = speed_ * s + 0.5 * (zc.transpose() * H * zc)(0, 0);
        const cplx phs = speed_ + 0.5 * w;
        Eigen::Vector2cd gz = H * zc;
        const cplx lap = 0.5 * (zc.transpose() * Hpp * zc)(0, 0) + H.trace();
        const cplx E = -0.25 * w * w;
        auto a = axis3(s);
        const double chi = ch[0];
        const double chi_r_over_r = r > 0 ? ch[1] / r : 0.0;
        cplx X = chi * a[0], Xs = chi * a[1], Xss = chi * a[2];
        Eigen::Vector2cd Xz = (chi_r_over_r * a[0]) * zc;
        cplx Xzz = (ch[2] + chi_r_over_r) * a[0];
        out.E = std::exp(cplx(0, rho) * Th);
        out.X = X;
        out.Y = 0;
        out.K0 = rho * rho * E * X + cplx(0, rho) * (2.0 * (phs * Xs + (gz.transpose() * Xz)(0, 0)) + X * lap) + Xss + Xzz;
        out.K1 = 0;
        return out;
    }

    BeamSpec spec_;
    int n_ = 2, N_ = 2;
    double speed_ = 1;
    Vec3 u_;
    std::array<Vec3, 2> e_;
    CMat H0_;
    TubeCutoff chi_;
    std::vector<TableNode> table_;
    long jmin_ = 0;
    double c0_ = 0;
};

namespace detail {

// Taylor coefficients of the eikonal and transport chains at one station.
// State: c_k (k = 2..N), A_k, B_k, C_k (k = 0..N); q0j = Taylor coefficients of q on the axis.
struct ChainJets {
    std::vector<std::vector<cplx>> c, a, b, cc;
};

inline ChainJets chain_jets(int N, double w, int D, const std::vector<cplx>& c0, const std::vector<cplx>& a0,
                            const std::vector<cplx>& b0, const std::vector<cplx>& cc0, const std::vector<cplx>& q0j) {
    const int Dc = D + 4, Da = D + 2, Db = D;
    ChainJets J;
    J.c.assign(N + 1, std::vector<cplx>(Dc + 1, 0.0));
    J.a.assign(N + 1, std::vector<cplx>(Da + 1, 0.0));
    J.b.assign(N + 1, std::vector<cplx>(Db + 1, 0.0));
    J.cc.assign(N + 1, std::vector<cplx>(Db + 1, 0.0));
    for (int k = 2; k <= N; ++k) J.c[k][0] = c0[k];
    for (int k = 0; k <= N; ++k) {
        J.a[k][0] = a0[k];
        J.b[k][0] = b0[k];
        J.cc[k][0] = cc0[k];
    }
    auto cf = [](const std::vector<cplx>& f, int i) { return i < static_cast<int>(f.size()) ? f[i] : cplx(0); };
    auto d1 = [&](const std::vector<cplx>& f, int i) { return double(i + 1) * cf(f, i + 1); };
    auto d2 = [&](const std::vector<cplx>& f, int i) { return double((i + 1) * (i + 2)) * cf(f, i + 2); };
    // eikonal
    for (int d = 0; d < Dc; ++d)
        for (int k = 2; k <= N; ++k) {
            cplx s = 0;
            for (int j = 2; j <= k - 2; ++j) {
                int l = k - j;
                for (int i = 0; i <= d; ++i) s += d1(J.c[j], i) * d1(J.c[l], d - i);
            }
            for (int j = 2; j <= N; ++j) {
                int l = k + 2 - j;
                if (l < 2 || l > N) continue;
                for (int i = 0; i <= d; ++i) s += double(j * l) * J.c[j][i] * J.c[l][d - i];
            }
            J.c[k][d + 1] = -s / (2 * w * (d + 1));
        }
    // transport: 2|ω| x_k' = G_k - S_k
    auto transport = [&](std::vector<std::vector<cplx>>& X, int Dx, auto G) {
        for (int d = 0; d < Dx; ++d)
            for (int k = 0; k <= N; ++k) {
                cplx s = 0;
                for (int j = 2; j <= N; ++j) {
                    int m = k - j;
                    if (m >= 0)
                        for (int i = 0; i <= d; ++i)
                            s += 2.0 * d1(J.c[j], i) * d1(X[m], d - i) + d2(J.c[j], i) * X[m][d - i];
                    m = k + 2 - j;
                    if (m >= 0 && m <= N)
                        for (int i = 0; i <= d; ++i) s += double(2 * j * m + j * (j - 1)) * J.c[j][i] * X[m][d - i];
                }
                X[k][d + 1] = (G(k, d) - s) / (2 * w * (d + 1));
            }
    };
    transport(J.a, Da, [](int, int) { return cplx(0); });
    transport(J.b, Db, [&](int k, int d) { return -J.a[k][d]; });
    transport(J.cc, Db, [&](int k, int d) {
        cplx g = d2(J.a[k], d);
        if (k + 2 <= N) g += double((k + 2) * (k + 1)) * J.a[k + 2][d];
        for (int i = 0; i <= d && i < static_cast<int>(q0j.size()); ++i) g += q0j[i] * J.a[k][d - i];
        return cplx(0, 1) * g;
    });
    for (auto& v : J.c) v.resize(D + 1);
    for (auto& v : J.a) v.resize(D + 1);
    return J;
}

// Taylor coefficients (degree 8) of f at s0 from a local polynomial fit.
inline std::vector<cplx> local_taylor(const std::function<cplx(double)>& f, double s0, double h) {
    const int m = 9;
    Eigen::MatrixXd V(m, m);
    Eigen::VectorXcd y(m);
    for (int i = 0; i < m; ++i) {
        double u = -1.0 + 2.0 * i / (m - 1);
        double p = 1;
        for (int j = 0; j < m; ++j, p *= u) V(i, j) = p;
        y[i] = f(s0 + u * h);
    }
    Eigen::VectorXcd c = V.cast<cplx>().fullPivLu().solve(y);
    std::vector<cplx> out(m);
    double hp = 1;
    for (int j = 0; j < m; ++j, hp *= h) out[j] = c[j] / hp;
    return out;
}

}  // namespace detail

inline Beam build_beam(const BeamSpec& spec, const Potential& q, const Domain& dom) {
    Beam B;
    B.spec_ = spec;
    B.n_ = dom.n;
    const double w = spec.omega.head(dom.n).norm();
    if (!(w > 0)) throw ProbeError("beam direction must be nonzero");
    if (!(spec.rho > 1)) throw ProbeError("beam frequency rho must exceed 1");
    if (spec.n_amp < 0 || spec.n_amp > 1) throw ProbeError("n_amp must be 0 or 1");
    if (spec.n_phase < 2) throw ProbeError("n_phase must be at least 2");
    if (dom.n == 3 && (spec.n_phase != 2 || spec.n_amp != 0))
        throw ProbeError("n = 3 beams support n_phase = 2 and n_amp = 0 only");
    if (!dom.strictly_inside(spec.p)) throw ProbeError("beam base point must be interior");
    B.speed_ = w;
    B.u_ = Vec3::Zero();
    B.u_.head(dom.n) = spec.omega.head(dom.n) / w;
    if (dom.n == 2) {
        B.e_[0] = Vec3(-B.u_[1], B.u_[0], 0);
        B.e_[1] = Vec3::Zero();
    } else {
        Vec3 a = std::abs(B.u_[0]) < 0.9 ? Vec3(1, 0, 0) : Vec3(0, 1, 0);
        B.e_[0] = (a - a.dot(B.u_) * B.u_).normalized();
        B.e_[1] = B.u_.cross(B.e_[0]);
    }
    const int m = dom.n - 1;
    B.H0_ = spec.H0.size() == 0 ? CMat(cplx(0, 1) * CMat::Identity(m, m)) : spec.H0;
    if (B.H0_.rows() != m) throw ProbeError("H0 has the wrong size for this dimension");
    check_initial_hessian(B.H0_);
    B.chi_ = TubeCutoff(spec.eta);
    // the tube cross-section at p must lie inside the domain
    for (int j = 0; j < m; ++j)
        for (double sg : {-1.0, 1.0})
            if (!dom.contains(spec.p + sg * spec.eta * B.e_[j], 0.0))
                throw ProbeError("beam tube leaves the domain: reduce eta or move p");
    const double L = dom.diameter() + spec.eta;
    if (dom.n == 3) {
        double mi = std::numeric_limits<double>::infinity();
        for (double s = -L; s <= L; s += spec.table_ds) mi = std::min(mi, min_imag_eig(riccati_exact(B.H0_, w, s)));
        if (!(mi > 0)) throw ProbeError("Im H lost positive definiteness");
        B.c0_ = 0.5 * mi;
        return B;
    }
    // n = 2: Taylor-stepped coefficient tables over [-L, L]
    const int N = spec.n_phase, D = spec.taylor_order;
    B.N_ = N;
    const double ds = spec.table_ds;
    const long jn = static_cast<long>(std::ceil(L / ds)) + 1;
    B.jmin_ = -jn;
    B.table_.resize(static_cast<std::size_t>(2 * jn + 1));
    const bool use_q = q.time_independent && !q.is_zero();
    auto q_axis = [&](double s) { return q(0.0, spec.p + s * B.u_); };
    auto qjets = [&](double s) -> std::vector<cplx> {
        if (!use_q) return {};
        if (q.constant) return {*q.constant};
        return detail::local_taylor(q_axis, s, ds);
    };
    auto station = [&](long j, const std::vector<cplx>& c0, const std::vector<cplx>& a0, const std::vector<cplx>& b0,
                       const std::vector<cplx>& cc0) {
        const double s = j * ds;
        auto J = detail::chain_jets(N, w, D, c0, a0, b0, cc0, qjets(s));
        auto& T = B.table_[static_cast<std::size_t>(j - B.jmin_)];
        T.s = s;
        T.c = J.c;
        T.a = J.a;
        T.b = J.b;
        T.cc = J.cc;
    };
    auto advance = [&](const Beam::TableNode& T, double h, std::vector<cplx>& c0, std::vector<cplx>& a0, std::vector<cplx>& b0,
                       std::vector<cplx>& cc0) {
        for (int k = 0; k <= N; ++k) {
            if (k >= 2) c0[k] = Beam::horner(T.c[k], h);
            a0[k] = Beam::horner(T.a[k], h);
            b0[k] = Beam::horner(T.b[k], h);
            cc0[k] = Beam::horner(T.cc[k], h);
        }
    };
    std::vector<cplx> ic(N + 1, 0.0), ia(N + 1, 0.0), ib(N + 1, 0.0), icc(N + 1, 0.0);
    ic[2] = 0.5 * B.H0_(0, 0);
    ia[0] = 1.0;
    for (int dir : {1, -1}) {
        auto c0 = ic, a0 = ia, b0 = ib, cc0 = icc;
        for (long j = 0; std::abs(j) <= jn; j += dir) {
            if (j != 0 || dir == 1) station(j, c0, a0, b0, cc0);
            if (std::abs(j + dir) > jn) break;
            advance(B.table_[static_cast<std::size_t>(j - B.jmin_)], dir * ds, c0, a0, b0, cc0);
        }
    }
    double mi = std::numeric_limits<double>::infinity();
    for (const auto& T : B.table_) {
        Vec3 x = spec.p + T.s * B.u_;
        if (!dom.contains(x)) continue;
        mi = std::min(mi, T.c[2][0].imag());
    }
    if (!(mi > 0)) throw ProbeError("Im H lost positive definiteness along the beam");
    B.c0_ = mi;
    return B;
}

struct BeamResidual {
    SpaceTimeField field;
    double l2 = 0;
    double h1_time = 0;  // H¹(0,T; L²(Ω))
};

// (i∂t+Δ+q)v evaluated in closed form at the grid nodes.
inline BeamResidual beam_residual(const Beam& beam, const Potential& q, const GridPtr& g) {
    const double width = 1.0 / std::sqrt(beam.spec().rho);
    for (int d = 0; d < g->n(); ++d)
        if (width / g->dx(d) < 6.0)
            throw ResolutionError("grid under-resolves the beam width rho^{-1/2} = " + std::to_string(width) +
                                  ": need dx <= " + std::to_string(width / 6.0));
    const double rho = beam.spec().rho, w = beam.speed();
    const cplx I(0, 1);
    std::vector<std::pair<int, BeamNode>> act;
    for (int i = 0; i < g->num_nodes(); ++i) {
        if (g->type(i) == Grid::NodeType::Inactive) continue;
        BeamNode b = beam.node(g->coord(i));
        if (b.active) act.emplace_back(i, b);
    }
    std::vector<cplx> qs;
    const bool tdep = !q.time_independent;
    if (!q.is_zero() && !tdep) qs = q.sample_space(*g, 0.0);
    BeamResidual out{SpaceTimeField(g, "beam-residual")};
    double l2 = 0, dt2 = 0;
    for (int k = 0; k < g->time_levels(); ++k) {
        const double t = g->time(k);
        RJet io = beam.spec().iota.jet(t, 3);
        const double i0 = io.derivative(0), i1 = io.derivative(1), i2 = io.derivative(2), i3 = io.derivative(3);
        const cplx tp = beam.time_phase(t);
        if (tdep && !q.is_zero()) qs = q.sample_space(*g, t);
        cplx* L = out.field.level(k);
        double sk = 0, sdk = 0;
        for (const auto& [i, b] : act) {
            const cplx qq = qs.empty() ? cplx(0) : qs[i];
            const cplx R0 = b.K0 + qq * b.X, R1 = b.K1 + I * b.X + qq * b.Y, R2 = I * b.Y;
            const cplx inner = i0 * R0 + i1 * R1 + i2 * R2;
            const cplx dinner = i1 * R0 + i2 * R1 + i3 * R2;
            const cplx r = b.E * tp * inner;
            const cplx rt = b.E * tp * (-I * rho * rho * w * w * inner + dinner);
            L[i] = r;
            const double wv = g->volume_weight(i);
            sk += wv * std::norm(r);
            sdk += wv * std::norm(rt);
        }
        l2 += g->time_weight(k) * sk;
        dt2 += g->time_weight(k) * sdk;
    }
    out.l2 = std::sqrt(l2);
    out.h1_time = std::sqrt(l2 + dt2);
    return out;
}

}  // namespace nlsdn
