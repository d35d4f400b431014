#pragma once

// Truncated Taylor series arithmetic. c[d] holds f^(d)(x0)/d!.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace nlsdn {

template <class T>
class Jet {
public:
    Jet() = default;
    explicit Jet(int order, T value = T(0)) : c_(static_cast<std::size_t>(order) + 1, T(0)) { c_[0] = value; }

    // x0 + (x - x0): the independent variable itself
    static Jet variable(int order, T x0) {
        Jet j(order, x0);
        if (order >= 1) j.c_[1] = T(1);
        return j;
    }

    int order() const { return static_cast<int>(c_.size()) - 1; }
    T& operator[](int d) { return c_[static_cast<std::size_t>(d)]; }
    const T& operator[](int d) const { return c_[static_cast<std::size_t>(d)]; }
    T value() const { return c_[0]; }

    // k-th derivative at the expansion point
    T derivative(int k) const {
        if (k > order()) return T(0);
        double f = 1.0;
        for (int i = 2; i <= k; ++i) f *= i;
        return c_[static_cast<std::size_t>(k)] * f;
    }

    // Taylor polynomial evaluated at x0 + delta, and its first two derivatives
    T eval(T delta) const {
        T r(0);
        for (int d = order(); d >= 0; --d) r = r * delta + c_[static_cast<std::size_t>(d)];
        return r;
    }
    T eval_d1(T delta) const {
        T r(0);
        for (int d = order(); d >= 1; --d) r = r * delta + c_[static_cast<std::size_t>(d)] * T(d);
        return r;
    }
    T eval_d2(T delta) const {
        T r(0);
        for (int d = order(); d >= 2; --d) r = r * delta + c_[static_cast<std::size_t>(d)] * T(d * (d - 1));
        return r;
    }

    // d/dx as a jet of one lower order
    Jet diff() const {
        Jet r(order() > 0 ? order() - 1 : 0);
        for (int d = 1; d <= order(); ++d) r[d - 1] = c_[static_cast<std::size_t>(d)] * T(d);
        return r;
    }

    Jet& operator+=(const Jet& o) {
        for (int d = 0; d <= order() && d <= o.order(); ++d) c_[d] += o.c_[d];
        return *this;
    }
    Jet& operator-=(const Jet& o) {
        for (int d = 0; d <= order() && d <= o.order(); ++d) c_[d] -= o.c_[d];
        return *this;
    }
    Jet& operator*=(T s) {
        for (auto& v : c_) v *= s;
        return *this;
    }
    Jet& operator+=(T s) {
        c_[0] += s;
        return *this;
    }

    friend Jet operator+(Jet a, const Jet& b) { return a += b; }
    friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
    friend Jet operator*(Jet a, T s) { return a *= s; }
    friend Jet operator*(T s, Jet a) { return a *= s; }
    friend Jet operator+(Jet a, T s) { return a += s; }
    friend Jet operator-(Jet a) { return a *= T(-1); }

    friend Jet operator*(const Jet& a, const Jet& b) {
        const int k = std::min(a.order(), b.order());
        Jet r(k);
        for (int d = 0; d <= k; ++d) {
            T s(0);
            for (int i = 0; i <= d; ++i) s += a.c_[i] * b.c_[d - i];
            r.c_[d] = s;
        }
        return r;
    }

    friend Jet reciprocal(const Jet& a) {
        Jet r(a.order());
        r.c_[0] = T(1) / a.c_[0];
        for (int d = 1; d <= a.order(); ++d) {
            T s(0);
            for (int i = 1; i <= d; ++i) s += a.c_[i] * r.c_[d - i];
            r.c_[d] = -s * r.c_[0];
        }
        return r;
    }

    friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

    friend Jet exp(const Jet& a) {
        using std::exp;
        Jet r(a.order());
        r.c_[0] = exp(a.c_[0]);
        for (int d = 1; d <= a.order(); ++d) {
            T s(0);
            for (int i = 1; i <= d; ++i) s += T(i) * a.c_[i] * r.c_[d - i];
            r.c_[d] = s / T(d);
        }
        return r;
    }

private:
    std::vector<T> c_;
};

using RJet = Jet<double>;
using CJet = Jet<std::complex<double>>;

}  // namespace nlsdn
