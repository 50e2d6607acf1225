#pragma once

#include <cmath>

namespace ltube {

/// Three-component vector over an arbitrary real scalar.
///
/// The scalar is a template parameter so that the same kernel can run in
/// `double` for Monte Carlo work and in a wide multiprecision type for
/// long-horizon reversibility and oracle comparisons.
template <class Real>
struct Vec3T {
    Real x{0};
    Real y{0};
    Real z{0};

    constexpr Vec3T() = default;
    constexpr Vec3T(Real x_, Real y_, Real z_) : x(x_), y(y_), z(z_) {}

    template <class Other>
    static Vec3T from(const Vec3T<Other>& o) {
        return {Real(o.x), Real(o.y), Real(o.z)};
    }

    Vec3T& operator+=(const Vec3T& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    Vec3T& operator-=(const Vec3T& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    Vec3T& operator*=(const Real& s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }

    friend Vec3T operator+(Vec3T a, const Vec3T& b) { return a += b; }
    friend Vec3T operator-(Vec3T a, const Vec3T& b) { return a -= b; }
    friend Vec3T operator*(Vec3T a, const Real& s) { return a *= s; }
    friend Vec3T operator*(const Real& s, Vec3T a) { return a *= s; }
    friend Vec3T operator/(Vec3T a, const Real& s) { return a *= Real(1) / s; }
    friend Vec3T operator-(const Vec3T& a) { return {-a.x, -a.y, -a.z}; }

    friend bool operator==(const Vec3T& a, const Vec3T& b) {
        return a.x == b.x && a.y == b.y && a.z == b.z;
    }
};

template <class Real>
Real dot(const Vec3T<Real>& a, const Vec3T<Real>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class Real>
Vec3T<Real> cross(const Vec3T<Real>& a, const Vec3T<Real>& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class Real>
Real norm2(const Vec3T<Real>& a) {
    return dot(a, a);
}

template <class Real>
Real norm(const Vec3T<Real>& a) {
    using std::sqrt;
    return sqrt(dot(a, a));
}

template <class Real>
Vec3T<Real> normalized(const Vec3T<Real>& a) {
    return a / norm(a);
}

/// Component of `a` orthogonal to the unit vector `u`.
template <class Real>
Vec3T<Real> reject(const Vec3T<Real>& a, const Vec3T<Real>& u) {
    return a - dot(a, u) * u;
}

template <class Real>
bool is_finite(const Vec3T<Real>& a) {
    using std::isfinite;
    return isfinite(a.x) && isfinite(a.y) && isfinite(a.z);
}

/// Any unit vector orthogonal to the unit vector `u`.
template <class Real>
Vec3T<Real> any_orthogonal(const Vec3T<Real>& u) {
    using std::abs;
    Vec3T<Real> trial = abs(u.x) < Real(0.6) ? Vec3T<Real>{1, 0, 0} : Vec3T<Real>{0, 1, 0};
    return normalized(reject(trial, u));
}

using Vec3 = Vec3T<double>;

struct Vec2 {
    double u{0};
    double v{0};
};

/// Position-velocity pair with |v| = 1; the phase point of the billiard flow.
template <class Real>
struct LineElementT {
    Vec3T<Real> q;
    Vec3T<Real> v;

    template <class Other>
    static LineElementT from(const LineElementT<Other>& o) {
        return {Vec3T<Real>::from(o.q), Vec3T<Real>::from(o.v)};
    }
};

using LineElement = LineElementT<double>;

/// Time reversal (q, v) -> (q, -v).
template <class Real>
LineElementT<Real> reverse(const LineElementT<Real>& x) {
    return {x.q, -x.v};
}

}  // namespace ltube
