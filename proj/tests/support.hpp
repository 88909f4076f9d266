#pragma once

// Reference implementations used only by the tests: operators built from
// explicit Kronecker products and a dense Liouvillian propagated with expm.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline Mat annihilation(int levels)
{
    Mat a = Mat::Zero(levels, levels);
    for (int n = 1; n < levels; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

inline Mat eye(int n) { return Mat::Identity(n, n); }

inline Mat kron(const Mat& a, const Mat& b) { return Eigen::kroneckerProduct(a, b).eval(); }

/// |g><e| with |g> = 0.
inline Mat lowering()
{
    Mat s = Mat::Zero(2, 2);
    s(0, 1) = 1.0;
    return s;
}

/// Column-major vec(L[rho]) = Lsup vec(rho).
inline Mat liouvillian(const Mat& h, const std::vector<std::pair<Mat, double>>& jumps)
{
    const int d = static_cast<int>(h.rows());
    const Mat i = eye(d);
    const cd j(0.0, 1.0);
    Mat l = -j * (kron(i, h) - kron(h.transpose(), i));
    for (const auto& [op, rate] : jumps) {
        const Mat ldl = op.adjoint() * op;
        l += rate * (kron(op.conjugate(), op) - 0.5 * kron(i, ldl) - 0.5 * kron(ldl.transpose(), i));
    }
    return l;
}

inline Vec vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

inline Mat unvec(const Vec& v, int d) { return Eigen::Map<const Mat>(v.data(), d, d); }

inline Mat propagate(const Mat& lsup, const Mat& rho0, double t)
{
    const Mat prop = (lsup * t).exp();
    return unvec(prop * vec(rho0), static_cast<int>(rho0.rows()));
}

inline double expect(const Mat& op, const Mat& rho) { return (op * rho).trace().real(); }

/// max |a - b| / max(|b|, floor).
inline double rel_err(double a, double b, double floor)
{
    return std::abs(a - b) / std::max(std::abs(b), floor);
}

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace oracle
