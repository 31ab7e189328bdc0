#pragma once
/// Microscopic ansatz phi(E_J) = (E0 - E_J)_+^k and its velocity-integrated
/// closures h(s), h~(omega, r, u).

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/tanh_sinh.hpp>

namespace rotvp {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
/// Distance from the rotation (x3) axis.
inline double cylindrical_radius(const Vec3& x) { return std::hypot(x[0], x[1]); }

/// 4*pi*sqrt(2) * B(3/2, k+1): the factor in h(s) = c_k (E0 - s)_+^{k+3/2}.
inline double closure_prefactor(double k) {
    return 4.0 * std::numbers::pi * std::numbers::sqrt2 * std::tgamma(k + 1.0) * std::tgamma(1.5) /
           std::tgamma(k + 2.5);
}

/// Polytropic ansatz parameters. E1 is the margin U0(2) - E0 supplied by the
/// base state; it only enters the hard cutoff of h~.
struct AnsatzParams {
    double k = 1.5;
    double E0 = -1.0;
    double E1 = std::numeric_limits<double>::infinity();
    double c_k = closure_prefactor(1.5);

    AnsatzParams() = default;
    AnsatzParams(double k_, double E0_, double E1_ = std::numeric_limits<double>::infinity())
        : k(k_), E0(E0_), E1(E1_), c_k(closure_prefactor(k_)) {
        if (!(k > 1.0)) throw std::invalid_argument("AnsatzParams: polytropic exponent must exceed 1");
        if (!(E0 < 0.0)) throw std::invalid_argument("AnsatzParams: cutoff energy E0 must be negative");
        if (!(E1 > 0.0)) throw std::invalid_argument("AnsatzParams: margin E1 must be positive");
    }

    /// Density exponent k + 3/2.
    double density_exponent() const { return k + 1.5; }
};

inline double phi_eval(double EJ, const AnsatzParams& p) {
    const double d = p.E0 - EJ;
    return d > 0.0 ? std::pow(d, p.k) : 0.0;
}

inline double h_eval(double s, const AnsatzParams& p) {
    const double d = p.E0 - s;
    return d > 0.0 ? p.c_k * std::pow(d, p.k + 1.5) : 0.0;
}

struct ClosureDerivatives {
    double first = 0.0;
    double second = 0.0;
};

inline ClosureDerivatives h_derivatives(double s, const AnsatzParams& p) {
    const double d = p.E0 - s;
    if (!(d > 0.0)) return {};
    const double a = p.k + 1.5;
    return {-p.c_k * a * std::pow(d, p.k + 0.5), p.c_k * a * (p.k + 0.5) * std::pow(d, p.k - 0.5)};
}

/// Spatial density at potential value u and cylindrical radius r, with the hard
/// cutoff at u >= E0 + E1.
inline double tilde_h(double omega, double r, double u, const AnsatzParams& p) {
    if (r < 0.0) throw std::invalid_argument("tilde_h: cylindrical radius must be non-negative");
    if (!(u < p.E0 + p.E1)) return 0.0;
    return h_eval(u - 0.5 * omega * omega * r * r, p);
}

/// d h~ / du (zero on the cutoff branch).
inline double tilde_h_du(double omega, double r, double u, const AnsatzParams& p) {
    if (!(u < p.E0 + p.E1)) return 0.0;
    return h_derivatives(u - 0.5 * omega * omega * r * r, p).first;
}

/// Jacobi integral 1/2 |v|^2 + U(x) - 1/2 omega^2 r(x)^2.
inline double jacobi_integral(const Vec3& x, const Vec3& v, double U, double omega) {
    const double r = cylindrical_radius(x);
    return 0.5 * dot(v, v) + U - 0.5 * omega * omega * r * r;
}

/// Phase-space density of the rotating steady state; zero outside |x| < 4.
template <class Potential>
double f_eval(const Vec3& x, const Vec3& v, const Potential& U, double omega, const AnsatzParams& p) {
    if (!(norm(x) < 4.0)) return 0.0;
    return phi_eval(jacobi_integral(x, v, U(x), omega), p);
}

/// Closure for a general ansatz phi by adaptive quadrature of
///   h(s)   = 4 pi sqrt2  int_s^E0 sqrt(E - s) phi(E) dE,
///   h'(s)  = -2 pi sqrt2 int_s^E0 phi(E) / sqrt(E - s) dE,
///   h''(s) = -2 pi sqrt2 int_s^E0 phi'(E) / sqrt(E - s) dE.
/// Serves as the reference for the closed-form polytrope path.
class QuadratureClosure {
public:
    QuadratureClosure(std::function<double(double)> phi, std::function<double(double)> dphi, double E0)
        : phi_(std::move(phi)), dphi_(std::move(dphi)), E0_(E0) {}

    double h(double s) const {
        const double L = E0_ - s;
        if (!(L > 0.0)) return 0.0;
        const double I = integrate([&](double t) { return std::sqrt(t) * phi_(s + L * t); });
        return 4.0 * std::numbers::pi * std::numbers::sqrt2 * std::pow(L, 1.5) * I;
    }

    ClosureDerivatives derivatives(double s) const {
        const double L = E0_ - s;
        if (!(L > 0.0)) return {};
        const double c = -2.0 * std::numbers::pi * std::numbers::sqrt2 * std::sqrt(L);
        const double I1 = integrate([&](double t) { return phi_(s + L * t) / std::sqrt(t); });
        const double I2 = integrate([&](double t) { return dphi_(s + L * t) / std::sqrt(t); });
        return {c * I1, c * I2};
    }

private:
    template <class F>
    static double integrate(F f) {
        thread_local boost::math::quadrature::tanh_sinh<double> rule(15);
        return rule.integrate(f, 0.0, 1.0, 1e-15);
    }

    std::function<double(double)> phi_;
    std::function<double(double)> dphi_;
    double E0_;
};

}  // namespace rotvp
