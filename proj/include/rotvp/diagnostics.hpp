#pragma once
/// Physics diagnostics of a SolutionState: characteristics of the rotating-frame
/// equations of motion with Jacobi's integral, and symmetry / flattening measures.

#include <array>
#include <cmath>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "ansatz.hpp"
#include "deformation.hpp"
#include "errors.hpp"
#include "operator.hpp"

namespace rotvp {

struct OrbitSample {
    Vec3 x0{}, v0{};
    std::vector<double> t;
    std::vector<Vec3> x, v;
    std::vector<double> jacobi;    ///< E_J along the orbit
    std::vector<double> momentum;  ///< P = x1 v2 - x2 v1
    std::vector<double> f;         ///< phase-space density along the orbit

    double jacobi_drift() const {
        double worst = 0.0;
        for (double e : jacobi) worst = std::max(worst, std::abs(e - jacobi.front()));
        return worst / std::abs(jacobi.front());
    }
    double f_variation() const {
        double worst = 0.0;
        for (double q : f) worst = std::max(worst, std::abs(q - f.front()));
        return worst;
    }
    double max_radius() const {
        double r = 0.0;
        for (const auto& p : x) r = std::max(r, norm(p));
        return r;
    }
};

/// Integrates x' = v, v' = -grad U + 2 omega (v2, -v1, 0) + omega^2 (x1, x2, 0)
/// with an adaptive Runge-Kutta-Fehlberg 7(8) method, sampling `samples` times
/// uniformly on [0, t_end]. Throws OrbitEscape if the orbit leaves B_4.
inline OrbitSample integrate_characteristic(const SolutionState& st, const Vec3& x0, const Vec3& v0, double t_end,
                                            double tol = 1e-12, int samples = 200) {
    namespace ode = boost::numeric::odeint;
    using State = std::array<double, 6>;
    const double w = st.omega;
    const double EJ0 = jacobi_integral(x0, v0, st.potential(x0), w);
    if (!(EJ0 < st.ansatz.E0))
        throw std::invalid_argument("integrate_characteristic: initial point is not bound (E_J >= E0)");
    auto rhs = [&](const State& y, State& dy, double) {
        const Vec3 x{y[0], y[1], y[2]};
        if (!(norm(x) < 4.0)) throw OrbitEscape("characteristic left B_4");
        const Vec3 g = st.potential_gradient(x);
        dy[0] = y[3];
        dy[1] = y[4];
        dy[2] = y[5];
        dy[3] = -g[0] + 2.0 * w * y[4] + w * w * y[0];
        dy[4] = -g[1] - 2.0 * w * y[3] + w * w * y[1];
        dy[5] = -g[2];
    };
    OrbitSample out;
    out.x0 = x0;
    out.v0 = v0;
    std::vector<double> times(samples + 1);
    for (int i = 0; i <= samples; ++i) times[i] = t_end * i / samples;
    State y{x0[0], x0[1], x0[2], v0[0], v0[1], v0[2]};
    ode::integrate_times(ode::make_controlled(tol, tol, ode::runge_kutta_fehlberg78<State>()), rhs, y, times.begin(),
                         times.end(), t_end / samples / 10.0, [&](const State& s, double t) {
                             const Vec3 x{s[0], s[1], s[2]}, v{s[3], s[4], s[5]};
                             const double U = st.potential(x);
                             out.t.push_back(t);
                             out.x.push_back(x);
                             out.v.push_back(v);
                             out.jacobi.push_back(jacobi_integral(x, v, U, w));
                             out.momentum.push_back(x[0] * v[1] - x[1] * v[0]);
                             out.f.push_back(norm(x) < 4.0 ? phi_eval(out.jacobi.back(), st.ansatz) : 0.0);
                         });
    return out;
}

struct SymmetryReport {
    double mirror = 0.0;        ///< max |rho(Ax) - rho(x)| over A in S and probe points
    double sphericity = 0.0;    ///< sup of (n,m) != (0,0) density modes relative to sup rho_00
    double axisymmetry = 0.0;   ///< sup of m != 0 density and deformation modes, relative
    double flattening = 0.0;    ///< (R_equator - R_pole) / R_equator, positive = oblate
    double equatorial_radius = 0.0;
    double polar_radius = 0.0;
};

/// Radius along the unit direction xi where the density first vanishes:
/// U0(t*(s)) - omega^2 r_cyl(s xi)^2 / 2 = E0 with t* the preimage radius.
inline double effective_radius(const SolutionState& st, const RadialProfile& p, const Vec3& xi) {
    auto excess = [&](double s) {
        const Vec3 y{s * xi[0], s * xi[1], s * xi[2]};
        const double t = norm(g_inverse(st.zeta, y));
        const double rc = cylindrical_radius(y);
        return profile_eval(p, t).U0 - 0.5 * st.omega * st.omega * rc * rc - p.E0;
    };
    double lo = 0.5, hi = 2.0;
    boost::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) < 1e-14; };
    const auto [a, b] = boost::math::tools::toms748_solve(excess, lo, hi, tol, iters);
    return 0.5 * (a + b);
}

inline SymmetryReport measure_symmetry(const SolutionState& st, const RadialProfile& p) {
    SymmetryReport rep;
    const SymmetryBasis& b = st.rho.basis ? *st.rho.basis : st.zeta.basis();
    const Eigen::MatrixXd& rc = st.rho.coeffs;
    const double scale = rc.row(0).cwiseAbs().maxCoeff();
    const Eigen::MatrixXd& zc = st.zeta.coeffs();
    const double zscale = std::max(zc.cwiseAbs().maxCoeff(), 1e-300);
    for (std::size_t k = 1; k < b.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double mag = rc.row(kk).cwiseAbs().maxCoeff() / scale;
        rep.sphericity = std::max(rep.sphericity, mag);
        if (b.modes()[k].m != 0) {
            rep.axisymmetry = std::max(rep.axisymmetry, mag);
            if (zc.cwiseAbs().maxCoeff() > 0.0)
                rep.axisymmetry = std::max(rep.axisymmetry, zc.row(kk).cwiseAbs().maxCoeff() / zscale);
        }
    }
    // Mirror residual on a deterministic probe set inside B_3.
    const std::array<std::array<double, 3>, 7> signs{{{-1, 1, 1}, {1, -1, 1}, {1, 1, -1}, {-1, -1, 1}, {-1, 1, -1},
                                                      {1, -1, -1}, {-1, -1, -1}}};
    for (int i = 0; i < 64; ++i) {
        const double r = 1.2 * (i + 0.5) / 64.0;
        const double ct = std::cos(0.37 + 2.1 * i), phi = 1.3 * i;
        const double stt = std::sqrt(1.0 - ct * ct);
        const Vec3 x{r * stt * std::cos(phi), r * stt * std::sin(phi), r * ct};
        const double base = st.density(x);
        for (const auto& s : signs)
            rep.mirror = std::max(rep.mirror, std::abs(st.density({s[0] * x[0], s[1] * x[1], s[2] * x[2]}) - base));
    }
    rep.equatorial_radius = effective_radius(st, p, {1.0, 0.0, 0.0});
    rep.polar_radius = effective_radius(st, p, {0.0, 0.0, 1.0});
    rep.flattening = (rep.equatorial_radius - rep.polar_radius) / rep.equatorial_radius;
    return rep;
}

}  // namespace rotvp
