#pragma once
/// Non-rotating polytropic base state (rho0, U0), normalized so that
/// supp rho0 = B_1 and U0(1) = E0, with the vacuum extension to [0, 4].

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "ansatz.hpp"
#include "quadrature.hpp"

namespace rotvp {

class ProfileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Output of the outward shooting integration in unscaled variables
/// w = E0 - U0.
struct RawEmden {
    double k = 1.5;
    double w_c = 1.0;
    std::vector<double> r, w, dw;  ///< accepted integrator steps
    double R = 0.0;                ///< first zero of w
    double dw_R = 0.0;             ///< w'(R)
};

namespace detail {

using EmdenState = std::array<double, 2>;  // (delta, delta') with w = w_c + delta

struct EmdenRhs {
    double w_c, a, n;
    void operator()(const EmdenState& y, EmdenState& dy, double r) const {
        const double w = w_c + y[0];
        const double src = w > 0.0 ? a * std::pow(w, n) : 0.0;
        dy[0] = y[1];
        dy[1] = -2.0 * y[1] / r - src;
    }
};

/// Taylor start of the regular solution: theta = 1 - xi^2/6 + n xi^4/120 - n(8n-5) xi^6/15120.
inline EmdenState emden_series(double r, double w_c, double a, double n) {
    const double ell = 1.0 / std::sqrt(a * std::pow(w_c, n - 1.0));
    const double xi = r / ell;
    const double x2 = xi * xi;
    const double theta_m1 = x2 * (-1.0 / 6.0 + x2 * (n / 120.0 - x2 * n * (8.0 * n - 5.0) / 15120.0));
    const double dtheta = xi * (-1.0 / 3.0 + x2 * (n / 30.0 - x2 * n * (8.0 * n - 5.0) / 2520.0));
    return {w_c * theta_m1, w_c * dtheta / ell};
}

inline double emden_start_radius(double w_c, double a, double n) {
    const double ell = 1.0 / std::sqrt(a * std::pow(w_c, n - 1.0));
    return std::min(1e-4, 1e-3 * ell);
}

constexpr double kEmdenAbsTol = 1e-16;
constexpr double kEmdenRelTol = 1e-14;

}  // namespace detail

/// Integrates w'' + (2/r) w' = -4 pi c_k w_+^{k+3/2}, w(0) = w_c, w'(0) = 0
/// outward until w changes sign; the zero is refined on the one-step map.
inline RawEmden solve_emden(double k, double w_c, double r_max = 100.0) {
    namespace ode = boost::numeric::odeint;
    if (!(k > 1.0)) throw std::invalid_argument("solve_emden: k must exceed 1");
    if (!(w_c > 0.0)) throw std::invalid_argument("solve_emden: central depth must be positive");
    const double n = k + 1.5;
    const double a = 4.0 * std::numbers::pi * closure_prefactor(k);
    const detail::EmdenRhs rhs{w_c, a, n};

    RawEmden out;
    out.k = k;
    out.w_c = w_c;
    out.r.push_back(0.0);
    out.w.push_back(w_c);
    out.dw.push_back(0.0);

    double r = detail::emden_start_radius(w_c, a, n);
    detail::EmdenState y = detail::emden_series(r, w_c, a, n);
    auto stepper = ode::make_controlled(detail::kEmdenAbsTol, detail::kEmdenRelTol,
                                        ode::runge_kutta_fehlberg78<detail::EmdenState>());
    double dt = r;
    while (r < r_max) {
        out.r.push_back(r);
        out.w.push_back(w_c + y[0]);
        out.dw.push_back(y[1]);
        const detail::EmdenState y_prev = y;
        const double r_prev = r;
        dt = std::min(dt, r_max - r);
        while (stepper.try_step(rhs, y, r, dt) == ode::fail) {
        }
        if (w_c + y[0] <= 0.0) {
            // Root of w on the single step map from (r_prev, y_prev).
            ode::runge_kutta_fehlberg78<detail::EmdenState> one_step;
            auto w_after = [&](double h) {
                if (h == 0.0) return w_c + y_prev[0];
                detail::EmdenState z = y_prev;
                one_step.do_step(rhs, z, r_prev, h);
                return w_c + z[0];
            };
            const double h_full = r - r_prev;
            boost::uintmax_t iters = 200;
            auto tol = [](double lo, double hi) { return std::abs(hi - lo) < 1e-15; };
            auto [lo, hi] = boost::math::tools::toms748_solve(w_after, 0.0, h_full, w_after(0.0),
                                                              w_after(h_full), tol, iters);
            const double h = 0.5 * (lo + hi);
            detail::EmdenState z = y_prev;
            one_step.do_step(rhs, z, r_prev, h);
            out.R = r_prev + h;
            out.dw_R = z[1];
            out.r.push_back(out.R);
            out.w.push_back(0.0);
            out.dw.push_back(out.dw_R);
            return out;
        }
    }
    throw ProfileError("solve_emden: w did not reach zero before r_max (non-compact support)");
}

/// Values of the base state at one radius.
struct ProfileValues {
    double U0 = 0.0;
    double U0p = 0.0;
    double rho0 = 0.0;
    double rho0p = 0.0;
    double U0_rel = 0.0;  ///< U0(r) - U0(0), accurate near the centre
};

/// Base state tabulated on composite Lobatto panels [0,1], [1,2], [2,4].
struct RadialProfile {
    AnsatzParams ansatz;
    std::shared_ptr<const RadialGrid> grid;
    std::vector<double> U0, U0_rel, U0p, rho0, rho0p;
    double M = 0.0;
    double E0 = 0.0;
    double E1 = 0.0;
    double C_lb = 0.0;
    double W_c = 0.0;       ///< central depth E0 - U0(0)
    double U0_center = 0.0; ///< U0(0)

    double k() const { return ansatz.k; }
    /// Largest admissible angular velocity sqrt(E1)/4.
    double omega_cap() const { return std::sqrt(E1) / 4.0; }
};

inline std::shared_ptr<const RadialGrid> make_field_grid(int nodes_per_panel) {
    return std::make_shared<const RadialGrid>(std::vector<double>{0.0, 1.0, 2.0, 4.0}, nodes_per_panel);
}

/// Rescales the raw solution so the support radius becomes 1, fixes E0 = -M and
/// fills the [0,4] grid (vacuum formulas for r >= 1).
inline RadialProfile normalize_profile(const RawEmden& raw, int nodes_per_panel = 64) {
    namespace ode = boost::numeric::odeint;
    if (!(raw.R > 0.0)) throw ProfileError("normalize_profile: raw profile has no support radius");
    const double k = raw.k;
    const double n = k + 1.5;
    const double a = 4.0 * std::numbers::pi * closure_prefactor(k);
    const double W_c = raw.w_c * std::pow(raw.R, 2.0 / (n - 1.0));
    const detail::EmdenRhs rhs{W_c, a, n};

    RadialProfile p;
    p.grid = make_field_grid(nodes_per_panel);
    const auto& r = p.grid->nodes();
    const std::size_t N = r.size();
    const int inner = nodes_per_panel;  // nodes of panel [0,1], last one at r = 1

    // delta = W - W_c on the inner panel
    std::vector<double> delta(inner, 0.0), ddelta(inner, 0.0);
    const double r0 = detail::emden_start_radius(W_c, a, n);
    std::vector<double> times{r0};
    for (int i = 1; i < inner; ++i) {
        if (r[i] < r0) {
            const auto s = detail::emden_series(r[i], W_c, a, n);
            delta[i] = s[0];
            ddelta[i] = s[1];
        } else {
            times.push_back(r[i]);
        }
    }
    detail::EmdenState y = detail::emden_series(r0, W_c, a, n);
    std::size_t obs = 0;
    const std::size_t first_integrated = static_cast<std::size_t>(inner) - (times.size() - 1);
    ode::integrate_times(
        ode::make_controlled(detail::kEmdenAbsTol, detail::kEmdenRelTol,
                             ode::runge_kutta_fehlberg78<detail::EmdenState>()),
        rhs, y, times.begin(), times.end(), r0 * 0.1, [&](const detail::EmdenState& s, double) {
            if (obs > 0) {
                delta[first_integrated + obs - 1] = s[0];
                ddelta[first_integrated + obs - 1] = s[1];
            }
            ++obs;
        });

    p.W_c = W_c;
    p.M = -ddelta[inner - 1];
    p.E0 = -p.M;
    p.E1 = 0.5 * p.M;
    p.U0_center = p.E0 - W_c;
    p.ansatz = AnsatzParams(k, p.E0, p.E1);

    p.U0.resize(N);
    p.U0_rel.resize(N);
    p.U0p.resize(N);
    p.rho0.resize(N);
    p.rho0p.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        if (static_cast<int>(i) < inner - 1) {
            p.U0_rel[i] = -delta[i];
            p.U0[i] = p.U0_center + p.U0_rel[i];
            p.U0p[i] = -ddelta[i];
        } else {
            p.U0[i] = -p.M / r[i];
            p.U0_rel[i] = p.U0[i] - p.U0_center;
            p.U0p[i] = p.M / (r[i] * r[i]);
        }
        const auto d = h_derivatives(p.U0[i], p.ansatz);
        p.rho0[i] = h_eval(p.U0[i], p.ansatz);
        p.rho0p[i] = d.first * p.U0p[i];
    }
    p.C_lb = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < N; ++i) p.C_lb = std::min(p.C_lb, p.U0p[i] / r[i]);
    if (!(p.rho0[0] > 0.0)) throw ProfileError("normalize_profile: central density not positive");
    for (std::size_t i = 1; i < N; ++i) {
        if (p.rho0[i] > p.rho0[i - 1]) throw ProfileError("normalize_profile: rho0 not non-increasing");
        if (!(p.U0[i] > p.U0[i - 1])) throw ProfileError("normalize_profile: U0 not increasing");
    }
    return p;
}

/// Evaluates the base state at 0 <= r <= 4: spectral panel interpolation of
/// U0 and U0' inside the support, exact vacuum formulas for r >= 1, density
/// from the closure.
inline ProfileValues profile_eval(const RadialProfile& p, double r) {
    if (!(r >= 0.0 && r <= 4.0)) throw std::out_of_range("profile_eval: radius outside [0, 4]");
    ProfileValues v;
    if (r < 1.0) {
        const PanelRow row = p.grid->interpolation_row(r);
        v.U0_rel = row.apply(p.U0_rel);
        v.U0 = p.U0_center + v.U0_rel;
        v.U0p = row.apply(p.U0p);
    } else {
        v.U0 = -p.M / r;
        v.U0_rel = v.U0 - p.U0_center;
        v.U0p = p.M / (r * r);
    }
    v.rho0 = h_eval(v.U0, p.ansatz);
    v.rho0p = h_derivatives(v.U0, p.ansatz).first * v.U0p;
    return v;
}

/// Residuals of the structural properties of a profile.
struct ProfileChecks {
    double boundary_error = 0.0;      ///< |U0(1) - E0|
    double exterior_error = 0.0;      ///< max |U0 + M/r| for r >= 1
    double poisson_residual = 0.0;    ///< max |U0' - 4 pi r^-2 int s^2 rho0|
    double curvature_rel_error = 0.0; ///< |U0''(0) - 4pi/3 rho0(0)| / (4pi/3 rho0(0))
    double closure_rel_error = 0.0;   ///< max |rho0 - h(U0)| / rho0(0)
    bool monotone = true;

    bool ok() const {
        return boundary_error < 1e-8 && exterior_error < 1e-8 && poisson_residual < 1e-8 &&
               curvature_rel_error < 1e-6 && closure_rel_error < 1e-9 && monotone;
    }
};

inline ProfileChecks validate_profile(const RadialProfile& p) {
    ProfileChecks c;
    const auto& r = p.grid->nodes();
    const std::size_t N = r.size();
    std::vector<double> integrand(N);
    for (std::size_t i = 0; i < N; ++i) integrand[i] = r[i] * r[i] * p.rho0[i];
    const auto mass = p.grid->cumulative(integrand);
    for (std::size_t i = 0; i < N; ++i) {
        if (r[i] >= 1.0) {
            c.exterior_error = std::max(c.exterior_error, std::abs(p.U0[i] + p.M / r[i]));
            if (r[i] == 1.0) c.boundary_error = std::abs(p.U0[i] - p.E0);
            if (p.rho0[i] != 0.0) c.monotone = false;
        }
        if (i > 0) {
            const double expect = 4.0 * std::numbers::pi * mass[i] / (r[i] * r[i]);
            c.poisson_residual = std::max(c.poisson_residual, std::abs(p.U0p[i] - expect));
            if (!(p.U0[i] > p.U0[i - 1]) || p.rho0[i] > p.rho0[i - 1]) c.monotone = false;
        }
        c.closure_rel_error =
            std::max(c.closure_rel_error, std::abs(p.rho0[i] - h_eval(p.U0[i], p.ansatz)) / p.rho0[0]);
    }
    const auto U0pp = p.grid->differentiate(p.U0p);
    const double expect = 4.0 * std::numbers::pi / 3.0 * p.rho0[0];
    c.curvature_rel_error = std::abs(U0pp[0] - expect) / expect;
    if (!(p.E1 > 0.0) || !(p.C_lb > 0.0) || !(p.rho0[0] > 0.0)) c.monotone = false;
    return c;
}

/// Shooting with unit central depth, normalization, validation.
inline RadialProfile build_base_state(double k = 1.5, int nodes_per_panel = 64) {
    RadialProfile p = normalize_profile(solve_emden(k, 1.0), nodes_per_panel);
    const ProfileChecks c = validate_profile(p);
    if (!c.ok()) throw ProfileError("build_base_state: profile failed validation");
    return p;
}

/// CSV: one comment header with the scalars, then r,U0,U0p,rho0,rho0p.
inline void write_profile_csv(std::ostream& os, const RadialProfile& p) {
    const auto old = os.precision(17);
    os << "# k=" << p.k() << ",M=" << p.M << ",E0=" << p.E0 << ",E1=" << p.E1 << "\n";
    os << "r,U0,U0p,rho0,rho0p\n";
    const auto& r = p.grid->nodes();
    for (std::size_t i = 0; i < r.size(); ++i)
        os << r[i] << ',' << p.U0[i] << ',' << p.U0p[i] << ',' << p.rho0[i] << ',' << p.rho0p[i] << '\n';
    os.precision(old);
}

}  // namespace rotvp
