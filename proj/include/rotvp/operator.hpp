#pragma once
/// The nonlinear operator T(omega, zeta), the deformed density rho_zeta and the
/// reconstruction of (rho, U, C) from a root of T.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ansatz.hpp"
#include "basestate.hpp"
#include "deformation.hpp"
#include "errors.hpp"
#include "harmonics.hpp"
#include "quadrature.hpp"

namespace rotvp {

struct ModelConfig {
    double k = 1.5;
    int n_max = 8;
    int nodes_per_panel = 64;
    int n_theta = 0;  ///< 0: N_max + 1
    int n_phi = 0;    ///< 0: 2 N_max + 2
    double admissible_radius = kDefaultAdmissibleRadius;
};

/// Everything that stays fixed along a continuation: base state, angular
/// basis, field grid on [0,4], density grid on [0,3] and the multipole matrices.
class Model {
public:
    explicit Model(const ModelConfig& cfg = {})
        : cfg_(validated(cfg)), profile_(build_base_state(cfg.k, cfg.nodes_per_panel)),
          basis_(std::make_shared<const SymmetryBasis>(cfg.n_max, cfg.n_theta, cfg.n_phi)),
          density_grid_(std::make_shared<const RadialGrid>(std::vector<double>{0.0, 1.0, 2.0, 3.0},
                                                           cfg.nodes_per_panel)),
          potential_(density_grid_, cfg.n_max) {}

    const ModelConfig& config() const { return cfg_; }
    const RadialProfile& profile() const { return profile_; }
    const std::shared_ptr<const SymmetryBasis>& basis() const { return basis_; }
    const std::shared_ptr<const RadialGrid>& field_grid() const { return profile_.grid; }
    const std::shared_ptr<const RadialGrid>& density_grid() const { return density_grid_; }
    const PotentialOperator& potential_operator() const { return potential_; }
    double omega_cap() const { return profile_.omega_cap(); }
    double admissible_radius() const { return cfg_.admissible_radius; }

    DeformationField zero_deformation() const { return DeformationField(basis_, field_grid()); }
    DeformationField deformation(Eigen::MatrixXd coeffs) const { return {basis_, field_grid(), std::move(coeffs)}; }
    YField yfield(Eigen::MatrixXd coeffs) const { return {basis_, field_grid(), std::move(coeffs)}; }

private:
    static const ModelConfig& validated(const ModelConfig& cfg) {
        if (!(cfg.admissible_radius > 0.0 && cfg.admissible_radius <= 0.125))
            throw std::invalid_argument("Model: admissible radius must lie in (0, 1/8]");
        return cfg;
    }

    ModelConfig cfg_;
    RadialProfile profile_;
    std::shared_ptr<const SymmetryBasis> basis_;
    std::shared_ptr<const RadialGrid> density_grid_;
    PotentialOperator potential_;
};

/// Density on B_3 as samples at (grid direction, density node) and mode curves.
struct DensityField {
    std::shared_ptr<const SymmetryBasis> basis;
    std::shared_ptr<const RadialGrid> grid;
    Eigen::MatrixXd coeffs;    ///< modes x nodes
    Eigen::MatrixXd samples;   ///< directions x nodes
    Eigen::MatrixXd preimage;  ///< |g^{-1}(y)| at the sample points

    /// Largest sample radius carrying positive density.
    double support_radius() const {
        const auto& s = grid->nodes();
        double out = 0.0;
        for (Eigen::Index i = 0; i < samples.cols(); ++i)
            if ((samples.col(i).array() > 0.0).any()) out = s[static_cast<std::size_t>(i)];
        return out;
    }

    /// Sup norm of the mode curve (n, m).
    double mode_sup(int n, int m) const {
        const int k = basis->index(n, m);
        if (k < 0) throw std::invalid_argument("DensityField: mode not in basis");
        return coeffs.row(k).cwiseAbs().maxCoeff();
    }
};

namespace detail {

/// Ray profiles of zeta along the grid directions together with radial slopes.
struct RayTable {
    Eigen::MatrixXd value;  ///< directions x field nodes
    Eigen::MatrixXd slope;

    explicit RayTable(const DeformationField& z)
        : value(z.ray_values()), slope(z.basis().values().transpose() * z.radial_derivative()) {}

    double invert(const RadialGrid& grid, std::size_t d, double s) const {
        const auto row_v = value.row(static_cast<Eigen::Index>(d));
        const auto row_s = slope.row(static_cast<Eigen::Index>(d));
        auto eval = [&](double t) {
            const PanelRow row = grid.interpolation_row(t);
            return std::pair{row.apply(row_v), row.apply(row_s)};
        };
        return invert_ray(eval, s, grid.back());
    }
};

inline void check_inputs(const Model& model, double omega, const DeformationField& z) {
    if (!(std::abs(omega) < model.omega_cap()))
        throw std::invalid_argument("angular velocity " + std::to_string(omega) + " not below the cap " +
                                    std::to_string(model.omega_cap()));
    if (!z.admissible(model.admissible_radius()))
        throw AdmissibilityLost("deformation has X-norm " + std::to_string(z.x_norm()) +
                                " >= admissible radius " + std::to_string(model.admissible_radius()));
}

}  // namespace detail

/// rho_zeta(y) = h~(omega, r(y), U0(|g^{-1}(y)|)) sampled on the density grid.
inline DensityField rho_zeta(const Model& model, double omega, const DeformationField& z) {
    detail::check_inputs(model, omega, z);
    const SymmetryBasis& b = *model.basis();
    const RadialGrid& dg = *model.density_grid();
    const RadialGrid& fg = *model.field_grid();
    const RadialProfile& p = model.profile();
    const detail::RayTable rays(z);
    const auto D = static_cast<Eigen::Index>(b.directions());
    const auto N = static_cast<Eigen::Index>(dg.size());
    DensityField rho{model.basis(), model.density_grid(), {}, Eigen::MatrixXd::Zero(D, N), Eigen::MatrixXd::Zero(D, N)};
    const auto& s = dg.nodes();
    for (Eigen::Index d = 0; d < D; ++d) {
        const Vec3& xi = b.direction_vectors()[static_cast<std::size_t>(d)];
        const double sin_t = std::hypot(xi[0], xi[1]);
        for (Eigen::Index i = 0; i < N; ++i) {
            const double si = s[static_cast<std::size_t>(i)];
            const double t = rays.invert(fg, static_cast<std::size_t>(d), si);
            rho.preimage(d, i) = t;
            rho.samples(d, i) = tilde_h(omega, si * sin_t, profile_eval(p, t).U0, p.ansatz);
        }
    }
    rho.coeffs = forward_transform(b, rho.samples);
    return rho;
}

namespace detail {

/// Phi - Phi(0) along grid direction d at radius R, using nodal ray values
/// inside the density grid and the exterior expansion beyond it.
inline double ray_potential(const MultipolePotential& phi, const Eigen::MatrixXd& ray_nodes, std::size_t d,
                            double R) {
    if (R <= phi.outer_radius()) return phi.grid().interpolate(ray_nodes.row(static_cast<Eigen::Index>(d)), R);
    const Eigen::MatrixXd& Y = phi.basis().values();
    double acc = 0.0;
    for (std::size_t k = 0; k < phi.basis().size(); ++k)
        acc += Y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)) * phi.mode(k, R).first;
    return acc;
}

inline double ray_slope(const MultipolePotential& phi, const Eigen::MatrixXd& slope_nodes, std::size_t d, double R) {
    if (R <= phi.outer_radius()) return phi.grid().interpolate(slope_nodes.row(static_cast<Eigen::Index>(d)), R);
    const Eigen::MatrixXd& Y = phi.basis().values();
    double acc = 0.0;
    for (std::size_t k = 0; k < phi.basis().size(); ++k)
        acc += Y(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)) * phi.mode(k, R).second;
    return acc;
}

/// U0(|x|) - U0(0) - [Phi(g(x)) - Phi(0)] on the field grid rays, transformed.
inline YField assemble_T(const Model& model, const DeformationField& z, const MultipolePotential& phi) {
    const SymmetryBasis& b = *model.basis();
    const RadialGrid& fg = *model.field_grid();
    const RadialProfile& p = model.profile();
    const Eigen::MatrixXd zr = z.ray_values();
    const Eigen::MatrixXd phi_rays = b.values().transpose() * phi.relative_nodes();
    const auto D = static_cast<Eigen::Index>(b.directions());
    const auto N = static_cast<Eigen::Index>(fg.size());
    const auto& t = fg.nodes();
    Eigen::MatrixXd T(D, N);
    for (Eigen::Index d = 0; d < D; ++d)
        for (Eigen::Index i = 0; i < N; ++i) {
            const double ti = t[static_cast<std::size_t>(i)];
            const double R = ti + zr(d, i);
            T(d, i) = p.U0_rel[static_cast<std::size_t>(i)] - ray_potential(phi, phi_rays, static_cast<std::size_t>(d), R);
        }
    return model.yfield(forward_transform(b, T));
}

}  // namespace detail

/// T(omega, zeta) as a field in Y.
inline YField T_eval(const Model& model, double omega, const DeformationField& z) {
    const DensityField rho = rho_zeta(model, omega, z);
    const MultipolePotential phi = newtonian_potential(model.basis(), model.potential_operator(), rho.coeffs);
    return detail::assemble_T(model, z, phi);
}

/// One point of the rotating family: deformation, density, potential U = Phi + C.
struct SolutionState {
    double omega = 0.0;
    DeformationField zeta;
    DensityField rho;
    MultipolePotential phi;
    AnsatzParams ansatz;
    double C = 0.0;
    double U0_center = 0.0;
    double residual = 0.0;           ///< ||T(omega, zeta)||_Y
    double consistency_error = 0.0;  ///< max |U(y) - U0(|g^{-1} y|)| over density samples
    double support_radius = 0.0;

    /// U(x) = C + Phi(x), evaluated as U0(0) + Phi(x) - Phi(0).
    double potential(const Vec3& x) const { return U0_center + phi.relative_value(x); }
    Vec3 potential_gradient(const Vec3& x) const { return phi.gradient(x); }
    /// rho(x) = h~(omega, r(x), U(x)).
    double density(const Vec3& x) const { return tilde_h(omega, cylindrical_radius(x), potential(x), ansatz); }
};

/// Tolerance for U(y) = U0(|g^{-1}(y)|) on B_3.
constexpr double kConsistencyTolerance = 1e-7;

/// Builds the SolutionState for a root zeta of T(omega, .) and checks the
/// maximum-principle constant, support and the potential identity.
inline SolutionState reconstruct_solution(const Model& model, double omega, const DeformationField& z) {
    SolutionState st;
    st.omega = omega;
    st.zeta = z;
    st.rho = rho_zeta(model, omega, z);
    st.phi = newtonian_potential(model.basis(), model.potential_operator(), st.rho.coeffs);
    const RadialProfile& p = model.profile();
    st.ansatz = p.ansatz;
    st.U0_center = p.U0_center;
    st.C = p.U0_center - st.phi.center_value();
    st.residual = detail::assemble_T(model, z, st.phi).y_norm();
    st.support_radius = st.rho.support_radius();

    const SymmetryBasis& b = *model.basis();
    const Eigen::MatrixXd phi_rays = b.values().transpose() * st.phi.relative_nodes();
    const auto& s = model.density_grid()->nodes();
    for (Eigen::Index d = 0; d < phi_rays.rows(); ++d)
        for (Eigen::Index i = 0; i < phi_rays.cols(); ++i) {
            if (s[static_cast<std::size_t>(i)] > 3.0) continue;
            const double U = p.U0_center + phi_rays(d, i);
            const double expect = profile_eval(p, st.rho.preimage(d, i)).U0;
            st.consistency_error = std::max(st.consistency_error, std::abs(U - expect));
        }

    if (!(st.C > p.E0 + p.E1))
        throw MaxPrincipleViolation("C = " + std::to_string(st.C) + " does not exceed E0 + E1 = " +
                                    std::to_string(p.E0 + p.E1));
    if (!(st.support_radius < 3.0)) throw ConsistencyError("density support reaches |y| = 3");
    if (!(st.consistency_error < kConsistencyTolerance))
        throw ConsistencyError("U differs from U0(|g^-1|) by " + std::to_string(st.consistency_error));
    return st;
}

/// Max |Delta U - 4 pi h~(omega, r, U)| over a Cartesian probe lattice inside
/// B_3 (second-order central differences with step h).
inline double poisson_residual(const SolutionState& st, int per_axis = 9, double extent = 2.5, double h = 1e-3) {
    double worst = 0.0;
    for (int a = 0; a < per_axis; ++a)
        for (int b = 0; b < per_axis; ++b)
            for (int c = 0; c < per_axis; ++c) {
                // lattice offset keeps probes away from the coordinate axes
                auto coord = [&](int i) { return -extent + (2.0 * extent) * (i + 0.5 + 0.123) / per_axis; };
                const Vec3 x{coord(a), coord(b), coord(c)};
                if (!(norm(x) + h < 3.0)) continue;
                const double u0 = st.potential(x);
                double lap = 0.0;
                for (int ax = 0; ax < 3; ++ax) {
                    Vec3 xp = x, xm = x;
                    xp[ax] += h;
                    xm[ax] -= h;
                    lap += (st.potential(xp) - 2.0 * u0 + st.potential(xm)) / (h * h);
                }
                const double rhs = 4.0 * std::numbers::pi * st.density(x);
                worst = std::max(worst, std::abs(lap - rhs));
            }
    return worst;
}

}  // namespace rotvp
