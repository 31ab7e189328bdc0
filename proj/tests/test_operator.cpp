#include <cmath>
#include <memory>
#include <numbers>

#include <gtest/gtest.h>

#include "rotvp/operator.hpp"

using namespace rotvp;

namespace {

constexpr double kPi = std::numbers::pi;

const Model& model() {
    static const Model m{};
    return m;
}

/// Small admissible mirror-symmetric deformation a |x|^2 Y20 + b |x| sin|x| Y22.
DeformationField bump(double a, double b) {
    const Model& m = model();
    const auto& g = *m.field_grid();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.basis()->size()),
                                              static_cast<Eigen::Index>(g.size()));
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double r = g.nodes()[i];
        C(m.basis()->index(2, 0), static_cast<Eigen::Index>(i)) = a * r * r;
        C(m.basis()->index(2, 2), static_cast<Eigen::Index>(i)) = b * r * std::sin(r);
    }
    return m.deformation(C);
}

/// |g^{-1}(y)| by bisection on t -> |g(t y/|y|)|, using only g itself.
double preimage_by_bisection(const DeformationField& z, const Vec3& y) {
    const double s = norm(y);
    const Vec3 e{y[0] / s, y[1] / s, y[2] / s};
    double lo = 0.0, hi = 4.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (norm(g_apply(z, {e[0] * mid, e[1] * mid, e[2] * mid})) < s ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST(Model, RejectsBadAdmissibleRadius) {
    ModelConfig cfg;
    cfg.n_max = 2;
    cfg.nodes_per_panel = 16;
    cfg.admissible_radius = 0.2;
    EXPECT_THROW(Model m(cfg), std::invalid_argument);
}

TEST(RhoZeta, BaseStateAtZero) {
    const Model& m = model();
    const DensityField rho = rho_zeta(m, 0.0, m.zero_deformation());
    const auto& s = m.density_grid()->nodes();
    for (std::size_t i = 0; i < s.size(); ++i)
        EXPECT_NEAR(rho.coeffs(0, static_cast<Eigen::Index>(i)) / std::sqrt(4.0 * kPi),
                    profile_eval(m.profile(), s[i]).rho0, 1e-12);
    for (Eigen::Index k = 1; k < rho.coeffs.rows(); ++k) EXPECT_LT(rho.coeffs.row(k).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RhoZeta, VanishesOutsideBaseSupport) {
    const Model& m = model();
    const DensityField rho = rho_zeta(m, 0.0, m.zero_deformation());
    const auto& s = m.density_grid()->nodes();
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] >= 1.0) EXPECT_EQ(rho.samples.col(static_cast<Eigen::Index>(i)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE(rho.support_radius(), 1.0);
    EXPECT_GT(rho.support_radius(), 0.95);
}

TEST(RhoZeta, PointwiseOracleWithRotationAndDeformation) {
    const Model& m = model();
    const double omega = 0.6 * m.omega_cap();
    const DeformationField z = bump(0.004, 0.003);
    ASSERT_TRUE(z.admissible());
    const DensityField rho = rho_zeta(m, omega, z);
    const auto& dirs = m.basis()->direction_vectors();
    const auto& s = m.density_grid()->nodes();
    for (std::size_t d = 0; d < dirs.size(); d += 3)
        for (std::size_t i = 1; i < s.size(); i += 7) {
            const Vec3 y{dirs[d][0] * s[i], dirs[d][1] * s[i], dirs[d][2] * s[i]};
            const double t = preimage_by_bisection(z, y);
            const double expect = tilde_h(omega, std::hypot(y[0], y[1]), profile_eval(m.profile(), t).U0, m.profile().ansatz);
            EXPECT_NEAR(rho.samples(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(i)), expect, 1e-10);
        }
}

TEST(RhoZeta, MirrorSymmetricModesOnly) {
    const Model& m = model();
    const DensityField rho = rho_zeta(m, 0.5 * m.omega_cap(), bump(0.004, 0.003));
    EXPECT_GT(rho.mode_sup(2, 0), 0.0);
    EXPECT_THROW(rho.mode_sup(1, 0), std::invalid_argument);
    EXPECT_THROW(rho.mode_sup(3, 2), std::invalid_argument);
}

TEST(RhoZeta, RejectsInadmissibleInputs) {
    const Model& m = model();
    EXPECT_THROW(rho_zeta(m, m.omega_cap(), m.zero_deformation()), std::invalid_argument);
    EXPECT_THROW(rho_zeta(m, -1.01 * m.omega_cap(), m.zero_deformation()), std::invalid_argument);
    EXPECT_THROW(rho_zeta(m, 0.0, bump(0.2, 0.0)), AdmissibilityLost);
}

TEST(TEval, VanishesAtBaseState) {
    const Model& m = model();
    EXPECT_LT(T_eval(m, 0.0, m.zero_deformation()).y_norm(), 1e-8);
}

TEST(TEval, QuadraticInOmegaAtZeroDeformation) {
    const Model& m = model();
    const double w1 = 0.1 * m.omega_cap(), w2 = 0.2 * m.omega_cap();
    const double q1 = T_eval(m, w1, m.zero_deformation()).y_norm() / (w1 * w1);
    const double q2 = T_eval(m, w2, m.zero_deformation()).y_norm() / (w2 * w2);
    EXPECT_GT(q1, 0.0);
    EXPECT_LT(std::abs(q1 - q2) / q1, 0.1);
}

TEST(TEval, EvenInOmega) {
    const Model& m = model();
    const double w = 0.3 * m.omega_cap();
    const YField a = T_eval(m, w, bump(0.002, 0.0));
    const YField b = T_eval(m, -w, bump(0.002, 0.0));
    EXPECT_LT((a - b).coeffs().cwiseAbs().maxCoeff(), 1e-14);
}

TEST(TEval, NonzeroForNonrootDeformation) {
    const Model& m = model();
    EXPECT_GT(T_eval(m, 0.0, bump(0.004, 0.003)).y_norm(), 1e-4);
}

TEST(Reconstruct, BaseStatePotentialIsU0) {
    const Model& m = model();
    const SolutionState st = reconstruct_solution(m, 0.0, m.zero_deformation());
    for (double r : {0.0, 0.2, 0.5, 0.8, 0.99, 1.0, 1.5, 2.5, 3.9}) {
        const double ct = 0.3, st_ = std::sqrt(1 - ct * ct);
        const Vec3 x{r * st_ * 0.6, r * st_ * 0.8, r * ct};
        EXPECT_NEAR(st.potential(x), profile_eval(m.profile(), r).U0, 1e-8) << "r = " << r;
        if (r >= 1.0) EXPECT_NEAR(st.potential(x), -m.profile().M / r, 1e-8);
    }
    EXPECT_LT(st.consistency_error, kConsistencyTolerance);
    EXPECT_LT(st.residual, 1e-8);
    EXPECT_GT(st.C, m.profile().E0 + m.profile().E1);
    // the base potential already vanishes at infinity
    EXPECT_NEAR(st.C, 0.0, 1e-8);
}

TEST(Reconstruct, ExteriorPotentialIsHarmonic) {
    const Model& m = model();
    const SolutionState st = reconstruct_solution(m, 0.0, m.zero_deformation());
    const double h = 1e-3;
    for (const Vec3& x : {Vec3{1.3, 0.2, 0.4}, Vec3{0.0, 2.0, 1.1}, Vec3{-2.2, 1.0, -0.5}}) {
        double lap = 0.0;
        for (int ax = 0; ax < 3; ++ax) {
            Vec3 xp = x, xm = x;
            xp[ax] += h;
            xm[ax] -= h;
            lap += (st.potential(xp) - 2.0 * st.potential(x) + st.potential(xm)) / (h * h);
        }
        EXPECT_LT(std::abs(lap), 1e-4);
    }
}

TEST(Reconstruct, PoissonResidualSmallAtBaseState) {
    const Model& m = model();
    const SolutionState st = reconstruct_solution(m, 0.0, m.zero_deformation());
    EXPECT_LT(poisson_residual(st), 5e-4);
    EXPECT_LT(st.support_radius, 3.0);
}

TEST(Reconstruct, NonrootFailsConsistency) {
    const Model& m = model();
    EXPECT_THROW(reconstruct_solution(m, 0.5 * m.omega_cap(), m.zero_deformation()), ConsistencyError);
}

TEST(Reconstruct, DensityMatchesRhoZetaAtBaseState) {
    const Model& m = model();
    const SolutionState st = reconstruct_solution(m, 0.0, m.zero_deformation());
    for (double r : {0.0, 0.3, 0.7, 0.95, 1.2})
        EXPECT_NEAR(st.density({0.0, r, 0.0}), profile_eval(m.profile(), r).rho0, 1e-7) << "r = " << r;
}
