#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rotvp/linearized.hpp"

using namespace rotvp;

namespace {

const Model& model() {
    static const Model m{};
    return m;
}

Eigen::Index nodes() { return static_cast<Eigen::Index>(model().field_grid()->size()); }

const LinearizedOperator& lin() {
    static const LinearizedOperator L(model());
    return L;
}

Eigen::MatrixXd curves(const std::vector<std::tuple<int, int, double>>& terms) {
    const Model& m = model();
    const auto& g = *m.field_grid();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.basis()->size()),
                                              static_cast<Eigen::Index>(g.size()));
    for (const auto& [n, mm, a] : terms)
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double r = g.nodes()[i];
            C(m.basis()->index(n, mm), static_cast<Eigen::Index>(i)) = a * r * r * std::exp(-0.3 * r * (n + 1));
        }
    return C;
}

DeformationField direction_field() { return model().deformation(curves({{0, 0, 0.01}, {2, 0, 0.02}, {4, 2, -0.01}})); }

double rel_y(const YField& a, const YField& b) { return (a - b).y_norm() / b.y_norm(); }

/// Central difference of T(omega, z + e Lambda) in e, Richardson-extrapolated.
YField fd_derivative(double omega, const DeformationField& z, const DeformationField& lambda, double e) {
    const Model& m = model();
    auto central = [&](double h) {
        return (T_eval(m, omega, z + lambda * h) - T_eval(m, omega, z - lambda * h)) * (1.0 / (2.0 * h));
    };
    const YField c1 = central(e), c2 = central(e / 2);
    return c2 * (4.0 / 3.0) - c1 * (1.0 / 3.0);
}

}  // namespace

TEST(ModeOperator, NormsRespectBoundAndDecrease) {
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& op : lin().mode_operators()) {
        EXPECT_LT(op.condition, 1e12);
        if (op.n == 0) continue;
        EXPECT_LE(op.norm, 3.0 / (2.0 * op.n + 1.0) + 1e-3) << "n = " << op.n;
        EXPECT_LT(op.norm, prev) << "n = " << op.n;
        prev = op.norm;
    }
}

// The monopole kernel is measured relative to the centre, so K_0 grows like
// r^2 outside the support and carries no contraction bound.
TEST(ModeOperator, MonopoleNormIsNotAContraction) { EXPECT_GT(lin().mode_operator(0).norm, 1.0); }

TEST(ModeOperator, OnlyEvenDegrees) {
    for (const auto& op : lin().mode_operators()) EXPECT_EQ(op.n % 2, 0);
    for (int m = 0; m <= 1; ++m) EXPECT_EQ(model().basis()->index(1, m), -1);
    EXPECT_THROW(assemble_Kn(model().profile(), 1), std::invalid_argument);
    EXPECT_THROW(assemble_Kn(model().profile(), -2), std::invalid_argument);
}

TEST(ModeOperator, StandaloneAssemblyAgrees) {
    const ModeOperator op = assemble_Kn(model().profile(), 2);
    EXPECT_LT((op.K - lin().mode_operator(2).K).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_NEAR(op.norm, lin().mode_operator(2).norm, 1e-12);
}

// K_0 1 = -(Psi(r) - Psi(0)) / U0'(r) with Psi the potential of rho0' over B_1.
TEST(ModeOperator, MonopoleOnConstantsMatchesVolumeQuadrature) {
    const RadialProfile& p = model().profile();
    const ModeOperator& op = lin().mode_operator(0);
    const auto& r = p.grid->nodes();
    auto rho0p = [&](double s) { return profile_eval(p, std::min(s, 1.0)).rho0p; };
    const double psi0 = -oracle::radial_potential_3d(rho0p, 1.0, 0.0, 1e-8);
    for (std::size_t i : {std::size_t{10}, std::size_t{20}, std::size_t{35}, std::size_t{50}, std::size_t{100}}) {
        const double psi = -oracle::radial_potential_3d(rho0p, 1.0, r[i], 1e-8);
        const double expect = -(psi - psi0) / p.U0p[i];
        const double got = op.K.row(static_cast<Eigen::Index>(i)).sum();
        EXPECT_LT(std::abs(got - expect) / std::abs(expect), 1e-6) << "r = " << r[i];
    }
}

TEST(ModeOperator, KernelSupportedOnUnitBall) {
    const auto& r = model().field_grid()->nodes();
    for (const auto& op : lin().mode_operators())
        for (Eigen::Index j = 0; j < op.K.cols(); ++j)
            if (r[static_cast<std::size_t>(j)] > 1.0) EXPECT_EQ(op.K.col(j).cwiseAbs().maxCoeff(), 0.0) << "n = " << op.n;
}

TEST(ModeOperator, StableUnderGridDoubling) {
    ModelConfig cfg;
    cfg.nodes_per_panel = 128;
    const Model fine(cfg);
    const LinearizedOperator Lf(fine);
    for (std::size_t d = 0; d < Lf.mode_operators().size(); ++d)
        EXPECT_LT(std::abs(Lf.mode_operators()[d].norm - lin().mode_operators()[d].norm), 1e-6)
            << "n = " << Lf.mode_operators()[d].n;

    // the same smooth forcing on both grids gives the same Lambda
    auto forcing = [](const Model& m) {
        const auto& g = *m.field_grid();
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.basis()->size()),
                                                  static_cast<Eigen::Index>(g.size()));
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double r = g.nodes()[i];
            C(m.basis()->index(0, 0), static_cast<Eigen::Index>(i)) = 0.3 * r * r * std::exp(-r);
            C(m.basis()->index(4, 2), static_cast<Eigen::Index>(i)) = -0.1 * r * r * std::exp(-r);
        }
        return m.yfield(C);
    };
    const DeformationField coarse = solve_L0(forcing(model()), lin());
    const DeformationField refined = solve_L0(forcing(fine), Lf);
    double worst = 0.0;
    for (double r : {0.1, 0.5, 0.9, 1.3, 2.0, 3.0, 3.9})
        for (const Vec3& e : {Vec3{0.0, 0.0, 1.0}, Vec3{0.6, 0.0, 0.8}, Vec3{0.36, 0.48, 0.8}}) {
            const Vec3 x{r * e[0], r * e[1], r * e[2]};
            worst = std::max(worst, std::abs(coarse.value(x) - refined.value(x)));
        }
    EXPECT_LT(worst, 1e-6);
}

TEST(ApplyK, ZeroAndDegreePreservation) {
    const SymmetryBasis& b = *model().basis();
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.size()), nodes());
    EXPECT_EQ(apply_K(b, zero, lin()).cwiseAbs().maxCoeff(), 0.0);
    const Eigen::MatrixXd c = curves({{4, 2, 1.0}});
    const Eigen::MatrixXd out = apply_K(b, c, lin());
    for (Eigen::Index k = 0; k < out.rows(); ++k)
        if (k != b.index(4, 2)) EXPECT_EQ(out.row(k).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(out.row(b.index(4, 2)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(apply_K(b, Eigen::MatrixXd::Zero(2, nodes()), lin()), std::invalid_argument);
    EXPECT_THROW(apply_K(b, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.size()), 7), lin()), std::invalid_argument);
}

TEST(SolveL0, ZeroMapsToZero) {
    const YField g = model().yfield(Eigen::MatrixXd::Zero(15, nodes()));
    EXPECT_EQ(solve_L0(g, lin()).x_norm(), 0.0);
}

TEST(SolveL0, RoundTrip) {
    const YField g = model().yfield(curves({{0, 0, 0.3}, {2, 2, -0.2}, {8, 4, 0.1}}));
    const DeformationField lambda = solve_L0(g, lin());
    EXPECT_LT(rel_y(apply_L0(lambda, lin()), g), 1e-8);
    const DeformationField z = direction_field();
    EXPECT_LT((solve_L0(apply_L0(z, lin()), lin()) - z).x_norm() / z.x_norm(), 1e-8);
}

// The kernel only sees [0, 1], so forcing beyond the support cannot reach back into it.
TEST(SolveL0, PerturbationBeyondSupportLeavesInteriorUnchanged) {
    const Model& m = model();
    const auto& r = m.field_grid()->nodes();
    const Eigen::MatrixXd base = curves({{0, 0, 0.3}, {2, 0, 0.1}});
    Eigen::MatrixXd bumped = base;
    for (std::size_t i = 0; i < r.size(); ++i)
        if (r[i] > 1.0) {
            bumped(0, static_cast<Eigen::Index>(i)) += 0.2 * std::pow(r[i] - 1.0, 3);
            bumped(m.basis()->index(2, 0), static_cast<Eigen::Index>(i)) -= 0.1 * std::pow(r[i] - 1.0, 3);
        }
    const DeformationField l1 = solve_L0(m.yfield(base), lin());
    const DeformationField l2 = solve_L0(m.yfield(bumped), lin());
    double inside = 0.0, outside = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double diff = (l1.coeffs().col(static_cast<Eigen::Index>(i)) - l2.coeffs().col(static_cast<Eigen::Index>(i)))
                                .cwiseAbs()
                                .maxCoeff();
        (r[i] <= 1.0 ? inside : outside) = std::max(r[i] <= 1.0 ? inside : outside, diff);
    }
    EXPECT_LT(inside, 1e-13);
    EXPECT_GT(outside, 1e-3);
}

TEST(SolveL0, MonopoleVanishesAtOrigin) {
    const Model& m = model();
    const auto& r = m.field_grid()->nodes();
    const DeformationField lambda = solve_L0(m.yfield(curves({{0, 0, 0.3}})), lin());
    EXPECT_EQ(lambda.coeffs()(0, 0), 0.0);
    // Lambda_00 = O(r) near the origin
    double slope = 0.0;
    for (std::size_t i = 1; i < 12; ++i) slope = std::max(slope, std::abs(lambda.coeffs()(0, static_cast<Eigen::Index>(i))) / r[i]);
    EXPECT_LT(slope * r[1], 1e-3);
    EXPECT_LT(std::abs(lambda.coeffs()(0, 1)), std::abs(lambda.coeffs()(0, 11)));
}

TEST(ApplyL0, MatchesFiniteDifferenceOfT) {
    const Model& m = model();
    const DeformationField lambda = direction_field();
    const YField fd = fd_derivative(0.0, m.zero_deformation(), lambda, 0.2);
    EXPECT_LT(rel_y(apply_L0(lambda, lin()), fd), 1e-3);
}

TEST(ApplyDT, ReducesToL0AtBaseState) {
    const Model& m = model();
    const DeformationField lambda = direction_field();
    EXPECT_LT(rel_y(apply_dT(m, 0.0, m.zero_deformation(), lambda), apply_L0(lambda, lin())), 1e-8);
}

TEST(ApplyDT, MatchesFiniteDifferenceAwayFromBaseState) {
    const Model& m = model();
    const double omega = 0.5 * m.omega_cap();
    const DeformationField z = m.deformation(curves({{0, 0, 0.005}, {2, 0, -0.01}}));
    ASSERT_TRUE(z.admissible());
    const DeformationField lambda = direction_field();
    const YField fd = fd_derivative(omega, z, lambda, 0.2);
    EXPECT_LT(rel_y(apply_dT(m, omega, z, lambda), fd), 1e-3);
}

TEST(ApplyDT, LinearInDirection) {
    const Model& m = model();
    const double omega = 0.4 * m.omega_cap();
    const DeformationField a = direction_field();
    const DeformationField b = m.deformation(curves({{6, 6, 0.02}}));
    const YField lhs = apply_dT(m, omega, m.zero_deformation(), a * 2.0 + b);
    const YField rhs = apply_dT(m, omega, m.zero_deformation(), a) * 2.0 + apply_dT(m, omega, m.zero_deformation(), b);
    EXPECT_LT(rel_y(lhs, rhs), 1e-10);
}

TEST(OperatorCsv, Columns) {
    std::ostringstream os;
    write_operator_csv(os, lin());
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "n,norm,bound,condition");
    int rows = 0;
    while (std::getline(is, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
        ++rows;
    }
    EXPECT_EQ(rows, static_cast<int>(lin().mode_operators().size()));
}
