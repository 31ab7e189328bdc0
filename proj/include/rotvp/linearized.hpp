#pragma once
/// Linearization of T at the base state: the per-degree radial operators K_n,
/// L0 = -U0' (id - K) and its inverse, plus the full derivative d_zeta T.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <Eigen/Dense>

#include "basestate.hpp"
#include "deformation.hpp"
#include "errors.hpp"
#include "harmonics.hpp"
#include "operator.hpp"

namespace rotvp {

/// Nystrom matrix of K_n on the field grid:
///   (K_n L)(r) = -4 pi / ((2n+1) U0'(r)) int_0^1 k_n(r, s) rho0'(s) L(s) ds,
/// with k_n the multipole kernel (relative form for n = 0).
struct ModeOperator {
    int n = 0;
    Eigen::MatrixXd K;
    double norm = 0.0;       ///< sup_r int |kernel(r, s)| ds
    double condition = 0.0;  ///< 2-norm condition number of (id - K)
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
};

namespace detail {

inline double kn_prefactor(int n) { return -4.0 * std::numbers::pi / (2.0 * n + 1.0); }

/// Row of K_n at an arbitrary radius r > 0 (zero at r = 0).
inline std::vector<double> kn_row(const RadialProfile& p, const KernelQuadrature& kq, int n, double r) {
    std::vector<double> row(p.grid->size(), 0.0);
    if (!(r > 0.0)) return row;
    const auto rows = kq.rows(r);
    const double c = kn_prefactor(n) / profile_eval(p, r).U0p;
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = c * rows.value[n / 2][j] * p.rho0p[j];
    return row;
}

/// (K_n 1)(r); the kernel has one sign, so its magnitude is the row integral of |kernel|.
inline double kn_row_mass(const RadialProfile& p, const KernelQuadrature& kq, int n, double r) {
    const auto row = kn_row(p, kq, n, r);
    double acc = 0.0;
    for (double v : row) acc += v;
    return std::abs(acc);
}

inline ModeOperator finish_mode_operator(const RadialProfile& p, const KernelQuadrature& kq, int n,
                                         Eigen::MatrixXd K) {
    ModeOperator op;
    op.n = n;
    op.K = std::move(K);
    const auto& r = p.grid->nodes();
    // operator sup-norm: maximize the row mass, first on nodes then by Brent
    std::size_t best = 0;
    double best_val = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double v = std::abs(op.K.row(static_cast<Eigen::Index>(i)).sum());
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    if (best > 0) {
        const double lo = r[best - 1];
        const double hi = r[std::min(best + 1, r.size() - 1)];
        auto neg = [&](double x) { return -kn_row_mass(p, kq, n, x); };
        const auto [x, f] = boost::math::tools::brent_find_minima(neg, lo, hi, 52);
        best_val = std::max(best_val, -f);
    }
    op.norm = best_val;
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(op.K.rows(), op.K.cols()) - op.K;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& sv = svd.singularValues();
    op.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
    if (!std::isfinite(op.condition) || op.condition > 1e12)
        throw SingularOperator("id - K_" + std::to_string(n) + " is numerically singular (condition " +
                               std::to_string(op.condition) + ")");
    op.lu.compute(A);
    return op;
}

}  // namespace detail

/// K_n for one even degree on the profile's grid.
inline ModeOperator assemble_Kn(const RadialProfile& p, int n) {
    if (n < 0 || n % 2 != 0) throw std::invalid_argument("assemble_Kn: degree must be even and non-negative");
    const KernelQuadrature kq(p.grid, n);
    const auto N = static_cast<Eigen::Index>(p.grid->size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N, N);
    const auto& r = p.grid->nodes();
    for (Eigen::Index i = 1; i < N; ++i) {
        const auto row = detail::kn_row(p, kq, n, r[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < N; ++j) K(i, j) = row[static_cast<std::size_t>(j)];
    }
    return detail::finish_mode_operator(p, kq, n, std::move(K));
}

/// The frozen linearization L0 with one factorized ModeOperator per degree.
class LinearizedOperator {
public:
    explicit LinearizedOperator(const Model& model) : model_(&model) {
        const RadialProfile& p = model.profile();
        const int n_max = model.basis()->n_max();
        const KernelQuadrature kq(p.grid, n_max);
        const auto N = static_cast<Eigen::Index>(p.grid->size());
        const auto& r = p.grid->nodes();
        std::vector<Eigen::MatrixXd> mats(n_max / 2 + 1, Eigen::MatrixXd::Zero(N, N));
        for (Eigen::Index i = 1; i < N; ++i) {
            const double ri = r[static_cast<std::size_t>(i)];
            const auto rows = kq.rows(ri);
            const double U0p = p.U0p[static_cast<std::size_t>(i)];
            for (int d = 0; d <= n_max / 2; ++d) {
                const double c = detail::kn_prefactor(2 * d) / U0p;
                for (Eigen::Index j = 0; j < N; ++j)
                    mats[d](i, j) = c * rows.value[d][static_cast<std::size_t>(j)] * p.rho0p[static_cast<std::size_t>(j)];
            }
        }
        for (int d = 0; d <= n_max / 2; ++d)
            ops_.push_back(detail::finish_mode_operator(p, kq, 2 * d, std::move(mats[d])));
    }

    const Model& model() const { return *model_; }
    const std::vector<ModeOperator>& mode_operators() const { return ops_; }
    const ModeOperator& mode_operator(int n) const { return ops_.at(n / 2); }

private:
    const Model* model_;
    std::vector<ModeOperator> ops_;
};

/// Per-mode K application on coefficient curves (modes x field nodes).
inline Eigen::MatrixXd apply_K(const SymmetryBasis& b, const Eigen::MatrixXd& curves, const LinearizedOperator& L) {
    if (curves.rows() != static_cast<Eigen::Index>(b.size()))
        throw std::invalid_argument("apply_K: curves must have one row per basis mode");
    if (curves.cols() != L.mode_operator(0).K.cols())
        throw std::invalid_argument("apply_K: curves must have one column per radial node");
    Eigen::MatrixXd out(curves.rows(), curves.cols());
    for (Eigen::Index k = 0; k < curves.rows(); ++k)
        out.row(k) = (L.mode_operator(b.modes()[static_cast<std::size_t>(k)].n).K * curves.row(k).transpose()).transpose();
    return out;
}

/// Lambda with L0 Lambda = g: q = g / U0', then (id - K_n) Lambda_n = -q_n.
inline DeformationField solve_L0(const YField& g, const LinearizedOperator& L) {
    const Model& model = L.model();
    const RadialProfile& p = model.profile();
    const SymmetryBasis& b = *model.basis();
    Eigen::MatrixXd q = g.coeffs();
    q.col(0).setZero();
    for (Eigen::Index i = 1; i < q.cols(); ++i) q.col(i) /= p.U0p[static_cast<std::size_t>(i)];
    Eigen::MatrixXd lambda(q.rows(), q.cols());
    for (Eigen::Index k = 0; k < q.rows(); ++k) {
        const Eigen::VectorXd rhs = -q.row(k).transpose();
        lambda.row(k) = L.mode_operator(b.modes()[static_cast<std::size_t>(k)].n).lu.solve(rhs).transpose();
    }
    return model.deformation(std::move(lambda));
}

/// L0 Lambda = -U0' (Lambda - K Lambda).
inline YField apply_L0(const DeformationField& lambda, const LinearizedOperator& L) {
    const Model& model = L.model();
    const RadialProfile& p = model.profile();
    Eigen::MatrixXd out = lambda.coeffs() - apply_K(*model.basis(), lambda.coeffs(), L);
    for (Eigen::Index i = 0; i < out.cols(); ++i) out.col(i) *= -p.U0p[static_cast<std::size_t>(i)];
    return model.yfield(std::move(out));
}

/// Frechet derivative d_zeta T(omega, zeta) applied to Lambda:
///   -[Phi_sigma(g(x)) - Phi_sigma(0)] - d_R Phi(g(x)) Lambda(x),
/// where sigma = d_u h~ U0'(t*) dt* is the density variation with
/// dt* = -Lambda(t* y^) / (1 + d_t zeta(t* y^)) at the preimage radius t*.
inline YField apply_dT(const Model& model, double omega, const DeformationField& z, const DeformationField& lambda) {
    const SymmetryBasis& b = *model.basis();
    const RadialGrid& fg = *model.field_grid();
    const RadialGrid& dg = *model.density_grid();
    const RadialProfile& p = model.profile();
    const DensityField rho = rho_zeta(model, omega, z);
    const MultipolePotential phi = newtonian_potential(model.basis(), model.potential_operator(), rho.coeffs);

    const Eigen::MatrixXd z_rays = z.ray_values();
    const Eigen::MatrixXd z_slopes = b.values().transpose() * z.radial_derivative();
    const Eigen::MatrixXd l_rays = lambda.ray_values();
    const auto D = static_cast<Eigen::Index>(b.directions());
    const auto Nd = static_cast<Eigen::Index>(dg.size());
    const auto Nf = static_cast<Eigen::Index>(fg.size());
    const auto& s = dg.nodes();

    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(D, Nd);
    for (Eigen::Index d = 0; d < D; ++d) {
        const Vec3& xi = b.direction_vectors()[static_cast<std::size_t>(d)];
        const double sin_t = std::hypot(xi[0], xi[1]);
        for (Eigen::Index i = 0; i < Nd; ++i) {
            const double t = rho.preimage(d, i);
            const ProfileValues v = profile_eval(p, t);
            const double dh = tilde_h_du(omega, s[static_cast<std::size_t>(i)] * sin_t, v.U0, p.ansatz);
            if (dh == 0.0) continue;
            const PanelRow row = fg.interpolation_row(t);
            const double lam = row.apply(l_rays.row(d));
            const double dz = row.apply(z_slopes.row(d));
            sigma(d, i) = dh * v.U0p * (-lam / (1.0 + dz));
        }
    }
    const MultipolePotential dphi = newtonian_potential(model.basis(), model.potential_operator(),
                                                        forward_transform(b, sigma));
    const Eigen::MatrixXd dphi_rays = b.values().transpose() * dphi.relative_nodes();
    const Eigen::MatrixXd slope_rays = b.values().transpose() * phi.slope_nodes();
    const auto& t = fg.nodes();
    Eigen::MatrixXd out(D, Nf);
    for (Eigen::Index d = 0; d < D; ++d)
        for (Eigen::Index i = 0; i < Nf; ++i) {
            const double R = t[static_cast<std::size_t>(i)] + z_rays(d, i);
            const auto dd = static_cast<std::size_t>(d);
            out(d, i) = -detail::ray_potential(dphi, dphi_rays, dd, R) -
                        detail::ray_slope(phi, slope_rays, dd, R) * l_rays(d, i);
        }
    return model.yfield(forward_transform(b, out));
}

/// CSV dump: n, norm, bound 3/(2n+1), condition number.
inline void write_operator_csv(std::ostream& os, const LinearizedOperator& L) {
    const auto old = os.precision(17);
    os << "n,norm,bound,condition\n";
    for (const auto& op : L.mode_operators())
        os << op.n << ',' << op.norm << ',' << 3.0 / (2.0 * op.n + 1.0) << ',' << op.condition << '\n';
    os.precision(old);
}

}  // namespace rotvp
