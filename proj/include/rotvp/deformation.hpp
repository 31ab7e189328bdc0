#pragma once
/// Mirror-symmetric fields on B_4 in mode representation, the ray deformation
/// g(x) = x + zeta(x) x/|x| with its Jacobian and inverse, and the X / Y norms.

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ansatz.hpp"
#include "harmonics.hpp"
#include "quadrature.hpp"

namespace rotvp {

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Admissibility radius of the deformation ball Omega = {||zeta||_X < r}.
constexpr double kDefaultAdmissibleRadius = 0.125;

/// Scalar field sum_k c_k(r) Y_k(x/|x|) with coefficient curves on a radial grid.
class ModeField {
public:
    ModeField() = default;
    ModeField(std::shared_ptr<const SymmetryBasis> basis, std::shared_ptr<const RadialGrid> grid)
        : basis_(std::move(basis)), grid_(std::move(grid)),
          coeffs_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(basis_->size()),
                                        static_cast<Eigen::Index>(grid_->size()))) {}
    ModeField(std::shared_ptr<const SymmetryBasis> basis, std::shared_ptr<const RadialGrid> grid,
              Eigen::MatrixXd coeffs)
        : basis_(std::move(basis)), grid_(std::move(grid)), coeffs_(std::move(coeffs)) {
        if (coeffs_.rows() != static_cast<Eigen::Index>(basis_->size()) ||
            coeffs_.cols() != static_cast<Eigen::Index>(grid_->size()))
            throw std::invalid_argument("ModeField: coefficient matrix must be modes x radial nodes");
    }

    const SymmetryBasis& basis() const { return *basis_; }
    const RadialGrid& grid() const { return *grid_; }
    const std::shared_ptr<const SymmetryBasis>& basis_ptr() const { return basis_; }
    const std::shared_ptr<const RadialGrid>& grid_ptr() const { return grid_; }
    /// Coefficient curves, modes x radial nodes.
    const Eigen::MatrixXd& coeffs() const { return coeffs_; }

    /// Coefficient curve of mode (n, m) at the grid nodes.
    Eigen::VectorXd curve(int n, int m) const {
        const int k = basis_->index(n, m);
        if (k < 0) throw std::invalid_argument("ModeField: mode not in basis");
        return coeffs_.row(k).transpose();
    }

    /// Radial derivatives of the coefficient curves.
    Eigen::MatrixXd radial_derivative() const {
        Eigen::MatrixXd d(coeffs_.rows(), coeffs_.cols());
        for (Eigen::Index k = 0; k < coeffs_.rows(); ++k) {
            const Eigen::VectorXd row = coeffs_.row(k).transpose();
            const auto dr = grid_->differentiate(row);
            for (Eigen::Index i = 0; i < coeffs_.cols(); ++i) d(k, i) = dr[static_cast<std::size_t>(i)];
        }
        return d;
    }

    /// Values along the grid directions at the radial nodes (directions x nodes).
    Eigen::MatrixXd ray_values() const { return basis_->values().transpose() * coeffs_; }

    double value(const Vec3& x) const {
        const double r = norm(x);
        if (r > grid_->back()) throw std::out_of_range("ModeField: point outside the radial grid");
        const BasisSample s = basis_->sample(x);
        const PanelRow row = grid_->interpolation_row(r);
        double acc = 0.0;
        for (std::size_t k = 0; k < basis_->size(); ++k)
            acc += s.value[k] * row.apply(coeffs_.row(static_cast<Eigen::Index>(k)));
        return acc;
    }

    /// Gradient at x != 0 from radial derivatives and tangential basis derivatives.
    Vec3 gradient(const Vec3& x) const {
        const double r = norm(x);
        if (!(r > 0.0)) throw std::invalid_argument("ModeField::gradient: x must be nonzero");
        if (r > grid_->back()) throw std::out_of_range("ModeField: point outside the radial grid");
        const SphericalAngles a = angles_of(x);
        const BasisSample s = basis_->sample(a.cos_t, a.sin_t, a.phi);
        const PanelRow row = grid_->interpolation_row(r);
        const Eigen::MatrixXd d = radial_derivative();
        double gr = 0.0, gt = 0.0, gp = 0.0;
        for (std::size_t k = 0; k < basis_->size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            const double c = row.apply(coeffs_.row(kk));
            gr += row.apply(d.row(kk)) * s.value[k];
            gt += c / r * s.dtheta[k];
            gp += c / r * s.dphi_sin[k];
        }
        const double cp = std::cos(a.phi), sp = std::sin(a.phi);
        return {gr * a.sin_t * cp + gt * a.cos_t * cp - gp * sp, gr * a.sin_t * sp + gt * a.cos_t * sp + gp * cp,
                gr * a.cos_t - gt * a.sin_t};
    }

    /// Sup of |grad f| (weight = 0) or |grad f| / |x| (weight = 1) over the
    /// tensor grid of radial nodes and grid directions, with the r -> 0 limits
    /// taken from the Taylor coefficients of the curves.
    double gradient_sup(int weight) const {
        const Eigen::MatrixXd d1 = radial_derivative();
        const auto& r = grid_->nodes();
        const Eigen::MatrixXd& Y = basis_->values();
        const Eigen::MatrixXd& dY = basis_->dtheta_values();
        const Eigen::MatrixXd& dYs = basis_->dphi_sin_values();
        Eigen::MatrixXd radial(coeffs_.rows(), coeffs_.cols()), tangential(coeffs_.rows(), coeffs_.cols());
        for (Eigen::Index i = 0; i < coeffs_.cols(); ++i) {
            const double ri = r[static_cast<std::size_t>(i)];
            if (ri > 0.0) {
                const double scale = weight == 0 ? 1.0 : 1.0 / ri;
                radial.col(i) = d1.col(i) * scale;
                tangential.col(i) = coeffs_.col(i) * (scale / ri);
            } else if (weight == 0) {
                radial.col(i) = d1.col(i);
                tangential.col(i) = d1.col(i);
            } else {
                Eigen::MatrixXd d2(coeffs_.rows(), 1);
                for (Eigen::Index k = 0; k < coeffs_.rows(); ++k) {
                    const Eigen::VectorXd row = d1.row(k).transpose();
                    d2(k, 0) = grid_->differentiate(row)[0];
                }
                radial.col(i) = d2.col(0);
                tangential.col(i) = 0.5 * d2.col(0);
            }
        }
        const Eigen::ArrayXXd gr = (Y.transpose() * radial).array();
        const Eigen::ArrayXXd gt = (dY.transpose() * tangential).array();
        const Eigen::ArrayXXd gp = (dYs.transpose() * tangential).array();
        return (gr.square() + gt.square() + gp.square()).sqrt().maxCoeff();
    }

    /// Max over grid values of |f| (sup norm on the tensor grid).
    double sup() const { return ray_values().cwiseAbs().maxCoeff(); }

protected:
    void zero_center() {
        if (coeffs_.cols() > 0) coeffs_.col(0).setZero();
    }

    std::shared_ptr<const SymmetryBasis> basis_;
    std::shared_ptr<const RadialGrid> grid_;
    Eigen::MatrixXd coeffs_;
};

/// Deformation zeta in X: vanishes at the origin, norm sup |grad zeta|.
class DeformationField : public ModeField {
public:
    DeformationField() = default;
    DeformationField(std::shared_ptr<const SymmetryBasis> basis, std::shared_ptr<const RadialGrid> grid)
        : ModeField(std::move(basis), std::move(grid)) {}
    DeformationField(std::shared_ptr<const SymmetryBasis> basis, std::shared_ptr<const RadialGrid> grid,
                     Eigen::MatrixXd coeffs)
        : ModeField(std::move(basis), std::move(grid), std::move(coeffs)) {
        zero_center();
        x_norm_ = gradient_sup(0);
    }

    double x_norm() const { return x_norm_; }
    bool admissible(double radius = kDefaultAdmissibleRadius) const { return x_norm_ < radius; }

    DeformationField operator+(const DeformationField& o) const { return {basis_, grid_, coeffs_ + o.coeffs_}; }
    DeformationField operator-(const DeformationField& o) const { return {basis_, grid_, coeffs_ - o.coeffs_}; }
    DeformationField operator*(double a) const { return {basis_, grid_, coeffs_ * a}; }

private:
    double x_norm_ = 0.0;
};

/// Field in Y: vanishes at the origin, norm sup |grad f| / |x|.
class YField : public ModeField {
public:
    YField() = default;
    YField(std::shared_ptr<const SymmetryBasis> basis, std::shared_ptr<const RadialGrid> grid)
        : ModeField(std::move(basis), std::move(grid)) {}
    YField(std::shared_ptr<const SymmetryBasis> basis, std::shared_ptr<const RadialGrid> grid,
           Eigen::MatrixXd coeffs)
        : ModeField(std::move(basis), std::move(grid), std::move(coeffs)) {
        zero_center();
        y_norm_ = gradient_sup(1);
    }

    double y_norm() const { return y_norm_; }

    YField operator+(const YField& o) const { return {basis_, grid_, coeffs_ + o.coeffs_}; }
    YField operator-(const YField& o) const { return {basis_, grid_, coeffs_ - o.coeffs_}; }
    YField operator*(double a) const { return {basis_, grid_, coeffs_ * a}; }

private:
    double y_norm_ = 0.0;
};

inline double x_norm(const DeformationField& z) { return z.x_norm(); }
inline double y_norm(const YField& f) { return f.y_norm(); }

/// g(x) = x (1 + zeta(x)/|x|); g(0) = 0.
inline Vec3 g_apply(const DeformationField& z, const Vec3& x) {
    const double r = norm(x);
    if (r == 0.0) return {0.0, 0.0, 0.0};
    const double f = 1.0 + z.value(x) / r;
    return {x[0] * f, x[1] * f, x[2] * f};
}

/// Dg(x) with entry (j, i) = d g_j / d x_i.
inline Mat3 g_jacobian(const DeformationField& z, const Vec3& x) {
    const double r = norm(x);
    if (!(r > 0.0)) throw std::invalid_argument("g_jacobian: undefined at the origin");
    const double zeta = z.value(x);
    const Vec3 gz = z.gradient(x);
    Mat3 J{};
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i)
            J[j][i] = (i == j ? 1.0 : 0.0) + gz[i] * x[j] / r + zeta / r * ((i == j ? 1.0 : 0.0) - x[i] * x[j] / (r * r));
    return J;
}

/// Spectral norm of a 3x3 matrix.
inline double operator_norm(const Mat3& A) {
    Eigen::Matrix3d M;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) M(i, j) = A[i][j];
    return Eigen::JacobiSVD<Eigen::Matrix3d>(M).singularValues()(0);
}

namespace detail {

/// Solves t + zeta(t) = s on [0, t_max] for a monotone ray profile, given
/// evaluators returning (zeta, zeta') at t. Safeguarded Newton with bisection.
template <class Eval>
double invert_ray(Eval eval, double s, double t_max) {
    if (s == 0.0) return 0.0;
    double lo = 0.0, hi = t_max;
    const double f_hi = t_max + eval(t_max).first - s;
    if (!(f_hi >= 0.0) || !(s > 0.0))
        throw std::domain_error("g_inverse: root not bracketed on the ray (deformation inadmissible?)");
    double t = std::min(s, t_max);
    for (int it = 0; it < 200; ++it) {
        const auto [zv, zd] = eval(t);
        const double f = t + zv - s;
        if (f > 0.0)
            hi = t;
        else
            lo = t;
        if (std::abs(f) < 1e-15 || hi - lo < 1e-15) return t;
        const double step = f / (1.0 + zd);
        double next = t - step;
        if (!(next > lo && next < hi) || !(1.0 + zd > 0.0)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) < 1e-16) return next;
        t = next;
    }
    return t;
}

}  // namespace detail

/// Inverse of g on |y| <= 3 by per-ray root finding.
inline Vec3 g_inverse(const DeformationField& z, const Vec3& y) {
    const double s = norm(y);
    if (s > 3.0 + 1e-12) throw std::domain_error("g_inverse: |y| must not exceed 3");
    if (s == 0.0) return {0.0, 0.0, 0.0};
    const BasisSample bs = z.basis().sample(y);
    const Eigen::Map<const Eigen::VectorXd> yk(bs.value.data(), static_cast<Eigen::Index>(bs.value.size()));
    const Eigen::VectorXd ray = z.coeffs().transpose() * yk;
    const Eigen::VectorXd slope = z.radial_derivative().transpose() * yk;
    const RadialGrid& grid = z.grid();
    auto eval = [&](double t) {
        const PanelRow row = grid.interpolation_row(t);
        return std::pair{row.apply(ray), row.apply(slope)};
    };
    const double t = detail::invert_ray(eval, s, grid.back());
    return {y[0] / s * t, y[1] / s * t, y[2] / s * t};
}

}  // namespace rotvp
