#pragma once
/// Real spherical harmonics restricted to the mirror-symmetric subspace, the
/// angular quadrature grid with forward/inverse transforms, and the multipole
/// solver for the Newtonian potential of a density given by mode curves.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ansatz.hpp"
#include "quadrature.hpp"

namespace rotvp {

/// Legendre polynomial P_n(t) by the three-term recurrence.
inline double legendre_P(int n, double t) {
    if (n < 0) throw std::invalid_argument("legendre_P: negative degree");
    if (!(std::abs(t) <= 1.0)) throw std::domain_error("legendre_P: argument outside [-1, 1]");
    double p = 0.0, q = 0.0;
    detail::legendre_pair(n, t, p, q);
    return p;
}

/// Fully normalized associated Legendre functions (4 pi normalization,
/// no Condon-Shortley phase) together with d/dtheta and P/sin(theta) for m >= 1.
/// Entries are stored at n * (N + 1) + m.
struct LegendreTable {
    int N = 0;
    std::vector<double> P, dP, P_over_sin;

    double value(int n, int m) const { return P[n * (N + 1) + m]; }
    double dtheta(int n, int m) const { return dP[n * (N + 1) + m]; }
    double over_sin(int n, int m) const { return P_over_sin[n * (N + 1) + m]; }
};

inline LegendreTable normalized_legendre(int N, double cos_t, double sin_t) {
    LegendreTable T;
    T.N = N;
    const std::size_t sz = static_cast<std::size_t>(N + 1) * (N + 1);
    T.P.assign(sz, 0.0);
    T.dP.assign(sz, 0.0);
    T.P_over_sin.assign(sz, 0.0);
    auto at = [N](int n, int m) { return static_cast<std::size_t>(n * (N + 1) + m); };
    T.P[at(0, 0)] = 1.0;
    for (int m = 0; m <= N; ++m) {
        if (m >= 1) {
            // sectoral seeds; P/sin is seeded without dividing by sin
            if (m == 1) {
                T.P[at(1, 1)] = std::sqrt(3.0) * sin_t;
                T.dP[at(1, 1)] = std::sqrt(3.0) * cos_t;
                T.P_over_sin[at(1, 1)] = std::sqrt(3.0);
            } else {
                const double c = std::sqrt((2.0 * m + 1.0) / (2.0 * m));
                T.P[at(m, m)] = c * sin_t * T.P[at(m - 1, m - 1)];
                T.dP[at(m, m)] = c * (cos_t * T.P[at(m - 1, m - 1)] + sin_t * T.dP[at(m - 1, m - 1)]);
                T.P_over_sin[at(m, m)] = c * sin_t * T.P_over_sin[at(m - 1, m - 1)];
            }
        }
        for (int n = m + 1; n <= N; ++n) {
            const double a = std::sqrt((2.0 * n - 1.0) * (2.0 * n + 1.0) / ((n - m) * static_cast<double>(n + m)));
            const double b = n - 2 >= m ? std::sqrt((2.0 * n + 1.0) * (n + m - 1.0) * (n - m - 1.0) /
                                                    ((n - m) * static_cast<double>(n + m) * (2.0 * n - 3.0)))
                                        : 0.0;
            const double p1 = T.P[at(n - 1, m)], d1 = T.dP[at(n - 1, m)], s1 = T.P_over_sin[at(n - 1, m)];
            const double p2 = n - 2 >= m ? T.P[at(n - 2, m)] : 0.0;
            const double d2 = n - 2 >= m ? T.dP[at(n - 2, m)] : 0.0;
            const double s2 = n - 2 >= m ? T.P_over_sin[at(n - 2, m)] : 0.0;
            T.P[at(n, m)] = a * cos_t * p1 - b * p2;
            T.dP[at(n, m)] = a * (cos_t * d1 - sin_t * p1) - b * d2;
            if (m >= 1) T.P_over_sin[at(n, m)] = a * cos_t * s1 - b * s2;
        }
    }
    return T;
}

struct HarmonicMode {
    int n = 0;
    int m = 0;
    bool operator==(const HarmonicMode&) const = default;
};

/// Unit vector -> (cos theta, sin theta, phi) with the pole handled exactly.
struct SphericalAngles {
    double cos_t = 1.0, sin_t = 0.0, phi = 0.0;
};

inline SphericalAngles angles_of(const Vec3& xi) {
    const double rho = std::hypot(xi[0], xi[1]);
    const double len = std::hypot(rho, xi[2]);
    if (len == 0.0) return {};
    SphericalAngles a;
    a.cos_t = xi[2] / len;
    a.sin_t = rho / len;
    a.phi = rho > 0.0 ? std::atan2(xi[1], xi[0]) : 0.0;
    return a;
}

/// Values and tangential derivatives of all basis functions at one direction.
struct BasisSample {
    std::vector<double> value;     ///< Y
    std::vector<double> dtheta;    ///< dY/dtheta
    std::vector<double> dphi_sin;  ///< (1/sin theta) dY/dphi
};

/// Real cosine harmonics Y_nm = Pbar_nm(cos theta) cos(m phi) / sqrt(4 pi) with n
/// and m even: the subspace invariant under the reflections x1 -> -x1,
/// x2 -> -x2, x3 -> -x3. Carries a Gauss-Legendre (in cos theta) x uniform
/// (in phi) product grid with quadrature weights over the unit sphere.
class SymmetryBasis {
public:
    explicit SymmetryBasis(int n_max, int n_theta = 0, int n_phi = 0) : n_max_(n_max) {
        if (n_max < 0 || n_max % 2 != 0) throw std::invalid_argument("SymmetryBasis: N_max must be even and >= 0");
        if (n_theta == 0) n_theta = n_max + 1;
        if (n_phi == 0) n_phi = 2 * n_max + 2;
        if (n_theta < n_max + 1) throw std::invalid_argument("SymmetryBasis: need at least N_max+1 theta nodes");
        if (n_phi < 2 * n_max + 2) throw std::invalid_argument("SymmetryBasis: need at least 2 N_max+2 phi nodes");
        for (int n = 0; n <= n_max; n += 2)
            for (int m = 0; m <= n; m += 2) modes_.push_back({n, m});

        const QuadratureRule gl = gauss_legendre(n_theta);
        cos_theta_ = gl.nodes;
        for (int j = 0; j < n_phi; ++j) phi_.push_back(2.0 * std::numbers::pi * j / n_phi);
        const double dphi = 2.0 * std::numbers::pi / n_phi;
        const std::size_t D = static_cast<std::size_t>(n_theta) * n_phi;
        const std::size_t K = modes_.size();
        Y_.resize(K, D);
        dY_.resize(K, D);
        dYs_.resize(K, D);
        dirs_.resize(D);
        weights_.resize(D);
        theta_index_.resize(D);
        for (int i = 0; i < n_theta; ++i) {
            const double ct = cos_theta_[i];
            const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
            for (int j = 0; j < n_phi; ++j) {
                const std::size_t d = static_cast<std::size_t>(i) * n_phi + j;
                dirs_[d] = {st * std::cos(phi_[j]), st * std::sin(phi_[j]), ct};
                weights_[d] = gl.weights[i] * dphi;
                theta_index_[d] = i;
                const BasisSample s = sample(ct, st, phi_[j]);
                for (std::size_t k = 0; k < K; ++k) {
                    Y_(k, d) = s.value[k];
                    dY_(k, d) = s.dtheta[k];
                    dYs_(k, d) = s.dphi_sin[k];
                }
            }
        }
    }

    int n_max() const { return n_max_; }
    const std::vector<HarmonicMode>& modes() const { return modes_; }
    std::size_t size() const { return modes_.size(); }
    std::size_t directions() const { return dirs_.size(); }
    int n_theta() const { return static_cast<int>(cos_theta_.size()); }
    int n_phi() const { return static_cast<int>(phi_.size()); }
    const std::vector<double>& cos_theta_nodes() const { return cos_theta_; }
    const std::vector<double>& phi_nodes() const { return phi_; }
    const std::vector<Vec3>& direction_vectors() const { return dirs_; }
    const std::vector<double>& direction_weights() const { return weights_; }
    int theta_index(std::size_t d) const { return theta_index_[d]; }

    /// Basis values at grid directions: modes x directions.
    const Eigen::MatrixXd& values() const { return Y_; }
    const Eigen::MatrixXd& dtheta_values() const { return dY_; }
    const Eigen::MatrixXd& dphi_sin_values() const { return dYs_; }

    /// Position of (n, m) in modes(), or -1.
    int index(int n, int m) const {
        for (std::size_t k = 0; k < modes_.size(); ++k)
            if (modes_[k].n == n && modes_[k].m == m) return static_cast<int>(k);
        return -1;
    }

    BasisSample sample(double cos_t, double sin_t, double phi) const {
        const LegendreTable T = normalized_legendre(n_max_, cos_t, sin_t);
        const double c = 1.0 / std::sqrt(4.0 * std::numbers::pi);
        BasisSample s;
        s.value.resize(modes_.size());
        s.dtheta.resize(modes_.size());
        s.dphi_sin.resize(modes_.size());
        for (std::size_t k = 0; k < modes_.size(); ++k) {
            const auto [n, m] = modes_[k];
            const double cm = std::cos(m * phi), sm = std::sin(m * phi);
            s.value[k] = c * T.value(n, m) * cm;
            s.dtheta[k] = c * T.dtheta(n, m) * cm;
            s.dphi_sin[k] = m == 0 ? 0.0 : -c * m * T.over_sin(n, m) * sm;
        }
        return s;
    }

    BasisSample sample(const Vec3& xi) const {
        const SphericalAngles a = angles_of(xi);
        return sample(a.cos_t, a.sin_t, a.phi);
    }

private:
    int n_max_;
    std::vector<HarmonicMode> modes_;
    std::vector<double> cos_theta_, phi_;
    std::vector<Vec3> dirs_;
    std::vector<double> weights_;
    std::vector<int> theta_index_;
    Eigen::MatrixXd Y_, dY_, dYs_;
};

/// Value of the basis function (n, m) at the unit vector xi.
inline double eval_basis(const SymmetryBasis& b, int n, int m, const Vec3& xi) {
    const int k = b.index(n, m);
    if (k < 0)
        throw std::invalid_argument("eval_basis: mode (" + std::to_string(n) + "," + std::to_string(m) +
                                    ") not in the symmetric basis");
    if (!(std::abs(norm(xi) - 1.0) <= 1e-12)) throw std::invalid_argument("eval_basis: xi is not a unit vector");
    return b.sample(xi).value[static_cast<std::size_t>(k)];
}

/// Per-mode surface integrals of samples (directions x shells) -> (modes x shells).
inline Eigen::MatrixXd forward_transform(const SymmetryBasis& b, const Eigen::MatrixXd& samples) {
    if (static_cast<std::size_t>(samples.rows()) != b.directions())
        throw std::invalid_argument("forward_transform: expected " + std::to_string(b.directions()) +
                                    " direction samples per shell, got " + std::to_string(samples.rows()));
    const Eigen::Map<const Eigen::VectorXd> w(b.direction_weights().data(),
                                              static_cast<Eigen::Index>(b.directions()));
    return b.values() * (w.asDiagonal() * samples);
}

/// Samples at grid directions (directions x shells) of a coefficient field.
inline Eigen::MatrixXd inverse_transform(const SymmetryBasis& b, const Eigen::MatrixXd& coeffs) {
    if (static_cast<std::size_t>(coeffs.rows()) != b.size())
        throw std::invalid_argument("inverse_transform: expected " + std::to_string(b.size()) + " mode rows");
    return b.values().transpose() * coeffs;
}

/// All 2n+1 orthonormal real harmonics of degree n at xi (cosine m = 0..n, then
/// sine m = 1..n). Used to check the addition theorem on the full space.
inline std::vector<double> full_harmonics(int n, const Vec3& xi) {
    const SphericalAngles a = angles_of(xi);
    const LegendreTable T = normalized_legendre(n, a.cos_t, a.sin_t);
    const double c = 1.0 / std::sqrt(4.0 * std::numbers::pi);
    std::vector<double> out;
    out.reserve(2 * n + 1);
    for (int m = 0; m <= n; ++m) out.push_back(c * T.value(n, m) * std::cos(m * a.phi));
    for (int m = 1; m <= n; ++m) out.push_back(c * T.value(n, m) * std::sin(m * a.phi));
    return out;
}

/// Product-integration rows for the radial multipole kernel
///   k_n(r, s) = s^2 min(r,s)^n / max(r,s)^{n+1}
/// (for n = 0 in the relative form k_0(r,s) - k_0(0,s)) and its r-derivative,
/// acting on nodal values of a function interpolated on a RadialGrid. The
/// segment [r, end] is subdivided geometrically so the factor (r/s)^{n-1} is
/// resolved for small r.
class KernelQuadrature {
public:
    KernelQuadrature(std::shared_ptr<const RadialGrid> grid, int n_max)
        : grid_(std::move(grid)), n_max_(n_max),
          rule_(gauss_legendre(grid_->nodes_per_panel() / 2 + n_max + 2)) {}

    struct Rows {
        std::vector<std::vector<double>> value;  ///< indexed by n / 2
        std::vector<std::vector<double>> slope;
    };

    Rows rows(double r) const {
        const int degrees = n_max_ / 2 + 1;
        const std::size_t N = grid_->size();
        Rows out{std::vector<std::vector<double>>(degrees, std::vector<double>(N, 0.0)),
                 std::vector<std::vector<double>>(degrees, std::vector<double>(N, 0.0))};
        if (!(r > 0.0)) return out;
        const auto& br = grid_->breakpoints();
        for (int p = 0; p + 1 < static_cast<int>(br.size()); ++p) {
            const double a = br[p], b = br[p + 1];
            if (a < r) add_segment(out, p, a, std::min(b, r), r, true);
            double c = std::max(a, r);
            while (c < b) {
                const double next = std::min(b, 2.0 * c);
                add_segment(out, p, c, next, r, false);
                c = next;
            }
        }
        return out;
    }

    const std::shared_ptr<const RadialGrid>& grid() const { return grid_; }
    int n_max() const { return n_max_; }

private:
    void add_segment(Rows& out, int panel, double lo, double hi, double r, bool interior) const {
        if (!(hi > lo)) return;
        const auto& ref = grid_->reference();
        const int n = ref.size();
        const int off = panel * (n - 1);
        const auto& br = grid_->breakpoints();
        const double a = br[panel], b = br[panel + 1];
        std::vector<double> l(n);
        const double half = 0.5 * (hi - lo);
        for (std::size_t q = 0; q < rule_.nodes.size(); ++q) {
            const double s = 0.5 * (hi + lo) + half * rule_.nodes[q];
            const double w = half * rule_.weights[q];
            lagrange_row(ref.rule.nodes, ref.bary, (2.0 * s - a - b) / (b - a), l);
            for (int d = 0; d <= n_max_ / 2; ++d) {
                const int deg = 2 * d;
                double kv = 0.0, ks = 0.0;
                if (interior) {
                    const double ratio = std::pow(s / r, deg);
                    if (deg == 0) {
                        kv = s * s / r - s;
                        ks = -s * s / (r * r);
                    } else {
                        kv = ratio * s * s / r;
                        ks = -(deg + 1.0) * ratio * s * s / (r * r);
                    }
                } else if (deg > 0) {
                    const double ratio = std::pow(r / s, deg - 1);
                    kv = ratio * r;
                    ks = deg * ratio;
                }
                if (kv == 0.0 && ks == 0.0) continue;
                auto& rv = out.value[d];
                auto& rs = out.slope[d];
                for (int j = 0; j < n; ++j) {
                    rv[off + j] += w * kv * l[j];
                    rs[off + j] += w * ks * l[j];
                }
            }
        }
    }

    std::shared_ptr<const RadialGrid> grid_;
    int n_max_;
    QuadratureRule rule_;
};

/// Precomputed multipole matrices on a density grid [0, R].
class PotentialOperator {
public:
    PotentialOperator(std::shared_ptr<const RadialGrid> grid, int n_max) : grid_(grid) {
        const KernelQuadrature kq(grid, n_max);
        const int degrees = n_max / 2 + 1;
        const auto N = static_cast<Eigen::Index>(grid->size());
        value_.assign(degrees, Eigen::MatrixXd::Zero(N, N));
        slope_.assign(degrees, Eigen::MatrixXd::Zero(N, N));
        moment_.assign(degrees, Eigen::VectorXd::Zero(N));
        const auto& r = grid->nodes();
        for (Eigen::Index i = 0; i < N; ++i) {
            const auto rows = kq.rows(r[i]);
            for (int d = 0; d < degrees; ++d) {
                const double c = -4.0 * std::numbers::pi / (4.0 * d + 1.0);
                for (Eigen::Index j = 0; j < N; ++j) {
                    value_[d](i, j) = c * rows.value[d][j];
                    slope_[d](i, j) = c * rows.slope[d][j];
                }
            }
        }
        const auto& w = grid->weights();
        for (int d = 0; d < degrees; ++d)
            for (Eigen::Index j = 0; j < N; ++j) moment_[d](j) = w[j] * std::pow(r[j], 2 * d + 2);
        center_.resize(N);
        for (Eigen::Index j = 0; j < N; ++j) center_(j) = -4.0 * std::numbers::pi * w[j] * r[j];
    }

    const std::shared_ptr<const RadialGrid>& grid() const { return grid_; }
    int n_max() const { return 2 * (static_cast<int>(value_.size()) - 1); }
    const Eigen::MatrixXd& value_matrix(int n) const { return value_.at(n / 2); }
    const Eigen::MatrixXd& slope_matrix(int n) const { return slope_.at(n / 2); }
    const Eigen::VectorXd& moment_weights(int n) const { return moment_.at(n / 2); }
    /// Weights giving Phi_00(0) = -4 pi int s rho_00 ds.
    const Eigen::VectorXd& center_weights() const { return center_; }

private:
    std::shared_ptr<const RadialGrid> grid_;
    std::vector<Eigen::MatrixXd> value_, slope_;
    std::vector<Eigen::VectorXd> moment_;
    Eigen::VectorXd center_;
};

/// Newtonian potential Phi = -int rho(y)/|x-y| dy of a density given by mode
/// curves, so that Delta Phi = 4 pi rho. Mode curves are stored relative to the
/// value at the origin; outside the density grid the exact exterior multipole
/// expansion is used.
class MultipolePotential {
public:
    MultipolePotential() = default;
    MultipolePotential(std::shared_ptr<const SymmetryBasis> basis, std::shared_ptr<const RadialGrid> grid,
                       Eigen::MatrixXd rel, Eigen::MatrixXd slope, std::vector<double> moments, double center00)
        : basis_(std::move(basis)), grid_(std::move(grid)), rel_(std::move(rel)), slope_(std::move(slope)),
          moments_(std::move(moments)), center00_(center00) {}

    const SymmetryBasis& basis() const { return *basis_; }
    const RadialGrid& grid() const { return *grid_; }
    /// Relative mode curves Phi_k(r) - Phi_k(0) at grid nodes (modes x nodes).
    const Eigen::MatrixXd& relative_nodes() const { return rel_; }
    const Eigen::MatrixXd& slope_nodes() const { return slope_; }
    const std::vector<double>& moments() const { return moments_; }
    double outer_radius() const { return grid_->back(); }
    /// Phi(0).
    double center_value() const { return center00_ / std::sqrt(4.0 * std::numbers::pi); }

    /// Exterior coefficient of mode k: Phi_k(r) = coefficient * r^{-(n+1)} beyond the grid.
    double exterior_coefficient(std::size_t k) const {
        const int n = basis_->modes()[k].n;
        return -4.0 * std::numbers::pi / (2.0 * n + 1.0) * moments_[k];
    }

    /// Relative value and radial derivative of mode k at radius r >= 0.
    std::pair<double, double> mode(std::size_t k, double r) const {
        if (r <= outer_radius()) {
            const PanelRow row = grid_->interpolation_row(r);
            return {row.apply(rel_.row(static_cast<Eigen::Index>(k))),
                    row.apply(slope_.row(static_cast<Eigen::Index>(k)))};
        }
        const int n = basis_->modes()[k].n;
        const double c = exterior_coefficient(k);
        const double v = c * std::pow(r, -(n + 1));
        const double shift = k == 0 ? center00_ : 0.0;
        return {v - shift, -(n + 1.0) * v / r};
    }

    /// Phi(x) - Phi(0).
    double relative_value(const Vec3& x) const {
        const double r = norm(x);
        const BasisSample s = basis_->sample(x);
        double acc = 0.0;
        for (std::size_t k = 0; k < basis_->size(); ++k) acc += mode(k, r).first * s.value[k];
        if (r == 0.0) return 0.0;
        return acc;
    }

    double value(const Vec3& x) const { return center_value() + relative_value(x); }

    Vec3 gradient(const Vec3& x) const {
        const double r = norm(x);
        if (r == 0.0) return {0.0, 0.0, 0.0};
        const SphericalAngles a = angles_of(x);
        const BasisSample s = basis_->sample(a.cos_t, a.sin_t, a.phi);
        double gr = 0.0, gt = 0.0, gp = 0.0;
        for (std::size_t k = 0; k < basis_->size(); ++k) {
            const auto [v, dv] = mode(k, r);
            gr += dv * s.value[k];
            if (k > 0) {  // the (0,0) curve is relative; tangential terms vanish for it anyway
                gt += v * s.dtheta[k] / r;
                gp += v * s.dphi_sin[k] / r;
            }
        }
        const double cp = std::cos(a.phi), sp = std::sin(a.phi);
        const Vec3 er{a.sin_t * cp, a.sin_t * sp, a.cos_t};
        const Vec3 et{a.cos_t * cp, a.cos_t * sp, -a.sin_t};
        const Vec3 ep{-sp, cp, 0.0};
        return {gr * er[0] + gt * et[0] + gp * ep[0], gr * er[1] + gt * et[1] + gp * ep[1],
                gr * er[2] + gt * et[2] + gp * ep[2]};
    }

private:
    std::shared_ptr<const SymmetryBasis> basis_;
    std::shared_ptr<const RadialGrid> grid_;
    Eigen::MatrixXd rel_, slope_;
    std::vector<double> moments_;
    double center00_ = 0.0;
};

/// Potential of the density with mode curves rho (modes x grid nodes), which
/// must vanish at the outer end of the grid.
inline MultipolePotential newtonian_potential(std::shared_ptr<const SymmetryBasis> basis,
                                              const PotentialOperator& op, const Eigen::MatrixXd& rho) {
    const auto K = static_cast<Eigen::Index>(basis->size());
    const auto N = static_cast<Eigen::Index>(op.grid()->size());
    if (rho.rows() != K || rho.cols() != N)
        throw std::invalid_argument("newtonian_potential: density has wrong shape");
    if (basis->n_max() > op.n_max()) throw std::invalid_argument("newtonian_potential: operator degree too low");
    Eigen::MatrixXd rel(K, N), slope(K, N);
    std::vector<double> moments(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const int n = basis->modes()[k].n;
        rel.row(k) = op.value_matrix(n) * rho.row(k).transpose();
        slope.row(k) = op.slope_matrix(n) * rho.row(k).transpose();
        moments[k] = op.moment_weights(n).dot(rho.row(k));
    }
    const double center00 = op.center_weights().dot(rho.row(0));
    return MultipolePotential(std::move(basis), op.grid(), std::move(rel), std::move(slope), std::move(moments),
                              center00);
}

inline MultipolePotential newtonian_potential(std::shared_ptr<const SymmetryBasis> basis,
                                              std::shared_ptr<const RadialGrid> grid, const Eigen::MatrixXd& rho) {
    const PotentialOperator op(std::move(grid), basis->n_max());
    return newtonian_potential(std::move(basis), op, rho);
}

}  // namespace rotvp
