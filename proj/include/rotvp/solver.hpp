#pragma once
/// Chord-Newton solution of T(omega, zeta) = 0 with the frozen L0, an optional
/// full-derivative step (GMRES preconditioned by L0^{-1}), and natural
/// continuation in omega.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/IterativeSolvers>

#include "deformation.hpp"
#include "errors.hpp"
#include "linearized.hpp"
#include "operator.hpp"

namespace rotvp {
namespace detail {

/// Matrix-free operator y -> dT(L0^{-1} y) on flattened coefficient vectors.
class PreconditionedDerivative;

}  // namespace detail
}  // namespace rotvp

namespace Eigen::internal {
template <>
struct traits<rotvp::detail::PreconditionedDerivative>
    : public Eigen::internal::traits<Eigen::SparseMatrix<double>> {};
}  // namespace Eigen::internal

namespace rotvp::detail {

class PreconditionedDerivative : public Eigen::EigenBase<PreconditionedDerivative> {
public:
    using Scalar = double;
    using RealScalar = double;
    using StorageIndex = int;
    enum { ColsAtCompileTime = Eigen::Dynamic, MaxColsAtCompileTime = Eigen::Dynamic, IsRowMajor = false };

    PreconditionedDerivative(const LinearizedOperator& L, double omega, const DeformationField& z)
        : L_(&L), omega_(omega), z_(&z), rows_(z.coeffs().rows()), cols_(z.coeffs().cols()) {}

    Eigen::Index rows() const { return rows_ * cols_; }
    Eigen::Index cols() const { return rows_ * cols_; }

    template <class Rhs>
    Eigen::Product<PreconditionedDerivative, Rhs, Eigen::AliasFreeProduct> operator*(
        const Eigen::MatrixBase<Rhs>& x) const {
        return Eigen::Product<PreconditionedDerivative, Rhs, Eigen::AliasFreeProduct>(*this, x.derived());
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& y) const {
        const Model& m = L_->model();
        const Eigen::MatrixXd Y = Eigen::Map<const Eigen::MatrixXd>(y.data(), rows_, cols_);
        const DeformationField lambda = solve_L0(m.yfield(Y), *L_);
        const YField out = apply_dT(m, omega_, *z_, lambda);
        return Eigen::Map<const Eigen::VectorXd>(out.coeffs().data(), out.coeffs().size());
    }

private:
    const LinearizedOperator* L_;
    double omega_;
    const DeformationField* z_;
    Eigen::Index rows_, cols_;
};

}  // namespace rotvp::detail

namespace Eigen::internal {
template <class Rhs>
struct generic_product_impl<rotvp::detail::PreconditionedDerivative, Rhs, SparseShape, DenseShape, GemvProduct>
    : generic_product_impl_base<rotvp::detail::PreconditionedDerivative, Rhs,
                                generic_product_impl<rotvp::detail::PreconditionedDerivative, Rhs>> {
    template <class Dest>
    static void scaleAndAddTo(Dest& dst, const rotvp::detail::PreconditionedDerivative& lhs, const Rhs& rhs,
                              const double& alpha) {
        dst.noalias() += alpha * lhs.apply(rhs);
    }
};
}  // namespace Eigen::internal

namespace rotvp {

struct SolverConfig {
    double newton_tol = 1e-9;  ///< on ||T||_Y
    int max_iters = 30;
    bool use_full_derivative = false;
    double gmres_tol = 1e-10;
    int gmres_max_iters = 60;
};

struct NewtonResult {
    DeformationField zeta;
    int iterations = 0;
    std::vector<double> residuals;  ///< ||T||_Y before each update and at the end
};

/// Iterates zeta <- zeta - L0^{-1} T(omega, zeta) (or the full-derivative step)
/// until ||T||_Y < newton_tol.
inline NewtonResult newton_solve(const LinearizedOperator& L, double omega, const DeformationField& z_init,
                                 const SolverConfig& cfg = {}) {
    const Model& model = L.model();
    if (!(cfg.newton_tol > 0.0) || cfg.max_iters < 0) throw std::invalid_argument("newton_solve: bad tolerances");
    NewtonResult res;
    res.zeta = z_init;
    for (int it = 0;; ++it) {
        if (!res.zeta.admissible(model.admissible_radius()))
            throw AdmissibilityLost("||zeta||_X = " + std::to_string(res.zeta.x_norm()) + " at omega = " +
                                    std::to_string(omega));
        const YField T = T_eval(model, omega, res.zeta);
        res.residuals.push_back(T.y_norm());
        if (T.y_norm() < cfg.newton_tol) {
            res.iterations = it;
            return res;
        }
        if (it == cfg.max_iters)
            throw NoConvergence("no convergence at omega = " + std::to_string(omega) + " after " +
                                std::to_string(it) + " iterations (residual " + std::to_string(T.y_norm()) + ")");
        DeformationField step;
        if (cfg.use_full_derivative) {
            const detail::PreconditionedDerivative A(L, omega, res.zeta);
            Eigen::GMRES<detail::PreconditionedDerivative, Eigen::IdentityPreconditioner> gmres(A);
            gmres.setTolerance(cfg.gmres_tol);
            gmres.setMaxIterations(cfg.gmres_max_iters);
            gmres.set_restart(cfg.gmres_max_iters);
            const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(T.coeffs().data(), T.coeffs().size());
            const Eigen::VectorXd y = gmres.solve(rhs);
            const Eigen::MatrixXd Y = Eigen::Map<const Eigen::MatrixXd>(y.data(), T.coeffs().rows(), T.coeffs().cols());
            step = solve_L0(model.yfield(Y), L);
        } else {
            step = solve_L0(T, L);
        }
        res.zeta = res.zeta - step;
    }
}

struct ContinuationConfig {
    double omega_max = 0.0;
    int omega_steps = 8;
    SolverConfig solver;
};

struct ContinuationStep {
    double omega = 0.0;
    int iterations = 0;
    std::vector<double> residuals;
    SolutionState state;
};

struct ContinuationResult {
    std::vector<ContinuationStep> steps;
    bool completed = false;
    double last_omega = 0.0;  ///< largest accepted omega
    std::string failure;      ///< message of the failure that stopped the march
};

inline void validate(const ContinuationConfig& cfg, const Model& model) {
    if (!(cfg.omega_max >= 0.0 && cfg.omega_max < model.omega_cap()))
        throw std::invalid_argument("omega_max must lie in [0, sqrt(E1)/4 = " + std::to_string(model.omega_cap()) +
                                    ")");
    if (cfg.omega_steps < 1) throw std::invalid_argument("omega_steps must be positive");
    if (!(cfg.solver.newton_tol > 0.0) || cfg.solver.max_iters < 1)
        throw std::invalid_argument("solver tolerances must be positive");
}

/// March omega_i = i omega_max / steps from 0, warm-starting from
/// zeta_{i-1} (omega_i / omega_{i-1})^2; stops at the first failure.
inline ContinuationResult continuation(const LinearizedOperator& L, const ContinuationConfig& cfg) {
    const Model& model = L.model();
    validate(cfg, model);
    ContinuationResult out;
    DeformationField z = model.zero_deformation();
    double prev = 0.0;
    for (int i = 0; i <= cfg.omega_steps; ++i) {
        const double omega = cfg.omega_max * i / cfg.omega_steps;
        const DeformationField guess = prev > 0.0 ? z * ((omega / prev) * (omega / prev)) : z;
        try {
            NewtonResult nr = newton_solve(L, omega, guess, cfg.solver);
            ContinuationStep step;
            step.omega = omega;
            step.iterations = nr.iterations;
            step.residuals = std::move(nr.residuals);
            step.state = reconstruct_solution(model, omega, nr.zeta);
            z = nr.zeta;
            prev = omega;
            out.steps.push_back(std::move(step));
            out.last_omega = omega;
        } catch (const SolverFailure& e) {
            out.failure = e.what();
            return out;
        }
    }
    out.completed = true;
    return out;
}

}  // namespace rotvp
