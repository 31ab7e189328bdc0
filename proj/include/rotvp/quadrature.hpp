#pragma once
/// Radial discretization: Gauss rules, composite Gauss-Lobatto panels, and the
/// barycentric interpolation / differentiation / cumulative integration
/// operators built on them.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rotvp {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

/// Legendre P_n and P_{n-1} at x by the three-term recurrence.
inline void legendre_pair(int n, double x, double& pn, double& pnm1) {
    pnm1 = 1.0;
    pn = x;
    if (n == 0) {
        pn = 1.0;
        pnm1 = 0.0;
        return;
    }
    for (int k = 2; k <= n; ++k) {
        const double next = ((2.0 * k - 1.0) * x * pn - (k - 1.0) * pnm1) / k;
        pnm1 = pn;
        pn = next;
    }
}

}  // namespace detail

/// n-point Gauss-Legendre rule on [-1, 1], nodes ascending.
inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pn = 0, pnm1 = 0, dp = 0;
        for (int it = 0; it < 100; ++it) {
            detail::legendre_pair(n, x, pn, pnm1);
            dp = n * (x * pn - pnm1) / (x * x - 1.0);
            const double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        detail::legendre_pair(n, x, pn, pnm1);
        dp = n * (x * pn - pnm1) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

/// n-point Gauss-Lobatto rule on [-1, 1] (endpoints included), nodes ascending.
inline QuadratureRule gauss_lobatto(int n) {
    if (n < 2) throw std::invalid_argument("gauss_lobatto: need at least 2 nodes");
    const int N = n - 1;
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * i / N);
        double pn = 0, pnm1 = 0;
        for (int it = 0; it < 200; ++it) {
            detail::legendre_pair(N, x, pn, pnm1);
            const double dx = (x * pn - pnm1) / (n * pn);
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        detail::legendre_pair(N, x, pn, pnm1);
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = 2.0 / (N * n * pn * pn);
    }
    rule.nodes.front() = -1.0;
    rule.nodes.back() = 1.0;
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

/// Barycentric weights 1/prod_{k != j}(x_j - x_k), rescaled to max magnitude 1.
inline std::vector<double> barycentric_weights(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> logw(n, 0.0), sign(n, 1.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            if (k == j) continue;
            const double d = x[j] - x[k];
            logw[j] -= std::log(std::abs(d));
            if (d < 0) sign[j] = -sign[j];
        }
    }
    const double mx = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(n);
    for (std::size_t j = 0; j < n; ++j) w[j] = sign[j] * std::exp(logw[j] - mx);
    return w;
}

/// Lagrange basis values l_j(t) for nodes x with barycentric weights w.
inline void lagrange_row(std::span<const double> x, std::span<const double> w, double t,
                         std::span<double> out) {
    const std::size_t n = x.size();
    for (std::size_t j = 0; j < n; ++j) {
        if (t == x[j]) {
            std::fill(out.begin(), out.end(), 0.0);
            out[j] = 1.0;
            return;
        }
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = w[j] / (t - x[j]);
        denom += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] /= denom;
}

/// Reference operators of an n-point Lobatto panel on [-1, 1].
struct ReferencePanel {
    QuadratureRule rule;
    std::vector<double> bary;
    std::vector<double> diff;      ///< n x n row-major, d/dx on [-1, 1]
    std::vector<double> cumulant;  ///< n x n row-major, integral from -1 to x_i

    explicit ReferencePanel(int n) : rule(gauss_lobatto(n)), bary(barycentric_weights(rule.nodes)) {
        const auto& x = rule.nodes;
        diff.assign(n * n, 0.0);
        for (int i = 0; i < n; ++i) {
            double diag = 0.0;
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const double d = (bary[j] / bary[i]) / (x[i] - x[j]);
                diff[i * n + j] = d;
                diag -= d;
            }
            diff[i * n + i] = diag;
        }
        cumulant.assign(n * n, 0.0);
        const QuadratureRule gl = gauss_legendre(n);
        std::vector<double> row(n);
        for (int i = 1; i < n; ++i) {
            const double half = 0.5 * (x[i] + 1.0);
            for (int q = 0; q < n; ++q) {
                const double t = -1.0 + half * (gl.nodes[q] + 1.0);
                lagrange_row(x, bary, t, row);
                for (int j = 0; j < n; ++j) cumulant[i * n + j] += half * gl.weights[q] * row[j];
            }
        }
    }

    int size() const { return static_cast<int>(rule.nodes.size()); }
};

/// Sparse row of weights acting on a contiguous block of global nodes.
struct PanelRow {
    int offset = 0;
    std::vector<double> weights;

    template <class Vec>
    double apply(const Vec& values) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < weights.size(); ++j) acc += weights[j] * values[offset + j];
        return acc;
    }
};

/// Composite Gauss-Lobatto grid over consecutive panels [b_0,b_1], [b_1,b_2], ...
/// Neighbouring panels share their endpoint node, so the global node count is
/// panels*(n-1)+1.
class RadialGrid {
public:
    RadialGrid(std::vector<double> breakpoints, int nodes_per_panel)
        : breaks_(std::move(breakpoints)), ref_(nodes_per_panel), gauss_(gauss_legendre(nodes_per_panel)) {
        if (breaks_.size() < 2) throw std::invalid_argument("RadialGrid: need at least one panel");
        if (nodes_per_panel < 3) throw std::invalid_argument("RadialGrid: need >= 3 nodes per panel");
        for (std::size_t p = 1; p < breaks_.size(); ++p)
            if (!(breaks_[p] > breaks_[p - 1])) throw std::invalid_argument("RadialGrid: breakpoints must increase");
        const int n = nodes_per_panel;
        const int panels = static_cast<int>(breaks_.size()) - 1;
        nodes_.resize(panels * (n - 1) + 1);
        weights_.assign(nodes_.size(), 0.0);
        for (int p = 0; p < panels; ++p) {
            const double a = breaks_[p], b = breaks_[p + 1];
            for (int j = 0; j < n; ++j) {
                const int g = p * (n - 1) + j;
                nodes_[g] = 0.5 * (a + b) + 0.5 * (b - a) * ref_.rule.nodes[j];
                weights_[g] += 0.5 * (b - a) * ref_.rule.weights[j];
            }
            nodes_[p * (n - 1)] = a;
            nodes_[p * (n - 1) + n - 1] = b;
        }
    }

    std::size_t size() const { return nodes_.size(); }
    int nodes_per_panel() const { return ref_.size(); }
    int panels() const { return static_cast<int>(breaks_.size()) - 1; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& breakpoints() const { return breaks_; }
    double front() const { return breaks_.front(); }
    double back() const { return breaks_.back(); }
    const ReferencePanel& reference() const { return ref_; }

    /// Panel index containing r (right-closed except for the first panel).
    int panel_of(double r) const {
        if (r < breaks_.front() || r > breaks_.back())
            throw std::out_of_range("RadialGrid: radius " + std::to_string(r) + " outside grid");
        const int panels_ = panels();
        for (int p = 0; p < panels_; ++p)
            if (r <= breaks_[p + 1]) return p;
        return panels_ - 1;
    }

    /// Interpolation weights at r (panel-local barycentric).
    PanelRow interpolation_row(double r) const {
        const int p = panel_of(r);
        const int n = ref_.size();
        PanelRow row{p * (n - 1), std::vector<double>(n)};
        lagrange_row(ref_.rule.nodes, ref_.bary, to_reference(p, r), row.weights);
        return row;
    }

    template <class Vec>
    double interpolate(const Vec& values, double r) const {
        return interpolation_row(r).apply(values);
    }

    /// Nodal derivative; at shared panel endpoints the one-sided values are averaged.
    template <class Vec>
    std::vector<double> differentiate(const Vec& values) const {
        const int n = ref_.size();
        std::vector<double> out(nodes_.size(), 0.0), count(nodes_.size(), 0.0);
        for (int p = 0; p < panels(); ++p) {
            const double scale = 2.0 / (breaks_[p + 1] - breaks_[p]);
            const int off = p * (n - 1);
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += ref_.diff[i * n + j] * values[off + j];
                out[off + i] += scale * acc;
                count[off + i] += 1.0;
            }
        }
        for (std::size_t g = 0; g < out.size(); ++g) out[g] /= count[g];
        return out;
    }

    /// Running integral from the left end to each node.
    template <class Vec>
    std::vector<double> cumulative(const Vec& values) const {
        const int n = ref_.size();
        std::vector<double> out(nodes_.size(), 0.0);
        double base = 0.0;
        for (int p = 0; p < panels(); ++p) {
            const double half = 0.5 * (breaks_[p + 1] - breaks_[p]);
            const int off = p * (n - 1);
            for (int i = 1; i < n; ++i) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += ref_.cumulant[i * n + j] * values[off + j];
                out[off + i] = base + half * acc;
            }
            base = out[off + n - 1];
        }
        return out;
    }

    template <class Vec>
    double integrate(const Vec& values) const {
        double acc = 0.0;
        for (std::size_t g = 0; g < nodes_.size(); ++g) acc += weights_[g] * values[g];
        return acc;
    }

    /// Dense weight vector c with c . f = integral of f from the left end to r.
    std::vector<double> cumulative_weights(double r) const {
        std::vector<double> c(nodes_.size(), 0.0);
        const int p = panel_of(r);
        const int n = ref_.size();
        for (int q = 0; q < p; ++q) {
            const double half = 0.5 * (breaks_[q + 1] - breaks_[q]);
            for (int j = 0; j < n; ++j) c[q * (n - 1) + j] += half * ref_.rule.weights[j];
        }
        const double t = to_reference(p, r);
        const double half_panel = 0.5 * (breaks_[p + 1] - breaks_[p]);
        const QuadratureRule& gl = gauss_;
        const double half = 0.5 * (t + 1.0);
        std::vector<double> row(n);
        for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
            const double s = -1.0 + half * (gl.nodes[q] + 1.0);
            lagrange_row(ref_.rule.nodes, ref_.bary, s, row);
            for (int j = 0; j < n; ++j) c[p * (n - 1) + j] += half_panel * half * gl.weights[q] * row[j];
        }
        return c;
    }

private:
    double to_reference(int p, double r) const {
        const double a = breaks_[p], b = breaks_[p + 1];
        if (r == a) return -1.0;
        if (r == b) return 1.0;
        return (2.0 * r - a - b) / (b - a);
    }

    std::vector<double> breaks_;
    ReferencePanel ref_;
    QuadratureRule gauss_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

}  // namespace rotvp
