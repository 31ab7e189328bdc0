#pragma once
/// JSON configuration, state persistence (JSON header + CSV payloads), run
/// manifests and the re-verification of stored states.

#include <cstdio>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diagnostics.hpp"
#include "operator.hpp"
#include "solver.hpp"

namespace rotvp {

using json = nlohmann::json;

inline constexpr const char* kConfigSchema = "rotvp-config/1";
inline constexpr const char* kStateSchema = "rotvp-state/1";
inline constexpr const char* kManifestSchema = "rotvp-manifest/1";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    ModelConfig model;
    SolverConfig solver;
    double omega_max_fraction = 0.5;  ///< continuation target as a fraction of sqrt(E1)/4
    int omega_steps = 8;
    int poisson_probes = 9;  ///< probes per axis of the Poisson residual lattice
};

namespace detail {

template <class T>
void read_field(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

inline void reject_unknown(const json& obj, const std::vector<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [k, v] : obj.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw ConfigError("unknown key '" + k + "' in " + where);
}

}  // namespace detail

inline json to_json(const ModelConfig& c) {
    return {{"k", c.k},
            {"n_max", c.n_max},
            {"nodes_per_panel", c.nodes_per_panel},
            {"n_theta", c.n_theta},
            {"n_phi", c.n_phi},
            {"admissible_radius", c.admissible_radius}};
}

inline json to_json(const SolverConfig& c) {
    return {{"newton_tol", c.newton_tol},
            {"max_iters", c.max_iters},
            {"use_full_derivative", c.use_full_derivative},
            {"gmres_tol", c.gmres_tol},
            {"gmres_max_iters", c.gmres_max_iters}};
}

inline json to_json(const RunConfig& c) {
    return {{"schema", kConfigSchema},
            {"model", to_json(c.model)},
            {"solver", to_json(c.solver)},
            {"continuation", {{"omega_max_fraction", c.omega_max_fraction}, {"omega_steps", c.omega_steps}}},
            {"poisson_probes", c.poisson_probes}};
}

inline ModelConfig model_config_from_json(const json& j) {
    detail::reject_unknown(j, {"k", "n_max", "nodes_per_panel", "n_theta", "n_phi", "admissible_radius"}, "model");
    ModelConfig c;
    detail::read_field(j, "k", c.k);
    detail::read_field(j, "n_max", c.n_max);
    detail::read_field(j, "nodes_per_panel", c.nodes_per_panel);
    detail::read_field(j, "n_theta", c.n_theta);
    detail::read_field(j, "n_phi", c.n_phi);
    detail::read_field(j, "admissible_radius", c.admissible_radius);
    if (!(c.k > 1.0 && c.k < 3.5)) throw ConfigError("model.k must lie in (1, 3.5) for a compact polytrope");
    if (c.n_max < 0 || c.n_max % 2 != 0) throw ConfigError("model.n_max must be a non-negative even integer");
    if (c.nodes_per_panel < 8) throw ConfigError("model.nodes_per_panel must be at least 8");
    if (!(c.admissible_radius > 0.0 && c.admissible_radius <= 0.125))
        throw ConfigError("model.admissible_radius must lie in (0, 0.125]");
    return c;
}

inline RunConfig run_config_from_json(const json& j) {
    detail::reject_unknown(j, {"schema", "model", "solver", "continuation", "poisson_probes"}, "config");
    if (j.contains("schema") && j.at("schema") != kConfigSchema)
        throw ConfigError("unsupported config schema " + j.at("schema").dump());
    RunConfig c;
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("solver")) {
        const json& s = j.at("solver");
        detail::reject_unknown(s, {"newton_tol", "max_iters", "use_full_derivative", "gmres_tol", "gmres_max_iters"},
                               "solver");
        detail::read_field(s, "newton_tol", c.solver.newton_tol);
        detail::read_field(s, "max_iters", c.solver.max_iters);
        detail::read_field(s, "use_full_derivative", c.solver.use_full_derivative);
        detail::read_field(s, "gmres_tol", c.solver.gmres_tol);
        detail::read_field(s, "gmres_max_iters", c.solver.gmres_max_iters);
        if (!(c.solver.newton_tol > 0.0) || c.solver.max_iters < 1 || !(c.solver.gmres_tol > 0.0) ||
            c.solver.gmres_max_iters < 1)
            throw ConfigError("solver tolerances and iteration limits must be positive");
    }
    if (j.contains("continuation")) {
        const json& s = j.at("continuation");
        detail::reject_unknown(s, {"omega_max_fraction", "omega_steps"}, "continuation");
        detail::read_field(s, "omega_max_fraction", c.omega_max_fraction);
        detail::read_field(s, "omega_steps", c.omega_steps);
        if (!(c.omega_max_fraction >= 0.0 && c.omega_max_fraction < 1.0))
            throw ConfigError("continuation.omega_max_fraction must lie in [0, 1)");
        if (c.omega_steps < 1) throw ConfigError("continuation.omega_steps must be positive");
    }
    detail::read_field(j, "poisson_probes", c.poisson_probes);
    if (c.poisson_probes < 2) throw ConfigError("poisson_probes must be at least 2");
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

/// Invariant checks of one SolutionState, stored with the state and recomputed by verify.
struct StateDiagnostics {
    double residual = 0.0;
    double C = 0.0;
    double consistency_error = 0.0;
    double support_radius = 0.0;
    double poisson_residual = 0.0;
    double mirror = 0.0;
    double sphericity = 0.0;
    double axisymmetry = 0.0;
    double flattening = 0.0;
    double zeta_x_norm = 0.0;
    double rho20_sup = 0.0;
};

inline StateDiagnostics compute_diagnostics(const Model& model, const SolutionState& st, int poisson_probes = 9) {
    StateDiagnostics d;
    d.residual = st.residual;
    d.C = st.C;
    d.consistency_error = st.consistency_error;
    d.support_radius = st.support_radius;
    d.poisson_residual = poisson_residual(st, poisson_probes);
    const SymmetryReport rep = measure_symmetry(st, model.profile());
    d.mirror = rep.mirror;
    d.sphericity = rep.sphericity;
    d.axisymmetry = rep.axisymmetry;
    d.flattening = rep.flattening;
    d.zeta_x_norm = st.zeta.x_norm();
    d.rho20_sup = st.rho.mode_sup(2, 0);
    return d;
}

inline json to_json(const StateDiagnostics& d) {
    return {{"residual", d.residual},
            {"C", d.C},
            {"consistency_error", d.consistency_error},
            {"support_radius", d.support_radius},
            {"poisson_residual", d.poisson_residual},
            {"mirror_residual", d.mirror},
            {"sphericity_residual", d.sphericity},
            {"axisymmetry_residual", d.axisymmetry},
            {"flattening", d.flattening},
            {"zeta_x_norm", d.zeta_x_norm},
            {"rho20_sup", d.rho20_sup}};
}

/// Names of the invariant checks that fail for these diagnostics.
inline std::vector<std::string> failed_checks(const Model& model, double omega, const StateDiagnostics& d,
                                              const SolverConfig& solver) {
    std::vector<std::string> bad;
    const RadialProfile& p = model.profile();
    if (!(d.residual < solver.newton_tol)) bad.push_back("residual");
    if (!(d.C > p.E0 + p.E1)) bad.push_back("max_principle");
    if (!(d.support_radius < 3.0)) bad.push_back("support");
    if (!(d.consistency_error < kConsistencyTolerance)) bad.push_back("consistency");
    if (!(d.poisson_residual < 5e-4)) bad.push_back("poisson");
    if (!(d.mirror < 1e-12)) bad.push_back("mirror_symmetry");
    if (!(d.axisymmetry < 1e-8)) bad.push_back("axisymmetry");
    if (omega != 0.0 && !(d.sphericity > 0.0)) bad.push_back("non_sphericity");
    return bad;
}

/// ζ mode curves: r, then one column z_<n>_<m> per mode.
inline void write_zeta_csv(std::ostream& os, const DeformationField& z) {
    const SymmetryBasis& b = z.basis();
    os << "r";
    for (const auto& md : b.modes()) os << ",z_" << md.n << '_' << md.m;
    os << '\n';
    char buf[32];
    const auto& r = z.grid().nodes();
    for (std::size_t i = 0; i < r.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", r[i]);
        os << buf;
        for (std::size_t k = 0; k < b.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g",
                          z.coeffs()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)));
            os << ',' << buf;
        }
        os << '\n';
    }
}

inline DeformationField read_zeta_csv(std::istream& is, const Model& model) {
    const SymmetryBasis& b = *model.basis();
    const auto& r = model.field_grid()->nodes();
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("zeta CSV: missing header");
    std::ostringstream expect;
    expect << "r";
    for (const auto& md : b.modes()) expect << ",z_" << md.n << '_' << md.m;
    if (line != expect.str()) throw ConfigError("zeta CSV: header does not match the model's mode list");
    Eigen::MatrixXd c(static_cast<Eigen::Index>(b.size()), static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!std::getline(is, line)) throw ConfigError("zeta CSV: too few rows");
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ls, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
        if (vals.size() != b.size() + 1) throw ConfigError("zeta CSV: wrong column count");
        if (std::abs(vals[0] - r[i]) > 1e-14) throw ConfigError("zeta CSV: radial nodes do not match the model grid");
        for (std::size_t k = 0; k < b.size(); ++k)
            c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = vals[k + 1];
    }
    return model.deformation(std::move(c));
}

/// rho and U on an (r, theta) grid in the half plane phi = 0.
inline void write_fields_csv(std::ostream& os, const SolutionState& st, int n_r = 61, int n_theta = 31,
                             double r_max = 3.0) {
    os << "r,theta,rho,U\n";
    char buf[128];
    for (int i = 0; i < n_r; ++i)
        for (int j = 0; j < n_theta; ++j) {
            const double r = r_max * i / (n_r - 1);
            const double th = std::numbers::pi * j / (n_theta - 1);
            const Vec3 x{r * std::sin(th), 0.0, r * std::cos(th)};
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r, th, st.density(x), st.potential(x));
            os << buf;
        }
}

/// Writes <stem>.json, <stem>_zeta.csv and <stem>_fields.csv into dir.
inline std::filesystem::path save_state(const std::filesystem::path& dir, const std::string& stem, const Model& model,
                                        const RunConfig& cfg, const SolutionState& st, const StateDiagnostics& d,
                                        int iterations) {
    std::filesystem::create_directories(dir);
    const std::string zeta_file = stem + "_zeta.csv";
    const std::string fields_file = stem + "_fields.csv";
    {
        std::ofstream z(dir / zeta_file);
        write_zeta_csv(z, st.zeta);
    }
    {
        std::ofstream f(dir / fields_file);
        write_fields_csv(f, st);
    }
    const RadialProfile& p = model.profile();
    json modes = json::array();
    const SymmetryBasis& b = *model.basis();
    for (std::size_t k = 0; k < b.size(); ++k)
        modes.push_back({{"n", b.modes()[k].n},
                         {"m", b.modes()[k].m},
                         {"rho_sup", st.rho.coeffs.row(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff()},
                         {"zeta_sup", st.zeta.coeffs().row(static_cast<Eigen::Index>(k)).cwiseAbs().maxCoeff()}});
    const json meta = {{"schema", kStateSchema},
                       {"config", to_json(cfg)},
                       {"omega", st.omega},
                       {"iterations", iterations},
                       {"M", p.M},
                       {"E0", p.E0},
                       {"E1", p.E1},
                       {"omega_cap", model.omega_cap()},
                       {"diagnostics", to_json(d)},
                       {"modes", modes},
                       {"zeta_file", zeta_file},
                       {"fields_file", fields_file}};
    const auto header = dir / (stem + ".json");
    std::ofstream h(header);
    h << meta.dump(2) << '\n';
    return header;
}

/// A stored state rebuilt from disk; the model owns the grids the state refers to.
struct LoadedState {
    RunConfig config;
    std::unique_ptr<Model> model;
    SolutionState state;
    json meta;
};

inline json read_state_header(const std::filesystem::path& header) {
    std::ifstream in(header);
    if (!in) throw ConfigError("cannot open state file " + header.string());
    json meta;
    try {
        in >> meta;
    } catch (const json::exception& e) {
        throw ConfigError("state parse error: " + std::string(e.what()));
    }
    if (!meta.is_object() || meta.value("schema", "") != kStateSchema)
        throw ConfigError("not a state file: " + header.string());
    return meta;
}

inline DeformationField read_state_zeta(const std::filesystem::path& header, const json& meta, const Model& model) {
    std::ifstream zin(header.parent_path() / meta.at("zeta_file").get<std::string>());
    if (!zin) throw ConfigError("missing zeta payload for " + header.string());
    return read_zeta_csv(zin, model);
}

inline LoadedState load_state(const std::filesystem::path& header) {
    LoadedState out;
    out.meta = read_state_header(header);
    out.config = run_config_from_json(out.meta.at("config"));
    out.model = std::make_unique<Model>(out.config.model);
    const DeformationField z = read_state_zeta(header, out.meta, *out.model);
    out.state = reconstruct_solution(*out.model, out.meta.at("omega").get<double>(), z);
    return out;
}

struct VerifyReport {
    bool ok = false;
    bool reproduced = false;  ///< recomputed diagnostics equal the stored ones bit for bit
    std::vector<std::string> failed;
    StateDiagnostics diagnostics;
    json meta;
};

/// Reloads a stored state, rebuilds the model from the echoed config and re-runs
/// every invariant check.
inline VerifyReport verify_state(const std::filesystem::path& header) {
    VerifyReport rep;
    rep.meta = read_state_header(header);
    const RunConfig cfg = run_config_from_json(rep.meta.at("config"));
    const Model model(cfg.model);
    const DeformationField z = read_state_zeta(header, rep.meta, model);
    const double omega = rep.meta.at("omega").get<double>();
    try {
        const SolutionState st = reconstruct_solution(model, omega, z);
        rep.diagnostics = compute_diagnostics(model, st, cfg.poisson_probes);
        rep.failed = failed_checks(model, omega, rep.diagnostics, cfg.solver);
    } catch (const SolverFailure& e) {
        rep.failed.push_back(std::string("reconstruction: ") + e.what());
    }
    rep.reproduced = to_json(rep.diagnostics) == rep.meta.at("diagnostics");
    if (!rep.reproduced) rep.failed.push_back("stored_diagnostics_mismatch");
    rep.ok = rep.failed.empty();
    return rep;
}

}  // namespace rotvp
