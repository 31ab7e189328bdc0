// Command-line driver: base state export, single solves, continuation runs,
// verification of stored states and orbit diagnostics.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rotvp/basestate.hpp"
#include "rotvp/diagnostics.hpp"
#include "rotvp/io.hpp"
#include "rotvp/linearized.hpp"
#include "rotvp/operator.hpp"
#include "rotvp/solver.hpp"

namespace fs = std::filesystem;
using rotvp::json;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kSolverFailure = 3, kVerifyFailure = 4 };

struct Options {
    std::string config_path;
    std::string out_dir = "rotvp_out";
    std::optional<double> k;
    bool full_derivative = false;

    double omega = 0.0;
    std::optional<double> omega_max;
    std::optional<int> steps;
    std::string state_file;
    std::vector<double> x0, v0;
    double t_end = 20.0;
    double orbit_tol = 1e-12;
    int orbit_samples = 200;
};

int report_error(const Options& opt, int code, const std::string& kind, const std::string& msg) {
    const json err = {{"status", "error"}, {"exit_code", code}, {"kind", kind}, {"message", msg}};
    std::cerr << err.dump() << '\n';
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (!ec) std::ofstream(fs::path(opt.out_dir) / "error.json") << err.dump(2) << '\n';
    return code;
}

rotvp::RunConfig make_config(const Options& opt) {
    rotvp::RunConfig cfg;
    if (!opt.config_path.empty()) cfg = rotvp::load_run_config(opt.config_path);
    if (opt.k) cfg.model.k = *opt.k;
    if (opt.full_derivative) cfg.solver.use_full_derivative = true;
    if (opt.steps) cfg.omega_steps = *opt.steps;
    return rotvp::run_config_from_json(rotvp::to_json(cfg));  // re-validates overrides
}

void write_json(const fs::path& path, const json& j) { std::ofstream(path) << j.dump(2) << '\n'; }

int run_basestate(const Options& opt) {
    const rotvp::RunConfig cfg = make_config(opt);
    const rotvp::RadialProfile p = rotvp::build_base_state(cfg.model.k, cfg.model.nodes_per_panel);
    const rotvp::ProfileChecks chk = rotvp::validate_profile(p);
    fs::create_directories(opt.out_dir);
    {
        std::ofstream csv(fs::path(opt.out_dir) / "profile.csv");
        rotvp::write_profile_csv(csv, p);
    }
    const json summary = {{"schema", "rotvp-basestate/1"},
                          {"k", p.k()},
                          {"M", p.M},
                          {"E0", p.E0},
                          {"E1", p.E1},
                          {"C_lb", p.C_lb},
                          {"W_c", p.W_c},
                          {"U0_at_1", rotvp::profile_eval(p, 1.0).U0},
                          {"U0_center", p.U0_center},
                          {"rho0_center", p.rho0.front()},
                          {"omega_cap", p.omega_cap()},
                          {"boundary_error", chk.boundary_error},
                          {"exterior_error", chk.exterior_error},
                          {"poisson_residual", chk.poisson_residual},
                          {"curvature_rel_error", chk.curvature_rel_error},
                          {"closure_rel_error", chk.closure_rel_error},
                          {"checks_pass", chk.ok()}};
    write_json(fs::path(opt.out_dir) / "basestate.json", summary);
    std::cout << summary.dump(2) << '\n';
    return chk.ok() ? kOk : kVerifyFailure;
}

json state_summary(const fs::path& header, double omega, const rotvp::StateDiagnostics& d,
                   const std::vector<std::string>& failed, int iterations) {
    return {{"state", header.filename().string()},
            {"omega", omega},
            {"iterations", iterations},
            {"diagnostics", rotvp::to_json(d)},
            {"failed_checks", failed}};
}

int run_solve(const Options& opt) {
    const rotvp::RunConfig cfg = make_config(opt);
    const rotvp::Model model(cfg.model);
    if (!(std::abs(opt.omega) < model.omega_cap()))
        throw rotvp::ConfigError("--omega must satisfy |omega| < sqrt(E1)/4 = " + std::to_string(model.omega_cap()));
    const rotvp::LinearizedOperator L(model);
    fs::create_directories(opt.out_dir);
    {
        std::ofstream csv(fs::path(opt.out_dir) / "operators.csv");
        rotvp::write_operator_csv(csv, L);
    }
    const rotvp::NewtonResult nr = rotvp::newton_solve(L, opt.omega, model.zero_deformation(), cfg.solver);
    const rotvp::SolutionState st = rotvp::reconstruct_solution(model, opt.omega, nr.zeta);
    const rotvp::StateDiagnostics d = rotvp::compute_diagnostics(model, st, cfg.poisson_probes);
    const auto failed = rotvp::failed_checks(model, opt.omega, d, cfg.solver);
    const fs::path header = rotvp::save_state(opt.out_dir, "state", model, cfg, st, d, nr.iterations);
    json out = state_summary(header, opt.omega, d, failed, nr.iterations);
    out["residual_history"] = nr.residuals;
    write_json(fs::path(opt.out_dir) / "solve.json", out);
    std::cout << out.dump(2) << '\n';
    return failed.empty() ? kOk : kVerifyFailure;
}

int run_continue(const Options& opt) {
    rotvp::RunConfig cfg = make_config(opt);
    const rotvp::Model model(cfg.model);
    rotvp::ContinuationConfig cc;
    cc.omega_max = opt.omega_max ? *opt.omega_max : cfg.omega_max_fraction * model.omega_cap();
    cc.omega_steps = cfg.omega_steps;
    cc.solver = cfg.solver;
    if (!(cc.omega_max >= 0.0 && cc.omega_max < model.omega_cap()))
        throw rotvp::ConfigError("--omega-max must lie in [0, sqrt(E1)/4 = " + std::to_string(model.omega_cap()) +
                                 ")");
    const rotvp::LinearizedOperator L(model);
    fs::create_directories(opt.out_dir);
    {
        std::ofstream csv(fs::path(opt.out_dir) / "operators.csv");
        rotvp::write_operator_csv(csv, L);
    }
    const rotvp::ContinuationResult res = rotvp::continuation(L, cc);

    json steps = json::array();
    bool all_clean = true;
    for (std::size_t i = 0; i < res.steps.size(); ++i) {
        const auto& s = res.steps[i];
        char stem[32];
        std::snprintf(stem, sizeof stem, "state_%03zu", i);
        const rotvp::StateDiagnostics d = rotvp::compute_diagnostics(model, s.state, cfg.poisson_probes);
        const auto failed = rotvp::failed_checks(model, s.omega, d, cfg.solver);
        all_clean = all_clean && failed.empty();
        const fs::path header = rotvp::save_state(opt.out_dir, stem, model, cfg, s.state, d, s.iterations);
        json entry = state_summary(header, s.omega, d, failed, s.iterations);
        entry["residual_history"] = s.residuals;
        json amps = json::object();
        const auto& b = *model.basis();
        for (const auto& md : b.modes())
            amps[std::to_string(md.n) + "," + std::to_string(md.m)] = s.state.rho.mode_sup(md.n, md.m);
        entry["rho_mode_sup"] = amps;
        steps.push_back(entry);
    }
    const json manifest = {{"schema", rotvp::kManifestSchema},
                           {"config", rotvp::to_json(cfg)},
                           {"omega_max", cc.omega_max},
                           {"omega_cap", model.omega_cap()},
                           {"completed", res.completed},
                           {"last_omega", res.last_omega},
                           {"failure", res.failure},
                           {"steps", steps}};
    write_json(fs::path(opt.out_dir) / "manifest.json", manifest);
    std::cout << json{{"completed", res.completed},
                      {"states", res.steps.size()},
                      {"last_omega", res.last_omega},
                      {"all_checks_pass", all_clean},
                      {"manifest", (fs::path(opt.out_dir) / "manifest.json").string()}}
                     .dump(2)
              << '\n';
    if (!res.completed) return report_error(opt, kSolverFailure, "solver_failure", res.failure);
    return all_clean ? kOk : kVerifyFailure;
}

int run_verify(const Options& opt) {
    const rotvp::VerifyReport rep = rotvp::verify_state(opt.state_file);
    const json out = {{"state", opt.state_file},
                      {"ok", rep.ok},
                      {"reproduced", rep.reproduced},
                      {"failed_checks", rep.failed},
                      {"diagnostics", rotvp::to_json(rep.diagnostics)}};
    std::cout << out.dump(2) << '\n';
    return rep.ok ? kOk : kVerifyFailure;
}

rotvp::Vec3 to_vec3(const std::vector<double>& v, const char* name) {
    if (v.size() != 3) throw rotvp::ConfigError(std::string(name) + " needs exactly three components");
    return {v[0], v[1], v[2]};
}

int run_orbit(const Options& opt) {
    const rotvp::Vec3 x0 = to_vec3(opt.x0, "--x0"), v0 = to_vec3(opt.v0, "--v0");
    const rotvp::LoadedState ls = rotvp::load_state(opt.state_file);
    rotvp::OrbitSample orb;
    try {
        orb = rotvp::integrate_characteristic(ls.state, x0, v0, opt.t_end, opt.orbit_tol, opt.orbit_samples);
    } catch (const std::invalid_argument& e) {
        throw rotvp::ConfigError(e.what());
    }
    fs::create_directories(opt.out_dir);
    {
        std::ofstream csv(fs::path(opt.out_dir) / "orbit.csv");
        csv << "t,x1,x2,x3,v1,v2,v3,E_J,P,f\n";
        char buf[512];
        for (std::size_t i = 0; i < orb.t.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", orb.t[i],
                          orb.x[i][0], orb.x[i][1], orb.x[i][2], orb.v[i][0], orb.v[i][1], orb.v[i][2], orb.jacobi[i],
                          orb.momentum[i], orb.f[i]);
            csv << buf;
        }
    }
    const bool ok = orb.jacobi_drift() < 1e-8 && orb.f_variation() < 1e-6;
    const json out = {{"state", opt.state_file},
                      {"omega", ls.state.omega},
                      {"jacobi_drift", orb.jacobi_drift()},
                      {"f_variation", orb.f_variation()},
                      {"max_radius", orb.max_radius()},
                      {"ok", ok}};
    write_json(fs::path(opt.out_dir) / "orbit.json", out);
    std::cout << out.dump(2) << '\n';
    return ok ? kOk : kVerifyFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rotating steady states of Vlasov-Poisson by the deformation method"};
    app.require_subcommand(1);
    Options opt;
    app.add_option("-c,--config", opt.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("-o,--out", opt.out_dir, "output directory")->capture_default_str();
    app.add_flag("--full-derivative", opt.full_derivative, "use the GMRES full-derivative Newton step");

    auto* base = app.add_subcommand("basestate", "build and export the non-rotating polytrope");
    base->add_option("--k", opt.k, "polytropic exponent");

    auto* solve = app.add_subcommand("solve", "solve T(omega, zeta) = 0 at one angular velocity");
    solve->add_option("--omega", opt.omega, "angular velocity")->required();
    solve->add_option("--k", opt.k, "polytropic exponent");

    auto* cont = app.add_subcommand("continue", "natural continuation in omega from the base state");
    cont->add_option("--omega-max", opt.omega_max, "largest angular velocity (default: config fraction of the cap)");
    cont->add_option("--steps", opt.steps, "number of omega steps");
    cont->add_option("--k", opt.k, "polytropic exponent");

    auto* ver = app.add_subcommand("verify", "re-run every invariant check on a stored state");
    ver->add_option("state", opt.state_file, "state JSON header")->required()->check(CLI::ExistingFile);

    auto* orbit = app.add_subcommand("orbit", "integrate one characteristic in a stored state");
    orbit->add_option("state", opt.state_file, "state JSON header")->required()->check(CLI::ExistingFile);
    orbit->add_option("--x0", opt.x0, "initial position (3 numbers)")->expected(3)->required();
    orbit->add_option("--v0", opt.v0, "initial velocity (3 numbers)")->expected(3)->required();
    orbit->add_option("--t-end", opt.t_end, "integration window")->capture_default_str();
    orbit->add_option("--tol", opt.orbit_tol, "integrator tolerance")->capture_default_str();
    orbit->add_option("--samples", opt.orbit_samples, "output samples")->capture_default_str();

    for (auto* sub : {base, solve, cont, ver, orbit}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return report_error(opt, kConfigError, "usage_error", e.what());
    }

    try {
        if (*base) return run_basestate(opt);
        if (*solve) return run_solve(opt);
        if (*cont) return run_continue(opt);
        if (*ver) return run_verify(opt);
        if (*orbit) return run_orbit(opt);
    } catch (const rotvp::ConfigError& e) {
        return report_error(opt, kConfigError, "config_error", e.what());
    } catch (const std::invalid_argument& e) {
        return report_error(opt, kConfigError, "config_error", e.what());
    } catch (const rotvp::SolverFailure& e) {
        return report_error(opt, kSolverFailure, "solver_failure", e.what());
    } catch (const std::exception& e) {
        return report_error(opt, kSolverFailure, "error", e.what());
    }
    return kOk;
}
