#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "rotvp/io.hpp"
#include "rotvp/solver.hpp"

using namespace rotvp;
namespace fs = std::filesystem;

namespace {

const RunConfig& run_config() {
    static const RunConfig c = [] {
        RunConfig r;
        r.model.n_max = 4;
        r.model.nodes_per_panel = 48;
        return r;
    }();
    return c;
}

const Model& model() {
    static const Model m(run_config().model);
    return m;
}

const SolutionState& rotating() {
    static const SolutionState st = [] {
        const LinearizedOperator L(model());
        const double w = 0.3 * model().omega_cap();
        return reconstruct_solution(model(), w, newton_solve(L, w, model().zero_deformation()).zeta);
    }();
    return st;
}

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("rotvp_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

fs::path saved_state(const fs::path& dir) {
    const StateDiagnostics d = compute_diagnostics(model(), rotating(), run_config().poisson_probes);
    return save_state(dir, "state", model(), run_config(), rotating(), d, 3);
}

}  // namespace

TEST(Config, ShippedDefaultLoads) {
    const RunConfig c = load_run_config(fs::path(ROTVP_SOURCE_DIR) / "configs" / "default.json");
    EXPECT_EQ(c.model.n_max, ModelConfig{}.n_max);
    EXPECT_EQ(c.model.nodes_per_panel, ModelConfig{}.nodes_per_panel);
    EXPECT_EQ(c.solver.newton_tol, SolverConfig{}.newton_tol);
    EXPECT_EQ(c.omega_steps, 8);
}

TEST(Config, JsonRoundTrip) {
    RunConfig c;
    c.model.k = 2.0;
    c.model.n_max = 6;
    c.solver.use_full_derivative = true;
    c.omega_max_fraction = 0.3;
    c.omega_steps = 5;
    c.poisson_probes = 7;
    EXPECT_EQ(to_json(run_config_from_json(to_json(c))), to_json(c));
}

TEST(Config, EmptyObjectGivesDefaults) { EXPECT_EQ(to_json(run_config_from_json(json::object())), to_json(RunConfig{})); }

TEST(Config, RejectsInvalidDocuments) {
    const std::vector<std::string> bad = {
        R"({"unknown": 1})",
        R"({"schema": "rotvp-config/2"})",
        R"({"model": {"k": 4.0}})",
        R"({"model": {"n_max": 3}})",
        R"({"model": {"n_max": "eight"}})",
        R"({"model": {"admissible_radius": 0.2}})",
        R"({"model": {"extra": true}})",
        R"({"solver": {"newton_tol": 0}})",
        R"({"solver": {"max_iters": 0}})",
        R"({"continuation": {"omega_max_fraction": 1.0}})",
        R"({"continuation": {"omega_steps": 0}})",
        R"({"poisson_probes": 1})",
        R"([1, 2])",
    };
    for (const auto& doc : bad) EXPECT_THROW(run_config_from_json(json::parse(doc)), ConfigError) << doc;
}

TEST_F(TempDir, ConfigFileErrors) {
    EXPECT_THROW(load_run_config(dir_ / "missing.json"), ConfigError);
    std::ofstream(dir_ / "broken.json") << "{ not json";
    EXPECT_THROW(load_run_config(dir_ / "broken.json"), ConfigError);
}

TEST(ZetaCsv, RoundTripIsBitExact) {
    std::stringstream ss;
    write_zeta_csv(ss, rotating().zeta);
    const DeformationField back = read_zeta_csv(ss, model());
    EXPECT_EQ((back.coeffs() - rotating().zeta.coeffs()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ZetaCsv, RejectsMismatchedPayload) {
    std::stringstream ss;
    write_zeta_csv(ss, rotating().zeta);
    const std::string text = ss.str();
    std::istringstream wrong_header("r,z_0_0\n");
    EXPECT_THROW(read_zeta_csv(wrong_header, model()), ConfigError);
    std::istringstream truncated(text.substr(0, text.size() / 2));
    EXPECT_THROW(read_zeta_csv(truncated, model()), ConfigError);
    std::istringstream empty("");
    EXPECT_THROW(read_zeta_csv(empty, model()), ConfigError);
}

TEST(FailedChecks, FlagsEachViolation) {
    const StateDiagnostics good = compute_diagnostics(model(), rotating(), run_config().poisson_probes);
    EXPECT_TRUE(failed_checks(model(), rotating().omega, good, run_config().solver).empty());
    StateDiagnostics d = good;
    d.sphericity = 0.0;
    EXPECT_EQ(failed_checks(model(), rotating().omega, d, run_config().solver), std::vector<std::string>{"non_sphericity"});
    EXPECT_TRUE(failed_checks(model(), 0.0, d, run_config().solver).empty());
    d = good;
    d.poisson_residual = 1e-3;
    d.axisymmetry = 1e-6;
    EXPECT_EQ(failed_checks(model(), rotating().omega, d, run_config().solver),
              (std::vector<std::string>{"poisson", "axisymmetry"}));
}

TEST_F(TempDir, SaveWritesAllArtifacts) {
    const fs::path header = saved_state(dir_);
    EXPECT_TRUE(fs::exists(dir_ / "state.json"));
    EXPECT_TRUE(fs::exists(dir_ / "state_zeta.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "state_fields.csv"));
    const json meta = read_state_header(header);
    EXPECT_EQ(meta.at("schema"), kStateSchema);
    EXPECT_EQ(meta.at("iterations"), 3);
    EXPECT_EQ(meta.at("omega").get<double>(), rotating().omega);
    std::ifstream f(dir_ / "state_fields.csv");
    std::string line;
    std::getline(f, line);
    EXPECT_EQ(line, "r,theta,rho,U");
}

TEST_F(TempDir, LoadRebuildsTheSameState) {
    const LoadedState ls = load_state(saved_state(dir_));
    EXPECT_EQ(ls.state.omega, rotating().omega);
    EXPECT_EQ((ls.state.zeta.coeffs() - rotating().zeta.coeffs()).cwiseAbs().maxCoeff(), 0.0);
    for (const Vec3& x : {Vec3{0.3, 0.1, 0.2}, Vec3{0.0, 0.9, 0.0}, Vec3{1.5, 0.0, 1.0}})
        EXPECT_EQ(ls.state.potential(x), rotating().potential(x));
}

TEST_F(TempDir, VerifyIsCleanReproducibleAndIdempotent) {
    const fs::path header = saved_state(dir_);
    const VerifyReport a = verify_state(header);
    EXPECT_TRUE(a.ok);
    EXPECT_TRUE(a.reproduced);
    EXPECT_TRUE(a.failed.empty());
    const VerifyReport b = verify_state(header);
    EXPECT_EQ(to_json(a.diagnostics), to_json(b.diagnostics));
    EXPECT_EQ(to_json(a.diagnostics), read_state_header(header).at("diagnostics"));
}

TEST_F(TempDir, VerifyDetectsTampering) {
    const fs::path header = saved_state(dir_);
    json meta = read_state_header(header);
    meta["diagnostics"]["flattening"] = meta["diagnostics"]["flattening"].get<double>() * (1.0 + 1e-15) + 1e-18;
    std::ofstream(header) << meta.dump(2);
    const VerifyReport rep = verify_state(header);
    EXPECT_FALSE(rep.ok);
    EXPECT_FALSE(rep.reproduced);
    EXPECT_NE(std::find(rep.failed.begin(), rep.failed.end(), "stored_diagnostics_mismatch"), rep.failed.end());
}

TEST_F(TempDir, VerifyRejectsNonStateFiles) {
    std::ofstream(dir_ / "other.json") << R"({"schema": "something-else"})";
    EXPECT_THROW(verify_state(dir_ / "other.json"), ConfigError);
    EXPECT_THROW(verify_state(dir_ / "absent.json"), ConfigError);
}
