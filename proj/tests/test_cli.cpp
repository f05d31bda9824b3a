#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "spectral_shrink/csv.hpp"
#include "spectral_shrink/rng.hpp"

namespace fs = std::filesystem;
namespace ss = spectral_shrink;
using Eigen::MatrixXd;

namespace {

struct CommandResult {
    int exit_code;
};

class CliTest : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("spectral_shrink_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    CommandResult run(const std::string& args) const {
        const std::string cmd = std::string(CLI_BINARY_PATH) + " " + args + " >" +
                                path("stdout.txt") + " 2>" + path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return {WEXITSTATUS(status)};
    }

    std::string slurp(const std::string& file) const {
        std::ifstream in(file);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }

    fs::path dir_;
};

MatrixXd random_spd(int p, std::uint64_t seed) {
    ss::Xoshiro256pp rng(seed);
    MatrixXd a(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) a(i, j) = rng.next_gaussian();
    return MatrixXd(a * a.transpose() / p) + MatrixXd::Identity(p, p);
}

}  // namespace

TEST_F(CliTest, CsvRoundTripIsExact) {
    ss::Xoshiro256pp rng(8);
    MatrixXd m(7, 5);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 5; ++j) m(i, j) = rng.next_gaussian() * std::pow(10.0, (i - 3) * 3);
    ss::write_csv_matrix(path("m.csv"), m);
    const MatrixXd back = ss::read_csv_matrix(path("m.csv"));
    ASSERT_EQ(back.rows(), 7);
    ASSERT_EQ(back.cols(), 5);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 5; ++j) ASSERT_EQ(back(i, j), m(i, j));
}

TEST_F(CliTest, IdentityRuleRoundTrips) {
    const MatrixXd s = random_spd(8, 3);
    ss::write_csv_matrix(path("s.csv"), s);
    const auto res = run("shrink " + path("s.csv") + " --rule identity --gamma 0.5 -o " +
                         path("out.csv"));
    ASSERT_EQ(res.exit_code, 0) << slurp(path("stderr.txt"));
    const MatrixXd out = ss::read_csv_matrix(path("out.csv"));
    EXPECT_LT((out - s).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_TRUE(fs::exists(path("out.csv.json")));
}

TEST_F(CliTest, OptimalShrinkHandValue) {
    MatrixXd s = MatrixXd::Identity(10, 10);
    s(0, 0) = 1.26;
    ss::write_csv_matrix(path("s.csv"), s);
    const auto res = run("shrink " + path("s.csv") +
                         " --rule optimal --loss F --framework dzero --gamma 0.01 --rank 1 -o " +
                         path("out.csv"));
    ASSERT_EQ(res.exit_code, 0) << slurp(path("stderr.txt"));
    const MatrixXd out = ss::read_csv_matrix(path("out.csv"));
    EXPECT_NEAR(out(0, 0), 1.15, 1e-9);
    EXPECT_NEAR(out(5, 5), 1.0, 1e-9);
}

TEST_F(CliTest, AutoFrameworkUsesDataAspectRatio) {
    MatrixXd s = MatrixXd::Identity(10, 10);
    s(0, 0) = 4.5;
    ss::write_csv_matrix(path("s.csv"), s);
    // gamma = 10/1000 = 0.01; the agnostic Frobenius rule applies.
    const auto res = run("shrink " + path("s.csv") + " --framework auto --n 1000 --rank 1 -o " +
                         path("out.csv"));
    ASSERT_EQ(res.exit_code, 0) << slurp(path("stderr.txt"));
    const MatrixXd out = ss::read_csv_matrix(path("out.csv"));
    const double ell = 0.5 * (4.5 + 1.0 - 0.01 + std::sqrt(std::pow(4.5 - 1.01, 2) - 0.04));
    const double c2 = (1.0 - 0.01 / std::pow(ell - 1.0, 2)) / (1.0 + 0.01 / (ell - 1.0));
    EXPECT_NEAR(out(0, 0), 1.0 + (ell - 1.0) * c2, 1e-9);
}

TEST_F(CliTest, CalibrateRescalesNoise) {
    MatrixXd s = 4.0 * MatrixXd::Identity(12, 12);
    s(0, 0) = 4.0 * 1.26;
    ss::write_csv_matrix(path("s.csv"), s);
    const auto res = run("shrink " + path("s.csv") +
                         " --rule optimal --loss F --framework dzero --gamma 0.01 --rank 1 "
                         "--calibrate -o " +
                         path("out.csv"));
    ASSERT_EQ(res.exit_code, 0) << slurp(path("stderr.txt"));
    const MatrixXd out = ss::read_csv_matrix(path("out.csv"));
    EXPECT_NEAR(out(0, 0), 4.0 * 1.15, 1e-9);
    const std::string sidecar = slurp(path("out.csv.json"));
    EXPECT_NE(sidecar.find("\"sigma2\": 4.0"), std::string::npos) << sidecar;
}

TEST_F(CliTest, WignerZeroAndAsymmetric) {
    ss::write_csv_matrix(path("zero.csv"), MatrixXd::Zero(6, 6));
    auto res = run("wigner " + path("zero.csv") + " -o " + path("out.csv"));
    ASSERT_EQ(res.exit_code, 0);
    EXPECT_LT(ss::read_csv_matrix(path("out.csv")).cwiseAbs().maxCoeff(), 1e-15);

    MatrixXd bad = MatrixXd::Zero(4, 4);
    bad(0, 1) = 1.0;
    ss::write_csv_matrix(path("bad.csv"), bad);
    res = run("wigner " + path("bad.csv") + " -o " + path("out2.csv"));
    EXPECT_EQ(res.exit_code, 3);
    EXPECT_NE(slurp(path("stderr.txt")).find("symmetric"), std::string::npos);
}

TEST_F(CliTest, TablesThresholds) {
    auto res = run("tables --which thresholds --framework dzero -o " + path("t.csv"));
    ASSERT_EQ(res.exit_code, 0);
    const std::string text = slurp(path("t.csv"));
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "norm,threshold");
    double vals[3] = {0, 0, 0};
    char names[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i) {
        std::getline(in, line);
        std::sscanf(line.c_str(), "%c,%lf", &names[i], &vals[i]);
    }
    EXPECT_EQ(names[0], 'F');
    EXPECT_NEAR(vals[0], 2.3094010767585034, 1e-9);
    EXPECT_NEAR(vals[1], 2.1973682269394385, 1e-9);
    EXPECT_NEAR(vals[2], 2.6832815729997477, 1e-9);
}

TEST_F(CliTest, SimulateDeterministicOutputsAndAssertMode) {
    const std::string config = path("exp.json");
    {
        std::ofstream out(config);
        out << R"({
  "model": {"kind": "spiked_covariance", "n": 400, "p": 20, "spikes": [2.5],
            "seed": 11, "replicates": 6},
  "framework": "dzero",
  "rules": [{"kind": "rank_aware"}, {"kind": "optimal", "norm": "F"}],
  "losses": [{"norm": "F", "pivot": 1}],
  "assertions": [
    {"metric": "eigenvalue", "spike_index": 0, "expect": "theory", "tol": 0.6}
  ]
})";
    }
    auto res = run("simulate " + config + " --assert --out-prefix " + path("run1"));
    ASSERT_EQ(res.exit_code, 0) << slurp(path("stderr.txt"));
    res = run("simulate " + config + " --assert --out-prefix " + path("run2") + " --threads 2");
    ASSERT_EQ(res.exit_code, 0);
    for (const char* suffix : {"_report.json", "_replicates.csv", "_curves.csv"}) {
        EXPECT_EQ(slurp(path("run1") + suffix), slurp(path("run2") + suffix)) << suffix;
        EXPECT_FALSE(slurp(path("run1") + suffix).empty());
    }
    // Config input is untouched.
    EXPECT_FALSE(slurp(config).empty());
}

TEST_F(CliTest, ExitCodes) {
    // Usage error.
    EXPECT_EQ(run("shrink --no-such-flag").exit_code, 2);
    // Config schema errors, enumerated all at once.
    const std::string config = path("bad.json");
    {
        std::ofstream out(config);
        out << R"({"model": {"kind": "spiked_covariance", "n": 10, "p": 5, "bogus": 1},
                   "framework": "dzero", "extra": true})";
    }
    const auto res = run("simulate " + config);
    EXPECT_EQ(res.exit_code, 2);
    const std::string err = slurp(path("stderr.txt"));
    EXPECT_NE(err.find("bogus"), std::string::npos);
    EXPECT_NE(err.find("extra"), std::string::npos);

    // Numeric/domain error: singular matrix under an inverse pivot... the
    // shrink command touches only pivot-1 paths, so use a parse error for 2
    // and an asymmetric wigner input for 3 (covered elsewhere). Here: data
    // file with a non-numeric field.
    {
        std::ofstream out(path("bad.csv"));
        out << "1.0,2.0\n3.0,oops\n";
    }
    const auto parse = run("shrink " + path("bad.csv") + " --gamma 0.5");
    EXPECT_EQ(parse.exit_code, 2);
    EXPECT_NE(slurp(path("stderr.txt")).find("line 2"), std::string::npos);

    // Assertion failure.
    const std::string assert_config = path("assert.json");
    {
        std::ofstream out(assert_config);
        out << R"({
  "model": {"kind": "spiked_covariance", "n": 200, "p": 10, "spikes": [2.0],
            "seed": 3, "replicates": 3},
  "framework": "dzero",
  "assertions": [{"metric": "eigenvalue", "expect": -50.0, "tol": 0.001}]
})";
    }
    EXPECT_EQ(run("simulate " + assert_config + " --assert --out-prefix " + path("a")).exit_code,
              4);
}

TEST_F(CliTest, HeaderFlagSkipsOneLine) {
    {
        std::ofstream out(path("h.csv"));
        out << "a,b\n1.0,0.0\n0.0,1.0\n";
    }
    const auto res =
        run("shrink " + path("h.csv") + " --header --rule identity --gamma 1 -o " + path("o.csv"));
    ASSERT_EQ(res.exit_code, 0) << slurp(path("stderr.txt"));
    const MatrixXd out = ss::read_csv_matrix(path("o.csv"));
    EXPECT_LT((out - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST_F(CliTest, BundledConfigRuns) {
    const std::string config = std::string(CONFIG_DIR) + "/dzero_fig.json";
    ASSERT_TRUE(fs::exists(config)) << config;
    const auto res = run("simulate " + config + " --out-prefix " + path("fig"));
    ASSERT_EQ(res.exit_code, 0) << slurp(path("stderr.txt"));
    const std::string curves = slurp(path("fig") + "_curves.csv");
    EXPECT_NE(curves.find("spike,rule,norm,mean_loss,stderr,theory_loss"), std::string::npos);
    EXPECT_NE(curves.find("optimal_F"), std::string::npos);
}
