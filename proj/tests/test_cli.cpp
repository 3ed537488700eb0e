#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using namespace unso;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir = fs::temp_directory_path() / ("unso_cli_" + std::string(
            ::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir);
        unsetenv("UNSO_SEED");
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    void write_matrix_file(const std::string& name, const Matrix& m) const
    {
        std::ofstream f(path(name));
        write_matrix(f, m);
    }

    fs::path dir;
};

std::size_t lines(const std::string& s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

} // namespace

TEST_F(Cli, UsageErrors)
{
    EXPECT_EQ(run({}).code, 64);
    EXPECT_EQ(run({"bogus"}).code, 64);
    EXPECT_EQ(run({"train"}).code, 64);
    EXPECT_EQ(run({"ortho", "--in", "x"}).code, 64);
    EXPECT_EQ(run({"flops", "--shape", "12by3"}).code, 64);
    EXPECT_EQ(run({"flops", "--method", "nope"}).code, 64);
    EXPECT_EQ(run({"train", "--out", path("c.txt"), "--b-rule", "nope"}).code, 64);
    EXPECT_EQ(run({"train", "--out", path("c.txt"), "--lr", "-1"}).code, 64);
    const auto help = run({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("bench"), std::string::npos);
}

TEST_F(Cli, TrainDefaultsReproduceShippedFile)
{
    const auto r = run({"train", "--out", path("c.txt")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(slurp(path("c.txt")), slurp(cli::default_coeffs_path()));
    const auto loss = slurp(path("c.txt") + ".loss.csv");
    EXPECT_EQ(loss.rfind("step,lr,loss\n0,0.1,", 0), 0u);
    EXPECT_EQ(lines(loss), 20001u);
    std::ifstream in(path("c.txt"));
    const auto c = read_coefficients(in);
    EXPECT_EQ(c.order, 14);
    EXPECT_EQ(c.a.size(), 13u);
}

TEST_F(Cli, ShippedStepFilesReproduce)
{
    ASSERT_EQ(run({"train", "--cesista", "5", "--out", path("c.txt"), "--loss-out", "none"}).code, 0);
    EXPECT_EQ(slurp(path("c.txt")), slurp(cli::default_cesista_path()));
    ASSERT_EQ(run({"train", "--cesista", "5", "--sample-low", "0.001", "--expand", "--out", path("s.txt"),
                   "--loss-out", "none"})
                  .code,
              0);
    EXPECT_EQ(slurp(path("s.txt")), slurp(cli::default_schedule_path()));
}

TEST_F(Cli, TrainZeroEpochsAndDeterminism)
{
    ASSERT_EQ(run({"train", "--epochs", "0", "--out", "-", "--loss-out", "none"}).out,
              "14 alg1-abs\n1\n1\n1\n1\n1\n1\n1\n1\n1\n1\n1\n1\n1\n");
    const std::vector<std::string> args{"train", "--n", "6", "--epochs", "300", "--out", "-", "--loss-out", "none"};
    EXPECT_EQ(run(args).out, run(args).out);
    setenv("UNSO_SEED", "7", 1);
    const auto env = run(args).out;
    unsetenv("UNSO_SEED");
    auto seeded = args;
    seeded.insert(seeded.end(), {"--seed", "7"});
    EXPECT_EQ(env, run(seeded).out);
    EXPECT_NE(env, run(args).out);
}

TEST_F(Cli, OrthoIdentity)
{
    write_matrix_file("i.txt", Matrix::identity(4));
    const auto r = run({"ortho", "--in", path("i.txt"), "--out", "-"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    const auto y = read_matrix(in);
    std::ifstream cf(cli::default_coeffs_path());
    const double f = eval_f(read_coefficients(cf), 1.0 / std::sqrt(2.0));
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_NEAR(y(i, i), f, 1e-14);
    EXPECT_NE(r.err.find("error="), std::string::npos);
}

TEST_F(Cli, OrthoTallShapeAndMuonFlops)
{
    write_matrix_file("t.txt", gaussian_matrix(512, 128, 0));
    ASSERT_EQ(run({"ortho", "--in", path("t.txt"), "--out", path("y.txt")}).code, 0);
    std::ifstream in(path("y.txt"));
    const auto y = read_matrix(in);
    EXPECT_EQ(y.rows(), 512u);
    EXPECT_EQ(y.cols(), 128u);

    write_matrix_file("s.txt", gaussian_matrix(128, 128, 0));
    const auto r = run({"ortho", "--in", path("s.txt"), "--out", path("z.txt"), "--method", "muon", "--iters", "5"});
    ASSERT_EQ(r.code, 0);
    const auto pos = r.err.find("flops=");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_NEAR(std::stod(r.err.substr(pos + 6)), 6.332e7, 0.02 * 6.332e7);
}

TEST_F(Cli, OrthoFailureCodes)
{
    EXPECT_EQ(run({"ortho", "--in", path("missing.txt"), "--out", "-"}).code, 66);
    { std::ofstream(path("bad.txt")) << "2 2\n1 2 3\n"; }
    EXPECT_EQ(run({"ortho", "--in", path("bad.txt"), "--out", "-"}).code, 65);
    write_matrix_file("z.txt", Matrix(3, 3));
    EXPECT_EQ(run({"ortho", "--in", path("z.txt"), "--out", "-"}).code, 2);
    write_matrix_file("ok.txt", Matrix::identity(2));
    EXPECT_EQ(run({"ortho", "--in", path("ok.txt"), "--out", path("no/such/dir/y.txt")}).code, 73);
    EXPECT_EQ(run({"ortho", "--in", path("ok.txt"), "--out", "-", "--coeffs", path("missing.txt")}).code, 66);
}

TEST_F(Cli, CurveGrid)
{
    const auto r = run({"curve", "--methods", "unso:" + cli::default_coeffs_path() + ",muon"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(r.out), 2001u);
    EXPECT_EQ(r.out.rfind("x,unso,muon_ns\n", 0), 0u);

    const auto t = run({"curve", "--terms", "5", "--grid", "50", "--extremes-out", path("e.csv")});
    ASSERT_EQ(t.code, 0);
    EXPECT_EQ(lines(t.out), 51u);
    EXPECT_EQ(lines(slurp(path("e.csv"))), 6u);
}

TEST_F(Cli, FlopsMeasuredEqualsAnalytic)
{
    for (const char* m : {"unso", "original", "muon", "cesista", "schedule"}) {
        const auto r = run({"flops", "--method", m, "--shape", "16x48"});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto row = r.out.substr(r.out.find('\n') + 1);
        std::vector<std::string> cells;
        std::stringstream ss(row);
        for (std::string c; std::getline(ss, c, ',');)
            cells.push_back(c);
        ASSERT_GE(cells.size(), 5u);
        EXPECT_EQ(cells[3], cells[4]) << m;
    }
    const auto u = run({"flops", "--method", "unso", "--shape", "128x512", "--n", "14"});
    EXPECT_NE(u.out.find(",2\n"), std::string::npos) << u.out;
}

TEST_F(Cli, BenchSmallAndDeterministic)
{
    const std::vector<std::string> args{"bench", "--shapes", "8x8,8x16", "--seeds", "2"};
    const auto a = run(args);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(lines(a.out), 11u);
    EXPECT_EQ(a.out, run(args).out);
    EXPECT_EQ(run({"bench", "--shapes", "8x8", "--methods", "unso:" + path("missing")}).code, 66);
}

TEST_F(Cli, BenchDefaultSuiteHas15Rows)
{
    const auto r = run({"bench", "--seeds", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(r.out), 16u);
}
