#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pneumo_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd =
      std::string("\"") + PNEUMO_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(out);
  o.err = slurp(err);
  return o;
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, MissingConfigPrintsUsageAndExitsTwo) {
  const fs::path dir = work_dir("usage");
  const Outcome o = run_cli("", dir);
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("config file or --benchmark is required"), std::string::npos) << o.err;
  EXPECT_NE(o.err.find("--fd-check"), std::string::npos);
}

TEST(Cli, UnknownOptionExitsTwo) {
  const fs::path dir = work_dir("badopt");
  EXPECT_EQ(run_cli("--no-such-flag", dir).code, 2);
}

TEST(Cli, FdCheckPasses) {
  const fs::path dir = work_dir("fd");
  const Outcome o = run_cli("--fd-check --fd-trials 3", dir);
  EXPECT_EQ(o.code, 0) << o.out << o.err;
  EXPECT_NE(o.out.find("fd-check: max relative error"), std::string::npos) << o.out;
}

TEST(Cli, SmallPresetRunWritesResults) {
  const fs::path dir = work_dir("run");
  const fs::path out = dir / "out";
  const Outcome o = run_cli("--benchmark gripper-2mat --nelx 20 --nely 10 --iterations 5 --print-every 1 --out \"" +
                                out.string() + "\"",
                            dir);
  ASSERT_EQ(o.code, 0) << o.out << o.err;
  EXPECT_NE(o.out.find("final u_out: eroded"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("it    5"), std::string::npos) << o.out;
  const std::string history = slurp(out / "history.csv");
  EXPECT_EQ(count_lines(history), 6);
  EXPECT_EQ(history.rfind("iteration,objective,", 0), 0u);
  EXPECT_EQ(count_lines(slurp(out / "timing.csv")), 6);
  for (const char* name : {"config.json", "summary.json", "design.vtk", "design_blueprint.csv", "design_eroded.csv",
                           "design_blueprint_rho1.pgm", "design_full.vtk", "design_full_blueprint_rho2.pgm"})
    EXPECT_TRUE(fs::exists(out / name)) << name;
  const std::string summary = slurp(out / "summary.json");
  EXPECT_NE(summary.find("\"reported_iteration\""), std::string::npos);
  EXPECT_NE(summary.find("\"se_star\""), std::string::npos);
}

TEST(Cli, ResolvedConfigReproducesHistory) {
  const fs::path dir = work_dir("repeat");
  const fs::path a = dir / "a", b = dir / "b";
  ASSERT_EQ(run_cli("--benchmark contractor-2mat --nelx 12 --nely 12 --iterations 4 --export none --out \"" +
                        a.string() + "\"",
                    dir)
                .code,
            0);
  ASSERT_EQ(run_cli("\"" + (a / "config.json").string() + "\" --export none --out \"" + b.string() + "\"", dir).code, 0);
  EXPECT_EQ(slurp(a / "history.csv"), slurp(b / "history.csv"));
  EXPECT_FALSE(fs::exists(a / "design.vtk"));
}

TEST(Cli, BadConfigExitsTwoNamingTheKey) {
  const fs::path dir = work_dir("badcfg");
  std::ofstream(dir / "bad.json") << R"({"schema_version": 1, "nelx": 20, "volume_fraction": 0.3})";
  const Outcome o = run_cli("\"" + (dir / "bad.json").string() + "\"", dir);
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("'volume_fraction'"), std::string::npos) << o.err;

  const Outcome missing = run_cli("\"" + (dir / "nope.json").string() + "\"", dir);
  EXPECT_EQ(missing.code, 2);
}

TEST(Cli, UnknownPresetAndFormatExitTwo) {
  const fs::path dir = work_dir("badpreset");
  EXPECT_EQ(run_cli("--benchmark inverter", dir).code, 2);
  EXPECT_EQ(run_cli("--benchmark gripper-2mat --nelx 10 --nely 5 --iterations 1 --export png --out \"" +
                        (dir / "o").string() + "\"",
                    dir)
                .code,
            2);
}
