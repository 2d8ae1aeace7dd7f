#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "corpus.hpp"
#include "miniomp/cli.hpp"
#include "miniomp/frontend.hpp"

using namespace miniomp;

namespace {

struct CliResult {
  int status;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int status = execute_cli(args, out, err);
  return {status, out.str(), err.str()};
}

class TempDir {
public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("miniomp_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name, std::ios::binary) << text;
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

std::string sample(const char* name) { return (testsupport::test_dir().parent_path() / "samples" / name).string(); }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Cli, RunHello) {
  auto r = cli({"run", sample("hello.mk"), "--threads", "2"});
  EXPECT_EQ(r.status, kExitOk) << r.err;
  EXPECT_EQ(r.out, "hello from mini-omp\nteam members 2\n");
  EXPECT_EQ(r.err, "");
}

TEST(Cli, CheckReportsConflictingSharing) {
  TempDir dir;
  auto bad = dir.write("bad.mk",
                       "fn main() {\n  var x: int = 0;\n  //#omp parallel private(x) shared(x)\n  { x = 1; }\n}\n");
  auto r = cli({"check", bad});
  EXPECT_EQ(r.status, kExitDiagnostics);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(count_lines(r.err), 1u);
  EXPECT_EQ(r.err.rfind(bad + ":3:3: error: ConflictingSharing:", 0), 0u) << r.err;
}

TEST(Cli, CheckReportsEveryDiagnostic) {
  TempDir dir;
  auto bad = dir.write("bad.mk",
                       "fn main() {\n  var x: int = 0;\n  //#omp parallel private(x) shared(x)\n  { x = 1; }\n"
                       "  //#omp for\n  for i in 0..2 { x = 2; }\n}\n");
  auto r = cli({"check", bad});
  EXPECT_EQ(r.status, kExitDiagnostics);
  EXPECT_EQ(count_lines(r.err), 2u) << r.err;
  EXPECT_NE(r.err.find(":5:3: error: OrphanedWorksharing:"), std::string::npos);
}

TEST(Cli, CheckNeverExecutes) {
  TempDir dir;
  auto file = dir.write("p.mk", "fn main() {\n  print(\"side effect\");\n  var a: [int; 1];\n  a[4] = 1;\n}\n");
  const auto before = std::filesystem::last_write_time(file);
  auto r = cli({"check", file});
  EXPECT_EQ(r.status, kExitOk);
  EXPECT_EQ(r.out, "");
  EXPECT_EQ(r.err, "");
  EXPECT_EQ(std::filesystem::last_write_time(file), before);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST(Cli, BenchCsv) {
  auto r = cli({"bench", "--kernel", "ep", "--class", "S", "--threads", "1,2,4", "--repeats", "5", "--format", "csv"});
  ASSERT_EQ(r.status, kExitOk) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "kernel,class,threads,repetition,seconds");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_TRUE(line.starts_with("ep,S,")) << line;
    const auto dot = line.rfind('.');
    ASSERT_NE(dot, std::string::npos);
    EXPECT_EQ(line.size() - dot - 1, 6u) << line;
  }
  EXPECT_EQ(rows, 15u);
}

TEST(Cli, BenchTableAndJson) {
  auto table = cli({"bench", "--kernel", "is", "--threads", "1,2", "--repeats", "1"});
  EXPECT_EQ(table.status, kExitOk) << table.err;
  EXPECT_NE(table.out.find("is"), std::string::npos);
  auto json = cli({"bench", "--kernel", "is", "--threads", "1", "--repeats", "1", "--format", "json"});
  EXPECT_EQ(json.status, kExitOk);
  EXPECT_EQ(json.out.front(), '{');
}

TEST(Cli, UsageErrors) {
  const std::vector<std::vector<std::string>> cases = {
      {},
      {"compile", "x.mk"},
      {"run"},
      {"run", sample("hello.mk"), "--threads", "0"},
      {"run", sample("hello.mk"), "--threads", "two"},
      {"run", "/nonexistent/file.mk"},
      {"bench"},
      {"bench", "--kernel", "bt"},
      {"bench", "--kernel", "ep", "--threads", "2,4"},
      {"bench", "--kernel", "ep", "--class", "C"},
      {"bench", "--kernel", "ep", "--format", "xml"},
      {"bench", "--kernel", "ep", "--repeats", "0"},
  };
  for (const auto& args : cases) {
    auto r = cli(args);
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    EXPECT_EQ(r.status, kExitUsage) << joined << "\n" << r.err;
    EXPECT_FALSE(r.err.empty()) << joined;
  }
}

TEST(Cli, HelpIsNotAnError) {
  auto r = cli({"--help"});
  EXPECT_EQ(r.status, kExitOk);
  EXPECT_NE(r.out.find("bench"), std::string::npos);
}

TEST(Cli, TrapExitStatus) {
  TempDir dir;
  auto file = dir.write("t.mk", "fn main() {\n  print(1);\n  var z: int = 0;\n  print(5 / z);\n}\n");
  auto r = cli({"run", file});
  EXPECT_EQ(r.status, kExitTrap);
  EXPECT_EQ(r.out, "1\n");
  EXPECT_EQ(r.err, file + ":4:11: runtime error: DivisionByZero: integer division by zero\n");
}

TEST(Cli, UnresolvedExternIsATrap) {
  TempDir dir;
  auto file = dir.write("e.mk", "extern fortran fn saxpy(n: int);\nfn main() {\n  saxpy(1);\n}\n");
  auto r = cli({"run", file});
  EXPECT_EQ(r.status, kExitTrap);
  EXPECT_NE(r.err.find("UnresolvedExtern"), std::string::npos);
  EXPECT_NE(r.err.find("saxpy_"), std::string::npos);
}

TEST(Cli, ParseErrorExitStatus) {
  TempDir dir;
  auto file = dir.write("p.mk", "fn main() {\n  var x: int = 1\n}\n");
  auto r = cli({"run", file});
  EXPECT_EQ(r.status, kExitDiagnostics);
  EXPECT_EQ(r.err, file + ":3:1: error: ParseError: expected ';', found '}'\n");
}

TEST(Cli, NestedRegionWarningGoesToStderr) {
  auto r = cli({"run", (testsupport::corpus_dir() / "nested.mk").string(), "--threads", "4"});
  EXPECT_EQ(r.status, kExitOk);
  EXPECT_EQ(r.out, "every member ran a team of one true\n");
  EXPECT_EQ(r.err, "miniomp: warning: nested parallel region serialized to a team of 1 thread\n");
}

TEST(Cli, DumpOmpMatchesGolden) {
  for (const auto& path : testsupport::corpus_files()) {
    auto r = cli({"dump-omp", path.string()});
    EXPECT_EQ(r.status, kExitOk);
    EXPECT_EQ(r.out, testsupport::read_file(testsupport::golden_dir() / (path.stem().string() + ".omp"))) << path;
  }
}

TEST(Cli, DumpAstReparses) {
  TempDir dir;
  for (const auto& path : testsupport::corpus_files()) {
    auto r = cli({"dump-ast", path.string()});
    ASSERT_EQ(r.status, kExitOk);
    auto again = cli({"dump-ast", dir.write("again.mk", r.out)});
    EXPECT_EQ(again.out, r.out) << path;
  }
}

TEST(Cli, ThreadsOneMatchesStrippedProgram) {
  TempDir dir;
  for (const auto& path : testsupport::corpus_files()) {
    auto parallel = cli({"run", path.string(), "--threads", "1"});
    const std::string stripped = pretty_print(strip_directives(load_program(testsupport::read_file(path))));
    auto serial = cli({"run", dir.write("stripped.mk", stripped)});
    EXPECT_EQ(parallel.status, kExitOk);
    EXPECT_EQ(parallel.out, serial.out) << path;
  }
}

TEST(Cli, EnvironmentThreadCount) {
  const std::string hello = sample("hello.mk");
  ::setenv("MINIOMP_NUM_THREADS", "3", 1);
  auto from_env = cli({"run", hello});
  auto from_flag = cli({"run", hello, "--threads", "2"});
  ::setenv("MINIOMP_NUM_THREADS", "garbage", 1);
  auto ignored = cli({"run", hello});
  ::unsetenv("MINIOMP_NUM_THREADS");
  EXPECT_EQ(from_env.out, "hello from mini-omp\nteam members 3\n");
  EXPECT_EQ(from_flag.out, "hello from mini-omp\nteam members 2\n");
  EXPECT_EQ(ignored.status, kExitOk);
}
