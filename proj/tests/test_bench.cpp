#include <gtest/gtest.h>

#include <json.hpp>
#include <regex>
#include <sstream>

#include "corpus.hpp"
#include "miniomp/bench.hpp"

using namespace miniomp;
using namespace miniomp::bench;

namespace {

BenchReport report_with_medians(const std::map<int, double>& medians) {
  BenchReport r;
  r.kernel = "synthetic";
  for (const auto& [t, m] : medians) r.samples.push_back({t, 0, m});
  summarize(r);
  return r;
}

KernelSpec data_kernel(const std::string& file, std::vector<Rule> rules = {}) {
  KernelSpec k;
  k.name = file;
  k.source = testsupport::test_dir() / "data" / (file + ".mk");
  k.params = {{"key_count", 1000}};
  k.rules = std::move(rules);
  return k;
}

}  // namespace

TEST(SpeedupTable, FourThreads) {
  auto rows = speedup_table(report_with_medians({{1, 8.0}, {4, 2.0}}));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].threads, 4);
  EXPECT_EQ(rows[1].median_seconds, 2.0);
  EXPECT_EQ(rows[1].speedup, 4.0);
}

TEST(SpeedupTable, BaselineOnly) {
  auto rows = speedup_table(report_with_medians({{1, 5.0}}));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].threads, 1);
  EXPECT_EQ(rows[0].median_seconds, 5.0);
  EXPECT_EQ(rows[0].speedup, 1.0);
}

TEST(SpeedupTable, NoGain) {
  auto rows = speedup_table(report_with_medians({{1, 3.0}, {2, 3.0}}));
  EXPECT_EQ(rows[1].threads, 2);
  EXPECT_EQ(rows[1].speedup, 1.0);
}

TEST(SpeedupTable, SortedByThreads) {
  BenchReport r;
  r.samples = {{8, 0, 1.0}, {1, 0, 4.0}, {2, 0, 2.0}};
  summarize(r);
  auto rows = speedup_table(r);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].threads, 1);
  EXPECT_EQ(rows[1].threads, 2);
  EXPECT_EQ(rows[2].threads, 8);
}

TEST(Summary, MedianOfRepeats) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_EQ(median({7.0}), 7.0);
  BenchReport r;
  r.samples = {{1, 0, 0.3}, {1, 1, 0.1}, {1, 2, 0.7}, {2, 0, 0.05}, {2, 1, 0.15}, {2, 2, 9.0}};
  summarize(r);
  EXPECT_EQ(r.medians.at(1), 0.3);
  EXPECT_EQ(r.medians.at(2), 0.15);
  EXPECT_EQ(r.speedups.at(1), 1.0);
  EXPECT_DOUBLE_EQ(r.speedups.at(2), 2.0);
}

TEST(Kernels, SpecsAndClasses) {
  EXPECT_EQ(kernel_names(), (std::vector<std::string>{"mandelbrot", "ep", "is", "cg"}));
  EXPECT_EQ(parse_size_class("S"), SizeClass::S);
  EXPECT_EQ(parse_size_class("W"), SizeClass::W);
  EXPECT_EQ(parse_size_class("C"), std::nullopt);
  EXPECT_THROW(kernel_spec("bt", SizeClass::S), std::invalid_argument);
  for (const auto& name : kernel_names()) {
    KernelSpec s = kernel_spec(name, SizeClass::S);
    EXPECT_TRUE(std::filesystem::exists(s.source)) << s.source;
  }
  EXPECT_EQ(kernel_spec("mandelbrot", SizeClass::S).params.at("grid_size"), 512);
  EXPECT_EQ(kernel_spec("mandelbrot", SizeClass::S).params.at("max_iter"), 1000);
  EXPECT_EQ(kernel_spec("ep", SizeClass::S).params.at("pair_count"), 1 << 20);
  EXPECT_EQ(kernel_spec("is", SizeClass::S).params.at("key_count"), 1 << 20);
  EXPECT_EQ(kernel_spec("is", SizeClass::S).params.at("bucket_count"), 1 << 10);
  EXPECT_EQ(kernel_spec("cg", SizeClass::S).params.at("order"), 1 << 12);
  EXPECT_EQ(kernel_spec("cg", SizeClass::S).params.at("cg_iterations"), 25);
  EXPECT_EQ(kernel_spec("ep", SizeClass::W).params.at("pair_count"), 1 << 22);
  EXPECT_EQ(kernel_spec("cg", SizeClass::W).params.at("order"), 1 << 14);
}

TEST(CheckRun, Rules) {
  KernelSpec k;
  k.rules = {{"res", Rule::Kind::Below, 1e-8, ""},
             {"zeta", Rule::Kind::Relative, 1e-10, ""},
             {"sorted", Rule::Kind::Equals, 0.0, "1"}};
  const KernelValues base = {{"res", "1e-12"}, {"zeta", "100.0"}, {"sorted", "1"}, {"count", "42"}};
  EXPECT_FALSE(check_run(k, base, base));
  auto with = [&](const std::string& key, const std::string& v) {
    KernelValues r = base;
    r[key] = v;
    return r;
  };
  EXPECT_FALSE(check_run(k, base, with("zeta", "100.000000001")));
  EXPECT_TRUE(check_run(k, base, with("zeta", "100.00000002")));
  EXPECT_FALSE(check_run(k, base, with("res", "9e-9")));
  EXPECT_TRUE(check_run(k, base, with("res", "2e-8")));
  EXPECT_TRUE(check_run(k, base, with("res", "nan")));
  EXPECT_TRUE(check_run(k, base, with("sorted", "0")));
  EXPECT_TRUE(check_run(k, base, with("count", "43")));
  KernelValues missing = base;
  missing.erase("count");
  EXPECT_TRUE(check_run(k, base, missing));
  KernelValues extra = base;
  extra["surprise"] = "1";
  EXPECT_TRUE(check_run(k, base, extra));
}

TEST(RunBench, MandelbrotBaselineOnly) {
  BenchReport r = run_bench(kernel_spec("mandelbrot", SizeClass::S), {1}, 3);
  EXPECT_EQ(r.samples.size(), 3u);
  EXPECT_EQ(r.speedups.at(1), 1.0);
  for (const auto& s : r.samples) EXPECT_GT(s.seconds, 0.0);
  EXPECT_GE(r.hardware_threads, 1u);
}

TEST(RunBench, EpOutputsIdenticalAcrossTeamSizes) {
  const KernelSpec spec = kernel_spec("ep", SizeClass::S);
  const KernelValues base = run_kernel(spec, 1).values;
  EXPECT_GT(base.size(), 3u);
  for (int t : {2, 4}) EXPECT_EQ(run_kernel(spec, t).values, base) << t;
  BenchReport r = run_bench(spec, {1, 2, 4}, 5);
  EXPECT_EQ(r.samples.size(), 15u);
  EXPECT_EQ(r.medians.size(), 3u);
}

TEST(RunBench, BaselineMissing) {
  EXPECT_THROW(run_bench(kernel_spec("ep", SizeClass::S), {2, 4}, 1), BaselineMissing);
}

TEST(RunBench, UnsortedOutputFailsVerification) {
  KernelSpec buggy = kernel_spec("is", SizeClass::S);
  buggy.source = testsupport::test_dir() / "data" / "unsorted_is.mk";
  buggy.params = {{"key_count", 5000}};
  try {
    run_bench(buggy, {1, 4}, 1);
    FAIL();
  } catch (const VerificationFailed& e) {
    EXPECT_EQ(e.kernel(), "is");
    EXPECT_EQ(e.threads(), 1);
    EXPECT_EQ(e.repetition(), 0);
    EXPECT_NE(std::string(e.what()).find("sorted"), std::string::npos);
  }
}

TEST(RunBench, TeamDependentOutputFailsAtFirstLargerTeam) {
  try {
    run_bench(data_kernel("team_dependent"), {1, 3, 2}, 2);
    FAIL();
  } catch (const VerificationFailed& e) {
    EXPECT_EQ(e.threads(), 3);
    EXPECT_EQ(e.repetition(), 0);
  }
}

TEST(Formats, Csv) {
  BenchReport r;
  r.kernel = "ep";
  r.samples = {{1, 0, 1.25}, {1, 1, 1.0}, {2, 0, 0.5}, {2, 1, 0.0000004}};
  summarize(r);
  EXPECT_EQ(format_csv(r),
            "kernel,class,threads,repetition,seconds\n"
            "ep,S,1,0,1.250000\n"
            "ep,S,1,1,1.000000\n"
            "ep,S,2,0,0.500000\n"
            "ep,S,2,1,0.000000\n");
}

TEST(Formats, Json) {
  BenchReport r;
  r.kernel = "cg";
  r.size = SizeClass::W;
  r.samples = {{1, 0, 2.0}, {4, 0, 0.5}};
  r.hardware_threads = 4;
  summarize(r);
  auto j = nlohmann::json::parse(format_json(r));
  EXPECT_EQ(j["kernel"], "cg");
  EXPECT_EQ(j["class"], "W");
  ASSERT_EQ(j["samples"].size(), 2u);
  EXPECT_EQ(j["samples"][1]["threads"], 4);
  EXPECT_EQ(j["samples"][1]["repetition"], 0);
  EXPECT_EQ(j["samples"][1]["seconds"], 0.5);
  EXPECT_EQ(j["medians"]["4"], 0.5);
  EXPECT_EQ(j["speedups"]["1"], 1.0);
  EXPECT_EQ(j["speedups"]["4"], 4.0);
}

TEST(Formats, Table) {
  BenchReport r;
  r.kernel = "mandelbrot";
  r.samples = {{1, 0, 8.0}, {4, 0, 2.0}};
  summarize(r);
  const std::string t = format_table(r);
  EXPECT_NE(t.find("mandelbrot"), std::string::npos);
  EXPECT_TRUE(std::regex_search(t, std::regex(R"(\n\s*4\s+2\.0+\s+4\.00)"))) << t;
}
