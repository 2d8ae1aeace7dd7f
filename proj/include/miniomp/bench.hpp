#pragma once

// Kernel benchmark harness: run a bundled MK kernel at several team sizes,
// verify every run against the single-thread result, and report medians and
// speedups.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace miniomp::bench {

enum class SizeClass { S, W };

std::string_view to_string(SizeClass c);
std::optional<SizeClass> parse_size_class(std::string_view s);

/// How one printed key of a kernel is checked.
struct Rule {
  enum class Kind {
    Exact,     // text identical to the T=1 run
    Relative,  // |v - base| <= tolerance * |base|
    Below,     // v < tolerance, independent of the baseline
    Equals,    // text identical to `expected`
  };
  std::string key;
  Kind kind = Kind::Exact;
  double tolerance = 0.0;
  std::string expected;
};

struct KernelSpec {
  std::string name;
  std::filesystem::path source;
  SizeClass size = SizeClass::S;
  /// Registered as zero-argument native externs returning the value.
  std::map<std::string, std::int64_t> params;
  /// Keys without a rule must match the T=1 run exactly.
  std::vector<Rule> rules;
};

std::vector<std::string> kernel_names();

/// Bundled kernel `name` at class `c`. Throws std::invalid_argument for an
/// unknown name.
KernelSpec kernel_spec(std::string_view name, SizeClass c);

/// Printed "key value" lines of one run, keyed by everything before the
/// last space.
using KernelValues = std::map<std::string, std::string, std::less<>>;

struct KernelRun {
  KernelValues values;
  double seconds = 0.0;  // time inside parallel regions
};

/// Parse, lower and run the kernel once with `threads` as the team size.
KernelRun run_kernel(const KernelSpec& spec, int threads);

/// Empty if `run` passes the kernel's rules against `baseline`, else a reason.
std::optional<std::string> check_run(const KernelSpec& spec, const KernelValues& baseline, const KernelValues& run);

class VerificationFailed : public std::runtime_error {
public:
  VerificationFailed(std::string kernel, int threads, int repetition, const std::string& reason);

  const std::string& kernel() const { return kernel_; }
  int threads() const { return threads_; }
  int repetition() const { return repetition_; }

private:
  std::string kernel_;
  int threads_;
  int repetition_;
};

class BaselineMissing : public std::invalid_argument {
public:
  BaselineMissing() : std::invalid_argument("thread list must include 1 (the speedup baseline)") {}
};

struct Sample {
  int threads = 1;
  int repetition = 0;
  double seconds = 0.0;
};

struct BenchReport {
  std::string kernel;
  SizeClass size = SizeClass::S;
  std::vector<Sample> samples;
  std::map<int, double> medians;
  std::map<int, double> speedups;
  unsigned hardware_threads = 1;
};

double median(std::vector<double> xs);

/// Fill medians and speedups from samples. speedup(1) is exactly 1.0.
void summarize(BenchReport& r);

/// Runs every thread count `repeats` times (the 1-thread runs first) and
/// checks each run against the first 1-thread run.
BenchReport run_bench(const KernelSpec& kernel, const std::vector<int>& threads, int repeats = 5);

struct SpeedupRow {
  int threads;
  double median_seconds;
  double speedup;
};

/// Rows sorted by thread count.
std::vector<SpeedupRow> speedup_table(const BenchReport& r);

std::string format_table(const BenchReport& r);
std::string format_csv(const BenchReport& r);
std::string format_json(const BenchReport& r);

}  // namespace miniomp::bench
