#include "miniomp/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "miniomp/exec.hpp"
#include "miniomp/frontend.hpp"
#include "miniomp/runtime.hpp"
#include "miniomp/transform.hpp"

namespace miniomp::bench {

std::string_view to_string(SizeClass c) { return c == SizeClass::S ? "S" : "W"; }

std::optional<SizeClass> parse_size_class(std::string_view s) {
  if (s == "S") return SizeClass::S;
  if (s == "W") return SizeClass::W;
  return std::nullopt;
}

std::vector<std::string> kernel_names() { return {"mandelbrot", "ep", "is", "cg"}; }

KernelSpec kernel_spec(std::string_view name, SizeClass c) {
  const std::int64_t w = c == SizeClass::W ? 4 : 1;
  KernelSpec k;
  k.name = std::string(name);
  k.size = c;
  k.source = std::filesystem::path(MINIOMP_KERNEL_DIR) / (k.name + ".mk");
  if (name == "mandelbrot") {
    // W quadruples the pixel count.
    k.params = {{"grid_size", c == SizeClass::W ? 1024 : 512}, {"max_iter", 1000}};
  } else if (name == "ep") {
    k.params = {{"pair_count", w << 20}};
  } else if (name == "is") {
    k.params = {{"key_count", w << 20}, {"bucket_count", 1 << 10}, {"key_range", 1 << 16}};
    k.rules = {{"sorted", Rule::Kind::Equals, 0.0, "1"}, {"permutation", Rule::Kind::Equals, 0.0, "1"}};
  } else if (name == "cg") {
    k.params = {{"order", w << 12}, {"cg_iterations", 25}};
    k.rules = {{"residual", Rule::Kind::Below, 1e-8, ""}, {"zeta", Rule::Kind::Relative, 1e-10, ""}};
  } else {
    throw std::invalid_argument("unknown kernel '" + k.name + "'");
  }
  return k;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read kernel source " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

KernelValues parse_values(const std::string& printed) {
  KernelValues out;
  std::istringstream in(printed);
  std::string line;
  while (std::getline(in, line)) {
    const auto sp = line.rfind(' ');
    if (sp == std::string::npos) continue;
    out[line.substr(0, sp)] = line.substr(sp + 1);
  }
  return out;
}

std::optional<double> to_number(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') return std::nullopt;
  return v;
}

KernelRun run_lowered_kernel(const KernelSpec& spec, const LoweredProgram& lowered, int threads) {
  ExternRegistry externs = ExternRegistry::with_demo_externs();
  for (const auto& [key, value] : spec.params) {
    externs.add(key, 0, [v = value](std::span<const Value>) -> Value { return v; });
  }
  RunConfig cfg;
  cfg.threads = threads;
  cfg.externs = &externs;
  ProgramOutput out = run_lowered(lowered, cfg);
  return KernelRun{parse_values(out.printed), out.region_seconds};
}

}  // namespace

KernelRun run_kernel(const KernelSpec& spec, int threads) {
  return run_lowered_kernel(spec, lower_program(load_program(read_file(spec.source))), threads);
}

std::optional<std::string> check_run(const KernelSpec& spec, const KernelValues& baseline, const KernelValues& run) {
  auto rule_for = [&](const std::string& key) -> const Rule* {
    for (const auto& r : spec.rules) {
      if (r.key == key) return &r;
    }
    return nullptr;
  };
  for (const auto& r : spec.rules) {
    if (!run.contains(r.key)) return "missing output key '" + r.key + "'";
  }
  for (const auto& [key, base] : baseline) {
    if (!run.contains(key)) return "missing output key '" + key + "'";
  }
  for (const auto& [key, text] : run) {
    const Rule* r = rule_for(key);
    auto base_it = baseline.find(key);
    if (!r || r->kind == Rule::Kind::Exact) {
      if (base_it == baseline.end()) return "unexpected output key '" + key + "'";
      if (text != base_it->second) return key + " = " + text + ", single-thread run gave " + base_it->second;
      continue;
    }
    switch (r->kind) {
      case Rule::Kind::Equals:
        if (text != r->expected) return key + " = " + text + ", expected " + r->expected;
        break;
      case Rule::Kind::Below: {
        auto v = to_number(text);
        if (!v || !(*v < r->tolerance)) return key + " = " + text + " is not below " + format_float(r->tolerance);
        break;
      }
      case Rule::Kind::Relative: {
        if (base_it == baseline.end()) return "unexpected output key '" + key + "'";
        auto v = to_number(text);
        auto b = to_number(base_it->second);
        if (!v || !b || !(std::fabs(*v - *b) <= r->tolerance * std::fabs(*b))) {
          return key + " = " + text + " differs from single-thread " + base_it->second + " beyond relative " +
                 format_float(r->tolerance);
        }
        break;
      }
      case Rule::Kind::Exact: break;
    }
  }
  return std::nullopt;
}

VerificationFailed::VerificationFailed(std::string kernel, int threads, int repetition, const std::string& reason)
    : std::runtime_error("verification failed for " + kernel + " at " + std::to_string(threads) +
                         " threads, repetition " + std::to_string(repetition) + ": " + reason),
      kernel_(std::move(kernel)), threads_(threads), repetition_(repetition) {}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
}

void summarize(BenchReport& r) {
  std::map<int, std::vector<double>> by_threads;
  for (const auto& s : r.samples) by_threads[s.threads].push_back(s.seconds);
  r.medians.clear();
  r.speedups.clear();
  for (auto& [t, xs] : by_threads) r.medians[t] = median(xs);
  auto base = r.medians.find(1);
  if (base == r.medians.end()) return;
  for (const auto& [t, m] : r.medians) r.speedups[t] = t == 1 ? 1.0 : base->second / m;
}

BenchReport run_bench(const KernelSpec& kernel, const std::vector<int>& threads, int repeats) {
  if (std::find(threads.begin(), threads.end(), 1) == threads.end()) throw BaselineMissing();
  if (repeats < 1) throw std::invalid_argument("repeats must be at least 1");
  for (int t : threads) {
    if (t < 1) throw std::invalid_argument("thread counts must be positive");
  }

  const LoweredProgram lowered = lower_program(load_program(read_file(kernel.source)));
  BenchReport report;
  report.kernel = kernel.name;
  report.size = kernel.size;
  report.hardware_threads = runtime::hardware_threads();

  std::vector<int> order{1};
  for (int t : threads) {
    if (std::find(order.begin(), order.end(), t) == order.end()) order.push_back(t);
  }

  std::optional<KernelValues> baseline;
  for (int t : order) {
    for (int rep = 0; rep < repeats; ++rep) {
      KernelRun run = run_lowered_kernel(kernel, lowered, t);
      if (!baseline) baseline = run.values;
      if (auto why = check_run(kernel, *baseline, run.values)) throw VerificationFailed(kernel.name, t, rep, *why);
      report.samples.push_back(Sample{t, rep, run.seconds});
    }
  }
  summarize(report);
  return report;
}

std::vector<SpeedupRow> speedup_table(const BenchReport& r) {
  std::vector<SpeedupRow> rows;
  for (const auto& [t, m] : r.medians) {
    auto s = r.speedups.find(t);
    rows.push_back(SpeedupRow{t, m, s == r.speedups.end() ? 0.0 : s->second});
  }
  return rows;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::string format_table(const BenchReport& r) {
  std::ostringstream out;
  out << "kernel " << r.kernel << "  class " << to_string(r.size) << "  hardware threads " << r.hardware_threads
      << "  repeats " << (r.medians.empty() ? 0 : r.samples.size() / r.medians.size()) << "\n";
  char line[128];
  std::snprintf(line, sizeof line, "%8s  %14s  %8s\n", "threads", "median (s)", "speedup");
  out << line;
  for (const auto& row : speedup_table(r)) {
    std::snprintf(line, sizeof line, "%8d  %14.6f  %8.3f\n", row.threads, row.median_seconds, row.speedup);
    out << line;
  }
  return out.str();
}

std::string format_csv(const BenchReport& r) {
  std::string out = "kernel,class,threads,repetition,seconds\n";
  for (const auto& s : r.samples) {
    out += r.kernel + "," + std::string(to_string(r.size)) + "," + std::to_string(s.threads) + "," +
           std::to_string(s.repetition) + "," + fixed(s.seconds, 6) + "\n";
  }
  return out;
}

std::string format_json(const BenchReport& r) {
  nlohmann::ordered_json j;
  j["kernel"] = r.kernel;
  j["class"] = std::string(to_string(r.size));
  j["hardware_threads"] = r.hardware_threads;
  auto& samples = j["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : r.samples) {
    samples.push_back({{"kernel", r.kernel},
                       {"class", std::string(to_string(r.size))},
                       {"threads", s.threads},
                       {"repetition", s.repetition},
                       {"seconds", s.seconds}});
  }
  auto& medians = j["medians"] = nlohmann::ordered_json::object();
  for (const auto& [t, m] : r.medians) medians[std::to_string(t)] = m;
  auto& speedups = j["speedups"] = nlohmann::ordered_json::object();
  for (const auto& [t, s] : r.speedups) speedups[std::to_string(t)] = s;
  return j.dump(2) + "\n";
}

}  // namespace miniomp::bench
