#include "miniomp/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "miniomp/bench.hpp"
#include "miniomp/exec.hpp"
#include "miniomp/frontend.hpp"
#include "miniomp/transform.hpp"

namespace miniomp {
namespace {

struct SourceOptions {
  std::string path;
  std::optional<int> threads;
};

struct BenchOptions {
  std::string kernel;
  std::string size = "S";
  std::vector<int> threads{1};
  int repeats = 5;
  std::string format = "table";
};

void report(std::ostream& err, const std::string& path, const CompileError& e) {
  for (const auto& d : e.diagnostics()) err << path << ":" << format_diagnostic(d) << "\n";
}

void report(std::ostream& err, const std::string& path, const Trap& t) {
  err << path << ":" << t.pos().line << ":" << t.pos().column << ": runtime error: " << to_string(t.kind()) << ": "
      << t.what() << "\n";
}

int run_source_command(const std::string& command, const SourceOptions& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(o.path, std::ios::binary);
  if (!in) {
    err << "mini-omp: cannot read " << o.path << "\n";
    return kExitUsage;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string source = ss.str();

  try {
    Program program = load_program(source);
    if (command == "dump-ast") {
      out << pretty_print(program);
      return kExitOk;
    }
    LoweredProgram lowered = lower_program(program);
    if (command == "check") return kExitOk;
    if (command == "dump-omp") {
      out << dump_omp(lowered);
      return kExitOk;
    }
    RunConfig cfg;
    cfg.threads = o.threads;
    cfg.stream = &out;
    cfg.echo_warnings = false;
    ProgramOutput result = run_lowered(lowered, cfg);
    for (const auto& w : result.warnings) err << w << "\n";
    return kExitOk;
  } catch (const CompileError& e) {
    report(err, o.path, e);
    return kExitDiagnostics;
  } catch (const Trap& t) {
    report(err, o.path, t);
    return kExitTrap;
  }
}

int run_bench_command(const BenchOptions& o, std::ostream& out, std::ostream& err) {
  auto size = bench::parse_size_class(o.size);
  if (!size) {
    err << "mini-omp: --class must be S or W\n";
    return kExitUsage;
  }
  const auto names = bench::kernel_names();
  if (std::find(names.begin(), names.end(), o.kernel) == names.end()) {
    err << "mini-omp: unknown kernel '" << o.kernel << "' (expected mandelbrot, ep, is or cg)\n";
    return kExitUsage;
  }
  if (std::find(o.threads.begin(), o.threads.end(), 1) == o.threads.end()) {
    err << "mini-omp: --threads must include 1 (the speedup baseline)\n";
    return kExitUsage;
  }
  const bench::KernelSpec spec = bench::kernel_spec(o.kernel, *size);
  try {
    bench::BenchReport r = bench::run_bench(spec, o.threads, o.repeats);
    if (o.format == "csv") out << bench::format_csv(r);
    else if (o.format == "json") out << bench::format_json(r);
    else out << bench::format_table(r);
    return kExitOk;
  } catch (const CompileError& e) {
    report(err, spec.source.string(), e);
    return kExitDiagnostics;
  } catch (const Trap& t) {
    report(err, spec.source.string(), t);
    return kExitTrap;
  } catch (const bench::VerificationFailed& e) {
    err << "mini-omp: " << e.what() << "\n";
    return kExitTrap;
  }
}

}  // namespace

int execute_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Directive-driven parallelizing compiler and runtime for MK kernels", "mini-omp"};
  app.require_subcommand(1);

  SourceOptions source;
  for (const char* name : {"run", "check", "dump-ast", "dump-omp"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("file", source.path, "MK source file")->required();
    sub->add_option("--threads", source.threads, "team size override")->check(CLI::PositiveNumber);
  }
  app.get_subcommand("run")->description("parse, lower and execute a program");
  app.get_subcommand("check")->description("report every diagnostic without executing");
  app.get_subcommand("dump-ast")->description("print the parsed program");
  app.get_subcommand("dump-omp")->description("print the outlined region table");

  BenchOptions bo;
  auto* bench_cmd = app.add_subcommand("bench", "time a bundled kernel across team sizes");
  bench_cmd->add_option("--kernel", bo.kernel, "mandelbrot, ep, is or cg")->required();
  bench_cmd->add_option("--class", bo.size, "size class S or W")->capture_default_str();
  bench_cmd->add_option("--threads", bo.threads, "comma-separated team sizes, must include 1")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--repeats", bo.repeats, "runs per team size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--format", bo.format, "table, csv or json")
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mini-omp: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  if (bench_cmd->parsed()) return run_bench_command(bo, out, err);
  for (auto* sub : app.get_subcommands()) return run_source_command(sub->get_name(), source, out, err);
  return kExitUsage;
}

}  // namespace miniomp
