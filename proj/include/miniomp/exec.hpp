#pragma once

// Execution engine for lowered MK programs. Host code runs on the calling
// thread; each ForkStmt hands its region to runtime::fork_call.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "miniomp/ast.hpp"
#include "miniomp/transform.hpp"

namespace miniomp {

/// Backing store of an MK array. Elements are 64-bit words (floats stored by
/// bit pattern) accessed through relaxed atomic refs, so racing members see
/// indeterminate but never torn values.
class ArrayStorage {
public:
  ArrayStorage(Type element, std::int64_t length);

  Type element_type() const { return element_; }
  std::int64_t length() const { return length_; }

  /// Bounds-checked element access; Trap(OutOfBounds) on a bad index.
  std::int64_t load_word(std::int64_t i, SourcePos pos = {}) const;
  void store_word(std::int64_t i, std::int64_t w, SourcePos pos = {});

  std::int64_t get_int(std::int64_t i) const { return load_word(i); }
  double get_float(std::int64_t i) const;
  void set_int(std::int64_t i, std::int64_t v) { store_word(i, v); }
  void set_float(std::int64_t i, double v);

  std::int64_t* words() { return words_.get(); }

private:
  void check(std::int64_t i, SourcePos pos) const;

  Type element_;
  std::int64_t length_;
  std::unique_ptr<std::int64_t[]> words_;
};

using ArrayHandle = std::shared_ptr<ArrayStorage>;

/// Runtime value as seen by extern callbacks. Arrays are passed by handle;
/// writes through it are visible to the program.
using Value = std::variant<std::monostate, std::int64_t, double, bool, ArrayHandle>;

/// Symbol an extern resolves to: fortran appends "_", native is unchanged.
std::string bind_extern(std::string_view name, ExternAbi abi);

using ExternCallback = std::function<Value(std::span<const Value> args)>;

/// Host callbacks looked up by resolved symbol. Callbacks may be invoked
/// concurrently from several team members and must be safe for that.
class ExternRegistry {
public:
  struct Entry {
    std::size_t arity;
    ExternCallback callback;
  };

  void add(std::string symbol, std::size_t arity, ExternCallback callback);
  const Entry* find(std::string_view symbol) const;

  /// Registry holding "dcopy_" (n, src, dst: copy n elements) and "wtime_"
  /// (wall-clock seconds).
  static ExternRegistry with_demo_externs();

private:
  std::map<std::string, Entry, std::less<>> entries_;
};

struct RunConfig {
  std::optional<int> threads;  // --threads override; num_threads clauses still win
  bool serialize = false;      // force every team to one member
  const ExternRegistry* externs = nullptr;
  std::ostream* stream = nullptr;  // completed print lines are also written here
  bool echo_warnings = false;      // copy runtime warnings to stderr
};

struct ProgramOutput {
  std::string printed;
  int exit_status = 0;
  std::vector<std::string> warnings;
  /// Wall-clock seconds spent inside host-level fork calls.
  double region_seconds = 0.0;
};

/// Execute `main`. Throws Trap (including UnresolvedExtern) on runtime faults;
/// lines printed before the fault have already reached config.stream.
ProgramOutput run_lowered(const LoweredProgram& p, const RunConfig& config = {});

/// load_program + lower_program + run_lowered.
ProgramOutput run_source(std::string_view source, const RunConfig& config = {});

// Builtin helpers, exposed for tests and the reference interpreter.
std::int64_t split_seed(std::int64_t i);
double rand_uniform(std::int64_t seed);

}  // namespace miniomp
