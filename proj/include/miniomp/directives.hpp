#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "miniomp/ast.hpp"
#include "miniomp/diagnostics.hpp"

namespace miniomp {

enum class DirectiveKind { Parallel, For, ParallelFor };
enum class ReductionOp { Add, Mul, Min, Max };
enum class ScheduleKind { Static, Dynamic, Guided };

std::string_view to_string(DirectiveKind k);
std::string_view to_string(ReductionOp op);  // "+", "*", "min", "max"
std::string_view to_string(ScheduleKind k);

struct SharedClause {
  std::vector<std::string> names;
  auto operator<=>(const SharedClause&) const = default;
};
struct PrivateClause {
  std::vector<std::string> names;
  auto operator<=>(const PrivateClause&) const = default;
};
struct FirstprivateClause {
  std::vector<std::string> names;
  auto operator<=>(const FirstprivateClause&) const = default;
};
struct ReductionClause {
  ReductionOp op;
  std::vector<std::string> names;
  auto operator<=>(const ReductionClause&) const = default;
};
struct ScheduleClause {
  ScheduleKind kind;
  std::optional<std::int64_t> chunk;
  auto operator<=>(const ScheduleClause&) const = default;
};
struct NumThreadsClause {
  std::int64_t count;
  auto operator<=>(const NumThreadsClause&) const = default;
};

using Clause = std::variant<SharedClause, PrivateClause, FirstprivateClause, ReductionClause,
                            ScheduleClause, NumThreadsClause>;

struct Directive {
  DirectiveKind kind = DirectiveKind::Parallel;
  std::vector<Clause> clauses;
  SourcePos pos;

  const ScheduleClause* schedule() const;
  std::optional<std::int64_t> num_threads() const;

  /// Same kind and same clauses, ignoring clause order and position.
  friend bool operator==(const Directive& a, const Directive& b);
};

/// Parse the text that follows the "//#omp" sentinel:
///   ("parallel" ["for"] | "for") clause*
/// Clauses may be separated by whitespace or commas. `pos` is where the
/// directive comment starts; error positions are offset from it.
/// Throws CompileError(DirectiveSyntaxError); never crashes on arbitrary input.
Directive parse_directive(std::string_view raw, SourcePos pos = {});

/// Canonical text, e.g. "parallel for schedule(static, 4) reduction(+: s)".
std::string to_string(const Directive& d);

/// What the validator can see at the directive's site.
struct DirectiveSite {
  std::map<std::string, Type, std::less<>> visible;
  bool inside_parallel = false;     // lexically within a parallel region
  bool inside_worksharing = false;  // lexically within a worksharing loop body
};

struct CheckedDirective {
  Directive directive;
};

/// Cross-clause and target checks. Throws CompileError listing every problem
/// found for this directive.
CheckedDirective validate_directive(const Directive& d, const Stmt& target, const DirectiveSite& site);

/// Names bound by `d`'s data-sharing clauses, with the role that wins when
/// classifying captures.
enum class SharingRole { Shared, Private, Firstprivate, Reduction };
std::optional<SharingRole> sharing_role(const Directive& d, std::string_view name);
std::optional<ReductionOp> reduction_op(const Directive& d, std::string_view name);

}  // namespace miniomp
