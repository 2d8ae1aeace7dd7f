#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "miniomp/ast.hpp"
#include "miniomp/directives.hpp"

namespace miniomp {

enum class CaptureMode { SharedRef, PrivateZero, FirstprivateCopy, ReductionSlot };

std::string_view to_string(CaptureMode m);

/// One variable of a region's environment record.
struct Capture {
  std::string name;
  Type type = Type::Int;
  CaptureMode mode = CaptureMode::SharedRef;
  std::optional<ReductionOp> op;  // set iff mode == ReductionSlot
  int slot = 0;

  bool operator==(const Capture&) const = default;
};

/// Iteration space of a worksharing region. The bound expressions are
/// evaluated once by the forking thread, before any member starts.
struct WorkshareLoop {
  std::string var;
  ExprPtr lower;
  ExprPtr upper;
  ExprPtr step;  // null means 1
  ScheduleKind schedule = ScheduleKind::Static;
  std::optional<std::int64_t> chunk;
};

struct OutlinedRegion {
  int id = 0;
  DirectiveKind kind = DirectiveKind::Parallel;
  /// The extracted block (Parallel) or a WorkshareLoopStmt shell around the
  /// loop body (For / ParallelFor). Nested directives are already lowered.
  StmtPtr body;
  std::vector<Capture> captures;
  std::optional<WorkshareLoop> loop;
  std::optional<std::int64_t> num_threads;
  Directive directive;
  SourcePos pos;
};

/// Host program with every directive target replaced by a ForkStmt, plus the
/// region table indexed by region id.
struct LoweredProgram {
  Program host;
  std::vector<OutlinedRegion> regions;
};

/// Variables referenced by `body` but not declared inside it, in order of
/// first reference. `exclude` names are skipped (the loop variable).
std::vector<std::string> free_variables(const Stmt& body, const std::vector<std::string>& exclude = {});

/// One Capture per free variable of `body`, slots dense from 0 in order of
/// first reference. Mode precedence: reduction > firstprivate > private >
/// shared (explicit or default). `types` must cover every free variable;
/// a missing one throws CompileError(UnknownVariable).
std::vector<Capture> classify_captures(const Stmt& body, const CheckedDirective& d,
                                       const std::map<std::string, Type, std::less<>>& types,
                                       const std::vector<std::string>& exclude = {});

/// Extract `target` into a region. For loop kinds, `target` must be a
/// canonical ForStmt; its body is wrapped in a WorkshareLoopStmt and the
/// bounds move into the loop descriptor. `lowered_body` is the target's body
/// with nested directives already replaced (defaults to the original).
OutlinedRegion outline(const Stmt& target, const CheckedDirective& d, int id,
                       const std::map<std::string, Type, std::less<>>& types, StmtPtr lowered_body = nullptr);

/// Parse, validate and outline every directive in the program. Region ids
/// follow source order, outer before inner. Throws CompileError carrying
/// every directive problem found.
LoweredProgram lower_program(const Program& p);

/// Names a ForkStmt for `region` must read from the forking scope: the
/// capture names, then any extra names used by hoisted loop bounds.
std::vector<std::string> fork_arguments(const OutlinedRegion& region);

/// Stable textual dump of the region table, one block per region.
std::string dump_omp(const LoweredProgram& p);

}  // namespace miniomp
