// Lowered programs are compiled once into a tree of typed nodes (one virtual
// eval per node, no variant dispatch or name lookup at run time) and then
// executed. Every scalar variable lives in a 64-bit cell reached through the
// frame's pointer table, so a shared capture is just a pointer to the
// forking frame's cell.

#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>

#include "miniomp/exec.hpp"
#include "miniomp/frontend.hpp"
#include "miniomp/runtime.hpp"

namespace miniomp {
namespace {

using Word = std::int64_t;
namespace rt = runtime;

inline Word load(Word* p) { return std::atomic_ref<Word>(*p).load(std::memory_order_relaxed); }
inline void store(Word* p, Word v) { std::atomic_ref<Word>(*p).store(v, std::memory_order_relaxed); }
inline double to_f(Word w) { return std::bit_cast<double>(w); }
inline Word from_f(double d) { return std::bit_cast<Word>(d); }

[[noreturn]] void overflow(SourcePos pos) { throw Trap(TrapKind::IntegerOverflow, "integer overflow", pos); }

class OutputSink {
public:
  explicit OutputSink(std::ostream* stream) : stream_(stream) {}

  void line(const std::string& s) {
    std::lock_guard lock(mutex_);
    text_ += s;
    text_ += '\n';
    if (stream_) *stream_ << s << '\n' << std::flush;
  }

  std::string text() const {
    std::lock_guard lock(mutex_);
    return text_;
  }

private:
  mutable std::mutex mutex_;
  std::string text_;
  std::ostream* stream_;
};

struct RunState {
  explicit RunState(const RunConfig& cfg) : sink(cfg.stream), warnings(cfg.echo_warnings) {
    serialize = cfg.serialize;
    cli_threads = cfg.threads;
    if (const char* e = std::getenv(std::string(rt::kThreadsEnvVar).c_str())) env = e;
    hardware = rt::hardware_threads();
    default_threads = serialize ? 1 : threads_for(std::nullopt);
  }

  int threads_for(std::optional<std::int64_t> clause) const {
    if (serialize) return 1;
    std::optional<std::string_view> e;
    if (env) e = *env;
    return rt::resolve_threads(clause, cli_threads, e, hardware);
  }

  OutputSink sink;
  rt::WarningChannel warnings;
  bool serialize = false;
  std::optional<int> cli_threads;
  std::optional<std::string> env;
  unsigned hardware = 1;
  int default_threads = 1;
  double region_seconds = 0.0;
};

struct Ctx {
  Word* const* refs;
  ArrayHandle* arrays;
  RunState* run;
  const rt::Member* member;
  Word ret = 0;
};

/// Storage of one activation (function call or region member). Locals point
/// at their own cell; shared captures are repointed at the forking frame.
struct Frame {
  Frame(int scalars, int arrays_count)
      : cells(static_cast<std::size_t>(scalars), 0), refs(static_cast<std::size_t>(scalars)),
        arrays(static_cast<std::size_t>(arrays_count)) {
    for (std::size_t i = 0; i < cells.size(); ++i) refs[i] = &cells[i];
  }

  Ctx ctx(RunState* run, const rt::Member* member) { return Ctx{refs.data(), arrays.data(), run, member}; }

  std::vector<Word> cells;
  std::vector<Word*> refs;
  std::vector<ArrayHandle> arrays;
};

// ---------------------------------------------------------------------------
// Node interfaces
// ---------------------------------------------------------------------------

struct IntNode {
  virtual ~IntNode() = default;
  virtual Word eval(Ctx& c) const = 0;
};
struct FloatNode {
  virtual ~FloatNode() = default;
  virtual double eval(Ctx& c) const = 0;
};
struct BoolNode {
  virtual ~BoolNode() = default;
  virtual bool eval(Ctx& c) const = 0;
};

enum class Flow { Next, Return };

struct StmtNode {
  virtual ~StmtNode() = default;
  virtual Flow exec(Ctx& c) const = 0;
};

using IntP = std::unique_ptr<IntNode>;
using FloatP = std::unique_ptr<FloatNode>;
using BoolP = std::unique_ptr<BoolNode>;
using StmtP = std::unique_ptr<StmtNode>;

/// A compiled expression: exactly one of i/f/b is set for scalars; arrays
/// carry the slot of the array variable.
struct Compiled {
  Type type = Type::Void;
  IntP i;
  FloatP f;
  BoolP b;
  int array = -1;

  Word word(Ctx& c) const {
    switch (type) {
      case Type::Int: return i->eval(c);
      case Type::Float: return from_f(f->eval(c));
      case Type::Bool: return b->eval(c) ? 1 : 0;
      default: return 0;
    }
  }
};

// ---------------------------------------------------------------------------
// Leaves
// ---------------------------------------------------------------------------

struct IntConst final : IntNode {
  explicit IntConst(Word v) : v(v) {}
  Word eval(Ctx&) const override { return v; }
  Word v;
};
struct FloatConst final : FloatNode {
  explicit FloatConst(double v) : v(v) {}
  double eval(Ctx&) const override { return v; }
  double v;
};
struct BoolConst final : BoolNode {
  explicit BoolConst(bool v) : v(v) {}
  bool eval(Ctx&) const override { return v; }
  bool v;
};

struct IntLoad final : IntNode {
  explicit IntLoad(int slot) : slot(slot) {}
  Word eval(Ctx& c) const override { return load(c.refs[slot]); }
  int slot;
};
struct FloatLoad final : FloatNode {
  explicit FloatLoad(int slot) : slot(slot) {}
  double eval(Ctx& c) const override { return to_f(load(c.refs[slot])); }
  int slot;
};
struct BoolLoad final : BoolNode {
  explicit BoolLoad(int slot) : slot(slot) {}
  bool eval(Ctx& c) const override { return load(c.refs[slot]) != 0; }
  int slot;
};

inline Word* element(Ctx& c, int array, Word index, SourcePos pos) {
  ArrayStorage& a = *c.arrays[array];
  if (static_cast<std::uint64_t>(index) >= static_cast<std::uint64_t>(a.length())) {
    throw Trap(TrapKind::OutOfBounds,
               "index " + std::to_string(index) + " out of bounds for array of length " + std::to_string(a.length()),
               pos);
  }
  return a.words() + index;
}

struct IntIndex final : IntNode {
  IntIndex(int array, IntP index, SourcePos pos) : array(array), index(std::move(index)), pos(pos) {}
  Word eval(Ctx& c) const override { return load(element(c, array, index->eval(c), pos)); }
  int array;
  IntP index;
  SourcePos pos;
};
struct FloatIndex final : FloatNode {
  FloatIndex(int array, IntP index, SourcePos pos) : array(array), index(std::move(index)), pos(pos) {}
  double eval(Ctx& c) const override { return to_f(load(element(c, array, index->eval(c), pos))); }
  int array;
  IntP index;
  SourcePos pos;
};

struct Widen final : FloatNode {
  explicit Widen(IntP v) : v(std::move(v)) {}
  double eval(Ctx& c) const override { return static_cast<double>(v->eval(c)); }
  IntP v;
};

// ---------------------------------------------------------------------------
// Arithmetic
// ---------------------------------------------------------------------------

// Operands of arithmetic and comparison nodes. Variable loads and literals
// are folded into the parent node instead of costing a virtual call each.
struct IntOperand {
  explicit IntOperand(IntP n) {
    if (auto* l = dynamic_cast<IntLoad*>(n.get())) slot = l->slot;
    else if (auto* k = dynamic_cast<IntConst*>(n.get())) value = k->v;
    else node = std::move(n);
  }
  Word eval(Ctx& c) const {
    if (slot >= 0) return load(c.refs[slot]);
    if (node) return node->eval(c);
    return value;
  }
  int slot = -1;
  Word value = 0;
  IntP node;
};

struct FloatOperand {
  explicit FloatOperand(FloatP n) {
    if (auto* l = dynamic_cast<FloatLoad*>(n.get())) slot = l->slot;
    else if (auto* k = dynamic_cast<FloatConst*>(n.get())) value = k->v;
    else node = std::move(n);
  }
  double eval(Ctx& c) const {
    if (slot >= 0) return to_f(load(c.refs[slot]));
    if (node) return node->eval(c);
    return value;
  }
  int slot = -1;
  double value = 0.0;
  FloatP node;
};


struct AddI {
  static Word apply(Word a, Word b, SourcePos pos) {
    Word r;
    if (__builtin_add_overflow(a, b, &r)) overflow(pos);
    return r;
  }
};
struct SubI {
  static Word apply(Word a, Word b, SourcePos pos) {
    Word r;
    if (__builtin_sub_overflow(a, b, &r)) overflow(pos);
    return r;
  }
};
struct MulI {
  static Word apply(Word a, Word b, SourcePos pos) {
    Word r;
    if (__builtin_mul_overflow(a, b, &r)) overflow(pos);
    return r;
  }
};
struct DivI {
  static Word apply(Word a, Word b, SourcePos pos) {
    if (b == 0) throw Trap(TrapKind::DivisionByZero, "integer division by zero", pos);
    if (a == std::numeric_limits<Word>::min() && b == -1) overflow(pos);
    return a / b;
  }
};
struct ModI {
  static Word apply(Word a, Word b, SourcePos pos) {
    if (b == 0) throw Trap(TrapKind::DivisionByZero, "integer modulo by zero", pos);
    if (b == -1) return 0;
    return a % b;
  }
};

template <class Op>
struct IntBin final : IntNode {
  IntBin(IntP l, IntP r, SourcePos pos) : l(std::move(l)), r(std::move(r)), pos(pos) {}
  Word eval(Ctx& c) const override {
    const Word a = l.eval(c);
    return Op::apply(a, r.eval(c), pos);
  }
  IntOperand l, r;
  SourcePos pos;
};

struct AddF {
  static double apply(double a, double b) { return a + b; }
};
struct SubF {
  static double apply(double a, double b) { return a - b; }
};
struct MulF {
  static double apply(double a, double b) { return a * b; }
};
struct DivF {
  static double apply(double a, double b) { return a / b; }
};

template <class Op>
struct FloatBin final : FloatNode {
  FloatBin(FloatP l, FloatP r) : l(std::move(l)), r(std::move(r)) {}
  double eval(Ctx& c) const override {
    const double a = l.eval(c);
    return Op::apply(a, r.eval(c));
  }
  FloatOperand l, r;
};

struct Lt {
  template <class T>
  static bool apply(T a, T b) { return a < b; }
};
struct Le {
  template <class T>
  static bool apply(T a, T b) { return a <= b; }
};
struct Gt {
  template <class T>
  static bool apply(T a, T b) { return a > b; }
};
struct Ge {
  template <class T>
  static bool apply(T a, T b) { return a >= b; }
};
struct Eq {
  template <class T>
  static bool apply(T a, T b) { return a == b; }
};
struct Ne {
  template <class T>
  static bool apply(T a, T b) { return a != b; }
};

template <class Op>
struct IntCmp final : BoolNode {
  IntCmp(IntP l, IntP r) : l(std::move(l)), r(std::move(r)) {}
  bool eval(Ctx& c) const override {
    const Word a = l.eval(c);
    return Op::apply(a, r.eval(c));
  }
  IntOperand l, r;
};
template <class Op>
struct FloatCmp final : BoolNode {
  FloatCmp(FloatP l, FloatP r) : l(std::move(l)), r(std::move(r)) {}
  bool eval(Ctx& c) const override {
    const double a = l.eval(c);
    return Op::apply(a, r.eval(c));
  }
  FloatOperand l, r;
};
template <class Op>
struct BoolCmp final : BoolNode {
  BoolCmp(BoolP l, BoolP r) : l(std::move(l)), r(std::move(r)) {}
  bool eval(Ctx& c) const override {
    const bool a = l->eval(c);
    return Op::apply(a, r->eval(c));
  }
  BoolP l, r;
};

struct AndNode final : BoolNode {
  AndNode(BoolP l, BoolP r) : l(std::move(l)), r(std::move(r)) {}
  bool eval(Ctx& c) const override { return l->eval(c) && r->eval(c); }
  BoolP l, r;
};
struct OrNode final : BoolNode {
  OrNode(BoolP l, BoolP r) : l(std::move(l)), r(std::move(r)) {}
  bool eval(Ctx& c) const override { return l->eval(c) || r->eval(c); }
  BoolP l, r;
};
struct NotNode final : BoolNode {
  explicit NotNode(BoolP v) : v(std::move(v)) {}
  bool eval(Ctx& c) const override { return !v->eval(c); }
  BoolP v;
};
struct NegI final : IntNode {
  NegI(IntP v, SourcePos pos) : v(std::move(v)), pos(pos) {}
  Word eval(Ctx& c) const override {
    const Word x = v->eval(c);
    if (x == std::numeric_limits<Word>::min()) overflow(pos);
    return -x;
  }
  IntP v;
  SourcePos pos;
};
struct NegF final : FloatNode {
  explicit NegF(FloatP v) : v(std::move(v)) {}
  double eval(Ctx& c) const override { return -v->eval(c); }
  FloatP v;
};

// ---------------------------------------------------------------------------
// Builtins
// ---------------------------------------------------------------------------

template <class F>
struct FloatUnary final : FloatNode {
  explicit FloatUnary(FloatP v) : v(std::move(v)) {}
  double eval(Ctx& c) const override { return F::apply(v->eval(c)); }
  FloatP v;
};
struct SqrtF {
  static double apply(double x) { return std::sqrt(x); }
};
struct LogF {
  static double apply(double x) { return std::log(x); }
};
struct AbsF {
  static double apply(double x) { return std::fabs(x); }
};

struct AbsI final : IntNode {
  AbsI(IntP v, SourcePos pos) : v(std::move(v)), pos(pos) {}
  Word eval(Ctx& c) const override {
    const Word x = v->eval(c);
    if (x == std::numeric_limits<Word>::min()) overflow(pos);
    return x < 0 ? -x : x;
  }
  IntP v;
  SourcePos pos;
};

struct FloorF final : IntNode {
  FloorF(FloatP v, SourcePos pos) : v(std::move(v)), pos(pos) {}
  Word eval(Ctx& c) const override {
    const double x = std::floor(v->eval(c));
    // 2^63 is exactly representable; anything at or beyond it (or NaN) does not fit.
    if (!(x >= -0x1p63 && x < 0x1p63)) {
      throw Trap(TrapKind::InvalidConversion, "floor result " + format_float(x) + " does not fit in int", pos);
    }
    return static_cast<Word>(x);
  }
  FloatP v;
  SourcePos pos;
};

template <bool IsMin>
struct MinMaxI final : IntNode {
  MinMaxI(IntP l, IntP r) : l(std::move(l)), r(std::move(r)) {}
  Word eval(Ctx& c) const override {
    const Word a = l->eval(c);
    const Word b = r->eval(c);
    if constexpr (IsMin) return b < a ? b : a;
    else return b > a ? b : a;
  }
  IntP l, r;
};
template <bool IsMin>
struct MinMaxF final : FloatNode {
  MinMaxF(FloatP l, FloatP r) : l(std::move(l)), r(std::move(r)) {}
  double eval(Ctx& c) const override {
    const double a = l->eval(c);
    const double b = r->eval(c);
    if constexpr (IsMin) return b < a ? b : a;
    else return b > a ? b : a;
  }
  FloatP l, r;
};

struct SplitSeedNode final : IntNode {
  explicit SplitSeedNode(IntP v) : v(std::move(v)) {}
  Word eval(Ctx& c) const override { return split_seed(v->eval(c)); }
  IntP v;
};
struct RandUniformNode final : FloatNode {
  explicit RandUniformNode(IntP v) : v(std::move(v)) {}
  double eval(Ctx& c) const override { return rand_uniform(v->eval(c)); }
  IntP v;
};
struct NowSeconds final : FloatNode {
  double eval(Ctx&) const override {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
  }
};
struct TidNode final : IntNode {
  Word eval(Ctx& c) const override { return c.member ? c.member->tid : 0; }
};
struct TeamSizeNode final : IntNode {
  Word eval(Ctx& c) const override { return c.member ? c.member->team->size() : 1; }
};
struct MaxThreadsNode final : IntNode {
  Word eval(Ctx& c) const override { return c.run->default_threads; }
};

// ---------------------------------------------------------------------------
// Calls
// ---------------------------------------------------------------------------

struct Function {
  std::string name;
  Type ret = Type::Void;
  int scalars = 0;
  int arrays = 0;
  struct ParamSlot {
    Type type;
    int slot;
  };
  std::vector<ParamSlot> params;
  StmtP body;
};

struct CallSite {
  const Function* fn = nullptr;
  std::vector<Compiled> args;  // already coerced to the parameter types
  SourcePos pos;

  Word invoke(Ctx& c) const {
    Frame f(fn->scalars, fn->arrays);
    for (std::size_t k = 0; k < args.size(); ++k) {
      const auto& p = fn->params[k];
      if (is_array(p.type)) {
        f.arrays[static_cast<std::size_t>(p.slot)] = c.arrays[args[k].array];
      } else {
        f.cells[static_cast<std::size_t>(p.slot)] = args[k].word(c);
      }
    }
    Ctx callee = f.ctx(c.run, c.member);
    const Flow flow = fn->body->exec(callee);
    if (fn->ret != Type::Void && flow != Flow::Return) {
      throw Trap(TrapKind::MissingReturn, "function '" + fn->name + "' ended without returning a value", pos);
    }
    return callee.ret;
  }
};

struct CallInt final : IntNode {
  explicit CallInt(CallSite s) : site(std::move(s)) {}
  Word eval(Ctx& c) const override { return site.invoke(c); }
  CallSite site;
};
struct CallFloat final : FloatNode {
  explicit CallFloat(CallSite s) : site(std::move(s)) {}
  double eval(Ctx& c) const override { return to_f(site.invoke(c)); }
  CallSite site;
};
struct CallBool final : BoolNode {
  explicit CallBool(CallSite s) : site(std::move(s)) {}
  bool eval(Ctx& c) const override { return site.invoke(c) != 0; }
  CallSite site;
};

struct ExternSite {
  std::string symbol;
  const ExternRegistry::Entry* entry = nullptr;
  std::vector<Compiled> args;
  Type ret = Type::Void;
  SourcePos pos;

  Value call(Ctx& c) const {
    if (!entry) throw UnresolvedExtern(symbol, pos);
    if (entry->arity != args.size()) {
      throw Trap(TrapKind::ExternFailure,
                 "'" + symbol + "' registered with " + std::to_string(entry->arity) + " parameters, called with " +
                     std::to_string(args.size()),
                 pos);
    }
    std::vector<Value> values;
    values.reserve(args.size());
    for (const auto& a : args) {
      switch (a.type) {
        case Type::Int: values.emplace_back(a.i->eval(c)); break;
        case Type::Float: values.emplace_back(a.f->eval(c)); break;
        case Type::Bool: values.emplace_back(a.b->eval(c)); break;
        default: values.emplace_back(c.arrays[a.array]); break;
      }
    }
    try {
      return entry->callback(values);
    } catch (const Trap&) {
      throw;
    } catch (const std::exception& e) {
      throw Trap(TrapKind::ExternFailure, "'" + symbol + "' failed: " + e.what(), pos);
    }
  }

  [[noreturn]] void bad_result() const {
    throw Trap(TrapKind::ExternFailure, "'" + symbol + "' returned a value of the wrong type", pos);
  }
};

struct ExternInt final : IntNode {
  explicit ExternInt(ExternSite s) : site(std::move(s)) {}
  Word eval(Ctx& c) const override {
    Value v = site.call(c);
    if (auto* x = std::get_if<std::int64_t>(&v)) return *x;
    site.bad_result();
  }
  ExternSite site;
};
struct ExternFloat final : FloatNode {
  explicit ExternFloat(ExternSite s) : site(std::move(s)) {}
  double eval(Ctx& c) const override {
    Value v = site.call(c);
    if (auto* x = std::get_if<double>(&v)) return *x;
    if (auto* x = std::get_if<std::int64_t>(&v)) return static_cast<double>(*x);
    site.bad_result();
  }
  ExternSite site;
};
struct ExternBool final : BoolNode {
  explicit ExternBool(ExternSite s) : site(std::move(s)) {}
  bool eval(Ctx& c) const override {
    Value v = site.call(c);
    if (auto* x = std::get_if<bool>(&v)) return *x;
    site.bad_result();
  }
  ExternSite site;
};

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

struct DeclScalar final : StmtNode {
  DeclScalar(int slot, Compiled init) : slot(slot), init(std::move(init)) {}
  Flow exec(Ctx& c) const override {
    store(c.refs[slot], init.type == Type::Void ? 0 : init.word(c));
    return Flow::Next;
  }
  int slot;
  Compiled init;
};

struct DeclArray final : StmtNode {
  DeclArray(int slot, Type element, IntP length) : slot(slot), element(element), length(std::move(length)) {}
  Flow exec(Ctx& c) const override {
    c.arrays[slot] = std::make_shared<ArrayStorage>(element, length->eval(c));
    return Flow::Next;
  }
  int slot;
  Type element;
  IntP length;
};

struct AssignWord final : StmtNode {
  AssignWord(int slot, Compiled value) : slot(slot), value(std::move(value)) {}
  Flow exec(Ctx& c) const override {
    store(c.refs[slot], value.word(c));
    return Flow::Next;
  }
  int slot;
  Compiled value;
};

// Specializations of the hottest assignment shapes.
struct AssignInt final : StmtNode {
  AssignInt(int slot, IntP value) : slot(slot), value(std::move(value)) {}
  Flow exec(Ctx& c) const override {
    store(c.refs[slot], value.eval(c));
    return Flow::Next;
  }
  int slot;
  IntOperand value;
};
struct AssignFloat final : StmtNode {
  AssignFloat(int slot, FloatP value) : slot(slot), value(std::move(value)) {}
  Flow exec(Ctx& c) const override {
    store(c.refs[slot], from_f(value.eval(c)));
    return Flow::Next;
  }
  int slot;
  FloatOperand value;
};

struct StoreIndex final : StmtNode {
  StoreIndex(int array, IntP index, Compiled value, SourcePos pos)
      : array(array), index(std::move(index)), value(std::move(value)), pos(pos) {}
  Flow exec(Ctx& c) const override {
    const Word i = index->eval(c);
    const Word v = value.word(c);
    store(element(c, array, i, pos), v);
    return Flow::Next;
  }
  int array;
  IntP index;
  Compiled value;
  SourcePos pos;
};

struct IfNode final : StmtNode {
  IfNode(BoolP cond, StmtP then_branch, StmtP else_branch)
      : cond(std::move(cond)), then_branch(std::move(then_branch)), else_branch(std::move(else_branch)) {}
  Flow exec(Ctx& c) const override {
    if (cond->eval(c)) return then_branch->exec(c);
    if (else_branch) return else_branch->exec(c);
    return Flow::Next;
  }
  BoolP cond;
  StmtP then_branch;
  StmtP else_branch;
};

struct WhileNode final : StmtNode {
  WhileNode(BoolP cond, StmtP body) : cond(std::move(cond)), body(std::move(body)) {}
  Flow exec(Ctx& c) const override {
    while (cond->eval(c)) {
      if (body->exec(c) == Flow::Return) return Flow::Return;
    }
    return Flow::Next;
  }
  BoolP cond;
  StmtP body;
};

/// Runs `body` for lower, lower+step, ... below upper with the induction
/// variable in `slot`. Stops instead of overflowing past INT64_MAX.
inline Flow counted_loop(Ctx& c, int slot, Word lower, Word upper, Word step, const StmtNode& body) {
  Word* iv = c.refs[slot];
  for (Word i = lower; i < upper;) {
    store(iv, i);
    if (body.exec(c) == Flow::Return) return Flow::Return;
    if (__builtin_add_overflow(i, step, &i)) break;
  }
  return Flow::Next;
}

struct ForNode final : StmtNode {
  ForNode(int slot, IntP lower, IntP upper, IntP step, StmtP body, SourcePos pos)
      : slot(slot), lower(std::move(lower)), upper(std::move(upper)), step(std::move(step)), body(std::move(body)),
        pos(pos) {}
  Flow exec(Ctx& c) const override {
    const Word lo = lower->eval(c);
    const Word hi = upper->eval(c);
    const Word st = step ? step->eval(c) : 1;
    if (st < 1) throw Trap(TrapKind::InvalidLoop, "loop step must be at least 1, got " + std::to_string(st), pos);
    return counted_loop(c, slot, lo, hi, st, *body);
  }
  int slot;
  IntP lower, upper, step;
  StmtP body;
  SourcePos pos;
};

struct BlockNode final : StmtNode {
  Flow exec(Ctx& c) const override {
    for (const auto& s : stmts) {
      if (s->exec(c) == Flow::Return) return Flow::Return;
    }
    return Flow::Next;
  }
  std::vector<StmtP> stmts;
};

struct CallStmtNode final : StmtNode {
  explicit CallStmtNode(CallSite s) : site(std::move(s)) {}
  Flow exec(Ctx& c) const override {
    site.invoke(c);
    return Flow::Next;
  }
  CallSite site;
};
struct ExternStmtNode final : StmtNode {
  explicit ExternStmtNode(ExternSite s) : site(std::move(s)) {}
  Flow exec(Ctx& c) const override {
    site.call(c);
    return Flow::Next;
  }
  ExternSite site;
};
/// Builtin called for effect; evaluated and discarded.
struct DiscardNode final : StmtNode {
  explicit DiscardNode(Compiled v) : v(std::move(v)) {}
  Flow exec(Ctx& c) const override {
    v.word(c);
    return Flow::Next;
  }
  Compiled v;
};

struct ReturnNode final : StmtNode {
  explicit ReturnNode(Compiled v) : v(std::move(v)) {}
  Flow exec(Ctx& c) const override {
    if (v.type != Type::Void) c.ret = v.word(c);
    return Flow::Return;
  }
  Compiled v;
};

struct PrintNode final : StmtNode {
  struct Item {
    std::string text;  // used when value.type is Void
    Compiled value;
  };
  Flow exec(Ctx& c) const override {
    std::string line;
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (k) line += ' ';
      const auto& it = items[k];
      switch (it.value.type) {
        case Type::Int: line += std::to_string(it.value.i->eval(c)); break;
        case Type::Float: line += format_float(it.value.f->eval(c)); break;
        case Type::Bool: line += it.value.b->eval(c) ? "true" : "false"; break;
        default: line += it.text; break;
      }
    }
    c.run->sink.line(line);
    return Flow::Next;
  }
  std::vector<Item> items;
};

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

struct Binding {
  CaptureMode mode;
  Type type;
  std::optional<ReductionOp> op;
  int parent;  // slot in the forking frame
  int local;   // slot in the member frame
};

Word identity_word(Type t, ReductionOp op) {
  return t == Type::Float ? from_f(rt::reduction_identity<double>(op)) : rt::reduction_identity<std::int64_t>(op);
}

/// orig op p[0] op p[1] ..., folded left in tid order.
Word fold_words(Type t, ReductionOp op, Word orig, const std::vector<Word>& partials) {
  if (t == Type::Float) {
    double acc = to_f(orig);
    for (Word w : partials) acc = rt::reduce_pair(op, acc, to_f(w));
    return from_f(acc);
  }
  Word acc = orig;
  for (Word w : partials) acc = rt::reduce_pair(op, acc, w);
  return acc;
}

struct Region {
  int id = 0;
  DirectiveKind kind = DirectiveKind::Parallel;
  int scalars = 0;
  int arrays = 0;
  std::vector<Binding> bindings;
  std::vector<std::size_t> reductions;  // indices into bindings
  StmtP body;                           // loop body for loop kinds
  int induction = -1;
  ScheduleKind schedule = ScheduleKind::Static;
  std::optional<std::int64_t> chunk;
  std::optional<std::int64_t> num_threads;
  IntP lower, upper, step;  // compiled in the forking scope
  SourcePos pos;

  bool has_loop() const { return induction >= 0; }

  void materialize(Frame& f, const Ctx& parent) const {
    for (const auto& b : bindings) {
      const auto local = static_cast<std::size_t>(b.local);
      if (is_array(b.type)) {
        const ArrayHandle& src = parent.arrays[b.parent];
        switch (b.mode) {
          case CaptureMode::SharedRef: f.arrays[local] = src; break;
          case CaptureMode::PrivateZero:
            f.arrays[local] = std::make_shared<ArrayStorage>(src->element_type(), src->length());
            break;
          case CaptureMode::FirstprivateCopy: {
            auto copy = std::make_shared<ArrayStorage>(src->element_type(), src->length());
            for (std::int64_t i = 0; i < src->length(); ++i) copy->words()[i] = load(src->words() + i);
            f.arrays[local] = std::move(copy);
            break;
          }
          case CaptureMode::ReductionSlot: throw std::logic_error("array reduction capture");
        }
        continue;
      }
      switch (b.mode) {
        case CaptureMode::SharedRef: f.refs[local] = parent.refs[b.parent]; break;
        case CaptureMode::PrivateZero: f.cells[local] = 0; break;
        case CaptureMode::FirstprivateCopy: f.cells[local] = load(parent.refs[b.parent]); break;
        case CaptureMode::ReductionSlot: f.cells[local] = identity_word(b.type, *b.op); break;
      }
    }
  }

  void save_partials(Ctx& rc, std::vector<Word>& row) const {
    row.clear();
    for (std::size_t k : reductions) row.push_back(load(rc.refs[bindings[k].local]));
  }

  void write_back(Ctx& parent, const std::vector<std::vector<Word>>& rows, int members) const {
    for (std::size_t r = 0; r < reductions.size(); ++r) {
      const Binding& b = bindings[reductions[r]];
      std::vector<Word> partials;
      for (int t = 0; t < members; ++t) partials.push_back(rows[static_cast<std::size_t>(t)][r]);
      Word* cell = parent.refs[b.parent];
      store(cell, fold_words(b.type, *b.op, load(cell), partials));
    }
  }

  void run_chunk(Ctx& rc, const rt::IterationChunk& ch) const {
    counted_loop(rc, induction, ch.lower, ch.upper, ch.step, *body);
  }

  rt::LoopBounds bounds(Ctx& c) const {
    rt::LoopBounds b{lower->eval(c), upper->eval(c), step ? step->eval(c) : 1};
    if (b.step < 1) {
      throw Trap(TrapKind::InvalidLoop, "loop step must be at least 1, got " + std::to_string(b.step), pos);
    }
    return b;
  }
};

/// ForkStmt of a parallel or parallel-for region: start a new team.
struct ForkNode final : StmtNode {
  explicit ForkNode(std::unique_ptr<Region> r) : region(std::move(r)) {}

  Flow exec(Ctx& c) const override {
    if (region->kind == DirectiveKind::For && c.member) return workshare(c);
    return fork(c, region->kind == DirectiveKind::For ? 1 : c.run->threads_for(region->num_threads));
  }

  Flow fork(Ctx& c, int team) const {
    const Region& r = *region;
    RunState& run = *c.run;
    const bool host = c.member == nullptr;
    const auto start = std::chrono::steady_clock::now();

    rt::LoopBounds bounds;
    rt::LoopDispatcher dispatcher;
    if (r.has_loop()) {
      bounds = r.bounds(c);
      dispatcher.reset(bounds);
    }
    std::vector<std::vector<Word>> rows(static_cast<std::size_t>(team));
    const int used = rt::fork_call(
        team,
        [&](rt::Member& m) {
          Frame f(r.scalars, r.arrays);
          r.materialize(f, c);
          Ctx rc = f.ctx(&run, &m);
          if (r.has_loop()) {
            rt::run_schedule(
                bounds, r.schedule, r.chunk, m.tid, m.team->size(), dispatcher,
                [&] { return m.team->cancelled(); }, [&](const rt::IterationChunk& ch) { r.run_chunk(rc, ch); });
          } else {
            r.body->exec(rc);
          }
          r.save_partials(rc, rows[static_cast<std::size_t>(m.tid)]);
        },
        rt::ForkOptions{&run.warnings});
    r.write_back(c, rows, used);

    if (host) run.region_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return Flow::Next;
  }

  // Worksharing loop inside an enclosing team: every member arrives here.
  Flow workshare(Ctx& c) const {
    const Region& r = *region;
    const rt::Member& m = *c.member;
    Frame f(r.scalars, r.arrays);
    r.materialize(f, c);
    Ctx rc = f.ctx(c.run, &m);
    auto& rows = m.team->partial_words();
    rt::workshare(
        m, [&] { return r.bounds(c); }, r.schedule, r.chunk,
        [&](const rt::IterationChunk& ch) { r.run_chunk(rc, ch); },
        [&] { r.save_partials(rc, rows[static_cast<std::size_t>(m.tid)]); },
        [&] { r.write_back(c, rows, m.team->size()); });
    return Flow::Next;
  }

  std::unique_ptr<Region> region;
};

// ---------------------------------------------------------------------------
// Compiler
// ---------------------------------------------------------------------------

struct VarSlot {
  Type type;
  int index;
};

struct Layout {
  std::vector<std::map<std::string, VarSlot, std::less<>>> scopes;
  int scalars = 0;
  int arrays = 0;

  VarSlot declare(const std::string& name, Type t) {
    VarSlot s{t, is_array(t) ? arrays++ : scalars++};
    scopes.back()[name] = s;
    return s;
  }

  const VarSlot& find(std::string_view name) const {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return f->second;
    }
    throw std::logic_error("unresolved variable '" + std::string(name) + "' after checking");
  }
};

struct Executable {
  std::map<std::string, std::unique_ptr<Function>, std::less<>> functions;
};

class Compiler {
public:
  Compiler(const LoweredProgram& p, const ExternRegistry& externs) : p_(p), externs_(externs) {}

  Executable compile() {
    Executable exe;
    for (const auto& fd : p_.host.functions) {
      auto fn = std::make_unique<Function>();
      fn->name = fd.name;
      fn->ret = fd.return_type;
      functions_[fd.name] = fn.get();
      exe.functions[fd.name] = std::move(fn);
    }
    for (const auto& fd : p_.host.functions) compile_function(fd, *functions_[fd.name]);
    return exe;
  }

private:
  struct ScopeGuard {
    explicit ScopeGuard(Layout* l) : l(l) { l->scopes.emplace_back(); }
    ~ScopeGuard() { l->scopes.pop_back(); }
    Layout* l;
  };

  void compile_function(const FunctionDecl& fd, Function& fn) {
    Layout layout;
    layout_ = &layout;
    ScopeGuard g(layout_);
    for (const auto& prm : fd.params) fn.params.push_back({prm.type, layout.declare(prm.name, prm.type).index});
    return_type_ = fd.return_type;
    fn.body = stmt(*fd.body);
    fn.scalars = layout.scalars;
    fn.arrays = layout.arrays;
    layout_ = nullptr;
  }

  // ---- expressions ----

  static FloatP as_float(Compiled c) {
    if (c.type == Type::Float) return std::move(c.f);
    return std::make_unique<Widen>(std::move(c.i));
  }

  static Compiled coerce(Compiled c, Type to) {
    if (to == Type::Float && c.type == Type::Int) {
      Compiled out;
      out.type = Type::Float;
      out.f = std::make_unique<Widen>(std::move(c.i));
      return out;
    }
    return c;
  }

  static Compiled of(IntP n) {
    Compiled c;
    c.type = Type::Int;
    c.i = std::move(n);
    return c;
  }
  static Compiled of(FloatP n) {
    Compiled c;
    c.type = Type::Float;
    c.f = std::move(n);
    return c;
  }
  static Compiled of(BoolP n) {
    Compiled c;
    c.type = Type::Bool;
    c.b = std::move(n);
    return c;
  }

  IntP int_expr(const Expr& e) { return std::move(expr(e).i); }
  BoolP bool_expr(const Expr& e) { return std::move(expr(e).b); }

  Compiled expr(const Expr& e) {
    return std::visit([&](const auto& n) { return expr_node(e, n); }, e.node);
  }

  Compiled expr_node(const Expr&, const IntLit& n) { return of(std::make_unique<IntConst>(n.value)); }
  Compiled expr_node(const Expr&, const FloatLit& n) { return of(std::make_unique<FloatConst>(n.value)); }
  Compiled expr_node(const Expr&, const BoolLit& n) { return of(std::make_unique<BoolConst>(n.value)); }
  Compiled expr_node(const Expr&, const StringLit&) {
    throw std::logic_error("string literal outside print after checking");
  }

  Compiled expr_node(const Expr&, const VarRef& n) {
    const VarSlot& v = layout_->find(n.name);
    switch (v.type) {
      case Type::Int: return of(std::make_unique<IntLoad>(v.index));
      case Type::Float: return of(std::make_unique<FloatLoad>(v.index));
      case Type::Bool: return of(std::make_unique<BoolLoad>(v.index));
      default: {
        Compiled c;
        c.type = v.type;
        c.array = v.index;
        return c;
      }
    }
  }

  Compiled expr_node(const Expr& e, const IndexExpr& n) {
    const VarSlot& v = layout_->find(n.array);
    IntP idx = int_expr(*n.index);
    if (v.type == Type::IntArray) return of(std::make_unique<IntIndex>(v.index, std::move(idx), e.pos));
    return of(std::make_unique<FloatIndex>(v.index, std::move(idx), e.pos));
  }

  Compiled expr_node(const Expr& e, const UnaryExpr& n) {
    Compiled v = expr(*n.operand);
    if (n.op == UnaryOp::Not) return of(std::make_unique<NotNode>(std::move(v.b)));
    if (v.type == Type::Int) return of(std::make_unique<NegI>(std::move(v.i), e.pos));
    return of(std::make_unique<NegF>(std::move(v.f)));
  }

  template <class Op>
  static IntP int_bin(Compiled l, Compiled r, SourcePos pos) {
    return std::make_unique<IntBin<Op>>(std::move(l.i), std::move(r.i), pos);
  }

  template <class Op>
  static BoolP compare(Compiled l, Compiled r) {
    if (l.type == Type::Bool) return std::make_unique<BoolCmp<Op>>(std::move(l.b), std::move(r.b));
    if (l.type == Type::Int && r.type == Type::Int) return std::make_unique<IntCmp<Op>>(std::move(l.i), std::move(r.i));
    return std::make_unique<FloatCmp<Op>>(as_float(std::move(l)), as_float(std::move(r)));
  }

  Compiled expr_node(const Expr& e, const BinaryExpr& n) {
    Compiled l = expr(*n.lhs);
    Compiled r = expr(*n.rhs);
    const bool ints = l.type == Type::Int && r.type == Type::Int;
    switch (n.op) {
      case BinaryOp::Add:
        if (ints) return of(int_bin<AddI>(std::move(l), std::move(r), e.pos));
        return of(std::make_unique<FloatBin<AddF>>(as_float(std::move(l)), as_float(std::move(r))));
      case BinaryOp::Sub:
        if (ints) return of(int_bin<SubI>(std::move(l), std::move(r), e.pos));
        return of(std::make_unique<FloatBin<SubF>>(as_float(std::move(l)), as_float(std::move(r))));
      case BinaryOp::Mul:
        if (ints) return of(int_bin<MulI>(std::move(l), std::move(r), e.pos));
        return of(std::make_unique<FloatBin<MulF>>(as_float(std::move(l)), as_float(std::move(r))));
      case BinaryOp::Div:
        if (ints) return of(int_bin<DivI>(std::move(l), std::move(r), e.pos));
        return of(std::make_unique<FloatBin<DivF>>(as_float(std::move(l)), as_float(std::move(r))));
      case BinaryOp::Mod: return of(int_bin<ModI>(std::move(l), std::move(r), e.pos));
      case BinaryOp::Lt: return of(compare<Lt>(std::move(l), std::move(r)));
      case BinaryOp::Le: return of(compare<Le>(std::move(l), std::move(r)));
      case BinaryOp::Gt: return of(compare<Gt>(std::move(l), std::move(r)));
      case BinaryOp::Ge: return of(compare<Ge>(std::move(l), std::move(r)));
      case BinaryOp::Eq: return of(compare<Eq>(std::move(l), std::move(r)));
      case BinaryOp::Ne: return of(compare<Ne>(std::move(l), std::move(r)));
      case BinaryOp::And: return of(std::make_unique<AndNode>(std::move(l.b), std::move(r.b)));
      case BinaryOp::Or: return of(std::make_unique<OrNode>(std::move(l.b), std::move(r.b)));
    }
    throw std::logic_error("unknown binary operator");
  }

  Compiled expr_node(const Expr& e, const CallExpr& n) {
    if (is_builtin(n.callee)) return builtin(e, n);
    if (auto it = functions_.find(n.callee); it != functions_.end()) {
      CallSite site = call_site(*it->second, n, e.pos);
      switch (it->second->ret) {
        case Type::Int: return of(std::make_unique<CallInt>(std::move(site)));
        case Type::Float: return of(std::make_unique<CallFloat>(std::move(site)));
        case Type::Bool: return of(std::make_unique<CallBool>(std::move(site)));
        default: throw std::logic_error("void call used as a value");
      }
    }
    ExternSite site = extern_site(n, e.pos);
    switch (site.ret) {
      case Type::Int: return of(std::make_unique<ExternInt>(std::move(site)));
      case Type::Float: return of(std::make_unique<ExternFloat>(std::move(site)));
      case Type::Bool: return of(std::make_unique<ExternBool>(std::move(site)));
      default: throw std::logic_error("void extern used as a value");
    }
  }

  CallSite call_site(const Function& fn, const CallExpr& n, SourcePos pos) {
    const FunctionDecl* fd = p_.host.find_function(n.callee);
    CallSite site;
    site.fn = &fn;
    site.pos = pos;
    for (std::size_t k = 0; k < n.args.size(); ++k) site.args.push_back(coerce(expr(*n.args[k]), fd->params[k].type));
    return site;
  }

  ExternSite extern_site(const CallExpr& n, SourcePos pos) {
    const ExternDecl* xd = p_.host.find_extern(n.callee);
    if (!xd) throw std::logic_error("call to unknown function '" + n.callee + "' after checking");
    ExternSite site;
    site.symbol = bind_extern(xd->name, xd->abi);
    site.entry = externs_.find(site.symbol);
    site.ret = xd->return_type;
    site.pos = pos;
    for (std::size_t k = 0; k < n.args.size(); ++k) site.args.push_back(coerce(expr(*n.args[k]), xd->params[k].type));
    return site;
  }

  Compiled builtin(const Expr& e, const CallExpr& n) {
    const std::string& f = n.callee;
    std::vector<Compiled> a;
    for (const auto& arg : n.args) a.push_back(expr(*arg));
    if (f == "sqrt") return of(std::make_unique<FloatUnary<SqrtF>>(as_float(std::move(a[0]))));
    if (f == "log") return of(std::make_unique<FloatUnary<LogF>>(as_float(std::move(a[0]))));
    if (f == "abs") {
      if (a[0].type == Type::Int) return of(std::make_unique<AbsI>(std::move(a[0].i), e.pos));
      return of(std::make_unique<FloatUnary<AbsF>>(std::move(a[0].f)));
    }
    if (f == "floor") {
      if (a[0].type == Type::Int) return std::move(a[0]);
      return of(std::make_unique<FloorF>(std::move(a[0].f), e.pos));
    }
    if (f == "min" || f == "max") {
      const bool is_min = f == "min";
      if (a[0].type == Type::Int && a[1].type == Type::Int) {
        if (is_min) return of(std::make_unique<MinMaxI<true>>(std::move(a[0].i), std::move(a[1].i)));
        return of(std::make_unique<MinMaxI<false>>(std::move(a[0].i), std::move(a[1].i)));
      }
      FloatP x = as_float(std::move(a[0]));
      FloatP y = as_float(std::move(a[1]));
      if (is_min) return of(std::make_unique<MinMaxF<true>>(std::move(x), std::move(y)));
      return of(std::make_unique<MinMaxF<false>>(std::move(x), std::move(y)));
    }
    if (f == "split_seed") return of(std::make_unique<SplitSeedNode>(std::move(a[0].i)));
    if (f == "rand_uniform") return of(std::make_unique<RandUniformNode>(std::move(a[0].i)));
    if (f == "now_seconds") return of(std::make_unique<NowSeconds>());
    if (f == "tid") return of(std::make_unique<TidNode>());
    if (f == "team_size") return of(std::make_unique<TeamSizeNode>());
    if (f == "max_threads") return of(std::make_unique<MaxThreadsNode>());
    throw std::logic_error("unknown builtin '" + f + "'");
  }

  // ---- statements ----

  StmtP stmt(const Stmt& s) {
    return std::visit([&](const auto& n) { return stmt_node(s, n); }, s.node);
  }

  StmtP stmt_node(const Stmt&, const VarDecl& n) {
    if (is_array(n.type)) {
      IntP len = int_expr(*n.length);
      const VarSlot v = layout_->declare(n.name, n.type);
      return std::make_unique<DeclArray>(v.index, element_type(n.type), std::move(len));
    }
    Compiled init;
    if (n.init) init = coerce(expr(*n.init), n.type);
    const VarSlot v = layout_->declare(n.name, n.type);
    return std::make_unique<DeclScalar>(v.index, std::move(init));
  }

  StmtP stmt_node(const Stmt&, const Assign& n) {
    const VarSlot v = layout_->find(n.name);
    Compiled value = coerce(expr(*n.value), v.type);
    if (v.type == Type::Int) return std::make_unique<AssignInt>(v.index, std::move(value.i));
    if (v.type == Type::Float) return std::make_unique<AssignFloat>(v.index, std::move(value.f));
    return std::make_unique<AssignWord>(v.index, std::move(value));
  }

  StmtP stmt_node(const Stmt& s, const IndexAssign& n) {
    const VarSlot v = layout_->find(n.array);
    IntP idx = int_expr(*n.index);
    Compiled value = coerce(expr(*n.value), element_type(v.type));
    return std::make_unique<StoreIndex>(v.index, std::move(idx), std::move(value), s.pos);
  }

  StmtP stmt_node(const Stmt&, const IfStmt& n) {
    BoolP cond = bool_expr(*n.cond);
    StmtP then_branch = stmt(*n.then_branch);
    StmtP else_branch = n.else_branch ? stmt(*n.else_branch) : nullptr;
    return std::make_unique<IfNode>(std::move(cond), std::move(then_branch), std::move(else_branch));
  }

  StmtP stmt_node(const Stmt&, const WhileStmt& n) {
    BoolP cond = bool_expr(*n.cond);
    return std::make_unique<WhileNode>(std::move(cond), stmt(*n.body));
  }

  StmtP stmt_node(const Stmt& s, const ForStmt& n) {
    IntP lo = int_expr(*n.lower);
    IntP hi = int_expr(*n.upper);
    IntP st = n.step ? int_expr(*n.step) : nullptr;
    ScopeGuard g(layout_);
    const VarSlot v = layout_->declare(n.var, Type::Int);
    StmtP body = stmt(*n.body);
    return std::make_unique<ForNode>(v.index, std::move(lo), std::move(hi), std::move(st), std::move(body), s.pos);
  }

  StmtP stmt_node(const Stmt&, const BlockStmt& n) {
    ScopeGuard g(layout_);
    auto block = std::make_unique<BlockNode>();
    for (const auto& c : n.stmts) block->stmts.push_back(stmt(*c));
    return block;
  }

  StmtP stmt_node(const Stmt&, const CallStmt& n) {
    const Expr& e = *n.call;
    const auto& call = std::get<CallExpr>(e.node);
    if (is_builtin(call.callee)) return std::make_unique<DiscardNode>(builtin(e, call));
    if (auto it = functions_.find(call.callee); it != functions_.end()) {
      return std::make_unique<CallStmtNode>(call_site(*it->second, call, e.pos));
    }
    return std::make_unique<ExternStmtNode>(extern_site(call, e.pos));
  }

  StmtP stmt_node(const Stmt&, const ReturnStmt& n) {
    Compiled v;
    if (n.value) v = coerce(expr(*n.value), return_type_);
    return std::make_unique<ReturnNode>(std::move(v));
  }

  StmtP stmt_node(const Stmt&, const PrintStmt& n) {
    auto node = std::make_unique<PrintNode>();
    for (const auto& a : n.args) {
      PrintNode::Item item;
      if (const auto* str = std::get_if<StringLit>(&a->node)) item.text = str->value;
      else item.value = expr(*a);
      node->items.push_back(std::move(item));
    }
    return node;
  }

  StmtP stmt_node(const Stmt&, const WorkshareLoopStmt&) {
    throw std::logic_error("worksharing loop shell outside its region");
  }

  StmtP stmt_node(const Stmt& s, const ForkStmt& n) {
    const OutlinedRegion& src = p_.regions.at(static_cast<std::size_t>(n.region));
    auto r = std::make_unique<Region>();
    r->id = src.id;
    r->kind = src.kind;
    r->num_threads = src.num_threads;
    r->pos = s.pos;

    std::vector<VarSlot> parents;
    for (const auto& cap : src.captures) parents.push_back(layout_->find(cap.name));
    if (src.loop) {
      r->lower = int_expr(*src.loop->lower);
      r->upper = int_expr(*src.loop->upper);
      if (src.loop->step) r->step = int_expr(*src.loop->step);
      r->schedule = src.loop->schedule;
      r->chunk = src.loop->chunk;
    }

    Layout inner;
    Layout* outer = std::exchange(layout_, &inner);
    {
      ScopeGuard g(layout_);
      for (std::size_t k = 0; k < src.captures.size(); ++k) {
        const Capture& cap = src.captures[k];
        const VarSlot local = inner.declare(cap.name, cap.type);
        r->bindings.push_back(Binding{cap.mode, cap.type, cap.op, parents[k].index, local.index});
        if (cap.mode == CaptureMode::ReductionSlot) r->reductions.push_back(k);
      }
      if (const auto* shell = std::get_if<WorkshareLoopStmt>(&src.body->node)) {
        r->induction = inner.declare(shell->var, Type::Int).index;
        r->body = stmt(*shell->body);
      } else {
        r->body = stmt(*src.body);
      }
    }
    layout_ = outer;
    r->scalars = inner.scalars;
    r->arrays = inner.arrays;
    return std::make_unique<ForkNode>(std::move(r));
  }

  const LoweredProgram& p_;
  const ExternRegistry& externs_;
  std::map<std::string, Function*, std::less<>> functions_;
  Layout* layout_ = nullptr;
  Type return_type_ = Type::Void;
};

const ExternRegistry& demo_registry() {
  static const ExternRegistry r = ExternRegistry::with_demo_externs();
  return r;
}

}  // namespace

ProgramOutput run_lowered(const LoweredProgram& p, const RunConfig& config) {
  const ExternRegistry& externs = config.externs ? *config.externs : demo_registry();
  Executable exe = Compiler(p, externs).compile();
  auto it = exe.functions.find("main");
  if (it == exe.functions.end()) throw std::logic_error("program has no main after checking");

  RunState run(config);
  CallSite entry;
  entry.fn = it->second.get();
  Ctx host{nullptr, nullptr, &run, nullptr};
  const Word status = entry.invoke(host);

  ProgramOutput out;
  out.printed = run.sink.text();
  out.exit_status = entry.fn->ret == Type::Int ? static_cast<int>(status) : 0;
  out.warnings = run.warnings.messages();
  out.region_seconds = run.region_seconds;
  return out;
}

ProgramOutput run_source(std::string_view source, const RunConfig& config) {
  return run_lowered(lower_program(load_program(source)), config);
}

}  // namespace miniomp
