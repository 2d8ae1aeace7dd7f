#pragma once

// Fork/join team runtime: loop schedulers, reduction folding, a reusable
// cancellable barrier, and fork_call. The scheduler and reduction pieces are
// pure and header-only; team management lives in runtime.cpp.

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "miniomp/diagnostics.hpp"
#include "miniomp/directives.hpp"

namespace miniomp::runtime {

/// Half-open range of iteration values [lower, upper) visited with `step`.
struct IterationChunk {
  std::int64_t lower = 0;
  std::int64_t upper = 0;
  std::int64_t step = 1;

  bool operator==(const IterationChunk&) const = default;
};

/// Loop iteration space: values lower, lower+step, ... below upper.
struct LoopBounds {
  std::int64_t lower = 0;
  std::int64_t upper = 0;
  std::int64_t step = 1;
};

inline void require_valid_step(std::int64_t step) {
  if (step < 1) throw Trap(TrapKind::InvalidLoop, "loop step must be at least 1, got " + std::to_string(step));
}

/// ceil(max(0, upper - lower) / step), computed without overflow.
inline std::int64_t iteration_count(std::int64_t lower, std::int64_t upper, std::int64_t step) {
  require_valid_step(step);
  if (upper <= lower) return 0;
  const auto span = static_cast<unsigned __int128>(static_cast<__int128>(upper) - lower);
  return static_cast<std::int64_t>((span + static_cast<unsigned __int128>(step) - 1) / step);
}

/// Chunk covering iteration indices [first, last) of the given space.
inline IterationChunk chunk_for(const LoopBounds& b, std::int64_t first, std::int64_t last) {
  const __int128 lo = static_cast<__int128>(b.lower) + static_cast<__int128>(first) * b.step;
  const __int128 hi = static_cast<__int128>(b.lower) + static_cast<__int128>(last) * b.step;
  return IterationChunk{static_cast<std::int64_t>(lo),
                        static_cast<std::int64_t>(std::min<__int128>(hi, b.upper)), b.step};
}

/// Chunks a member gets under schedule(static[, chunk]).
/// Without a chunk: contiguous near-equal blocks, the first N mod T members
/// taking one extra iteration. With a chunk: chunks of `chunk` iterations
/// dealt round-robin starting at member 0.
inline std::vector<IterationChunk> static_chunks(std::int64_t lower, std::int64_t upper, std::int64_t step,
                                                 std::optional<std::int64_t> chunk, int tid, int team_size) {
  const std::int64_t n = iteration_count(lower, upper, step);
  const LoopBounds b{lower, upper, step};
  std::vector<IterationChunk> out;
  if (!chunk) {
    const std::int64_t base = n / team_size;
    const std::int64_t extra = n % team_size;
    const std::int64_t first = tid * base + std::min<std::int64_t>(tid, extra);
    const std::int64_t count = base + (tid < extra ? 1 : 0);
    if (count > 0) out.push_back(chunk_for(b, first, first + count));
    return out;
  }
  const std::int64_t c = *chunk;
  if (c < 1) throw Trap(TrapKind::InvalidLoop, "schedule chunk must be at least 1");
  for (__int128 first = static_cast<__int128>(tid) * c; first < n; first += static_cast<__int128>(team_size) * c) {
    const auto f = static_cast<std::int64_t>(first);
    out.push_back(chunk_for(b, f, static_cast<std::int64_t>(std::min<__int128>(first + c, n))));
  }
  return out;
}

/// Shared claim cursor for dynamic and guided schedules.
class LoopDispatcher {
public:
  LoopDispatcher() = default;
  explicit LoopDispatcher(const LoopBounds& b) { reset(b); }

  /// Not safe against concurrent claims; call while no member is claiming.
  void reset(const LoopBounds& b) {
    bounds_ = b;
    total_ = iteration_count(b.lower, b.upper, b.step);
    next_.store(0, std::memory_order_relaxed);
  }

  const LoopBounds& bounds() const { return bounds_; }
  std::int64_t total() const { return total_; }

  /// Next `chunk` unclaimed iterations in ascending order, or nullopt once
  /// the space is exhausted.
  std::optional<IterationChunk> dynamic_next(std::int64_t chunk = 1) {
    chunk = std::max<std::int64_t>(chunk, 1);
    std::int64_t cur = next_.load(std::memory_order_relaxed);
    while (cur < total_) {
      const std::int64_t end = total_ - cur <= chunk ? total_ : cur + chunk;
      if (next_.compare_exchange_weak(cur, end, std::memory_order_relaxed)) return chunk_for(bounds_, cur, end);
    }
    return std::nullopt;
  }

  /// Claims max(min_chunk, ceil(remaining / team_size)) iterations, clamped
  /// to what remains.
  std::optional<IterationChunk> guided_next(int team_size, std::int64_t min_chunk = 1) {
    min_chunk = std::max<std::int64_t>(min_chunk, 1);
    std::int64_t cur = next_.load(std::memory_order_relaxed);
    while (cur < total_) {
      const std::int64_t remaining = total_ - cur;
      std::int64_t size = std::max(min_chunk, (remaining + team_size - 1) / team_size);
      size = std::min(size, remaining);
      if (next_.compare_exchange_weak(cur, cur + size, std::memory_order_relaxed)) {
        return chunk_for(bounds_, cur, cur + size);
      }
    }
    return std::nullopt;
  }

private:
  LoopBounds bounds_;
  std::int64_t total_ = 0;
  std::atomic<std::int64_t> next_{0};
};

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <class T>
T reduction_identity(ReductionOp op) {
  static_assert(std::is_same_v<T, std::int64_t> || std::is_same_v<T, double>);
  switch (op) {
    case ReductionOp::Add: return T{0};
    case ReductionOp::Mul: return T{1};
    case ReductionOp::Min:
      if constexpr (std::is_same_v<T, double>) return std::numeric_limits<double>::infinity();
      else return std::numeric_limits<T>::max();
    case ReductionOp::Max:
      if constexpr (std::is_same_v<T, double>) return -std::numeric_limits<double>::infinity();
      else return std::numeric_limits<T>::min();
  }
  return T{0};
}

/// a op b. Integer add/mul overflow raises Trap(IntegerOverflow).
template <class T>
T reduce_pair(ReductionOp op, T a, T b) {
  switch (op) {
    case ReductionOp::Add:
      if constexpr (std::is_integral_v<T>) {
        T r;
        if (__builtin_add_overflow(a, b, &r)) throw Trap(TrapKind::IntegerOverflow, "integer overflow in reduction");
        return r;
      } else {
        return a + b;
      }
    case ReductionOp::Mul:
      if constexpr (std::is_integral_v<T>) {
        T r;
        if (__builtin_mul_overflow(a, b, &r)) throw Trap(TrapKind::IntegerOverflow, "integer overflow in reduction");
        return r;
      } else {
        return a * b;
      }
    case ReductionOp::Min: return b < a ? b : a;
    case ReductionOp::Max: return b > a ? b : a;
  }
  return a;
}

/// Left fold of `op` over `partials` in index (tid) order. The association
/// is fixed, so the result is bit-reproducible for a fixed team size.
template <class T>
T combine(ReductionOp op, std::span<const T> partials) {
  if (partials.empty()) return reduction_identity<T>(op);
  T acc = partials.front();
  for (std::size_t i = 1; i < partials.size(); ++i) acc = reduce_pair(op, acc, partials[i]);
  return acc;
}

template <class T>
T combine(ReductionOp op, std::initializer_list<T> partials) {
  return combine<T>(op, std::span<const T>(partials.begin(), partials.size()));
}

// ---------------------------------------------------------------------------
// Teams
// ---------------------------------------------------------------------------

/// Thrown out of a barrier wait when another member has failed.
struct TeamCancelled {};

/// Reusable barrier with a generation counter. Waiters block on a condition
/// variable, so oversubscribed teams do not spin.
class Barrier {
public:
  explicit Barrier(int parties) : parties_(parties) {}

  /// Returns after all parties arrive in this episode. Throws TeamCancelled
  /// if cancel() is called while waiting or before arriving.
  void arrive_and_wait();
  void cancel();
  std::uint64_t generation() const;

private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  const int parties_;
  int arrived_ = 0;
  std::uint64_t generation_ = 0;
  bool cancelled_ = false;
};

class Team;

/// One thread's view of its team.
struct Member {
  int tid = 0;
  Team* team = nullptr;
};

/// Shared state of one active team. Worksharing constructs encountered inside
/// a parallel region use the team's dispatcher and reduction table one at a
/// time, separated by barriers.
class Team {
public:
  explicit Team(int size);

  int size() const { return size_; }
  Barrier& barrier() { return barrier_; }
  LoopDispatcher& dispatcher() { return dispatcher_; }
  bool cancelled() const { return cancelled_.load(std::memory_order_acquire); }
  void cancel();

  /// Bounds published by member 0 for the current worksharing construct.
  LoopBounds& published_bounds() { return published_bounds_; }

  /// Per-member partial values of the current construct, row per tid.
  std::vector<std::vector<std::int64_t>>& partial_words() { return partial_words_; }

private:
  const int size_;
  Barrier barrier_;
  LoopDispatcher dispatcher_;
  LoopBounds published_bounds_;
  std::vector<std::vector<std::int64_t>> partial_words_;
  std::atomic<bool> cancelled_{false};
};

/// Member the calling thread is running as, or nullptr on the host.
const Member* current_member();

/// Reports nested-region serialization; called at most once per channel.
class WarningChannel {
public:
  explicit WarningChannel(bool echo_to_stderr = false) : echo_(echo_to_stderr) {}

  /// Emit "miniomp: warning: <message>" once per distinct `key`.
  void warn_once(std::string_view key, std::string_view message);
  std::vector<std::string> messages() const;

private:
  mutable std::mutex mutex_;
  std::vector<std::string> keys_;
  std::vector<std::string> messages_;
  bool echo_;
};

inline constexpr std::string_view kWarningPrefix = "miniomp: warning: ";
inline constexpr std::string_view kThreadsEnvVar = "MINIOMP_NUM_THREADS";

/// Team size precedence: num_threads clause, then the --threads override,
/// then MINIOMP_NUM_THREADS (ignored unless a positive integer), then the
/// detected hardware parallelism (at least 1).
int resolve_threads(std::optional<std::int64_t> clause, std::optional<int> cli,
                    std::optional<std::string_view> env, unsigned hardware);

/// resolve_threads with the live environment and hardware.
int resolve_threads(std::optional<std::int64_t> clause, std::optional<int> cli);

unsigned hardware_threads();

struct ForkOptions {
  WarningChannel* warnings = nullptr;
};

/// Run `body` once on each member of a new team of `team_size` threads and
/// return after all of them finish. Member 0 runs on the calling thread.
/// A call from inside a team runs the body inline on a team of one and
/// reports the serialization on the warning channel. If members throw, the
/// exception of the lowest failing tid is rethrown after the join.
/// Returns the team size actually used.
int fork_call(int team_size, const std::function<void(Member&)>& body, const ForkOptions& options = {});

/// Worksharing construct executed by every member of `m`'s team:
///   1. member 0 evaluates the bounds and resets the dispatcher; barrier;
///   2. every member iterates its chunks, then runs `after_loop`; barrier;
///   3. member 0 runs `leader_finish` (reduction write-back); barrier.
void workshare(const Member& m, const std::function<LoopBounds()>& eval_bounds, ScheduleKind schedule,
               std::optional<std::int64_t> chunk, const std::function<void(const IterationChunk&)>& on_chunk,
               const std::function<void()>& after_loop = {}, const std::function<void()>& leader_finish = {});

/// Iterate the chunks member `tid` of a `team_size` team gets for a loop whose
/// dispatcher (dynamic/guided) is already reset.
void run_schedule(const LoopBounds& b, ScheduleKind schedule, std::optional<std::int64_t> chunk, int tid,
                  int team_size, LoopDispatcher& dispatcher, const std::function<bool()>& cancelled,
                  const std::function<void(const IterationChunk&)>& on_chunk);

}  // namespace miniomp::runtime
