#include "miniomp/runtime.hpp"

#include <charconv>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <thread>

namespace miniomp::runtime {

void Barrier::arrive_and_wait() {
  std::unique_lock lock(mutex_);
  if (cancelled_) throw TeamCancelled{};
  const std::uint64_t gen = generation_;
  if (++arrived_ == parties_) {
    arrived_ = 0;
    ++generation_;
    cv_.notify_all();
    return;
  }
  cv_.wait(lock, [&] { return generation_ != gen || cancelled_; });
  if (generation_ == gen) throw TeamCancelled{};
}

void Barrier::cancel() {
  {
    std::lock_guard lock(mutex_);
    cancelled_ = true;
  }
  cv_.notify_all();
}

std::uint64_t Barrier::generation() const {
  std::lock_guard lock(mutex_);
  return generation_;
}

Team::Team(int size) : size_(size), barrier_(size), partial_words_(static_cast<std::size_t>(size)) {}

void Team::cancel() {
  cancelled_.store(true, std::memory_order_release);
  barrier_.cancel();
}

namespace {
thread_local const Member* t_member = nullptr;

struct MemberScope {
  explicit MemberScope(const Member* m) : saved(t_member) { t_member = m; }
  ~MemberScope() { t_member = saved; }
  const Member* saved;
};
}  // namespace

const Member* current_member() { return t_member; }

void WarningChannel::warn_once(std::string_view key, std::string_view message) {
  std::lock_guard lock(mutex_);
  for (const auto& k : keys_) {
    if (k == key) return;
  }
  keys_.emplace_back(key);
  std::string line = std::string(kWarningPrefix) + std::string(message);
  if (echo_) std::cerr << line << std::endl;
  messages_.push_back(std::move(line));
}

std::vector<std::string> WarningChannel::messages() const {
  std::lock_guard lock(mutex_);
  return messages_;
}

unsigned hardware_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

int resolve_threads(std::optional<std::int64_t> clause, std::optional<int> cli, std::optional<std::string_view> env,
                    unsigned hardware) {
  if (clause && *clause >= 1) return static_cast<int>(std::min<std::int64_t>(*clause, 1 << 16));
  if (cli && *cli >= 1) return *cli;
  if (env) {
    int v = 0;
    auto [p, ec] = std::from_chars(env->data(), env->data() + env->size(), v);
    if (ec == std::errc{} && p == env->data() + env->size() && v >= 1) return v;
  }
  return static_cast<int>(std::max(1u, hardware));
}

int resolve_threads(std::optional<std::int64_t> clause, std::optional<int> cli) {
  std::optional<std::string_view> env;
  if (const char* e = std::getenv(std::string(kThreadsEnvVar).c_str())) env = e;
  return resolve_threads(clause, cli, env, hardware_threads());
}

int fork_call(int team_size, const std::function<void(Member&)>& body, const ForkOptions& options) {
  if (current_member() != nullptr) {
    if (options.warnings) {
      options.warnings->warn_once("nested", "nested parallel region serialized to a team of 1 thread");
    }
    team_size = 1;
  }
  team_size = std::max(team_size, 1);

  Team team(team_size);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(team_size));

  auto run_member = [&](int tid) {
    Member m{tid, &team};
    MemberScope scope(&m);
    try {
      body(m);
    } catch (const TeamCancelled&) {
      // Another member failed first; its error is the one reported.
    } catch (...) {
      errors[static_cast<std::size_t>(tid)] = std::current_exception();
      team.cancel();
    }
  };

  {
    std::vector<std::jthread> workers;
    workers.reserve(static_cast<std::size_t>(team_size - 1));
    try {
      for (int tid = 1; tid < team_size; ++tid) workers.emplace_back(run_member, tid);
    } catch (...) {
      team.cancel();
      throw;
    }
    run_member(0);
  }  // jthread destructors join every worker

  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return team_size;
}

void run_schedule(const LoopBounds& b, ScheduleKind schedule, std::optional<std::int64_t> chunk, int tid,
                  int team_size, LoopDispatcher& dispatcher, const std::function<bool()>& cancelled,
                  const std::function<void(const IterationChunk&)>& on_chunk) {
  switch (schedule) {
    case ScheduleKind::Static:
      for (const auto& c : static_chunks(b.lower, b.upper, b.step, chunk, tid, team_size)) {
        if (cancelled && cancelled()) return;
        on_chunk(c);
      }
      return;
    case ScheduleKind::Dynamic:
      while (auto c = dispatcher.dynamic_next(chunk.value_or(1))) {
        if (cancelled && cancelled()) return;
        on_chunk(*c);
      }
      return;
    case ScheduleKind::Guided:
      while (auto c = dispatcher.guided_next(team_size, chunk.value_or(1))) {
        if (cancelled && cancelled()) return;
        on_chunk(*c);
      }
      return;
  }
}

void workshare(const Member& m, const std::function<LoopBounds()>& eval_bounds, ScheduleKind schedule,
               std::optional<std::int64_t> chunk, const std::function<void(const IterationChunk&)>& on_chunk,
               const std::function<void()>& after_loop, const std::function<void()>& leader_finish) {
  Team& team = *m.team;
  if (m.tid == 0) {
    LoopBounds b = eval_bounds();
    require_valid_step(b.step);
    team.published_bounds() = b;
    team.dispatcher().reset(b);
  }
  team.barrier().arrive_and_wait();
  const LoopBounds b = team.published_bounds();
  run_schedule(b, schedule, chunk, m.tid, team.size(), team.dispatcher(), [&] { return team.cancelled(); },
               on_chunk);
  if (after_loop) after_loop();
  team.barrier().arrive_and_wait();
  if (m.tid == 0 && leader_finish) leader_finish();
  team.barrier().arrive_and_wait();
}

}  // namespace miniomp::runtime
