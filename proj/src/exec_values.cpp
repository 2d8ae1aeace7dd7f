#include <atomic>
#include <bit>
#include <chrono>

#include "miniomp/exec.hpp"

namespace miniomp {

ArrayStorage::ArrayStorage(Type element, std::int64_t length)
    : element_(element), length_(length) {
  if (length < 0) {
    throw Trap(TrapKind::InvalidArrayLength, "array length must be non-negative, got " + std::to_string(length));
  }
  words_ = std::make_unique<std::int64_t[]>(static_cast<std::size_t>(length));
}

void ArrayStorage::check(std::int64_t i, SourcePos pos) const {
  if (i < 0 || i >= length_) {
    throw Trap(TrapKind::OutOfBounds,
               "index " + std::to_string(i) + " out of bounds for array of length " + std::to_string(length_), pos);
  }
}

std::int64_t ArrayStorage::load_word(std::int64_t i, SourcePos pos) const {
  check(i, pos);
  return std::atomic_ref<std::int64_t>(words_[static_cast<std::size_t>(i)]).load(std::memory_order_relaxed);
}

void ArrayStorage::store_word(std::int64_t i, std::int64_t w, SourcePos pos) {
  check(i, pos);
  std::atomic_ref<std::int64_t>(words_[static_cast<std::size_t>(i)]).store(w, std::memory_order_relaxed);
}

double ArrayStorage::get_float(std::int64_t i) const { return std::bit_cast<double>(load_word(i)); }

void ArrayStorage::set_float(std::int64_t i, double v) { store_word(i, std::bit_cast<std::int64_t>(v)); }

std::string bind_extern(std::string_view name, ExternAbi abi) {
  std::string s(name);
  if (abi == ExternAbi::Fortran) s += '_';
  return s;
}

void ExternRegistry::add(std::string symbol, std::size_t arity, ExternCallback callback) {
  entries_.insert_or_assign(std::move(symbol), Entry{arity, std::move(callback)});
}

const ExternRegistry::Entry* ExternRegistry::find(std::string_view symbol) const {
  auto it = entries_.find(symbol);
  return it == entries_.end() ? nullptr : &it->second;
}

namespace {

double wall_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

ExternRegistry ExternRegistry::with_demo_externs() {
  ExternRegistry r;
  r.add("dcopy_", 3, [](std::span<const Value> args) -> Value {
    const auto* n = std::get_if<std::int64_t>(&args[0]);
    const auto* src = std::get_if<ArrayHandle>(&args[1]);
    const auto* dst = std::get_if<ArrayHandle>(&args[2]);
    if (!n || !src || !dst || !*src || !*dst) throw Trap(TrapKind::ExternFailure, "dcopy_: expected (int, array, array)");
    for (std::int64_t i = 0; i < *n; ++i) (*dst)->store_word(i, (*src)->load_word(i));
    return {};
  });
  r.add("wtime_", 0, [](std::span<const Value>) -> Value { return wall_seconds(); });
  return r;
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

// Output i of a SplitMix64 stream started at state 0.
std::int64_t split_seed(std::int64_t i) {
  const std::uint64_t golden = 0x9E3779B97F4A7C15ull;
  return static_cast<std::int64_t>(mix64((static_cast<std::uint64_t>(i) + 1) * golden));
}

double rand_uniform(std::int64_t seed) {
  return static_cast<double>(mix64(static_cast<std::uint64_t>(seed)) >> 11) * 0x1.0p-53;
}

}  // namespace miniomp
