#include "seqrec/numerics/memory.hpp"

#include <algorithm>

namespace seqrec::num {
namespace {

std::atomic<std::int64_t> g_live{0};
std::atomic<std::int64_t> g_peak{0};

}  // namespace

void MemoryCounter::on_allocate(std::size_t elements) noexcept {
  const auto now = g_live.fetch_add(static_cast<std::int64_t>(elements),
                                    std::memory_order_relaxed) +
                   static_cast<std::int64_t>(elements);
  auto peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak &&
         !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}

void MemoryCounter::on_deallocate(std::size_t elements) noexcept {
  g_live.fetch_sub(static_cast<std::int64_t>(elements), std::memory_order_relaxed);
}

std::int64_t MemoryCounter::live_elements() noexcept {
  return g_live.load(std::memory_order_relaxed);
}

std::int64_t MemoryCounter::peak_elements() noexcept {
  return g_peak.load(std::memory_order_relaxed);
}

void MemoryCounter::reset_peak() noexcept {
  g_peak.store(g_live.load(std::memory_order_relaxed), std::memory_order_relaxed);
}

MemoryProbe::MemoryProbe() noexcept : baseline_(MemoryCounter::live_elements()) {
  MemoryCounter::reset_peak();
}

std::int64_t MemoryProbe::peak_elements() const noexcept {
  return std::max<std::int64_t>(0, MemoryCounter::peak_elements() - baseline_);
}

}  // namespace seqrec::num
