#pragma once

// Allocation accounting for tensor buffers.
//
// Every tensor buffer is a std::vector with CountingAllocator, so the live
// and peak element counts below track exactly the dense tensors the engine
// materializes. Index arrays (top-k results, negative sets) are plain
// vectors and are not counted.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

namespace seqrec::num {

// Byte width used for all memory reporting. Tensors are stored as 64-bit
// reals; reports use 4-byte elements so figures compare with fp32 training.
inline constexpr std::size_t kAccountingBytesPerElement = 4;

class MemoryCounter {
 public:
  static void on_allocate(std::size_t elements) noexcept;
  static void on_deallocate(std::size_t elements) noexcept;

  static std::int64_t live_elements() noexcept;
  static std::int64_t peak_elements() noexcept;
  // Resets the peak to the current live count.
  static void reset_peak() noexcept;
};

// Scoped peak measurement: peak elements allocated above the live count at
// construction time.
class MemoryProbe {
 public:
  MemoryProbe() noexcept;

  std::int64_t baseline_elements() const noexcept { return baseline_; }
  std::int64_t peak_elements() const noexcept;
  std::int64_t peak_bytes() const noexcept {
    return peak_elements() * static_cast<std::int64_t>(kAccountingBytesPerElement);
  }

 private:
  std::int64_t baseline_;
};

template <class T>
struct CountingAllocator {
  using value_type = T;

  CountingAllocator() noexcept = default;
  template <class U>
  CountingAllocator(const CountingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    MemoryCounter::on_allocate(n);
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    MemoryCounter::on_deallocate(n);
    std::allocator<T>{}.deallocate(p, n);
  }

  template <class U>
  bool operator==(const CountingAllocator<U>&) const noexcept { return true; }
};

using Real = double;
using Buffer = std::vector<Real, CountingAllocator<Real>>;

}  // namespace seqrec::num
