#include "seqrec/harness/memory_estimate.hpp"

#include <array>
#include <cstdio>
#include <vector>

#include "seqrec/errors.hpp"
#include "seqrec/harness/loss_step.hpp"

namespace seqrec::harness {

MemoryEstimate estimate_memory(const LossSpec& spec, std::size_t s, std::size_t l,
                               std::size_t catalog, std::size_t dim) {
  if (s == 0 || l == 0 || catalog == 0 || dim == 0) {
    throw ParameterError("estimate_memory: s, l, C and d must be >= 1");
  }
  const std::size_t n = s * l;
  MemoryEstimate e;
  switch (spec.kind) {
    case LossKind::kCe:
      e.logits_elements = n * catalog;
      break;
    case LossKind::kBce:
      e.logits_elements = 2 * n;
      e.auxiliary_elements = n;
      break;
    case LossKind::kBcePlus:
    case LossKind::kCeMinus:
      if (spec.negatives == 0) throw ParameterError("estimate_memory: k must be >= 1");
      e.logits_elements = n * (spec.negatives + 1);
      e.auxiliary_elements = n * spec.negatives;
      break;
    case LossKind::kSce: {
      const auto& c = spec.sce;
      c.validate();
      e.logits_elements = c.n_buckets * c.bucket_x * c.bucket_y + c.n_buckets * c.bucket_x;
      e.auxiliary_elements = c.n_buckets * (n + catalog);
      break;
    }
  }
  return e;
}

std::int64_t measure_loss_peak_bytes(const LossSpec& spec, std::size_t s, std::size_t l,
                                     std::size_t catalog, std::size_t dim, std::uint64_t seed) {
  auto init = num::make_rng(seed, num::RngStream::kInit);
  auto loss_rng = num::make_rng(seed, num::RngStream::kLoss);
  const std::size_t n = s * l;
  auto x = num::Tensor::randn({n, dim}, init, 1.0, true);
  auto y = num::Tensor::randn({catalog, dim}, init, 1.0, true);
  std::vector<num::Index> targets(n);
  for (auto& t : targets) t = static_cast<num::Index>(init.below(catalog) + 1);
  std::vector<std::uint8_t> valid(n, 1);
  x.mutable_grad();
  y.mutable_grad();

  num::MemoryProbe probe;
  {
    auto step = compute_loss(spec, x, y, targets, valid, loss_rng, sce::SizePolicy::kStrict);
    num::backward(step.value);
  }
  return probe.peak_bytes();
}

std::string format_bytes(double bytes) {
  static constexpr std::array<const char*, 5> units{"B", "KB", "MB", "GB", "TB"};
  std::size_t u = 0;
  while (bytes >= 1000.0 && u + 1 < units.size()) {
    bytes /= 1000.0;
    ++u;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f %s", bytes, units[u]);
  return buf;
}

nlohmann::json estimate_to_json(const MemoryEstimate& e) {
  nlohmann::json j{{"logits_elements", e.logits_elements},
                   {"logits_bytes", e.logits_bytes()},
                   {"auxiliary_elements", e.auxiliary_elements},
                   {"auxiliary_bytes", e.auxiliary_bytes()},
                   {"total_bytes", e.total_bytes()},
                   {"bytes_per_element", num::kAccountingBytesPerElement}};
  if (e.measured_peak_bytes) j["measured_peak_bytes"] = *e.measured_peak_bytes;
  return j;
}

}  // namespace seqrec::harness
