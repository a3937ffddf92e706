// Acceptance checks, one line per criterion. Exit status is nonzero when any
// criterion fails.

#include <malloc.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>

#include "seqrec/data/split.hpp"
#include "seqrec/data/synthetic.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/eval/metrics.hpp"
#include "seqrec/harness/memory_estimate.hpp"
#include "seqrec/harness/pareto.hpp"
#include "seqrec/harness/sweep.hpp"
#include "seqrec/harness/trainer.hpp"
#include "seqrec/losses/losses.hpp"
#include "seqrec/numerics/gradcheck.hpp"
#include "seqrec/numerics/ops.hpp"
#include "seqrec/sce/sce_loss.hpp"
#include "support.hpp"

using namespace seqrec;
using namespace testing;
using num::Rng;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] C%d %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// C1: full-coverage SCE against full CE.
void oracle_equivalence() {
  Rng rng(1001, 0), loss_rng(1001, 4);
  Real worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto in = random_instance(rng);
    sce::SceConfig c;
    c.n_buckets = 1;
    c.bucket_x = in.valid_count;
    c.bucket_y = in.catalog;
    c.use_mix = trial % 2 == 0;
    auto x1 = in.x.clone(true), y1 = in.y.clone(true);
    auto x2 = in.x.clone(true), y2 = in.y.clone(true);
    auto s = sce::sce_loss(x1, y1, in.targets, c, in.valid, loss_rng);
    auto f = losses::full_ce(x2, y2, in.targets, in.valid);
    num::backward(s.value);
    num::backward(f.value);
    worst = std::max({worst, rel_diff(s.value.item(), f.value.item()),
                      num::relative_error(x1.grad(), x2.grad()),
                      num::relative_error(y1.grad(), y2.grad())});
  }
  report(1, worst <= 1e-10, "full-coverage SCE == full CE (1000 instances)",
         fmt("max relative error %.3g (tol 1e-10)", worst));
}

// C2: analytic gradients against central differences.
void gradient_correctness() {
  Rng rng(1002, 0);
  const char* names[] = {"sce_loss", "full_ce", "bce", "bce_plus", "ce_minus"};
  Real worst[5] = {0, 0, 0, 0, 0};
  for (int loss = 0; loss < 5; ++loss) {
    for (int trial = 0; trial < 100; ++trial) {
      auto in = random_instance(rng, 4, 8, 50, 16, 3);
      auto neg = losses::sample_negatives(in.targets, 1 + rng.below(in.catalog - 1), in.catalog, rng);
      auto one = losses::sample_negatives(in.targets, 1, in.catalog, rng);
      sce::BucketAssignment frozen;
      if (loss == 0) {
        sce::SceConfig c;
        c.n_buckets = 1 + rng.below(4);
        c.bucket_x = 1 + rng.below(in.valid_count);
        c.bucket_y = 1 + rng.below(in.catalog);
        frozen = sce::sce_loss(in.x, in.y, in.targets, c, in.valid, rng).assignment;
      }
      std::function<Tensor(const Tensor&, const Tensor&)> f =
          [&](const Tensor& x, const Tensor& y) -> Tensor {
        switch (loss) {
          case 0: return sce::sce_loss_with_assignment(x, y, in.targets, in.valid, frozen).value;
          case 1: return losses::full_ce(x, y, in.targets, in.valid).value;
          case 2: return losses::bce(x, y, in.targets, one, in.valid).value;
          case 3: return losses::bce_plus(x, y, in.targets, neg, in.valid).value;
          default: return losses::ce_minus(x, y, in.targets, neg, in.valid).value;
        }
      };
      auto x = in.x.clone(true), y = in.y.clone(true);
      num::backward(f(x, y));
      auto fx = num::finite_diff_grad([&](const Tensor& t) { return f(t, y.detach()).item(); }, x, 1e-6);
      auto fy = num::finite_diff_grad([&](const Tensor& t) { return f(x.detach(), t).item(); }, y, 1e-6);
      worst[loss] = std::max({worst[loss], num::relative_error(x.grad(), fx.data()),
                              num::relative_error(y.grad(), fy.data())});
    }
  }
  std::string detail;
  bool ok = true;
  for (int i = 0; i < 5; ++i) {
    ok &= worst[i] <= 1e-5;
    detail += std::string(i ? ", " : "") + names[i] + fmt(" %.2g", worst[i]);
  }
  report(2, ok, "gradients vs central differences (h=1e-6, 100 instances each)",
         detail + " (tol 1e-5)");
}

// C3: dCE/dlogits = softmax - onehot.
void logit_gradient_identity() {
  Rng rng(1003, 0);
  Real worst = 0;
  bool bounded = true;
  for (int trial = 0; trial < 100; ++trial) {
    auto in = random_instance(rng);
    Tensor logits;
    {
      num::NoGradGuard g;
      logits = num::matmul_nt(in.x, in.y);
    }
    logits = logits.clone(true);
    num::backward(losses::ce_from_logits(logits, in.targets, in.valid).value);
    const Real count = static_cast<Real>(in.valid_count);
    for (std::size_t r = 0; r < in.n; ++r) {
      if (!in.valid[r]) continue;
      std::vector<Real> row(in.catalog);
      for (std::size_t c = 0; c < in.catalog; ++c) row[c] = logits.at(r, c);
      auto p = num::softmax(row);
      for (std::size_t c = 0; c < in.catalog; ++c) {
        const Real g = logits.grad()[r * in.catalog + c] * count;
        const Real expect = p[c] - (static_cast<Index>(c + 1) == in.targets[r] ? 1.0 : 0.0);
        worst = std::max(worst, std::fabs(g - expect));
        bounded &= g >= -1.0 && g <= 1.0;
      }
    }
  }
  report(3, worst <= 1e-12 && bounded, "CE logit gradient == softmax - onehot (100 instances)",
         fmt("max abs deviation %.3g (tol 1e-12), all components in [-1, 1]: ", worst) +
             (bounded ? "yes" : "no"));
}

// C4: SCE per-position loss <= full CE per-position loss.
void lower_bound() {
  Rng rng(1004, 0);
  std::size_t checked = 0, violations = 0;
  Real worst = -INFINITY;
  for (int trial = 0; trial < 1000; ++trial) {
    auto in = random_instance(rng);
    sce::SceConfig c;
    c.n_buckets = 1 + rng.below(6);
    c.bucket_x = 1 + rng.below(in.valid_count);
    c.bucket_y = 1 + rng.below(in.catalog);
    c.use_mix = rng.below(2) == 1;
    auto out = sce::sce_loss(in.x, in.y, in.targets, c, in.valid, rng);
    auto ce = losses::full_ce(in.x, in.y, in.targets, in.valid);
    for (std::size_t r = 0; r < in.n; ++r) {
      if (std::isnan(out.per_position[r])) continue;
      ++checked;
      const Real gap = out.per_position[r] - ce.per_position[r];
      worst = std::max(worst, gap);
      violations += gap > 1e-12;
    }
  }
  report(4, violations == 0, "SCE per-position loss <= full CE (1000 instances)",
         fmt("%.0f covered positions, %.0f violations, max(SCE - CE) = %.3g (slack 1e-12)",
             static_cast<double>(checked), static_cast<double>(violations), worst));
}

// C5: memory law.
void memory_law() {
  using harness::LossKind;
  harness::LossSpec ce{LossKind::kCe, 1, {}};
  const auto paper = harness::estimate_memory(ce, 128, 200, 1'000'000, 64);
  const bool paper_ok = paper.logits_bytes() == 102'400'000'000ULL &&
                        harness::format_bytes(static_cast<double>(paper.logits_bytes())) == "102.4 GB";

  const std::size_t s = 32, l = 50, C = 20000, d = 64;
  sce::SceConfig sc;
  sc.n_buckets = 80;
  sc.bucket_x = 80;
  sc.bucket_y = 128;
  harness::LossSpec sce_spec{LossKind::kSce, 1, sc};
  const bool premise = sc.n_buckets * sc.bucket_x * sc.bucket_y <= s * l * C / 10;
  const auto ce_peak = harness::measure_loss_peak_bytes(ce, s, l, C, d, 5);
  const auto sce_peak = harness::measure_loss_peak_bytes(sce_spec, s, l, C, d, 5);
  const double measured = static_cast<double>(ce_peak) / static_cast<double>(sce_peak);
  const double analytic =
      static_cast<double>(harness::estimate_memory(ce, s, l, C, d).total_bytes()) /
      static_cast<double>(harness::estimate_memory(sce_spec, s, l, C, d).total_bytes());
  const bool tenth = sce_peak * 10 <= ce_peak;
  const bool ratio_ok = std::fabs(measured - analytic) <= 0.25 * analytic;
  report(5, paper_ok && premise && tenth && ratio_ok, "memory law",
         "s=128 l=200 C=1e6 CE logits = " +
             harness::format_bytes(static_cast<double>(paper.logits_bytes())) +
             fmt("; desk s=32 l=50 C=20000: CE peak %.1f MB, SCE (80/80/128) peak %.2f MB, "
                 "measured ratio %.2f vs analytic %.2f",
                 ce_peak / 1e6, sce_peak / 1e6, measured, analytic));
}

data::SequenceDataset planted(std::size_t catalog, std::size_t users, std::uint64_t seed) {
  data::PlantedConfig pc;
  pc.catalog_size = catalog;
  pc.users = users;
  pc.seed = seed;
  return data::temporal_split(data::make_planted_log(pc));
}

harness::TrainConfig desk_config(const data::SequenceDataset& ds) {
  harness::TrainConfig c;
  c.batch_size = 64;
  c.seq_len = 112;
  c.backbone.dim = 64;
  c.max_epochs = 60;
  c.patience = 5;
  c.sce.bucket_y = ds.catalog_size / 8;
  return c;
}

// C6: quality parity on planted data with SCE memory <= 1/8 of CE.
void quality_parity(const data::SequenceDataset& ds) {
  auto t0 = std::chrono::steady_clock::now();
  auto ce_cfg = desk_config(ds);
  auto sce_cfg = ce_cfg;
  sce_cfg.loss = harness::LossKind::kSce;
  auto ce = harness::train(ce_cfg, ds);
  auto sce = harness::train(sce_cfg, ds);
  const double ce_ndcg = ce.test.ndcg_at(10), sce_ndcg = sce.test.ndcg_at(10);
  const double mem_ratio = static_cast<double>(sce.loss_estimate.logits_elements) /
                           static_cast<double>(ce.loss_estimate.logits_elements);
  const auto& r = sce.resolved_sce;
  report(6, sce_ndcg >= 0.9 * ce_ndcg && mem_ratio <= 1.0 / 8.0,
         "SCE quality parity on planted data (C=" + std::to_string(ds.catalog_size) + ")",
         fmt("test NDCG@10 CE %.4f, SCE %.4f (ratio %.3f, need >= 0.9); ", ce_ndcg, sce_ndcg,
             sce_ndcg / ce_ndcg) +
             "SCE n_b=" + std::to_string(r.n_buckets) + " b_x=" + std::to_string(r.bucket_x) +
             " b_y=" + std::to_string(r.bucket_y) +
             fmt(", logit memory ratio %.4f (need <= 0.125), %.0f s", mem_ratio, seconds(t0)));
}

// C7: Mix raises the fraction of outputs selected exactly once.
void mix_diagnostic(const data::SequenceDataset& ds) {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {0, 1, 2}) {
    double mean[2] = {0, 0};
    for (int mix = 0; mix < 2; ++mix) {
      auto cfg = desk_config(ds);
      cfg.loss = harness::LossKind::kSce;
      cfg.sce.use_mix = mix == 1;
      cfg.seed = seed;
      cfg.max_epochs = 1000;
      harness::TrainHooks hooks;
      hooks.max_steps = 200;
      hooks.skip_evaluation = true;
      double sum = 0;
      std::size_t n = 0;
      hooks.on_step = [&](const harness::StepRecord& s) {
        sum += s.unique_selection_fraction.value_or(0.0);
        ++n;
      };
      harness::train(cfg, ds, hooks);
      mean[mix] = n ? sum / static_cast<double>(n) : 0.0;
    }
    wins += mean[1] > mean[0];
    if (!detail.empty()) detail += ", ";
    detail += fmt("seed %.0f: mix %.4f vs no-mix %.4f", static_cast<double>(seed), mean[1], mean[0]);
  }
  report(7, wins >= 2, "Mix raises mean unique_selection_fraction (200 steps, 3 seeds)",
         detail + "; Mix ahead in " + std::to_string(wins) + " of 3 seeds (need 2)");
}

// C8: metrics against exhaustive hand computation.
void metric_oracles() {
  Rng rng(1008, 0);
  Real worst = 0;
  bool identities = true;
  std::size_t instances = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t C = 10 + rng.below(11), users = 1 + rng.below(10);
    std::vector<std::size_t> ranks;
    std::vector<std::vector<Index>> lists;
    std::vector<std::vector<Real>> all_scores;
    for (std::size_t u = 0; u < users; ++u) {
      std::vector<Real> scores(C);
      for (auto& v : scores) v = static_cast<Real>(rng.below(6));
      const Index target = static_cast<Index>(1 + rng.below(C));
      // Hand ranking: count items strictly ahead, ties to the lower id.
      std::size_t ahead = 0;
      for (std::size_t c = 0; c < C; ++c) {
        const Index id = static_cast<Index>(c + 1);
        if (id == target) continue;
        if (scores[c] > scores[target - 1] || (scores[c] == scores[target - 1] && id < target)) ++ahead;
      }
      const std::size_t lib_rank = eval::target_rank(scores, target, {});
      identities &= lib_rank == ahead + 1;
      ranks.push_back(ahead + 1);
      lists.push_back(eval::top_items(scores, 10, {}));
      all_scores.push_back(scores);
    }
    auto rep = eval::summarize(ranks, lists, C);
    for (std::size_t k : eval::kCutoffs) {
      Real ndcg = 0, hr = 0;
      std::set<Index> seen;
      for (std::size_t u = 0; u < users; ++u) {
        if (ranks[u] <= k) {
          hr += 1.0;
          ndcg += 1.0 / std::log2(1.0 + static_cast<Real>(ranks[u]));
        }
        // Hand top-k: repeatedly take the best remaining item.
        std::vector<std::uint8_t> used(C, 0);
        for (std::size_t j = 0; j < k; ++j) {
          std::size_t best = C;
          for (std::size_t c = 0; c < C; ++c)
            if (!used[c] && (best == C || all_scores[u][c] > all_scores[u][best])) best = c;
          used[best] = 1;
          seen.insert(static_cast<Index>(best + 1));
        }
      }
      worst = std::max({worst, std::fabs(rep.ndcg_at(k) - ndcg / users),
                        std::fabs(rep.hr_at(k) - hr / users),
                        std::fabs(rep.cov_at(k) - static_cast<Real>(seen.size()) / C)});
    }
    identities &= rep.ndcg_at(1) == rep.hr_at(1);
    std::vector<std::vector<Index>> same(users, lists[0]);
    auto uniform = eval::summarize(ranks, same, C);
    for (std::size_t k : eval::kCutoffs)
      worst = std::max(worst, std::fabs(uniform.cov_at(k) - static_cast<Real>(k) / C));
    ++instances;
  }
  report(8, worst <= 1e-12 && identities, "metrics vs hand computation (C <= 20, users <= 10)",
         fmt("%.0f instances, max deviation %.3g (tol 1e-12), ndcg@1 == hr@1 and ranks agree: ",
             static_cast<double>(instances), worst) +
             (identities ? "yes" : "no"));
}

// C9: temporal split leakage on randomized logs.
void split_safety() {
  Rng rng(1009, 0);
  std::size_t logs = 0, records = 0, violations = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    data::InteractionLog log;
    const std::size_t users = 2 + rng.below(30), items = 2 + rng.below(20);
    const std::uint64_t horizon = 1 + rng.below(100);
    for (std::size_t u = 0; u < users; ++u) {
      const std::size_t len = 1 + rng.below(10);
      for (std::size_t k = 0; k < len; ++k)
        log.records.push_back({"u" + std::to_string(u), "i" + std::to_string(rng.below(items)),
                               static_cast<std::int64_t>(rng.below(horizon + 1))});
    }
    for (std::size_t i = log.records.size(); i > 1; --i) std::swap(log.records[i - 1], log.records[rng.below(i)]);
    data::SequenceDataset ds;
    try {
      ds = data::temporal_split(log, {0.5 + 0.5 * rng.uniform(), data::SplitProtocol::kTemporal});
    } catch (const SplitError&) {
      continue;
    }
    ++logs;
    std::set<std::string> train_users(ds.train_users.begin(), ds.train_users.end());
    for (const auto& h : ds.test) violations += train_users.count(h.user);
    for (const auto& r : log.records) {
      if (!train_users.count(r.user)) continue;
      ++records;
      violations += r.timestamp >= ds.split_timestamp;
    }
  }
  report(9, violations == 0 && logs > 0, "temporal split leakage (randomized logs)",
         fmt("%.0f logs, %.0f training records checked, %.0f violations", static_cast<double>(logs),
             static_cast<double>(records), static_cast<double>(violations)));
}

std::vector<std::string> brute_front_ids(const std::vector<harness::ParetoPoint>& pts) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const auto& a = pts[j];
      const auto& b = pts[i];
      dominated |= i != j && a.peak_bytes <= b.peak_bytes && a.ndcg10 >= b.ndcg10 &&
                   (a.peak_bytes < b.peak_bytes || a.ndcg10 > b.ndcg10);
    }
    if (!dominated) ids.push_back(pts[i].config_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::string> front_ids(const std::vector<harness::ParetoPoint>& front) {
  std::vector<std::string> ids;
  for (const auto& p : front) ids.push_back(p.config_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// C10: the sweep's front against the O(n^2) filter.
void pareto_correctness() {
  auto ds = planted(96, 300, 10);
  nlohmann::json grid = {
      {"name", "acceptance"},
      {"base", {{"batch_size", 32}, {"seq_len", 16}, {"max_epochs", 3}, {"patience", 1},
                {"backbone", {{"dim", 16}, {"n_layers", 1}}}}},
      {"axes", {{"loss", {"bce_plus", "ce_minus"}}, {"negatives", {4, 16}}}},
      {"extra", {{{"loss", "ce"}},
                 {{"loss", "bce"}},
                 {{"loss", "sce"}, {"sce", {{"bucket_y", 24}}}},
                 {{"loss", "sce"}, {"sce", {{"bucket_y", 48}, {"use_mix", false}}}}}}};
  auto g = harness::parse_grid(grid);
  harness::SweepOptions opt;
  opt.runner = harness::training_runner(ds);
  auto result = harness::run_sweep(g, opt);
  auto points = harness::points_of(result.rows);
  bool ok = front_ids(result.front) == brute_front_ids(points);
  std::size_t tables = 1;
  Rng rng(1010, 0);
  for (int trial = 0; trial < 500; ++trial, ++tables) {
    std::vector<harness::ParetoPoint> pts;
    const std::size_t n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      harness::ParetoPoint p;
      p.config_id = std::to_string(i);
      p.peak_bytes = static_cast<std::int64_t>(rng.below(8));
      p.ndcg10 = static_cast<double>(rng.below(8)) / 8.0;
      pts.push_back(p);
    }
    ok &= front_ids(harness::pareto_front(pts)) == brute_front_ids(pts);
  }
  report(10, ok, "Pareto front == brute-force filter",
         std::to_string(tables) + " tables (one from a " + std::to_string(result.rows.size()) +
             "-run training sweep with a " + std::to_string(result.front.size()) + "-point front)");
}

}  // namespace

int main() {
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  oracle_equivalence();
  gradient_correctness();
  logit_gradient_identity();
  lower_bound();
  memory_law();
  const auto desk = planted(2000, 2000, 0);
  quality_parity(desk);
  mix_diagnostic(desk);
  metric_oracles();
  split_safety();
  pareto_correctness();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
