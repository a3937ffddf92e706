#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "seqrec/backbone/checkpoint.hpp"
#include "seqrec/backbone/model.hpp"
#include "seqrec/errors.hpp"
#include "seqrec/losses/losses.hpp"
#include "seqrec/numerics/gradcheck.hpp"
#include "seqrec/numerics/ops.hpp"
#include "seqrec/sce/sce_loss.hpp"

using namespace seqrec;
using namespace seqrec::backbone;
using data::Batch;
using num::Rng;

namespace {

BackboneConfig small_config(std::size_t catalog = 30) {
  BackboneConfig c;
  c.dim = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_len = 6;
  c.catalog_size = catalog;
  c.dropout = 0.0;
  return c;
}

Batch make_batch(std::vector<std::vector<Index>> rows, std::size_t l) {
  Batch b;
  b.batch_size = rows.size();
  b.seq_len = l;
  b.inputs.assign(rows.size() * l, 0);
  b.targets.assign(rows.size() * l, 0);
  b.mask.assign(rows.size() * l, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& s = rows[r];
    for (std::size_t i = 0; i < s.size(); ++i) {
      b.inputs[r * l + l - s.size() + i] = s[i];
      b.mask[r * l + l - s.size() + i] = s[i] != 0;
    }
  }
  return b;
}

Tensor run(const Model& m, const Batch& b) {
  Rng rng(0, 3);
  return m.forward(b, rng, false);
}

}  // namespace

TEST_CASE("outputs are causal within each sequence") {
  Model m(small_config(), 1);
  auto base = make_batch({{3, 7, 2, 9, 4}, {5, 6}}, 6);
  auto x0 = run(m, base);
  for (std::size_t j = 1; j < 6; ++j) {
    auto b = base;
    if (b.inputs[j] == 0) continue;
    b.inputs[j] = b.inputs[j] % 29 + 1;
    auto x1 = run(m, b);
    for (std::size_t i = 0; i < 12; ++i) {
      const bool same_row = i < 6;
      bool equal = true;
      for (std::size_t c = 0; c < 8; ++c) equal &= x0.at(i, c) == x1.at(i, c);
      if (!same_row || i < j) CHECK(equal);
      if (same_row && i == j) CHECK_FALSE(equal);
    }
  }
}

TEST_CASE("outputs follow the sequence, not its row in the batch") {
  Model m(small_config(), 2);
  auto x = run(m, make_batch({{1, 2, 3}, {4, 5, 6, 7}, {8}}, 6));
  auto y = run(m, make_batch({{8}, {1, 2, 3}, {4, 5, 6, 7}}, 6));
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t c = 0; c < 8; ++c) {
      CHECK(x.at(i, c) == doctest::Approx(y.at(6 + i, c)).epsilon(1e-13));
      CHECK(x.at(6 + i, c) == doctest::Approx(y.at(12 + i, c)).epsilon(1e-13));
      CHECK(x.at(12 + i, c) == doctest::Approx(y.at(i, c)).epsilon(1e-13));
    }
  }
}

TEST_CASE("padding rows output zero and padding embeddings get no gradient") {
  Model m(small_config(), 3);
  auto all_pad = run(m, make_batch({{0, 0, 0}}, 3));
  for (Real v : all_pad.data()) CHECK(v == 0.0);

  auto b = make_batch({{0, 0, 4, 5}, {1, 2, 3, 4}}, 4);
  Rng rng(1, 3);
  auto x = m.forward(b, rng, true);
  for (std::size_t c = 0; c < 8; ++c) {
    CHECK(x.at(0, c) == 0.0);
    CHECK(x.at(1, c) == 0.0);
  }
  num::backward(num::sum(num::mul(x, x)));
  auto g = m.item_table().grad();
  for (std::size_t c = 0; c < 8; ++c) CHECK(g[c] == 0.0);
  for (std::size_t c = 0; c < 8; ++c) CHECK(m.item_table().data()[c] == 0.0);

  auto bad = make_batch({{1, 0, 2}}, 3);
  CHECK_THROWS_AS(run(m, bad), DataError);
  auto too_long = make_batch({{1, 2, 3, 4, 5, 6, 7}}, 7);
  CHECK_THROWS_AS(run(m, too_long), ParameterError);
  auto out_of_range = make_batch({{31}}, 2);
  CHECK_THROWS_AS(run(m, out_of_range), DataError);
}

TEST_CASE("tied catalog is a view of the item table") {
  Model m(small_config(), 4);
  auto y = m.catalog();
  CHECK(y.rows() == 30);
  CHECK(y.storage_id() == m.item_table().storage_id());
  auto table = m.item_table();
  table.mutable_data()[8 + 3] = 123.0;
  CHECK(y.at(0, 3) == 123.0);

  num::backward(num::sum(m.catalog()));
  auto g = m.item_table().grad();
  for (std::size_t c = 0; c < 8; ++c) CHECK(g[c] == 0.0);
  for (std::size_t i = 8; i < g.size(); ++i) CHECK(g[i] == 1.0);

  auto cfg = small_config();
  cfg.tied = false;
  Model untied(cfg, 4);
  CHECK(untied.catalog().storage_id() != untied.item_table().storage_id());
  CHECK(untied.parameter_count() == m.parameter_count() + 30 * 8);
}

TEST_CASE("SCE reaches item row c exactly when c is in a bucket or is a selected target") {
  Model m(small_config(40), 5);
  auto b = make_batch({{1, 2, 3, 4, 5}, {6, 7, 8}}, 6);
  for (std::size_t i = 0; i + 1 < 12; ++i)
    if (b.mask[i] && b.mask[i + 1]) b.targets[i] = b.inputs[i + 1];
  b.targets[5] = 11;
  b.targets[11] = 12;
  Tensor x;
  {
    num::NoGradGuard g;
    x = run(m, b);
  }
  sce::SceConfig cfg;
  cfg.n_buckets = 2;
  cfg.bucket_x = 3;
  cfg.bucket_y = 6;
  Rng rng(2, 4);
  auto out = sce::sce_loss(x, m.catalog(), b.targets, cfg, b.mask, rng);
  num::backward(out.value);
  std::set<Index> touched(out.assignment.items.begin(), out.assignment.items.end());
  for (auto r : out.assignment.outputs) touched.insert(b.targets[r]);
  auto g = m.item_table().grad();
  for (Index c = 0; c <= 40; ++c) {
    Real norm = 0;
    for (std::size_t k = 0; k < 8; ++k) norm += std::fabs(g[c * 8 + k]);
    CHECK((norm != 0.0) == (touched.count(c) == 1));
  }
}

TEST_CASE("end-to-end gradients match finite differences") {
  auto cfg = small_config(12);
  cfg.dim = 4;
  cfg.n_layers = 1;
  cfg.n_heads = 1;
  Model m(cfg, 6);
  auto b = make_batch({{1, 2, 3}, {4, 5}}, 4);
  b.targets = {0, 2, 3, 7, 0, 0, 5, 9};
  auto loss = [&] {
    Rng rng(0, 3);
    auto x = m.forward(b, rng, false);
    return losses::full_ce(x, m.catalog(), b.targets, b.mask).value;
  };
  num::backward(loss());
  for (const auto& p : m.parameters()) {
    auto t = p.tensor;
    std::vector<Real> analytic(t.grad().begin(), t.grad().end());
    std::vector<Real> numeric(t.numel());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const Real keep = values[i];
      num::NoGradGuard g;
      values[i] = keep + 1e-6;
      const Real up = loss().item();
      values[i] = keep - 1e-6;
      const Real down = loss().item();
      values[i] = keep;
      numeric[i] = (up - down) / 2e-6;
    }
    if (p.name == "item_table") numeric[0] = numeric[1] = numeric[2] = numeric[3] = 0.0;
    INFO(p.name);
    if (p.name.ends_with(".bk")) {
      // Softmax ignores a per-row shift, so the key bias has no effect.
      for (std::size_t i = 0; i < analytic.size(); ++i) {
        CHECK(std::fabs(analytic[i]) < 1e-12);
        CHECK(std::fabs(numeric[i]) < 1e-8);
      }
      continue;
    }
    CHECK(num::relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("dropout is active only in training mode") {
  auto cfg = small_config();
  cfg.dropout = 0.5;
  Model m(cfg, 7);
  auto b = make_batch({{1, 2, 3, 4}}, 4);
  Rng r1(1, 3), r2(2, 3);
  auto e1 = m.forward(b, r1, false);
  auto e2 = m.forward(b, r2, false);
  auto t1 = m.forward(b, r1, true);
  CHECK(std::equal(e1.data().begin(), e1.data().end(), e2.data().begin()));
  CHECK_FALSE(std::equal(e1.data().begin(), e1.data().end(), t1.data().begin()));
}

TEST_CASE("config validation and seeding") {
  auto cfg = small_config();
  cfg.n_heads = 3;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = small_config();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = small_config();
  cfg.catalog_size = 0;
  CHECK_THROWS_AS(Model(cfg, 1), ParameterError);

  Model a(small_config(), 9), b(small_config(), 9), c(small_config(), 10);
  CHECK(snapshot(a) == snapshot(b));
  CHECK(snapshot(a) != snapshot(c));
}

TEST_CASE("checkpoint round trip and error cases") {
  Model m(small_config(), 11);
  const auto path = std::filesystem::temp_directory_path() / "seqrec_test_ckpt.json";
  save_checkpoint(path, m, {{"epoch", 3}});
  nlohmann::json meta;
  auto back = load_checkpoint(path, &meta);
  CHECK(meta.at("epoch") == 3);
  CHECK(snapshot(back) == snapshot(m));
  CHECK(back.config().catalog_size == 30);
  auto batch = make_batch({{1, 2, 3}}, 4);
  auto x = run(m, batch);
  auto y = run(back, batch);
  CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));

  auto j = nlohmann::json::parse(std::ifstream(path));
  j["arrays"][0]["shape"][0] = 5;
  std::ofstream(path) << j.dump();
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  j["format"] = "other";
  std::ofstream(path) << j.dump();
  CHECK_THROWS_AS(load_checkpoint(path), DataError);

  auto snap = snapshot(m);
  Model other(small_config(), 12);
  restore(other, snap);
  CHECK(snapshot(other) == snap);
  auto cj = config_to_json(m.config());
  auto cfg = config_from_json(cj);
  CHECK(cfg.dim == 8);
  CHECK(cfg.n_heads == 2);
  CHECK(cfg.catalog_size == 30);
}
