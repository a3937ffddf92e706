#include "seqrec/backbone/model.hpp"

#include <cmath>

#include "seqrec/errors.hpp"
#include "seqrec/numerics/attention.hpp"
#include "seqrec/numerics/ops.hpp"

namespace seqrec::backbone {
namespace {

Tensor xavier(std::size_t in, std::size_t out, num::Rng& rng) {
  const Real std = std::sqrt(2.0 / static_cast<Real>(in + out));
  return Tensor::randn({in, out}, rng, std, true);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return num::add_bias(num::matmul(x, w), b);
}

}  // namespace

void BackboneConfig::validate() const {
  if (dim == 0 || n_layers == 0 || n_heads == 0 || max_len == 0 || catalog_size == 0) {
    throw ParameterError("backbone: dim, n_layers, n_heads, max_len and catalog_size must be >= 1");
  }
  if (dim % n_heads != 0) throw ParameterError("backbone: dim must be divisible by n_heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("backbone: dropout must be in [0, 1)");
}

Model::Model(const BackboneConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  auto rng = num::make_rng(seed, num::RngStream::kInit);
  const std::size_t d = config_.dim;
  const Real emb_std = 1.0 / std::sqrt(static_cast<Real>(d));
  item_table_ = Tensor::randn({config_.catalog_size + 1, d}, rng, emb_std, true);
  std::fill_n(item_table_.mutable_data().begin(), d, 0.0);
  position_table_ = Tensor::randn({config_.max_len, d}, rng, emb_std, true);
  if (!config_.tied) output_table_ = Tensor::randn({config_.catalog_size, d}, rng, emb_std, true);
  for (std::size_t i = 0; i < config_.n_layers; ++i) {
    Layer layer;
    layer.ln1_gamma = Tensor::full({d}, 1.0, true);
    layer.ln1_beta = Tensor::zeros({d}, true);
    layer.wq = xavier(d, d, rng);
    layer.bq = Tensor::zeros({d}, true);
    layer.wk = xavier(d, d, rng);
    layer.bk = Tensor::zeros({d}, true);
    layer.wv = xavier(d, d, rng);
    layer.bv = Tensor::zeros({d}, true);
    layer.wo = xavier(d, d, rng);
    layer.bo = Tensor::zeros({d}, true);
    layer.ln2_gamma = Tensor::full({d}, 1.0, true);
    layer.ln2_beta = Tensor::zeros({d}, true);
    layer.w1 = xavier(d, d, rng);
    layer.b1 = Tensor::zeros({d}, true);
    layer.w2 = xavier(d, d, rng);
    layer.b2 = Tensor::zeros({d}, true);
    layers_.push_back(std::move(layer));
  }
  final_gamma_ = Tensor::full({d}, 1.0, true);
  final_beta_ = Tensor::zeros({d}, true);
}

Tensor Model::catalog() const {
  if (!config_.tied) return output_table_;
  return num::slice_rows(item_table_, 1, config_.catalog_size + 1);
}

Tensor Model::forward(const data::Batch& batch, num::Rng& dropout_rng, bool training) const {
  const std::size_t s = batch.batch_size, l = batch.seq_len, d = config_.dim;
  if (batch.inputs.size() != s * l) throw DimensionError("forward: inputs must hold s*l ids");
  if (l > config_.max_len) {
    throw ParameterError("forward: sequence length " + std::to_string(l) + " exceeds max_len " +
                         std::to_string(config_.max_len));
  }

  std::vector<Index> packed_ids, packed_rows, packed_pos;
  std::vector<num::Segment> segments;
  for (std::size_t u = 0; u < s; ++u) {
    const std::size_t begin = packed_ids.size();
    for (std::size_t i = 0; i < l; ++i) {
      const Index id = batch.inputs[u * l + i];
      if (id == 0) {
        if (packed_ids.size() > begin) {
          throw DataError("forward: padding inside a sequence (inputs must be left-padded)");
        }
        continue;
      }
      packed_ids.push_back(id);
      packed_rows.push_back(static_cast<Index>(u * l + i));
      packed_pos.push_back(static_cast<Index>(i));
    }
    if (packed_ids.size() > begin) segments.push_back({begin, packed_ids.size() - begin});
  }
  if (packed_ids.empty()) return Tensor::zeros({s * l, d});

  Tensor h = num::scale(num::embedding(item_table_, packed_ids, 0),
                        std::sqrt(static_cast<Real>(d)));
  h = num::add(h, num::gather_rows(position_table_, packed_pos));
  h = num::dropout(h, config_.dropout, dropout_rng, training);
  for (const auto& layer : layers_) {
    Tensor q_in = num::layer_norm(h, layer.ln1_gamma, layer.ln1_beta);
    Tensor q = linear(q_in, layer.wq, layer.bq);
    Tensor k = linear(h, layer.wk, layer.bk);
    Tensor v = linear(h, layer.wv, layer.bv);
    Tensor att = num::causal_attention(q, k, v, segments, config_.n_heads);
    att = linear(att, layer.wo, layer.bo);
    h = num::add(q_in, att);
    h = num::layer_norm(h, layer.ln2_gamma, layer.ln2_beta);
    Tensor f = num::dropout(linear(h, layer.w1, layer.b1), config_.dropout, dropout_rng, training);
    f = num::dropout(linear(num::relu(f), layer.w2, layer.b2), config_.dropout, dropout_rng,
                     training);
    h = num::add(h, f);
  }
  h = num::layer_norm(h, final_gamma_, final_beta_);
  return num::scatter_rows(h, packed_rows, s * l);
}

std::vector<NamedTensor> Model::parameters() const {
  std::vector<NamedTensor> out{{"item_table", item_table_}, {"position_table", position_table_}};
  if (!config_.tied) out.push_back({"output_table", output_table_});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& L = layers_[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    out.insert(out.end(), {{p + "ln1_gamma", L.ln1_gamma}, {p + "ln1_beta", L.ln1_beta},
                           {p + "wq", L.wq},               {p + "bq", L.bq},
                           {p + "wk", L.wk},               {p + "bk", L.bk},
                           {p + "wv", L.wv},               {p + "bv", L.bv},
                           {p + "wo", L.wo},               {p + "bo", L.bo},
                           {p + "ln2_gamma", L.ln2_gamma}, {p + "ln2_beta", L.ln2_beta},
                           {p + "w1", L.w1},               {p + "b1", L.b1},
                           {p + "w2", L.w2},               {p + "b2", L.b2}});
  }
  out.push_back({"final_gamma", final_gamma_});
  out.push_back({"final_beta", final_beta_});
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

}  // namespace seqrec::backbone
