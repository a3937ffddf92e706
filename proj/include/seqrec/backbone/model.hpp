#pragma once

// SASRec-style causal transformer over item sequences.
//
// Each layer: q = LN(h); h = q + Attn(q, h, h); h = LN(h); h = h + FFN(h).
// A final layer norm produces the outputs. Only real (non-padded) positions
// are pushed through the layers; padded rows of the output are zero.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "seqrec/data/batches.hpp"
#include "seqrec/numerics/rng.hpp"
#include "seqrec/numerics/tensor.hpp"

namespace seqrec::backbone {

using num::Index;
using num::Real;
using num::Tensor;

struct BackboneConfig {
  std::size_t dim = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 1;
  std::size_t max_len = 200;
  std::size_t catalog_size = 0;
  Real dropout = 0.2;
  // Output logits use the item embedding table; off gives a separate matrix.
  bool tied = true;

  // Throws ParameterError when a size is zero, dim % n_heads != 0 or the
  // dropout rate is outside [0, 1).
  void validate() const;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

class Model {
 public:
  Model(const BackboneConfig& config, std::uint64_t seed);

  const BackboneConfig& config() const noexcept { return config_; }

  // X [s*l x d] for batch.inputs. Item ids outside [0, C] raise DataError;
  // real inputs must form a suffix of each row (left padding).
  Tensor forward(const data::Batch& batch, num::Rng& dropout_rng, bool training) const;

  // Y [C x d]. When tied, a view of rows 1..C of the item table sharing its
  // storage.
  Tensor catalog() const;
  const Tensor& item_table() const noexcept { return item_table_; }

  // Trainable tensors in a fixed order.
  std::vector<NamedTensor> parameters() const;
  std::size_t parameter_count() const;

 private:
  struct Layer {
    Tensor ln1_gamma, ln1_beta;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_gamma, ln2_beta;
    Tensor w1, b1, w2, b2;
  };

  BackboneConfig config_;
  Tensor item_table_;
  Tensor position_table_;
  Tensor output_table_;
  std::vector<Layer> layers_;
  Tensor final_gamma_, final_beta_;
};

}  // namespace seqrec::backbone
