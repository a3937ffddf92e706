#include "seqrec/eval/evaluator.hpp"

#include <algorithm>

#include "seqrec/errors.hpp"
#include "seqrec/numerics/eigen.hpp"

namespace seqrec::eval {

EvalResult evaluate(const backbone::Model& model, const std::vector<data::Holdout>& holdouts,
                    const EvalOptions& options) {
  if (options.batch_size == 0) throw ParameterError("evaluate: batch_size must be >= 1");
  num::NoGradGuard no_grad;
  const std::size_t d = model.config().dim;
  const std::size_t l = std::min(options.seq_len, model.config().max_len);
  const std::size_t catalog = model.config().catalog_size;
  const num::Tensor y = model.catalog();
  auto unused_rng = num::make_rng(0, num::RngStream::kDropout);

  EvalResult result;
  const std::size_t top_k = kCutoffs.back();
  for (std::size_t start = 0; start < holdouts.size(); start += options.batch_size) {
    const std::size_t rows = std::min(options.batch_size, holdouts.size() - start);
    std::vector<std::span<const Index>> histories;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& h = holdouts[start + r];
      if (h.history.empty()) throw DataError("evaluate: holdout with empty history");
      histories.emplace_back(h.history);
    }
    const auto batch = data::pack_histories(histories, l);
    const num::Tensor x = model.forward(batch, unused_rng, false);
    // Last position of each row: the output after the full history.
    num::Buffer last(rows * d);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(x.data().data() + (r * l + l - 1) * d, d, last.data() + r * d);
    }
    num::Buffer scores(rows * catalog);
    num::as_matrix(scores.data(), rows, catalog).noalias() =
        num::as_matrix(last.data(), rows, d) * num::as_matrix(y.data().data(), catalog, d).transpose();
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& h = holdouts[start + r];
      std::vector<Index> exclusions;
      if (options.exclude_history) {
        for (Index item : h.history) {
          if (item != h.target) exclusions.push_back(item);
        }
      }
      std::span<const Real> row(scores.data() + r * catalog, catalog);
      result.ranks.push_back(target_rank(row, h.target, exclusions));
      result.top_lists.push_back(top_items(row, top_k, exclusions));
    }
  }
  result.report = summarize(result.ranks, result.top_lists, catalog);
  return result;
}

}  // namespace seqrec::eval
