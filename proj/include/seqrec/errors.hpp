#pragma once

#include <stdexcept>
#include <string>

namespace seqrec {

// Shape or dimension disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Out-of-range hyperparameter (k > n, b_x > #outputs, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// API misuse, e.g. calling backward on a non-scalar.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid data values such as item indices outside [0, C].
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A loss or reduction was asked to operate on zero real positions.
class EmptyBatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// logsumexp over a support where every entry is -inf.
class EmptySupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seqrec
