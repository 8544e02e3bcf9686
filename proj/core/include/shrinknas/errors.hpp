#pragma once

#include <stdexcept>
#include <string>

namespace shrinknas {

/// Argument outside an operation's documented domain (e.g. a DAG with n < 2).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// remove_edge() on an edge the topology does not contain.
class MissingEdge : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed topology / architecture / dataset document. The message names the
/// offending field (and line, when the JSON itself is broken).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or weight shapes that do not line up.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse: kind mismatch, backward without a recorded forward, unknown format.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a candidate evaluation cannot produce a result.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shrinknas
