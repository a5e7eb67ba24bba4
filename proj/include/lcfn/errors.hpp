#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lcfn {

// Eigensolver did not reach the requested residual bound. Carries the
// residual norms that were achieved so callers can report or relax.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& msg, std::vector<double> residuals)
      : std::runtime_error(msg), residuals_(std::move(residuals)) {}

  const std::vector<double>& residuals() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

// A graph factor has a zero-degree node, so the normalized Laplacian is
// undefined. The offending node indices are kept for diagnostics.
class DegenerateGraphError : public std::runtime_error {
 public:
  DegenerateGraphError(const std::string& msg, std::vector<int> node_ids)
      : std::runtime_error(msg), node_ids_(std::move(node_ids)) {}

  const std::vector<int>& node_ids() const { return node_ids_; }

 private:
  std::vector<int> node_ids_;
};

class EmptyDatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite value observed during a forward or backward pass. `layer` is
// the first layer index at which it appeared (0 = embedding level).
class NumericOverflowError : public std::runtime_error {
 public:
  NumericOverflowError(const std::string& msg, int layer)
      : std::runtime_error(msg), layer_(layer) {}

  int layer() const { return layer_; }

 private:
  int layer_;
};

class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every grid cell diverged. One diagnostic line per cell.
class TuningError : public std::runtime_error {
 public:
  TuningError(const std::string& msg, std::vector<std::string> diagnostics)
      : std::runtime_error(msg), diagnostics_(std::move(diagnostics)) {}

  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

// Cache or checkpoint file is unusable (bad magic, digest mismatch, truncation).
class CacheError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input line; message carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lcfn
