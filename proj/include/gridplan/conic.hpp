#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "gridplan/types.hpp"

namespace gridplan::conic {

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit, NumericalFailure };

std::string to_string(Status st);

enum class Sense { Eq, Le, Ge };

enum class BlockKind { Nonneg, Free, Psd };

struct Options {
  Real feas_tol = 1e-7;
  Real gap_tol = 1e-7;
  int max_iter = 200;
  bool verbose = false;
};

/// Cone program in block form:
///   minimize   c . x
///   subject to per-row  a_r . x  (=, <=, >=)  rhs_r
/// over variable blocks tagged nonnegative, free, or PSD (a d x d symmetric
/// matrix variable constrained positive semidefinite). Coefficients on a PSD
/// block address matrix entries: a value v at (i, j) contributes v * X_ij,
/// exploiting symmetry.
class ConeProblem {
 public:
  int add_nonneg(int n);
  int add_free(int n);
  int add_psd(int d);

  void set_obj(int block, int idx, Real c);
  void set_obj_psd(int block, int i, int j, Real c);

  int add_row(Sense sense, Real rhs);
  void add_coef(int row, int block, int idx, Real v);
  void add_coef_psd(int row, int block, int i, int j, Real v);

  int num_rows() const { return static_cast<int>(rows_.size()); }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  BlockKind block_kind(int b) const { return blocks_[static_cast<size_t>(b)].kind; }
  int block_dim(int b) const { return blocks_[static_cast<size_t>(b)].dim; }

  /// Stable plain-text dump for external cross-checks.
  void write(std::ostream& os) const;

  struct Block {
    BlockKind kind;
    int dim;
  };
  struct ScalarTerm {
    int block, idx;
    Real v;
  };
  struct PsdTerm {
    int block, i, j;
    Real v;
  };
  struct Row {
    Sense sense;
    Real rhs;
    std::vector<ScalarTerm> lin;
    std::vector<PsdTerm> psd;
  };

  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<Row>& rows() const { return rows_; }
  const std::vector<ScalarTerm>& obj_lin() const { return obj_lin_; }
  const std::vector<PsdTerm>& obj_psd() const { return obj_psd_; }

 private:
  std::vector<Block> blocks_;
  std::vector<Row> rows_;
  std::vector<ScalarTerm> obj_lin_;
  std::vector<PsdTerm> obj_psd_;
};

struct ConeSolution {
  Status status = Status::NumericalFailure;
  Real obj = 0;      // primal objective
  Real dual_obj = 0;
  Real pres = kInf, dres = kInf, gap = kInf;
  int iters = 0;

  std::vector<Vec> scalar_values;  // per block (empty Vec for PSD blocks)
  std::vector<Mat> psd_values;     // per block (empty Mat for scalar blocks)

  /// Row multipliers with the Lagrangian sign convention: for `<=` rows the
  /// multiplier of (a.x - rhs), for `>=` rows of (rhs - a.x); both
  /// nonnegative at an optimum. Equality rows keep their raw sign.
  Vec row_duals;

  const Vec& scalar(int block) const { return scalar_values[static_cast<size_t>(block)]; }
  const Mat& psd(int block) const { return psd_values[static_cast<size_t>(block)]; }
};

/// Solver backend interface; the built-in implementation is a dense
/// primal-dual interior-point method on the homogeneous self-dual embedding.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ConeSolution solve(const ConeProblem& problem, const Options& opts) const = 0;
};

class DenseIpmBackend final : public Backend {
 public:
  ConeSolution solve(const ConeProblem& problem, const Options& opts) const override;
};

const Backend& default_backend();

ConeSolution solve(const ConeProblem& problem, const Options& opts = {});

/// Multipliers of the requested rows; requires an optimal solution.
Vec extract_duals(const ConeSolution& sol, const std::vector<int>& rows);

}  // namespace gridplan::conic
