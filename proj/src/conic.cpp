#include "gridplan/conic.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace gridplan::conic {

std::string to_string(Status st) {
  switch (st) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration-limit";
    case Status::NumericalFailure: return "numerical-failure";
  }
  return "?";
}

int ConeProblem::add_nonneg(int n) {
  blocks_.push_back({BlockKind::Nonneg, n});
  return static_cast<int>(blocks_.size()) - 1;
}
int ConeProblem::add_free(int n) {
  blocks_.push_back({BlockKind::Free, n});
  return static_cast<int>(blocks_.size()) - 1;
}
int ConeProblem::add_psd(int d) {
  blocks_.push_back({BlockKind::Psd, d});
  return static_cast<int>(blocks_.size()) - 1;
}

void ConeProblem::set_obj(int block, int idx, Real c) { obj_lin_.push_back({block, idx, c}); }
void ConeProblem::set_obj_psd(int block, int i, int j, Real c) {
  if (i > j) std::swap(i, j);
  obj_psd_.push_back({block, i, j, c});
}

int ConeProblem::add_row(Sense sense, Real rhs) {
  rows_.push_back({sense, rhs, {}, {}});
  return static_cast<int>(rows_.size()) - 1;
}
void ConeProblem::add_coef(int row, int block, int idx, Real v) {
  if (v == 0) return;
  rows_[static_cast<size_t>(row)].lin.push_back({block, idx, v});
}
void ConeProblem::add_coef_psd(int row, int block, int i, int j, Real v) {
  if (v == 0) return;
  if (i > j) std::swap(i, j);
  rows_[static_cast<size_t>(row)].psd.push_back({block, i, j, v});
}

void ConeProblem::write(std::ostream& os) const {
  os << "blocks " << blocks_.size() << "\n";
  for (const auto& b : blocks_) {
    os << (b.kind == BlockKind::Nonneg ? "nonneg" : b.kind == BlockKind::Free ? "free" : "psd")
       << " " << b.dim << "\n";
  }
  os << "objective\n";
  for (const auto& t : obj_lin_) os << "  " << t.block << " " << t.idx << " " << t.v << "\n";
  for (const auto& t : obj_psd_) {
    os << "  " << t.block << " " << t.i << "," << t.j << " " << t.v << "\n";
  }
  os << "rows " << rows_.size() << "\n";
  for (const auto& r : rows_) {
    os << (r.sense == Sense::Eq ? "=" : r.sense == Sense::Le ? "<" : ">") << " " << r.rhs << " :";
    for (const auto& t : r.lin) os << " [" << t.block << ":" << t.idx << "]" << t.v;
    for (const auto& t : r.psd) {
      os << " [" << t.block << ":" << t.i << "," << t.j << "]" << t.v;
    }
    os << "\n";
  }
}

namespace {

struct PsdEntry {
  int i, j;
  Real v;  // as written: both (i,j) and (j,i) halves when i != j
};

// One row in the internal equality form.
struct NRow {
  std::vector<std::pair<int, Real>> nn;              // nonneg scalar terms
  std::vector<std::pair<int, Real>> fr;              // free scalar terms
  std::vector<std::vector<PsdEntry>> psd;            // per psd block, halved full entries
  Real rhs = 0;
  Real scale = 1;  // original row was divided by this
  Sense sense = Sense::Eq;
};

struct Internal {
  int m = 0;        // rows
  int nl = 0;       // nonneg scalars (incl. slacks)
  int nf = 0;       // free scalars
  int nl_user = 0;  // nonneg scalars excluding slacks
  std::vector<int> psd_dims;
  std::vector<NRow> rows;
  Vec c_nn, c_fr;
  std::vector<Mat> C;  // psd objective, dense symmetric
  Vec b;
  // block mapping: per user block: (group offset) where group from kind
  std::vector<int> block_offset;
  std::vector<int> block_psd_index;
  // per nonneg var: rows touching it (for the LP part of the Schur matrix)
  std::vector<std::vector<std::pair<int, Real>>> nn_rows;
  // per psd block: rows touching it
  std::vector<std::vector<int>> psd_rows;
  Real data_norm = 1;
};

void append_psd_entry(std::vector<PsdEntry>& list, int i, int j, Real v) {
  if (i == j) {
    list.push_back({i, i, v});
  } else {
    list.push_back({i, j, v / 2});
    list.push_back({j, i, v / 2});
  }
}

Internal lower(const ConeProblem& p) {
  Internal w;
  const auto& blocks = p.blocks();
  w.block_offset.resize(blocks.size());
  w.block_psd_index.assign(blocks.size(), -1);
  for (size_t b = 0; b < blocks.size(); ++b) {
    switch (blocks[b].kind) {
      case BlockKind::Nonneg:
        w.block_offset[b] = w.nl;
        w.nl += blocks[b].dim;
        break;
      case BlockKind::Free:
        w.block_offset[b] = w.nf;
        w.nf += blocks[b].dim;
        break;
      case BlockKind::Psd:
        w.block_psd_index[b] = static_cast<int>(w.psd_dims.size());
        w.block_offset[b] = 0;
        w.psd_dims.push_back(blocks[b].dim);
        break;
    }
  }
  w.nl_user = w.nl;
  const int P = static_cast<int>(w.psd_dims.size());
  w.m = p.num_rows();

  w.c_nn = Vec::Zero(w.nl + w.m);  // room for slacks
  w.c_fr = Vec::Zero(w.nf);
  w.C.resize(static_cast<size_t>(P));
  for (int bp = 0; bp < P; ++bp) {
    w.C[static_cast<size_t>(bp)] = Mat::Zero(w.psd_dims[static_cast<size_t>(bp)],
                                             w.psd_dims[static_cast<size_t>(bp)]);
  }
  for (const auto& t : p.obj_lin()) {
    const auto& blk = blocks[static_cast<size_t>(t.block)];
    if (blk.kind == BlockKind::Nonneg) {
      w.c_nn(w.block_offset[static_cast<size_t>(t.block)] + t.idx) += t.v;
    } else if (blk.kind == BlockKind::Free) {
      w.c_fr(w.block_offset[static_cast<size_t>(t.block)] + t.idx) += t.v;
    } else {
      throw std::invalid_argument("set_obj on a PSD block; use set_obj_psd");
    }
  }
  for (const auto& t : p.obj_psd()) {
    Mat& C = w.C[static_cast<size_t>(w.block_psd_index[static_cast<size_t>(t.block)])];
    if (t.i == t.j) {
      C(t.i, t.i) += t.v;
    } else {
      C(t.i, t.j) += t.v / 2;
      C(t.j, t.i) += t.v / 2;
    }
  }

  w.rows.resize(static_cast<size_t>(w.m));
  w.b = Vec::Zero(w.m);
  int next_slack = w.nl;
  for (int r = 0; r < w.m; ++r) {
    const auto& src = p.rows()[static_cast<size_t>(r)];
    NRow& row = w.rows[static_cast<size_t>(r)];
    row.sense = src.sense;
    row.psd.resize(static_cast<size_t>(P));
    Real maxabs = std::abs(src.rhs);
    for (const auto& t : src.lin) maxabs = std::max(maxabs, std::abs(t.v));
    for (const auto& t : src.psd) maxabs = std::max(maxabs, std::abs(t.v));
    row.scale = maxabs > 0 ? maxabs : 1.0;
    const Real inv = 1.0 / row.scale;
    for (const auto& t : src.lin) {
      const auto& blk = blocks[static_cast<size_t>(t.block)];
      int off = w.block_offset[static_cast<size_t>(t.block)] + t.idx;
      if (blk.kind == BlockKind::Nonneg) {
        row.nn.emplace_back(off, t.v * inv);
      } else if (blk.kind == BlockKind::Free) {
        row.fr.emplace_back(off, t.v * inv);
      } else {
        throw std::invalid_argument("add_coef on a PSD block; use add_coef_psd");
      }
    }
    for (const auto& t : src.psd) {
      append_psd_entry(row.psd[static_cast<size_t>(w.block_psd_index[static_cast<size_t>(t.block)])],
                       t.i, t.j, t.v * inv);
    }
    if (src.sense == Sense::Le) {
      row.nn.emplace_back(next_slack++, 1.0);
    } else if (src.sense == Sense::Ge) {
      row.nn.emplace_back(next_slack++, -1.0);
    }
    row.rhs = src.rhs * inv;
    w.b(r) = row.rhs;
  }
  w.nl = next_slack;
  w.c_nn.conservativeResize(w.nl);

  w.nn_rows.resize(static_cast<size_t>(w.nl));
  w.psd_rows.resize(static_cast<size_t>(P));
  for (int r = 0; r < w.m; ++r) {
    for (const auto& [idx, v] : w.rows[static_cast<size_t>(r)].nn) {
      w.nn_rows[static_cast<size_t>(idx)].emplace_back(r, v);
    }
    for (int bp = 0; bp < P; ++bp) {
      if (!w.rows[static_cast<size_t>(r)].psd[static_cast<size_t>(bp)].empty()) {
        w.psd_rows[static_cast<size_t>(bp)].push_back(r);
      }
    }
  }
  w.data_norm = std::max({1.0, w.b.size() ? w.b.cwiseAbs().maxCoeff() : 0.0,
                          w.c_nn.size() ? w.c_nn.cwiseAbs().maxCoeff() : 0.0,
                          w.c_fr.size() ? w.c_fr.cwiseAbs().maxCoeff() : 0.0});
  return w;
}

Real row_dot(const std::vector<PsdEntry>& entries, const Mat& M) {
  Real acc = 0;
  for (const auto& e : entries) acc += e.v * M(e.i, e.j);
  return acc;
}

void row_axpy(const std::vector<PsdEntry>& entries, Real alpha, Mat& M) {
  for (const auto& e : entries) M(e.i, e.j) += alpha * e.v;
}

Real max_abs(const Vec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
Real dot0(const Vec& a, const Vec& b) { return a.size() ? a.dot(b) : 0.0; }

struct State {
  Vec xl, sl, xf, lam;
  std::vector<Mat> X, S;
  Real tau = 1, kappa = 1;
};

struct Direction {
  Vec dxl, dsl, dxf, dlam;
  std::vector<Mat> dX, dS;
  Real dtau = 0, dkappa = 0;
};

class Ipm {
 public:
  Ipm(const ConeProblem& p, const Options& opts) : p_(p), opts_(opts), w_(lower(p)) {}

  ConeSolution run();

 private:
  const ConeProblem& p_;
  const Options& opts_;
  Internal w_;
  State st_;
  int deg_ = 0;

  // per-iteration work
  std::vector<Mat> Sinv_, T_;  // T per psd block: scratch
  Vec wl_;                     // xl / sl
  Mat H_, Af_, HiAf_;
  Eigen::LLT<Mat> Hllt_, Gllt_;
  Vec g_;
  Real h_tt_ = 0;

  Vec apply_AT_nn(const Vec& lam) const;
  Vec apply_AT_fr(const Vec& lam) const;
  Mat apply_AT_psd(const Vec& lam, int bp) const;
  Vec apply_A(const Vec& xl, const Vec& xf, const std::vector<Mat>& X) const;
  Real cdotx(const Vec& xl, const Vec& xf, const std::vector<Mat>& X) const;

  bool factorize(Real& delta);
  void solve_M(const Vec& top, const Vec& bot, Vec& outl, Vec& outf) const;
  bool direction(Real sigma, Real eta, const Direction* corr, Direction& d) const;
  Real max_step(const Direction& d) const;
  ConeSolution finish(Status st, int iters) const;
  ConeSolution certificate(Status st, int iters) const;
};

Vec Ipm::apply_AT_nn(const Vec& lam) const {
  Vec out = Vec::Zero(w_.nl);
  for (int v = 0; v < w_.nl; ++v) {
    Real acc = 0;
    for (const auto& [r, coef] : w_.nn_rows[static_cast<size_t>(v)]) acc += coef * lam(r);
    out(v) = acc;
  }
  return out;
}

Vec Ipm::apply_AT_fr(const Vec& lam) const {
  Vec out = Vec::Zero(w_.nf);
  for (int r = 0; r < w_.m; ++r) {
    for (const auto& [idx, v] : w_.rows[static_cast<size_t>(r)].fr) out(idx) += v * lam(r);
  }
  return out;
}

Mat Ipm::apply_AT_psd(const Vec& lam, int bp) const {
  const int d = w_.psd_dims[static_cast<size_t>(bp)];
  Mat out = Mat::Zero(d, d);
  for (int r : w_.psd_rows[static_cast<size_t>(bp)]) {
    row_axpy(w_.rows[static_cast<size_t>(r)].psd[static_cast<size_t>(bp)], lam(r), out);
  }
  return out;
}

Vec Ipm::apply_A(const Vec& xl, const Vec& xf, const std::vector<Mat>& X) const {
  Vec out = Vec::Zero(w_.m);
  for (int r = 0; r < w_.m; ++r) {
    const NRow& row = w_.rows[static_cast<size_t>(r)];
    Real acc = 0;
    for (const auto& [idx, v] : row.nn) acc += v * xl(idx);
    for (const auto& [idx, v] : row.fr) acc += v * xf(idx);
    for (size_t bp = 0; bp < X.size(); ++bp) {
      if (!row.psd[bp].empty()) acc += row_dot(row.psd[bp], X[bp]);
    }
    out(r) = acc;
  }
  return out;
}

Real Ipm::cdotx(const Vec& xl, const Vec& xf, const std::vector<Mat>& X) const {
  Real acc = dot0(w_.c_nn, xl) + dot0(w_.c_fr, xf);
  for (size_t bp = 0; bp < X.size(); ++bp) acc += (w_.C[bp].array() * X[bp].array()).sum();
  return acc;
}

bool Ipm::factorize(Real& delta) {
  const int m = w_.m;
  const int P = static_cast<int>(w_.psd_dims.size());
  wl_ = st_.xl.cwiseQuotient(st_.sl);
  H_ = Mat::Zero(m, m);
  // LP part
  for (int v = 0; v < w_.nl; ++v) {
    const auto& rows = w_.nn_rows[static_cast<size_t>(v)];
    const Real wv = wl_(v);
    for (size_t a = 0; a < rows.size(); ++a) {
      for (size_t c = a; c < rows.size(); ++c) {
        Real add = wv * rows[a].second * rows[c].second;
        H_(rows[a].first, rows[c].first) += add;
        if (rows[a].first != rows[c].first) H_(rows[c].first, rows[a].first) += add;
      }
    }
  }
  // PSD part: H_ij += <A_j, X A_i Sinv>
  Sinv_.resize(static_cast<size_t>(P));
  T_.resize(static_cast<size_t>(P));
  for (int bp = 0; bp < P; ++bp) {
    const int d = w_.psd_dims[static_cast<size_t>(bp)];
    Eigen::LLT<Mat> llt(st_.S[static_cast<size_t>(bp)]);
    if (llt.info() != Eigen::Success) return false;
    Sinv_[static_cast<size_t>(bp)] = llt.solve(Mat::Identity(d, d));
    const Mat& X = st_.X[static_cast<size_t>(bp)];
    const Mat& Sinv = Sinv_[static_cast<size_t>(bp)];
    const auto& rows = w_.psd_rows[static_cast<size_t>(bp)];
    std::vector<Mat> Ts(rows.size());
    for (size_t a = 0; a < rows.size(); ++a) {
      Mat T = Mat::Zero(d, d);
      for (const auto& e : w_.rows[static_cast<size_t>(rows[a])].psd[static_cast<size_t>(bp)]) {
        T.noalias() += e.v * X.col(e.i) * Sinv.row(e.j);
      }
      Ts[a] = std::move(T);
    }
    for (size_t a = 0; a < rows.size(); ++a) {
      for (size_t c = 0; c < rows.size(); ++c) {
        if (rows[c] < rows[a]) continue;
        Real add = row_dot(w_.rows[static_cast<size_t>(rows[c])].psd[static_cast<size_t>(bp)],
                           Ts[a]);
        H_(rows[a], rows[c]) += add;
        if (rows[a] != rows[c]) H_(rows[c], rows[a]) += add;
      }
    }
  }

  // g = A W(c), h_tt = c W(c)
  g_ = Vec::Zero(m);
  h_tt_ = 0;
  {
    Vec wc = wl_.cwiseProduct(w_.c_nn);
    for (int v = 0; v < w_.nl; ++v) {
      if (wc(v) == 0) continue;
      for (const auto& [r, coef] : w_.nn_rows[static_cast<size_t>(v)]) g_(r) += coef * wc(v);
    }
    h_tt_ += w_.c_nn.dot(wc);
    for (int bp = 0; bp < P; ++bp) {
      const Mat& X = st_.X[static_cast<size_t>(bp)];
      const Mat& Sinv = Sinv_[static_cast<size_t>(bp)];
      Mat Tc = X * w_.C[static_cast<size_t>(bp)] * Sinv;
      for (int r : w_.psd_rows[static_cast<size_t>(bp)]) {
        g_(r) += row_dot(w_.rows[static_cast<size_t>(r)].psd[static_cast<size_t>(bp)], Tc);
      }
      h_tt_ += (w_.C[static_cast<size_t>(bp)].array() * Tc.array()).sum();
    }
  }

  for (int tries = 0; tries < 4; ++tries) {
    Mat Hreg = H_;
    Hreg.diagonal().array() += delta;
    Hllt_.compute(Hreg);
    if (Hllt_.info() == Eigen::Success) {
      if (w_.nf > 0) {
        HiAf_ = Hllt_.solve(Af_);
        Mat G = Af_.transpose() * HiAf_;
        G.diagonal().array() += delta;
        Gllt_.compute(G);
        if (Gllt_.info() != Eigen::Success) {
          delta *= 100;
          continue;
        }
      }
      return true;
    }
    delta *= 100;
  }
  return false;
}

void Ipm::solve_M(const Vec& top, const Vec& bot, Vec& outl, Vec& outf) const {
  if (w_.nf == 0) {
    outl = Hllt_.solve(top);
    outf = Vec();
    return;
  }
  Vec Hitop = Hllt_.solve(top);
  outf = Gllt_.solve(Af_.transpose() * Hitop - bot);
  outl = Hitop - HiAf_ * outf;
  // one refinement pass against the unregularized saddle system
  Vec rt = top - H_ * outl - Af_ * outf;
  Vec rb = bot - Af_.transpose() * outl;
  Vec Hirt = Hllt_.solve(rt);
  Vec cf = Gllt_.solve(Af_.transpose() * Hirt - rb);
  outf += cf;
  outl += Hirt - HiAf_ * cf;
}

bool Ipm::direction(Real sigma, Real eta, const Direction* corr, Direction& d) const {
  const int m = w_.m, P = static_cast<int>(w_.psd_dims.size());
  const Real mu = [&] {
    Real acc = dot0(st_.xl, st_.sl) + st_.tau * st_.kappa;
    for (int bp = 0; bp < P; ++bp) {
      acc += (st_.X[static_cast<size_t>(bp)].array() * st_.S[static_cast<size_t>(bp)].array()).sum();
    }
    return acc / (deg_ + 1);
  }();

  // residuals
  Vec Rp = apply_A(st_.xl, st_.xf, st_.X) - w_.b * st_.tau;
  Vec Rd_nn = w_.c_nn * st_.tau - apply_AT_nn(st_.lam) - st_.sl;
  Vec Rd_fr = w_.c_fr * st_.tau - apply_AT_fr(st_.lam);
  std::vector<Mat> Rd_psd(static_cast<size_t>(P));
  for (int bp = 0; bp < P; ++bp) {
    Rd_psd[static_cast<size_t>(bp)] = w_.C[static_cast<size_t>(bp)] * st_.tau -
                                      apply_AT_psd(st_.lam, bp) - st_.S[static_cast<size_t>(bp)];
  }
  Real Rg = st_.kappa + cdotx(st_.xl, st_.xf, st_.X) - w_.b.dot(st_.lam);

  // targets
  Vec ul(w_.nl);
  for (int v = 0; v < w_.nl; ++v) {
    Real corrv = corr ? corr->dxl(v) * corr->dsl(v) : 0.0;
    ul(v) = (sigma * mu - st_.xl(v) * st_.sl(v) - corrv) / st_.sl(v);
  }
  std::vector<Mat> U(static_cast<size_t>(P));
  for (int bp = 0; bp < P; ++bp) {
    const Mat& Sinv = Sinv_[static_cast<size_t>(bp)];
    U[static_cast<size_t>(bp)] = sigma * mu * Sinv - st_.X[static_cast<size_t>(bp)];
    if (corr) {
      U[static_cast<size_t>(bp)].noalias() -=
          corr->dX[static_cast<size_t>(bp)] * corr->dS[static_cast<size_t>(bp)] * Sinv;
    }
  }
  Real e0 = (sigma * mu - st_.tau * st_.kappa - (corr ? corr->dtau * corr->dkappa : 0.0)) / st_.tau;

  // r1 = -eta Rp - A(ul - wl.*eta Rd_l) - sum <A, U - X eta Rd Sinv>
  Vec xl_term = ul - eta * wl_.cwiseProduct(Rd_nn);
  std::vector<Mat> psd_term(static_cast<size_t>(P));
  for (int bp = 0; bp < P; ++bp) {
    psd_term[static_cast<size_t>(bp)] =
        U[static_cast<size_t>(bp)] - eta * st_.X[static_cast<size_t>(bp)] *
                                         Rd_psd[static_cast<size_t>(bp)] *
                                         Sinv_[static_cast<size_t>(bp)];
  }
  Vec r1 = -eta * Rp;
  for (int r = 0; r < m; ++r) {
    const NRow& row = w_.rows[static_cast<size_t>(r)];
    Real acc = 0;
    for (const auto& [idx, v] : row.nn) acc += v * xl_term(idx);
    for (int bp = 0; bp < P; ++bp) {
      if (!row.psd[static_cast<size_t>(bp)].empty()) {
        acc += row_dot(row.psd[static_cast<size_t>(bp)], psd_term[static_cast<size_t>(bp)]);
      }
    }
    r1(r) -= acc;
  }
  Vec r2 = eta * Rd_fr;
  Real c_const = dot0(w_.c_nn, xl_term);
  for (int bp = 0; bp < P; ++bp) {
    c_const += (w_.C[static_cast<size_t>(bp)].array() * psd_term[static_cast<size_t>(bp)].array())
                   .sum();
  }
  Real r3 = -eta * Rg - c_const - e0;

  Vec wAl, wAx, wBl, wBx;
  solve_M(r1, r2, wAl, wAx);
  solve_M(g_ + w_.b, w_.c_fr, wBl, wBx);

  Real alphaA = (g_ - w_.b).dot(wAl) + (w_.nf ? w_.c_fr.dot(wAx) : 0.0);
  Real betaB = (g_ - w_.b).dot(wBl) + (w_.nf ? w_.c_fr.dot(wBx) : 0.0) - h_tt_ - st_.kappa / st_.tau;
  if (std::abs(betaB) < 1e-300 || !std::isfinite(betaB)) return false;
  d.dtau = (r3 - alphaA) / betaB;
  d.dlam = wAl + d.dtau * wBl;
  d.dxf = w_.nf ? Vec(wAx + d.dtau * wBx) : Vec();

  d.dsl = -apply_AT_nn(d.dlam) + w_.c_nn * d.dtau + eta * Rd_nn;
  d.dxl = ul - wl_.cwiseProduct(d.dsl);
  d.dX.resize(static_cast<size_t>(P));
  d.dS.resize(static_cast<size_t>(P));
  for (int bp = 0; bp < P; ++bp) {
    Mat dS = -apply_AT_psd(d.dlam, bp) + w_.C[static_cast<size_t>(bp)] * d.dtau +
             eta * Rd_psd[static_cast<size_t>(bp)];
    Mat dX = U[static_cast<size_t>(bp)] -
             st_.X[static_cast<size_t>(bp)] * dS * Sinv_[static_cast<size_t>(bp)];
    d.dS[static_cast<size_t>(bp)] = dS;
    d.dX[static_cast<size_t>(bp)] = 0.5 * (dX + dX.transpose()).eval();
  }
  d.dkappa = e0 - (st_.kappa / st_.tau) * d.dtau;
  bool finite = std::isfinite(d.dtau) && d.dlam.allFinite();
  if (w_.nl) finite = finite && d.dxl.allFinite() && d.dsl.allFinite();
  return finite;
}

namespace {
Real psd_max_step(const Mat& X, const Mat& D) {
  Eigen::LLT<Mat> llt(X);
  if (llt.info() != Eigen::Success) return 0;
  Mat B = llt.matrixL().solve(D);
  B = llt.matrixL().solve(Mat(B.transpose()));
  Eigen::SelfAdjointEigenSolver<Mat> eig(B, Eigen::EigenvaluesOnly);
  Real lmin = eig.eigenvalues().minCoeff();
  if (lmin >= 0) return kInf;
  return -1.0 / lmin;
}
}  // namespace

Real Ipm::max_step(const Direction& d) const {
  Real alpha = kInf;
  for (int v = 0; v < w_.nl; ++v) {
    if (d.dxl(v) < 0) alpha = std::min(alpha, -st_.xl(v) / d.dxl(v));
    if (d.dsl(v) < 0) alpha = std::min(alpha, -st_.sl(v) / d.dsl(v));
  }
  if (d.dtau < 0) alpha = std::min(alpha, -st_.tau / d.dtau);
  if (d.dkappa < 0) alpha = std::min(alpha, -st_.kappa / d.dkappa);
  for (size_t bp = 0; bp < w_.psd_dims.size(); ++bp) {
    alpha = std::min(alpha, psd_max_step(st_.X[bp], d.dX[bp]));
    alpha = std::min(alpha, psd_max_step(st_.S[bp], d.dS[bp]));
  }
  return alpha;
}

ConeSolution Ipm::finish(Status st, int iters) const {
  ConeSolution sol;
  sol.status = st;
  sol.iters = iters;
  const Real tau = std::max(st_.tau, 1e-300);
  const auto& blocks = p_.blocks();
  sol.scalar_values.resize(blocks.size());
  sol.psd_values.resize(blocks.size());
  for (size_t b = 0; b < blocks.size(); ++b) {
    int off = w_.block_offset[b];
    switch (blocks[b].kind) {
      case BlockKind::Nonneg:
        sol.scalar_values[b] = st_.xl.segment(off, blocks[b].dim) / tau;
        break;
      case BlockKind::Free:
        sol.scalar_values[b] = w_.nf ? Vec(st_.xf.segment(off, blocks[b].dim) / tau) : Vec();
        break;
      case BlockKind::Psd:
        sol.psd_values[b] =
            st_.X[static_cast<size_t>(w_.block_psd_index[b])] / tau;
        break;
    }
  }
  sol.row_duals = Vec::Zero(w_.m);
  for (int r = 0; r < w_.m; ++r) {
    Real lam = st_.lam(r) / tau / w_.rows[static_cast<size_t>(r)].scale;
    // inequality multipliers are nonnegative up to solver accuracy
    switch (w_.rows[static_cast<size_t>(r)].sense) {
      case Sense::Le: sol.row_duals(r) = std::max(0.0, -lam); break;
      case Sense::Ge: sol.row_duals(r) = std::max(0.0, lam); break;
      case Sense::Eq: sol.row_duals(r) = lam; break;
    }
  }
  sol.obj = cdotx(st_.xl, st_.xf, st_.X) / tau;
  sol.dual_obj = w_.b.dot(st_.lam) / tau;
  return sol;
}

ConeSolution Ipm::certificate(Status st, int iters) const {
  // Keep the (scaled) ray as diagnostic output; primal/dual values are not
  // meaningful as a solution.
  ConeSolution sol;
  sol.status = st;
  sol.iters = iters;
  sol.scalar_values.resize(p_.blocks().size());
  sol.psd_values.resize(p_.blocks().size());
  sol.row_duals = Vec::Zero(w_.m);
  Real blam = w_.b.dot(st_.lam);
  if (st == Status::Infeasible && blam > 0) {
    for (int r = 0; r < w_.m; ++r) {
      sol.row_duals(r) = st_.lam(r) / blam / w_.rows[static_cast<size_t>(r)].scale;
    }
  }
  sol.obj = sol.dual_obj = 0;
  return sol;
}

ConeSolution Ipm::run() {
  const int P = static_cast<int>(w_.psd_dims.size());
  deg_ = w_.nl;
  for (int d : w_.psd_dims) deg_ += d;

  st_.xl = Vec::Ones(w_.nl);
  st_.sl = Vec::Ones(w_.nl);
  st_.xf = Vec::Zero(w_.nf);
  st_.lam = Vec::Zero(w_.m);
  st_.X.assign(static_cast<size_t>(P), Mat());
  st_.S.assign(static_cast<size_t>(P), Mat());
  for (int bp = 0; bp < P; ++bp) {
    int d = w_.psd_dims[static_cast<size_t>(bp)];
    st_.X[static_cast<size_t>(bp)] = Mat::Identity(d, d);
    st_.S[static_cast<size_t>(bp)] = Mat::Identity(d, d);
  }
  st_.tau = st_.kappa = 1;

  if (w_.nf > 0) {
    Af_ = Mat::Zero(w_.m, w_.nf);
    for (int r = 0; r < w_.m; ++r) {
      for (const auto& [idx, v] : w_.rows[static_cast<size_t>(r)].fr) Af_(r, idx) = v;
    }
  }

  for (int iter = 0; iter < opts_.max_iter; ++iter) {
    // scaled feasibility/optimality measures
    const Real tau = st_.tau;
    Vec Rp = apply_A(st_.xl, st_.xf, st_.X) - w_.b * tau;
    Vec ATl_nn = apply_AT_nn(st_.lam);
    Vec ATl_fr = apply_AT_fr(st_.lam);
    Real dres = max_abs(w_.c_nn * tau - ATl_nn - st_.sl);
    if (w_.nf) dres = std::max(dres, max_abs(w_.c_fr * tau - ATl_fr));
    for (int bp = 0; bp < P; ++bp) {
      Mat R = w_.C[static_cast<size_t>(bp)] * tau - apply_AT_psd(st_.lam, bp) -
              st_.S[static_cast<size_t>(bp)];
      dres = std::max(dres, R.cwiseAbs().maxCoeff());
    }
    Real pres = max_abs(Rp);
    Real pobj = cdotx(st_.xl, st_.xf, st_.X) / tau;
    Real dobj = w_.b.dot(st_.lam) / tau;
    Real gap = std::abs(pobj - dobj) / (1 + std::max(std::abs(pobj), std::abs(dobj)));
    Real prel = pres / tau / (1 + w_.data_norm);
    Real drel = dres / tau / (1 + w_.data_norm);

    if (opts_.verbose) {
      std::fprintf(stderr, "iter %3d  pres %.2e  dres %.2e  gap %.2e  tau %.2e  kappa %.2e\n",
                   iter, prel, drel, gap, st_.tau, st_.kappa);
    }
    if (prel <= opts_.feas_tol && drel <= opts_.feas_tol && gap <= opts_.gap_tol) {
      ConeSolution sol = finish(Status::Optimal, iter);
      sol.pres = prel;
      sol.dres = drel;
      sol.gap = gap;
      return sol;
    }

    // infeasibility certificates
    {
      Real blam = w_.b.dot(st_.lam);
      if (blam > opts_.feas_tol * w_.data_norm) {
        Real cert = max_abs(ATl_nn + st_.sl);
        if (w_.nf) cert = std::max(cert, max_abs(ATl_fr));
        for (int bp = 0; bp < P; ++bp) {
          Mat R = apply_AT_psd(st_.lam, bp) + st_.S[static_cast<size_t>(bp)];
          cert = std::max(cert, R.cwiseAbs().maxCoeff());
        }
        if (cert <= 1e-7 * blam) return certificate(Status::Infeasible, iter);
      }
      Real cx = cdotx(st_.xl, st_.xf, st_.X);
      if (-cx > opts_.feas_tol * w_.data_norm) {
        Real cert = max_abs(apply_A(st_.xl, st_.xf, st_.X));
        if (cert <= 1e-7 * (-cx)) return certificate(Status::Unbounded, iter);
      }
      if (st_.tau < 1e-9 * std::max(1.0, st_.kappa)) {
        if (blam > 0) {
          Real cert = max_abs(ATl_nn + st_.sl);
          if (w_.nf) cert = std::max(cert, max_abs(ATl_fr));
          for (int bp = 0; bp < P; ++bp) {
            Mat R = apply_AT_psd(st_.lam, bp) + st_.S[static_cast<size_t>(bp)];
            cert = std::max(cert, R.cwiseAbs().maxCoeff());
          }
          if (cert <= 1e-5 * blam) return certificate(Status::Infeasible, iter);
        }
        if (-cx > 0) {
          Real cert = max_abs(apply_A(st_.xl, st_.xf, st_.X));
          if (cert <= 1e-5 * (-cx)) return certificate(Status::Unbounded, iter);
        }
        return certificate(Status::NumericalFailure, iter);
      }
    }

    Real delta = 1e-10 * std::max(1.0, H_.size() ? H_.diagonal().mean() : 1.0);
    if (!factorize(delta)) return finish(Status::NumericalFailure, iter);

    Direction da;
    if (!direction(0.0, 1.0, nullptr, da)) return finish(Status::NumericalFailure, iter);
    Real a_aff = std::min(1.0, max_step(da));

    // Mehrotra centering
    Real mu = dot0(st_.xl, st_.sl) + st_.tau * st_.kappa;
    for (int bp = 0; bp < P; ++bp) {
      mu += (st_.X[static_cast<size_t>(bp)].array() * st_.S[static_cast<size_t>(bp)].array()).sum();
    }
    mu /= (deg_ + 1);
    Real mu_aff = (st_.tau + a_aff * da.dtau) * (st_.kappa + a_aff * da.dkappa);
    if (w_.nl) mu_aff += (st_.xl + a_aff * da.dxl).dot(st_.sl + a_aff * da.dsl);
    for (int bp = 0; bp < P; ++bp) {
      mu_aff += ((st_.X[static_cast<size_t>(bp)] + a_aff * da.dX[static_cast<size_t>(bp)]).array() *
                 (st_.S[static_cast<size_t>(bp)] + a_aff * da.dS[static_cast<size_t>(bp)]).array())
                    .sum();
    }
    mu_aff /= (deg_ + 1);
    Real sigma = std::clamp(std::pow(std::max(0.0, mu_aff / mu), 3.0), 1e-8, 0.999);

    Direction dc;
    if (!direction(sigma, 1.0 - sigma, &da, dc)) return finish(Status::NumericalFailure, iter);
    Real alpha = 0.98 * max_step(dc);
    alpha = std::min(alpha, 1.0);
    if (!(alpha > 0)) return finish(Status::NumericalFailure, iter);

    st_.xl += alpha * dc.dxl;
    st_.sl += alpha * dc.dsl;
    if (w_.nf) st_.xf += alpha * dc.dxf;
    st_.lam += alpha * dc.dlam;
    for (int bp = 0; bp < P; ++bp) {
      st_.X[static_cast<size_t>(bp)] += alpha * dc.dX[static_cast<size_t>(bp)];
      st_.S[static_cast<size_t>(bp)] += alpha * dc.dS[static_cast<size_t>(bp)];
    }
    st_.tau += alpha * dc.dtau;
    st_.kappa += alpha * dc.dkappa;
    if ((w_.nl && !st_.xl.allFinite()) || !std::isfinite(st_.tau)) {
      return finish(Status::NumericalFailure, iter);
    }
  }
  ConeSolution sol = finish(Status::IterationLimit, opts_.max_iter);
  return sol;
}

}  // namespace

ConeSolution DenseIpmBackend::solve(const ConeProblem& problem, const Options& opts) const {
  Ipm ipm(problem, opts);
  return ipm.run();
}

const Backend& default_backend() {
  static DenseIpmBackend backend;
  return backend;
}

ConeSolution solve(const ConeProblem& problem, const Options& opts) {
  return default_backend().solve(problem, opts);
}

Vec extract_duals(const ConeSolution& sol, const std::vector<int>& rows) {
  if (sol.status != Status::Optimal) {
    throw std::logic_error("extract_duals: solution status is " + to_string(sol.status));
  }
  Vec out(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = sol.row_duals(rows[i]);
  return out;
}

}  // namespace gridplan::conic
