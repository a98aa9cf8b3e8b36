#include "dvto/milp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>
#include <stdexcept>

namespace dvto {

namespace {

constexpr int kVoid = -1;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPrimalTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr long kMaxLpIterations = 200000;

// Returns q > 0 such that every coefficient is an integer multiple of q, or 0.
double integer_step(const SparseRow& row) {
  double amin = kInf;
  for (double c : row.coef) {
    if (c != 0.0) amin = std::min(amin, std::abs(c));
  }
  if (!std::isfinite(amin)) return 0.0;
  for (int k = 1; k <= 1000; ++k) {
    const double q = amin / k;
    bool ok = true;
    for (double c : row.coef) {
      const double r = c / q;
      if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, std::abs(r))) {
        ok = false;
        break;
      }
    }
    if (ok) return q;
  }
  return 0.0;
}

// Rows normalized (integer-scaled where possible), columns in CSC form, every variable in a
// group.
struct Prepared {
  int n = 0;
  int m = 0;
  bool has_eta = false;
  std::vector<double> cost;
  double constant = 0.0;
  std::vector<int> col_start;
  std::vector<int> col_row;
  std::vector<double> col_val;
  std::vector<double> b;
  std::vector<double> eta;
  std::vector<bool> integral;  // row scaled to integer coefficients and floored rhs
  std::vector<int> group_of;
  std::vector<std::vector<int>> groups;
};

Prepared prepare(const BinaryProgram& p) {
  if (auto issues = p.check(); !issues.empty()) {
    throw std::invalid_argument("malformed binary program: " + issues.front());
  }
  Prepared P;
  P.n = p.n;
  P.m = static_cast<int>(p.rows.size());
  P.has_eta = p.has_eta;
  P.cost = p.cost;
  P.cost.resize(p.n, 0.0);
  P.constant = p.constant;
  P.b.resize(P.m);
  P.eta.resize(P.m);
  P.integral.assign(P.m, false);

  std::vector<int> counts(p.n + 1, 0);
  for (const auto& row : p.rows) {
    for (int j : row.index) ++counts[j + 1];
  }
  P.col_start.assign(p.n + 1, 0);
  for (int j = 0; j < p.n; ++j) P.col_start[j + 1] = P.col_start[j] + counts[j + 1];
  P.col_row.resize(P.col_start[p.n]);
  P.col_val.resize(P.col_start[p.n]);
  std::vector<int> fill(P.col_start.begin(), P.col_start.end() - 1);

  for (int i = 0; i < P.m; ++i) {
    const auto& row = p.rows[i];
    double scale = 1.0;
    bool integral = false;
    if (row.eta_coef == 0.0) {
      if (double q = integer_step(row); q > 0.0) {
        scale = q;
        integral = true;
      }
    }
    if (!integral) {
      double amax = std::abs(row.eta_coef);
      for (double c : row.coef) amax = std::max(amax, std::abs(c));
      if (amax > 0.0) scale = amax;
    }
    for (std::size_t k = 0; k < row.index.size(); ++k) {
      double v = row.coef[k] / scale;
      if (integral) v = std::round(v);
      P.col_row[fill[row.index[k]]] = i;
      P.col_val[fill[row.index[k]]++] = v;
    }
    double rhs = row.bound / scale;
    if (integral) rhs = std::floor(rhs + 1e-9 * std::max(1.0, std::abs(rhs)));
    P.b[i] = rhs;
    P.eta[i] = row.eta_coef / scale;
    P.integral[i] = integral;
  }

  P.group_of.assign(p.n, -1);
  for (const auto& g : p.groups) {
    const int id = static_cast<int>(P.groups.size());
    P.groups.push_back(g);
    for (int j : g) P.group_of[j] = id;
  }
  for (int j = 0; j < p.n; ++j) {
    if (P.group_of[j] < 0) {
      P.group_of[j] = static_cast<int>(P.groups.size());
      P.groups.push_back({j});
    }
  }
  return P;
}

// Dual simplex on the group-transformed system: every group is a convexity row
// sum(members) + void = 1 handled implicitly through one key member per group.
class DualSimplex {
 public:
  DualSimplex(const Prepared& P, const std::vector<std::int8_t>& fix) : P_(P) {
    m_ = P.m;
    rhs_ = Eigen::Map<const Eigen::VectorXd>(P.b.data(), m_);
    constant_ = P.constant;
    ones_.clear();
    ag_of_var_.assign(P.n, -1);
    pos_of_var_.assign(P.n, -1);
    for (const auto& g : P.groups) {
      int one = -1;
      std::vector<int> members;
      for (int j : g) {
        const int f = fix.empty() ? -1 : fix[j];
        if (f == 1) {
          if (one >= 0) {
            conflict_ = true;
          }
          one = j;
        } else if (f != 0) {
          members.push_back(j);
        }
      }
      if (one >= 0) {
        ones_.push_back(one);
        constant_ += P.cost[one];
        for (int k = P.col_start[one]; k < P.col_start[one + 1]; ++k) {
          rhs_[P.col_row[k]] -= P.col_val[k];
        }
        continue;
      }
      if (members.empty()) continue;
      for (int j : members) ag_of_var_[j] = static_cast<int>(groups_.size());
      groups_.push_back(std::move(members));
    }
    key_.assign(groups_.size(), kVoid);
    basics_in_group_.assign(groups_.size(), 0);
    void_pos_.assign(groups_.size(), -1);
    slack_pos_.assign(m_, -1);
    phi_.assign(P.n, 0.0);
    s_.assign(P.n, 0.0);
  }

  LpResult run() {
    LpResult out;
    if (conflict_) return out;
    crash();
    int forced = -1;
    for (long it = 0;; ++it) {
      if (it > kMaxLpIterations) throw std::runtime_error("LP iteration limit exceeded");
      factor();
      price();
      repair_keys();
      primal();

      int p = -1;
      double worst = -kPrimalTol;
      int key_group = -1;
      if (forced >= 0 && xw_[forced] < -kPrimalTol) {
        p = forced;
      } else {
        for (int k = 0; k < m_; ++k) {
          if (w_[k].kind == Kind::Eta) continue;
          if (xw_[k] < worst) {
            worst = xw_[k];
            p = k;
          }
        }
        for (std::size_t g = 0; g < groups_.size(); ++g) {
          if (kv_[g] < worst) {
            worst = kv_[g];
            key_group = static_cast<int>(g);
            p = -1;
          }
        }
      }
      forced = -1;
      if (p < 0 && key_group < 0) break;  // primal feasible: optimal

      if (key_group >= 0) {
        // Swap the infeasible key with the largest basic member of its group; the basis is
        // unchanged, only its representation.
        int best = -1;
        for (int k = 0; k < m_; ++k) {
          if (w_[k].kind == Kind::Member && ag_of_var_[w_[k].idx] == key_group &&
              (best < 0 || xw_[k] > xw_[best])) {
            best = k;
          }
        }
        if (best < 0) throw std::runtime_error("LP: negative key without basic members");
        const int old_key = key_[key_group];
        const int new_key = w_[best].idx;
        pos_of_var_[new_key] = -1;
        key_[key_group] = new_key;
        if (old_key == kVoid) {
          w_[best] = {Kind::Void, key_group};
          void_pos_[key_group] = best;
        } else {
          w_[best] = {Kind::Member, old_key};
          pos_of_var_[old_key] = best;
        }
        forced = best;
        ++iterations_;
        continue;
      }

      if (!ratio_test(p)) return finish(out, false);
      ++iterations_;
    }
    return finish(out, true);
  }

 private:
  // Void is the implicit slack of a group's convexity row; it only sits in the working basis
  // transiently, right before it leaves.
  enum class Kind { Slack, Member, Eta, Void };
  struct Basic {
    Kind kind;
    int idx;
  };

  void add_column(int j, double sign, Eigen::Ref<Eigen::VectorXd> v) const {
    if (j == kVoid) return;
    for (int k = P_.col_start[j]; k < P_.col_start[j + 1]; ++k) {
      v[P_.col_row[k]] += sign * P_.col_val[k];
    }
  }
  double cost_of(int j) const { return j == kVoid ? 0.0 : P_.cost[j]; }
  double phi_of(int j) const { return j == kVoid ? 0.0 : phi_[j]; }
  double s_of(int j) const { return j == kVoid ? 0.0 : s_[j]; }

  void crash() {
    w_.assign(m_, {Kind::Slack, 0});
    for (int i = 0; i < m_; ++i) {
      w_[i] = {Kind::Slack, i};
      slack_pos_[i] = i;
    }
    if (P_.has_eta) {
      int r0 = -1;
      for (int i = 0; i < m_; ++i) {
        if (P_.eta[i] < 0.0) {
          r0 = i;
          break;
        }
      }
      if (r0 < 0) throw std::invalid_argument("eta has no lower-bounding row");
      w_[r0] = {Kind::Eta, 0};
      slack_pos_[r0] = -1;
    }
    // keys chosen by repair_keys() after the first pricing
  }

  void factor() {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    cb_ = Eigen::VectorXd::Zero(m_);
    for (int k = 0; k < m_; ++k) {
      const Basic& bv = w_[k];
      switch (bv.kind) {
        case Kind::Slack:
          B(bv.idx, k) = 1.0;
          break;
        case Kind::Eta:
          for (int i = 0; i < m_; ++i) B(i, k) = P_.eta[i];
          cb_[k] = 1.0;
          break;
        case Kind::Member: {
          const int key = key_[ag_of_var_[bv.idx]];
          add_column(bv.idx, 1.0, B.col(k));
          add_column(key, -1.0, B.col(k));
          cb_[k] = P_.cost[bv.idx] - cost_of(key);
          break;
        }
        case Kind::Void: {
          const int key = key_[bv.idx];
          add_column(key, -1.0, B.col(k));
          cb_[k] = -cost_of(key);
          break;
        }
      }
    }
    lu_.compute(B);
    lut_.compute(B.transpose());
  }

  void price() {
    pi_ = m_ ? Eigen::VectorXd(lut_.solve(cb_)) : Eigen::VectorXd();
    for (const auto& g : groups_) {
      for (int j : g) {
        double v = P_.cost[j];
        for (int k = P_.col_start[j]; k < P_.col_start[j + 1]; ++k) {
          v -= pi_[P_.col_row[k]] * P_.col_val[k];
        }
        phi_[j] = v;
      }
    }
  }

  // Groups without basic members may move their key to the cheapest member freely.
  void repair_keys() {
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      if (basics_in_group_[g] > 0) continue;
      int best = key_[g];
      double best_phi = phi_of(best);
      auto consider = [&](int j) {
        const double v = phi_of(j);
        if (v < best_phi - 1e-12 * std::max(1.0, std::abs(best_phi))) {
          best = j;
          best_phi = v;
        }
      };
      consider(kVoid);
      for (int j : groups_[g]) consider(j);
      key_[g] = best;
    }
  }

  void primal() {
    Eigen::VectorXd r = rhs_;
    for (std::size_t g = 0; g < groups_.size(); ++g) add_column(key_[g], -1.0, r);
    xw_ = m_ ? Eigen::VectorXd(lu_.solve(r)) : Eigen::VectorXd();
    kv_.assign(groups_.size(), 1.0);
    for (int k = 0; k < m_; ++k) {
      if (w_[k].kind == Kind::Member) kv_[ag_of_var_[w_[k].idx]] -= xw_[k];
      if (w_[k].kind == Kind::Void) kv_[w_[k].idx] -= xw_[k];
    }
  }

  struct Breakpoint {
    double t;
    double alpha;  // pivot magnitude, larger preferred on ties
    long order;
    int kind;      // 0 hard member, 1 hard slack, 2 soft transition
    int a;         // member / slack / group
    int from;
    int to;
    bool operator>(const Breakpoint& o) const {
      if (t != o.t) return t > o.t;
      if (alpha != o.alpha) return alpha < o.alpha;
      return order > o.order;
    }
  };

  // Next envelope transition of a soft group currently keyed at `from`, at or after t0.
  bool next_transition(int g, int from, double t0, Breakpoint& bp) const {
    const double sf = s_of(from);
    const double pf = phi_of(from);
    double best_t = kInf, best_s = -kInf;
    int best = kVoid - 1;
    auto consider = [&](int j) {
      if (j == from) return;
      const double sj = s_of(j);
      if (!(sj < sf - kPivotTol)) return;
      const double t = std::max(t0, (phi_of(j) - pf) / (sf - sj));
      if (t < best_t || (t == best_t && sj > best_s)) {
        best_t = t;
        best_s = sj;
        best = j;
      }
    };
    consider(kVoid);
    for (int j : groups_[g]) consider(j);
    if (best == kVoid - 1) return false;
    bp = {best_t, sf - best_s, 0, 2, g, from, best};
    return true;
  }

  bool ratio_test(int p) {
    Eigen::VectorXd ep = Eigen::VectorXd::Zero(m_);
    ep[p] = 1.0;
    const Eigen::VectorXd rho = lut_.solve(ep);
    for (const auto& g : groups_) {
      for (int j : g) {
        double v = 0.0;
        for (int k = P_.col_start[j]; k < P_.col_start[j + 1]; ++k) {
          v += rho[P_.col_row[k]] * P_.col_val[k];
        }
        s_[j] = v;
      }
    }

    std::vector<Breakpoint> heap;
    long order = 0;
    for (int i = 0; i < m_; ++i) {
      if (slack_pos_[i] >= 0) continue;
      if (rho[i] < -kPivotTol) {
        const double d = std::max(0.0, -pi_[i]);
        heap.push_back({d / -rho[i], -rho[i], order++, 1, i, 0, 0});
      }
    }
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const int key = key_[g];
      if (basics_in_group_[g] > 0) {
        auto consider = [&](int j) {
          if (j == key || (j != kVoid && pos_of_var_[j] >= 0)) return;
          if (j == kVoid && void_pos_[g] >= 0) return;
          const double alpha = s_of(j) - s_of(key);
          if (alpha < -kPivotTol) {
            const double d = std::max(0.0, phi_of(j) - phi_of(key));
            heap.push_back({d / -alpha, -alpha, order++, 0, j, static_cast<int>(g), 0});
          }
        };
        consider(kVoid);
        for (int j : groups_[g]) consider(j);
      } else {
        Breakpoint bp;
        if (next_transition(static_cast<int>(g), key, 0.0, bp)) {
          bp.order = order++;
          heap.push_back(bp);
        }
      }
    }
    std::make_heap(heap.begin(), heap.end(), std::greater<>());

    double slope = -xw_[p];
    while (!heap.empty()) {
      std::pop_heap(heap.begin(), heap.end(), std::greater<>());
      Breakpoint bp = heap.back();
      heap.pop_back();
      if (bp.kind == 1) {
        enter_slack(p, bp.a);
        return true;
      }
      if (bp.kind == 0) {
        enter_member(p, bp.a, bp.from);
        return true;
      }
      const double delta = s_of(bp.from) - s_of(bp.to);
      if (slope - delta <= 0.0) {
        enter_member(p, bp.to, bp.a);
        return true;
      }
      slope -= delta;
      key_[bp.a] = bp.to;
      Breakpoint next;
      if (next_transition(bp.a, bp.to, bp.t, next)) {
        next.order = order++;
        heap.push_back(next);
        std::push_heap(heap.begin(), heap.end(), std::greater<>());
      }
    }
    return false;  // dual unbounded
  }

  void leave(int p) {
    const Basic& bv = w_[p];
    if (bv.kind == Kind::Slack) {
      slack_pos_[bv.idx] = -1;
    } else if (bv.kind == Kind::Member) {
      pos_of_var_[bv.idx] = -1;
      --basics_in_group_[ag_of_var_[bv.idx]];
    } else if (bv.kind == Kind::Void) {
      void_pos_[bv.idx] = -1;
      --basics_in_group_[bv.idx];
    }
  }

  void enter_slack(int p, int i) {
    leave(p);
    w_[p] = {Kind::Slack, i};
    slack_pos_[i] = p;
  }

  void enter_member(int p, int j, int g) {
    if (j == kVoid) {
      // The void column entering means the key leaves the group; use the void as key and
      // let the old key enter instead (same basis).
      const int old_key = key_[g];
      key_[g] = kVoid;
      j = old_key;
    }
    leave(p);
    w_[p] = {Kind::Member, j};
    pos_of_var_[j] = p;
    ++basics_in_group_[g];
  }

  LpResult& finish(LpResult& out, bool feasible) {
    out.iterations = iterations_;
    out.feasible = feasible;
    if (!feasible) return out;
    out.x.assign(P_.n, 0.0);
    for (int j : ones_) out.x[j] = 1.0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      if (key_[g] != kVoid) out.x[key_[g]] = kv_[g];
    }
    for (int k = 0; k < m_; ++k) {
      if (w_[k].kind == Kind::Member) out.x[w_[k].idx] = xw_[k];
      if (w_[k].kind == Kind::Eta) out.eta = xw_[k];
    }
    double v = constant_;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      for (int j : groups_[g]) {
        out.x[j] = std::clamp(out.x[j], 0.0, 1.0);
        v += P_.cost[j] * out.x[j];
      }
    }
    if (P_.has_eta) v += out.eta;
    out.value = v;
    return out;
  }

  const Prepared& P_;
  int m_ = 0;
  Eigen::VectorXd rhs_;
  double constant_ = 0.0;
  bool conflict_ = false;
  std::vector<int> ones_;
  std::vector<std::vector<int>> groups_;
  std::vector<int> ag_of_var_;
  std::vector<int> pos_of_var_;
  std::vector<int> slack_pos_;
  std::vector<int> key_;
  std::vector<int> basics_in_group_;
  std::vector<int> void_pos_;
  std::vector<Basic> w_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lut_;
  Eigen::VectorXd cb_, pi_, xw_;
  std::vector<double> kv_;
  std::vector<double> phi_, s_;
  long iterations_ = 0;
};

std::vector<std::int8_t> merged_fixing(const BinaryProgram& p,
                                       const std::vector<std::int8_t>& local) {
  if (!local.empty()) {
    if (static_cast<int>(local.size()) != p.n) {
      throw std::invalid_argument("local fixing length does not match the program");
    }
    return local;
  }
  if (p.fixing.empty()) return std::vector<std::int8_t>(p.n, -1);
  return p.fixing;
}

LpResult run_lp(const Prepared& P, const std::vector<std::int8_t>& fix, double int_tol) {
  DualSimplex lp(P, fix);
  LpResult r = lp.run();
  if (r.feasible) {
    for (int j = 0; j < P.n; ++j) {
      if (r.x[j] > int_tol && r.x[j] < 1.0 - int_tol) r.fractional.push_back(j);
    }
  }
  return r;
}

// {0, 1/2} Chvatal-Gomory cuts from one or two integer rows: half the sum of the rows, with
// odd coefficients evened out by x_j <= 1 or -x_j <= 0, whichever is slacker at x. The cut
// is violated when the combined slack is below 1 and the right-hand side is odd. Trust and
// volume rows with +-1 coefficients produce half-integral vertices that this removes.
std::vector<SparseRow> half_cuts(const Prepared& P, const std::vector<double>& x,
                                 const std::vector<std::int8_t>& fix, int max_cuts) {
  std::vector<int> rows;
  for (int i = 0; i < P.m; ++i) {
    if (P.integral[i]) rows.push_back(i);
  }
  if (rows.empty()) return {};
  std::vector<std::vector<double>> dense(rows.size(), std::vector<double>(P.n, 0.0));
  std::vector<double> slack(rows.size());
  for (int j = 0; j < P.n; ++j) {
    for (int k = P.col_start[j]; k < P.col_start[j + 1]; ++k) {
      const auto it = std::lower_bound(rows.begin(), rows.end(), P.col_row[k]);
      if (it != rows.end() && *it == P.col_row[k]) dense[it - rows.begin()][j] = P.col_val[k];
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double lhs = 0.0;
    for (int j = 0; j < P.n; ++j) lhs += dense[r][j] * x[j];
    slack[r] = std::max(0.0, P.b[rows[r]] - lhs);
  }

  struct Candidate {
    double violation;
    SparseRow row;
  };
  std::vector<Candidate> found;
  std::vector<double> c(P.n);
  auto try_combo = [&](int r1, int r2) {
    double total = slack[r1] + (r2 >= 0 ? slack[r2] : 0.0);
    if (total >= 1.0 - 1e-6) return;
    double rhs = P.b[rows[r1]] + (r2 >= 0 ? P.b[rows[r2]] : 0.0);
    for (int j = 0; j < P.n; ++j) {
      c[j] = dense[r1][j] + (r2 >= 0 ? dense[r2][j] : 0.0);
      if (std::lround(c[j]) % 2 == 0) continue;
      // a fixed variable contributes no slack either way
      const double up = fix[j] == 1 ? 0.0 : 1.0 - x[j];
      const double down = fix[j] == 0 ? 0.0 : x[j];
      if (up <= down) {
        c[j] += 1.0;
        rhs += 1.0;
        total += up;
      } else {
        c[j] -= 1.0;
        total += down;
      }
      if (total >= 1.0 - 1e-6) return;
    }
    if (std::lround(rhs) % 2 == 0) return;
    Candidate cand{(1.0 - total) / 2.0, {}};
    for (int j = 0; j < P.n; ++j) {
      if (c[j] != 0.0) {
        cand.row.index.push_back(j);
        cand.row.coef.push_back(std::round(c[j] / 2.0));
      }
    }
    cand.row.bound = std::floor(rhs / 2.0);
    cand.row.name = "half_cut";
    found.push_back(std::move(cand));
  };
  const int nr = static_cast<int>(rows.size());
  for (int a = 0; a < nr; ++a) {
    try_combo(a, -1);
    for (int b = a + 1; b < nr; ++b) try_combo(a, b);
  }
  std::sort(found.begin(), found.end(),
            [](const Candidate& l, const Candidate& r) { return l.violation > r.violation; });
  std::vector<SparseRow> out;
  for (auto& f : found) {
    if (static_cast<int>(out.size()) >= max_cuts) break;
    out.push_back(std::move(f.row));
  }
  return out;
}

}  // namespace

std::vector<std::string> BinaryProgram::check() const {
  std::vector<std::string> out;
  if (n < 0) out.emplace_back("negative variable count");
  if (!cost.empty() && static_cast<int>(cost.size()) != n) out.emplace_back("cost length != n");
  if (!fixing.empty() && static_cast<int>(fixing.size()) != n) {
    out.emplace_back("fixing length != n");
  }
  bool eta_bounded = false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.index.size() != r.coef.size()) {
      out.push_back("row " + std::to_string(i) + ": index/coef length mismatch");
    }
    for (int j : r.index) {
      if (j < 0 || j >= n) {
        out.push_back("row " + std::to_string(i) + ": index out of range");
        break;
      }
    }
    if (r.eta_coef != 0.0 && !has_eta) {
      out.push_back("row " + std::to_string(i) + ": eta coefficient without eta");
    }
    if (r.eta_coef < 0.0) eta_bounded = true;
  }
  if (has_eta && !eta_bounded) out.emplace_back("eta has no lower-bounding row");
  std::vector<int> seen(std::max(n, 0), 0);
  for (const auto& g : groups) {
    for (int j : g) {
      if (j < 0 || j >= n) {
        out.emplace_back("group index out of range");
        continue;
      }
      if (seen[j]++) out.push_back("variable " + std::to_string(j) + " in two groups");
    }
  }
  return out;
}

std::string_view to_string(MilpStatus s) {
  switch (s) {
    case MilpStatus::Optimal: return "optimal";
    case MilpStatus::Infeasible: return "infeasible";
    case MilpStatus::NodeLimit: return "node-limit";
  }
  return "?";
}

Evaluation evaluate(const BinaryProgram& p, const std::vector<std::uint8_t>& x, double tol) {
  Evaluation ev;
  if (static_cast<int>(x.size()) != p.n) throw std::invalid_argument("assignment length != n");
  std::vector<double> lhs(p.rows.size(), 0.0);
  double lo = -kInf, hi = kInf;
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const auto& r = p.rows[i];
    for (std::size_t k = 0; k < r.index.size(); ++k) lhs[i] += r.coef[k] * x[r.index[k]];
    if (r.eta_coef < 0.0) lo = std::max(lo, (r.bound - lhs[i]) / r.eta_coef);
    if (r.eta_coef > 0.0) hi = std::min(hi, (r.bound - lhs[i]) / r.eta_coef);
  }
  if (p.has_eta) {
    if (!std::isfinite(lo)) return ev;
    ev.eta = lo;
  }
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const double v = lhs[i] + p.rows[i].eta_coef * ev.eta - p.rows[i].bound;
    ev.max_violation = std::max(ev.max_violation, v);
  }
  for (const auto& g : p.groups) {
    int s = 0;
    for (int j : g) s += x[j];
    ev.max_violation = std::max(ev.max_violation, static_cast<double>(s - 1));
  }
  bool fix_ok = true;
  if (!p.fixing.empty()) {
    for (int j = 0; j < p.n; ++j) {
      if (p.fixing[j] >= 0 && p.fixing[j] != x[j]) fix_ok = false;
    }
  }
  ev.feasible = fix_ok && ev.max_violation <= tol && !(p.has_eta && lo > hi + tol);
  double obj = p.constant + (p.has_eta ? ev.eta : 0.0);
  if (!p.cost.empty()) {
    for (int j = 0; j < p.n; ++j) obj += p.cost[j] * x[j];
  }
  ev.objective = obj;
  return ev;
}

LpResult solve_lp_relaxation(const BinaryProgram& program,
                             const std::vector<std::int8_t>& local_fixing) {
  const Prepared P = prepare(program);
  return run_lp(P, merged_fixing(program, local_fixing), 1e-6);
}

MilpResult solve(const BinaryProgram& program, const MilpOptions& opt) {
  Prepared P = prepare(program);
  const auto root_fix = merged_fixing(program, {});
  MilpResult res;

  // Root cut loop; the cuts stay in every node.
  if (opt.cut_rounds > 0) {
    BinaryProgram strengthened = program;
    for (int round = 0; round < opt.cut_rounds; ++round) {
      const LpResult lp = run_lp(P, root_fix, opt.integrality_tol);
      res.lp_iterations += lp.iterations;
      if (!lp.feasible || lp.fractional.empty()) break;
      auto cuts = half_cuts(P, lp.x, root_fix, 16);
      if (cuts.empty()) break;
      res.cuts += static_cast<int>(cuts.size());
      for (auto& c : cuts) strengthened.rows.push_back(std::move(c));
      P = prepare(strengthened);
    }
  }

  struct Node {
    double bound;
    long id;
    std::vector<std::pair<int, std::int8_t>> fixes;
  };
  auto worse = [](const Node& a, const Node& b) {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);
  open.push({-kInf, 0, {}});
  long next_id = 1;

  bool have_incumbent = false;
  double incumbent = kInf;
  std::vector<std::uint8_t> best_x;
  double best_eta = 0.0;

  auto gap_closed = [&](double bound) {
    return have_incumbent &&
           bound >= incumbent - opt.gap_tol * std::max(1.0, std::abs(incumbent));
  };
  auto offer = [&](const std::vector<std::uint8_t>& x) {
    const Evaluation ev = evaluate(program, x, opt.feasibility_tol);
    if (ev.feasible && (!have_incumbent || ev.objective < incumbent)) {
      have_incumbent = true;
      incumbent = ev.objective;
      best_x = x;
      best_eta = ev.eta;
    }
    return ev.feasible;
  };

  std::vector<std::int8_t> fix;
  double last_lb = -kInf;
  while (!open.empty()) {
    if (res.nodes >= opt.node_limit) break;
    Node node = open.top();
    open.pop();
    if (gap_closed(node.bound)) continue;
    ++res.nodes;

    fix = root_fix;
    for (auto [j, v] : node.fixes) fix[j] = v;
    LpResult lp = run_lp(P, fix, opt.integrality_tol);
    res.lp_iterations += lp.iterations;

    if (lp.feasible && !gap_closed(lp.value)) {
      std::vector<std::uint8_t> rounded(P.n);
      for (int j = 0; j < P.n; ++j) rounded[j] = lp.x[j] > 0.5 ? 1 : 0;
      bool integral_ok = lp.fractional.empty() && offer(rounded);
      if (!integral_ok) {
        std::vector<std::uint8_t> down(P.n);
        for (int j = 0; j < P.n; ++j) down[j] = lp.x[j] >= 1.0 - opt.integrality_tol ? 1 : 0;
        offer(down);
        if (!lp.fractional.empty()) offer(rounded);

        int branch = -1;
        double best_score = kInf;
        for (int j = 0; j < P.n; ++j) {
          const double dev = std::abs(lp.x[j] - std::round(lp.x[j]));
          if (dev <= 0.0 || fix[j] >= 0) continue;
          const double score = std::abs(lp.x[j] - 0.5);
          if (score < best_score) {
            best_score = score;
            branch = j;
          }
        }
        if (branch >= 0) {
          for (std::int8_t v : {std::int8_t{1}, std::int8_t{0}}) {
            Node child{lp.value, next_id++, node.fixes};
            child.fixes.emplace_back(branch, v);
            open.push(std::move(child));
          }
        }
      }
    }

    if (opt.record_bounds) {
      double lb = open.empty() ? incumbent : open.top().bound;
      if (have_incumbent) lb = std::min(lb, incumbent);
      lb = std::max(lb, last_lb);
      last_lb = lb;
      res.bound_trace.push_back(lb);
    }
  }

  bool exhausted = true;
  while (!open.empty()) {
    if (!gap_closed(open.top().bound)) {
      exhausted = false;
      break;
    }
    open.pop();
  }
  if (have_incumbent) {
    res.x = best_x;
    res.eta = best_eta;
    res.objective = incumbent;
  }
  if (exhausted) {
    res.status = have_incumbent ? MilpStatus::Optimal : MilpStatus::Infeasible;
    res.best_bound = incumbent;
  } else {
    res.status = MilpStatus::NodeLimit;
    res.best_bound = std::min(open.top().bound, incumbent);
  }
  return res;
}

MilpResult brute_force(const BinaryProgram& program) {
  if (program.n > 24) throw std::invalid_argument("brute force limited to n <= 24");
  if (auto issues = program.check(); !issues.empty()) {
    throw std::invalid_argument("malformed binary program: " + issues.front());
  }
  MilpResult res;
  res.status = MilpStatus::Infeasible;
  std::vector<std::uint8_t> x(program.n);
  const unsigned long total = 1ul << program.n;
  for (unsigned long mask = 0; mask < total; ++mask) {
    for (int j = 0; j < program.n; ++j) x[j] = (mask >> j) & 1u;
    const Evaluation ev = evaluate(program, x);
    ++res.nodes;
    if (ev.feasible && (res.status != MilpStatus::Optimal || ev.objective < res.objective)) {
      res.status = MilpStatus::Optimal;
      res.objective = ev.objective;
      res.x = x;
      res.eta = ev.eta;
    }
  }
  res.best_bound = res.objective;
  return res;
}

void write_mps(const BinaryProgram& p, std::ostream& out, const std::string& name) {
  out << "NAME          " << name << "\nROWS\n N  OBJ\n";
  for (std::size_t i = 0; i < p.rows.size(); ++i) out << " L  R" << i << '\n';
  for (std::size_t g = 0; g < p.groups.size(); ++g) out << " L  G" << g << '\n';

  std::vector<std::vector<std::pair<std::string, double>>> cols(p.n);
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const auto& r = p.rows[i];
    for (std::size_t k = 0; k < r.index.size(); ++k) {
      cols[r.index[k]].emplace_back("R" + std::to_string(i), r.coef[k]);
    }
  }
  for (std::size_t g = 0; g < p.groups.size(); ++g) {
    for (int j : p.groups[g]) cols[j].emplace_back("G" + std::to_string(g), 1.0);
  }
  out.precision(17);
  out << "COLUMNS\n    MARKER    'MARKER'    'INTORG'\n";
  for (int j = 0; j < p.n; ++j) {
    const double c = p.cost.empty() ? 0.0 : p.cost[j];
    out << "    X" << j << "    OBJ    " << c << '\n';
    for (const auto& [row, v] : cols[j]) out << "    X" << j << "    " << row << "    " << v << '\n';
  }
  out << "    MARKER    'MARKER'    'INTEND'\n";
  if (p.has_eta) {
    out << "    ETA    OBJ    1\n";
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
      if (p.rows[i].eta_coef != 0.0) out << "    ETA    R" << i << "    " << p.rows[i].eta_coef << '\n';
    }
  }
  out << "RHS\n";
  if (p.constant != 0.0) out << "    RHS    OBJ    " << -p.constant << '\n';
  for (std::size_t i = 0; i < p.rows.size(); ++i) out << "    RHS    R" << i << "    " << p.rows[i].bound << '\n';
  for (std::size_t g = 0; g < p.groups.size(); ++g) out << "    RHS    G" << g << "    1\n";
  out << "BOUNDS\n";
  for (int j = 0; j < p.n; ++j) {
    if (!p.fixing.empty() && p.fixing[j] >= 0) {
      out << " FX BND    X" << j << "    " << int(p.fixing[j]) << '\n';
    } else {
      out << " BV BND    X" << j << '\n';
    }
  }
  if (p.has_eta) out << " FR BND    ETA\n";
  out << "ENDATA\n";
}

namespace {

class BuiltinBackend final : public MilpBackend {
 public:
  std::string name() const override { return "builtin"; }
  MilpResult solve(const BinaryProgram& program, const MilpOptions& options) override {
    return dvto::solve(program, options);
  }
};

}  // namespace

std::shared_ptr<MilpBackend> builtin_backend() {
  static auto backend = std::make_shared<BuiltinBackend>();
  return backend;
}

}  // namespace dvto
