#include "dvto/master.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace dvto {

SelectionStream::SelectionStream(std::vector<double> singles,
                                 const std::set<std::vector<int>>* excluded, int max_size)
    : singles_(std::move(singles)), excluded_(excluded), max_size_(max_size) {
  order_.resize(singles_.size());
  std::iota(order_.begin(), order_.end(), 0);
  std::stable_sort(order_.begin(), order_.end(),
                   [&](int a, int b) { return singles_[a] < singles_[b]; });
}

bool SelectionStream::advance_subset() {
  const int k = static_cast<int>(order_.size());
  if (!started_) {
    started_ = true;
    rank_ = 1;
    combo_ = {0};
    return rank_ < k;
  }
  // next combination of combo_.size() ranks out of [0, rank_)
  const int c = static_cast<int>(combo_.size());
  int i = c - 1;
  while (i >= 0 && combo_[i] == rank_ - c + i) --i;
  if (i >= 0) {
    ++combo_[i];
    for (int q = i + 1; q < c; ++q) combo_[q] = combo_[q - 1] + 1;
    return true;
  }
  const bool size_capped = max_size_ > 0 && c + 2 > max_size_;
  if (c < rank_ && !size_capped) {
    combo_.resize(c + 1);
    std::iota(combo_.begin(), combo_.end(), 0);
    return true;
  }
  ++rank_;
  combo_ = {0};
  return rank_ < k;
}

std::optional<Selection> SelectionStream::make_current() {
  Selection s;
  for (int r : combo_) s.cuts.push_back(order_[r]);
  s.cuts.push_back(order_[rank_]);
  std::sort(s.cuts.begin(), s.cuts.end());
  s.key = singles_[order_[rank_]];
  return s;
}

const std::optional<Selection>& SelectionStream::peek() {
  if (peeked_) return buffered_;
  peeked_ = true;
  buffered_.reset();
  if (max_size_ == 1) return buffered_;
  while (advance_subset()) {
    auto s = make_current();
    if (excluded_ && excluded_->count(s->cuts)) continue;
    buffered_ = std::move(s);
    break;
  }
  return buffered_;
}

std::optional<Selection> SelectionStream::next() {
  peek();
  peeked_ = false;
  return std::move(buffered_);
}

void add_constraint_rows(BinaryProgram& program, const ConstraintSpec& constraint,
                         const MaterialSet& materials, int n_elements) {
  const int nm = materials.count();
  SparseRow row;
  row.name = constraint.kind == ConstraintKind::Volume ? "volume" : "mass";
  row.index.resize(static_cast<std::size_t>(n_elements) * nm);
  row.coef.resize(row.index.size());
  for (int e = 0; e < n_elements; ++e) {
    for (int m = 0; m < nm; ++m) {
      const int j = e * nm + m;
      const double weight =
          constraint.kind == ConstraintKind::Mass ? materials.materials[m].density : 1.0;
      row.index[j] = j;
      row.coef[j] = weight / n_elements;
    }
  }
  row.bound = constraint.target;
  program.rows.push_back(std::move(row));
  if (nm > 1) {
    for (int e = 0; e < n_elements; ++e) {
      std::vector<int> g(nm);
      std::iota(g.begin(), g.end(), e * nm);
      program.groups.push_back(std::move(g));
    }
  }
}

BinaryProgram build_subproblem(const std::vector<int>& selection, const CutPool& pool,
                               const ConstraintSpec& constraint, const MaterialSet& materials) {
  if (selection.empty()) throw std::invalid_argument("empty selection");
  const Cut& first = pool[selection.front()];
  const int n = static_cast<int>(first.slope.size());
  BinaryProgram p;
  p.n = n;
  p.cost.assign(n, 0.0);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);

  const bool single = selection.size() == 1;
  p.has_eta = !single;
  for (int j : selection) {
    const Cut& cut = pool[j];
    if (single) {
      p.cost = cut.slope;
      p.constant = cut.constant;
    } else {
      SparseRow row;
      row.name = "cut" + std::to_string(j);
      row.index = all;
      row.coef = cut.slope;
      row.eta_coef = -1.0;
      row.bound = -cut.constant;
      p.rows.push_back(std::move(row));
    }
    const TrustRow tr = trust_region_row(cut);
    SparseRow row;
    row.name = "trust" + std::to_string(j);
    row.index = all;
    row.coef = tr.coef;
    row.bound = tr.bound - tr.constant;
    p.rows.push_back(std::move(row));
  }
  add_constraint_rows(p, constraint, materials, first.anchor.n_elements());
  return p;
}

std::string format_selection(const std::vector<int>& cuts) {
  std::ostringstream os;
  for (std::size_t i = 0; i < cuts.size(); ++i) os << (i ? ";" : "") << cuts[i];
  return os.str();
}

MasterResult solve_master(CutPool& pool, const ConstraintSpec& constraint,
                          const MaterialSet& materials, const MasterOptions& options) {
  if (pool.empty()) throw std::invalid_argument("master needs at least one cut");
  auto backend = options.backend ? options.backend : builtin_backend();
  const int k = pool.size();
  const DesignField& shape = pool.back().anchor;

  MasterResult out;
  double best = 0.0;
  std::vector<std::uint8_t> best_x;

  auto attempt = [&](const std::vector<int>& sel, double key) {
    const BinaryProgram prog = build_subproblem(sel, pool, constraint, materials);
    const auto t0 = std::chrono::steady_clock::now();
    const MilpResult r = backend->solve(prog, options.milp);
    ++out.subproblems;
    spdlog::debug("  subproblem {{{}}} key {:.6g}: {} value {:.8g}, {} nodes, {} lp iterations, {:.3f} s",
                  format_selection(sel), key, to_string(r.status), r.objective, r.nodes,
                  r.lp_iterations,
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    MasterTraceEntry entry{sel, key, r.has_solution() && !r.x.empty(), r.objective, r.status,
                           r.nodes};
    if (r.status == MilpStatus::NodeLimit) {
      out.node_limit_hit = true;
      spdlog::warn("master subproblem {{{}}} hit the node limit; using its incumbent",
                   format_selection(sel));
    }
    out.trace.push_back(entry);
    if (!entry.feasible) return std::optional<double>{};
    if (!out.feasible || r.objective < best) {
      out.feasible = true;
      best = r.objective;
      best_x = r.x;
      out.active = sel;
    }
    return std::optional<double>{r.objective};
  };

  // The newest cut's single-cut optimum is its ranking key from now on.
  if (!pool[k - 1].single_optimum) {
    auto newest = attempt({k - 1}, 0.0);
    pool[k - 1].single_optimum = newest ? *newest : std::numeric_limits<double>::infinity();
    out.trace.back().key = pool[k - 1].single_optimum.value();
  }

  std::vector<double> singles(k);
  for (int j = 0; j < k; ++j) {
    singles[j] = pool[j].single_optimum.value_or(std::numeric_limits<double>::infinity());
  }
  SelectionStream stream(std::move(singles), &pool.exclusions(), options.max_selection_size);
  while (true) {
    const auto& next = stream.peek();
    if (!next) break;
    if (out.feasible && best < next->key) break;
    if (out.subproblems >= options.budget) {
      out.budget_hit = true;
      spdlog::warn("master subproblem budget of {} reached; returning the best so far",
                   options.budget);
      break;
    }
    if (!std::isfinite(next->key)) break;
    const Selection sel = *stream.next();
    attempt(sel.cuts, sel.key);
  }

  out.exhausted = out.subproblems == 0;
  if (out.feasible) {
    out.design = DesignField::from_assignment(best_x, shape.n_elements(), shape.n_materials());
    out.eta = best;
  }
  return out;
}

}  // namespace dvto
