#pragma once

#include <optional>
#include <set>
#include <span>
#include <vector>

#include "dvto/model.hpp"

namespace dvto {

/// First-order model of the objective anchored at a previous iterate:
/// f~(rho) = value + slope . (rho - anchor) = constant + slope . rho.
struct Cut {
  int index = 0;
  int stage = 0;
  DesignField anchor;
  double value = 0.0;
  std::vector<double> slope;  // filtered sensitivities, element-major
  double constant = 0.0;
  double radius = 0.0;
  std::optional<double> single_optimum;  // optimum of the single-cut master for this cut

  double evaluate(std::span<const double> rho) const;
  double evaluate(const DesignField& rho) const { return evaluate(rho.values()); }
};

Cut make_cut(int index, const DesignField& anchor, double value, std::vector<double> slope,
             double radius, int stage = 0);

/// Linearized trust region: coef . rho + constant <= bound.
///
/// coef is (1 - 2 o_e) / (n_M n_e) on every channel of element e, o_e the anchor's occupancy;
/// constant is sum_e o_e^2 / (n_M n_e). For a gray anchor whose nearest binary design is farther
/// than the radius, bound is that distance plus the radius; otherwise bound is the radius.
struct TrustRow {
  std::vector<double> coef;
  double constant = 0.0;
  double bound = 0.0;

  double lhs(std::span<const double> rho) const;
};

TrustRow trust_region_row(const Cut& cut);

/// Cuts of the current stage plus the active sets already returned by the master.
class CutPool {
 public:
  int size() const { return static_cast<int>(cuts_.size()); }
  bool empty() const { return cuts_.empty(); }
  const Cut& operator[](int j) const { return cuts_.at(j); }
  Cut& operator[](int j) { return cuts_.at(j); }
  const std::vector<Cut>& cuts() const { return cuts_; }
  const Cut& back() const { return cuts_.back(); }

  void add(Cut cut);
  /// Records a master solution's active set (sorted cut indices).
  void exclude(std::vector<int> active);
  bool excluded(const std::vector<int>& selection) const;
  const std::set<std::vector<int>>& exclusions() const { return excluded_; }

  /// Drops all cuts and exclusions (stage boundary).
  void clear();

 private:
  std::vector<Cut> cuts_;
  std::set<std::vector<int>> excluded_;
};

/// Prior active sets to forbid. Index sets need no padding: a set recorded when the pool held
/// fewer cuts simply has no members among the newer indices.
std::vector<std::vector<int>> exclusion_list(const CutPool& pool);

}  // namespace dvto
