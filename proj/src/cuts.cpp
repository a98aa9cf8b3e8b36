#include "dvto/cuts.hpp"

#include <algorithm>
#include <stdexcept>

namespace dvto {

double Cut::evaluate(std::span<const double> rho) const {
  if (rho.size() != slope.size()) throw std::invalid_argument("design size does not match cut");
  double s = constant;
  for (std::size_t i = 0; i < rho.size(); ++i) s += slope[i] * rho[i];
  return s;
}

Cut make_cut(int index, const DesignField& anchor, double value, std::vector<double> slope,
             double radius, int stage) {
  if (slope.size() != anchor.size()) {
    throw std::invalid_argument("sensitivity size does not match the anchor");
  }
  Cut c;
  c.index = index;
  c.stage = stage;
  c.anchor = anchor;
  c.value = value;
  c.radius = radius;
  double dot = 0.0;
  const auto a = anchor.values();
  for (std::size_t i = 0; i < a.size(); ++i) dot += slope[i] * a[i];
  c.constant = value - dot;
  c.slope = std::move(slope);
  return c;
}

double TrustRow::lhs(std::span<const double> rho) const {
  double s = constant;
  for (std::size_t i = 0; i < rho.size(); ++i) s += coef[i] * rho[i];
  return s;
}

TrustRow trust_region_row(const Cut& cut) {
  const DesignField& a = cut.anchor;
  const int ne = a.n_elements();
  const int nm = a.n_materials();
  const double scale = 1.0 / (static_cast<double>(nm) * ne);
  TrustRow row;
  row.coef.resize(a.size());
  row.bound = cut.radius;
  for (int e = 0; e < ne; ++e) {
    const double occ = a.occupancy(e);
    const double sigma = (1.0 - 2.0 * occ) * scale;
    for (int m = 0; m < nm; ++m) row.coef[a.index(e, m)] = sigma;
    row.constant += occ * occ * scale;
  }
  // A gray anchor is not itself reachable; if no binary design lies within the radius, the
  // radius counts from the nearest one.
  double floor = row.constant;
  for (double c : row.coef) floor += std::min(c, 0.0);
  if (floor > row.bound) row.bound += floor;
  return row;
}

void CutPool::add(Cut cut) {
  cut.index = size();
  cuts_.push_back(std::move(cut));
}

void CutPool::exclude(std::vector<int> active) {
  std::sort(active.begin(), active.end());
  excluded_.insert(std::move(active));
}

bool CutPool::excluded(const std::vector<int>& selection) const {
  return excluded_.count(selection) > 0;
}

void CutPool::clear() {
  cuts_.clear();
  excluded_.clear();
}

std::vector<std::vector<int>> exclusion_list(const CutPool& pool) {
  return {pool.exclusions().begin(), pool.exclusions().end()};
}

}  // namespace dvto
