#include "dvto/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dvto {

std::vector<double> raw_single(const FemModel& model, const DesignField& design,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& mu,
                               const MaterialSet& materials) {
  if (design.n_materials() != 1 || materials.count() != 1) {
    throw std::invalid_argument("raw_single needs a single-material design");
  }
  const double e0 = materials.e_min;
  const double e1 = materials.materials[0].young;
  auto w = element_products(model, mu, u);
  for (int e = 0; e < design.n_elements(); ++e) w[e] *= (e1 - e0) * design(e, 0) + e0;
  return w;
}

std::vector<double> raw_multi(const FemModel& model, const DesignField& design,
                              const Eigen::VectorXd& u, const Eigen::VectorXd& mu,
                              const MaterialSet& materials) {
  const int nm = design.n_materials();
  if (nm != materials.count()) {
    throw std::invalid_argument("design channels do not match the material set");
  }
  const double e0 = materials.e_min;
  const auto s = element_products(model, mu, u);
  std::vector<double> w(design.size());
  for (int e = 0; e < design.n_elements(); ++e) {
    if (!design.binary()) {
      for (int m = 0; m < nm; ++m) {
        w[design.index(e, m)] = ((materials.materials[m].young - e0) * design(e, m) + e0) * s[e];
      }
      continue;
    }
    int held = -1;
    for (int m = 0; m < nm; ++m) {
      if (design(e, m) == 1.0) {
        if (held >= 0) {
          throw std::invalid_argument("element " + std::to_string(e) + " holds two materials");
        }
        held = m;
      }
    }
    for (int m = 0; m < nm; ++m) {
      const double em = materials.materials[m].young;
      double coef;
      if (held == m) {
        coef = em - e0;
      } else if (held >= 0) {
        coef = em * (materials.materials[held].young - e0);
      } else {
        coef = e0;
      }
      w[design.index(e, m)] = coef * s[e];
    }
  }
  return w;
}

std::vector<double> raw_sensitivities(const FemModel& model, const DesignField& design,
                                      const Eigen::VectorXd& u, const Eigen::VectorXd& mu,
                                      const MaterialSet& materials) {
  return materials.count() == 1 ? raw_single(model, design, u, mu, materials)
                                 : raw_multi(model, design, u, mu, materials);
}

ConicFilter::ConicFilter(int nx, int ny, double radius) : radius_(radius) {
  if (!(radius >= 1.0)) throw std::invalid_argument("filter radius must be >= 1");
  const int reach = static_cast<int>(std::ceil(radius)) - 1;
  const int ne = nx * ny;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(ne) * (2 * reach + 1) * (2 * reach + 1));
  for (int c = 0; c < nx; ++c) {
    for (int r = 0; r < ny; ++r) {
      const int e = c * ny + r;
      const std::size_t first = trips.size();
      double sum = 0.0;
      for (int c2 = std::max(0, c - reach); c2 <= std::min(nx - 1, c + reach); ++c2) {
        for (int r2 = std::max(0, r - reach); r2 <= std::min(ny - 1, r + reach); ++r2) {
          const double h = radius - std::hypot(c - c2, r - r2);
          if (h <= 0.0) continue;
          trips.emplace_back(e, c2 * ny + r2, h);
          sum += h;
        }
      }
      for (std::size_t i = first; i < trips.size(); ++i) {
        trips[i] = Eigen::Triplet<double>(trips[i].row(), trips[i].col(), trips[i].value() / sum);
      }
    }
  }
  weights_.resize(ne, ne);
  weights_.setFromTriplets(trips.begin(), trips.end());
  weights_.makeCompressed();
}

std::vector<double> ConicFilter::apply(const std::vector<double>& w, int n_channels) const {
  const auto ne = weights_.rows();
  if (static_cast<Eigen::Index>(w.size()) != ne * n_channels) {
    throw std::invalid_argument("field size does not match the filter");
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<double> out(w.size());
  Eigen::Map<const RowMat> in(w.data(), ne, n_channels);
  Eigen::Map<RowMat> res(out.data(), ne, n_channels);
  res = weights_ * in;
  return out;
}

}  // namespace dvto
