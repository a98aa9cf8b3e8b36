#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

#include "dvto/fem.hpp"
#include "dvto/model.hpp"

namespace dvto {

/// w_e = [(E_1 - E0) rho_e + E0] mu_e^T K_e u_e for a single-material design.
std::vector<double> raw_single(const FemModel& model, const DesignField& design,
                               const Eigen::VectorXd& u, const Eigen::VectorXd& mu,
                               const MaterialSet& materials);

/// Element-major n_e x n_M sensitivities for a multi-material design.
///
/// With s = mu_e^T K_e u_e, channel m of element e is
///   (E_m - E0) s            if the element holds material m,
///   E_m (E_m' - E0) s       if it holds another material m',
///   E0 s                    if it is void.
/// Gray fields (only seen at the first anchor) use [(E_m - E0) rho_{e,m} + E0] s.
/// Throws if a binary element holds two materials.
std::vector<double> raw_multi(const FemModel& model, const DesignField& design,
                              const Eigen::VectorXd& u, const Eigen::VectorXd& mu,
                              const MaterialSet& materials);

/// Dispatches on the number of materials.
std::vector<double> raw_sensitivities(const FemModel& model, const DesignField& design,
                                      const Eigen::VectorXd& u, const Eigen::VectorXd& mu,
                                      const MaterialSet& materials);

/// Row-normalized conic kernel h = max(0, r - |x_e - x_e'|) over element centroids.
class ConicFilter {
 public:
  ConicFilter() = default;
  ConicFilter(int nx, int ny, double radius);

  double radius() const { return radius_; }
  int n_elements() const { return static_cast<int>(weights_.rows()); }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& weights() const { return weights_; }

  /// Filters each of the n_channels columns of an element-major array independently.
  std::vector<double> apply(const std::vector<double>& w, int n_channels = 1) const;

 private:
  double radius_ = 1.0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> weights_;
};

}  // namespace dvto
