#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvto/model.hpp"

namespace dvto {

using ElementMatrix = Eigen::Matrix<double, 8, 8>;

/// Plane-stress bilinear quad stiffness for E = 1 on a unit square, unit thickness.
///
/// Local DOF order: (x, y) of the lower-left, lower-right, upper-right, upper-left node.
ElementMatrix element_stiffness(double poisson);

struct Spring {
  int dof = 0;
  double stiffness = 0.0;
};

/// Structured nx-by-ny grid of unit quads.
///
/// Nodes are numbered column-major from the top-left corner: node(i, j) = i * (ny + 1) + j with
/// i the column and j the row counted downward. Elements follow the same convention,
/// element(col, row) = col * ny + row. Node n owns DOFs 2n (x) and 2n + 1 (y).
struct FemModel {
  int nx = 0;
  int ny = 0;
  double poisson = 0.3;
  ElementMatrix ke = ElementMatrix::Zero();
  Objective objective = Objective::Compliance;

  std::vector<int> fixed;      // sorted, unique
  Eigen::VectorXd load;        // full length
  std::vector<Spring> springs;
  int output_dof = -1;         // mechanism mode only

  int n_elements() const { return nx * ny; }
  int n_nodes() const { return (nx + 1) * (ny + 1); }
  int n_dofs() const { return 2 * n_nodes(); }
  int node(int col, int row) const { return col * (ny + 1) + row; }
  int element(int col, int row) const { return col * ny + row; }
  std::array<int, 8> element_dofs(int e) const;
  /// Element centroid (x right, y down), in element units.
  std::array<double, 2> centroid(int e) const;

  /// Full-length selector with a single 1 at output_dof (mechanism) or the load (compliance).
  Eigen::VectorXd objective_selector() const;
};

/// Grid without supports or loads.
FemModel make_grid(int nx, int ny, double poisson);
/// Grid with the supports, load and springs of the spec's support preset.
FemModel make_model(const ProblemSpec& spec);

/// Per-element modulus: sum_m (E_m - E0) rho_{e,m} + E0.
std::vector<double> element_moduli(const DesignField& design, const MaterialSet& materials);

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StateSolution {
  Eigen::VectorXd u;   // full length, zeros at fixed DOFs
  Eigen::VectorXd mu;  // adjoint, full length
  double objective = 0.0;
};

/// Assembles the reduced stiffness K (fixed DOFs eliminated, springs on the diagonal) and solves
/// K u = f. The sparsity pattern and its symbolic factorization are built once per model.
class StateSolver {
 public:
  explicit StateSolver(const FemModel& model);
  ~StateSolver();
  StateSolver(const StateSolver&) = delete;
  StateSolver& operator=(const StateSolver&) = delete;

  const FemModel& model() const { return *model_; }

  void assemble(const DesignField& design, const MaterialSet& materials);
  void assemble(const std::vector<double>& moduli);
  /// Reduced stiffness, full symmetric storage.
  const Eigen::SparseMatrix<double>& matrix() const { return k_; }

  /// Solves with the current matrix; rhs and the result are full-length vectors.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs);

  /// Assemble, solve the state, evaluate the objective and the adjoint.
  StateSolution analyze(const DesignField& design, const MaterialSet& materials);

  /// Number of state solves performed since construction.
  long solves() const { return solves_; }
  /// True if the last solve went through the iterative fallback.
  bool used_fallback() const { return used_fallback_; }

  Eigen::VectorXd reduce(const Eigen::VectorXd& full) const;
  Eigen::VectorXd expand(const Eigen::VectorXd& reduced) const;

 private:
  struct Factor;
  void factorize();

  const FemModel* model_;
  std::vector<int> reduced_of_;  // full dof -> reduced index, -1 if fixed
  std::vector<int> full_of_;
  Eigen::SparseMatrix<double> k_;
  std::vector<int> scatter_;     // n_e * 64 positions into k_ values, -1 for fixed
  std::vector<int> spring_pos_;
  std::vector<double> last_moduli_;
  std::unique_ptr<Factor> factor_;
  bool factor_ok_ = false;
  bool used_fallback_ = false;
  long solves_ = 0;
};

/// Objective and adjoint for a solved state. Compliance: f = f^T u, mu = -u. Mechanism:
/// f = l^T u, mu = -K^{-1} l using the solver's current factorization.
StateSolution objective_and_adjoint(StateSolver& solver, const Eigen::VectorXd& u);

/// a_e^T K_e b_e for every element.
std::vector<double> element_products(const FemModel& model, const Eigen::VectorXd& a,
                                     const Eigen::VectorXd& b);

}  // namespace dvto
