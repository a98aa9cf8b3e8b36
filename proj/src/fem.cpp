#include "dvto/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#ifdef DVTO_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dvto {

namespace {

constexpr double kResidualTarget = 1e-10;
constexpr int kRefinementSteps = 3;

// Normwise backward error |b - Kx| / (|K| |x| + |b|) in the max norm. Floating islands in a
// near-void field make |x| huge, so the plain relative residual is not a usable test there.
double relative_residual(const Eigen::SparseMatrix<double>& k, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& b) {
  const double r = (b - k * x).lpNorm<Eigen::Infinity>();
  if (r == 0.0) return 0.0;
  Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(k.rows());
  for (int c = 0; c < k.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(k, c); it; ++it) {
      row_sums[it.row()] += std::abs(it.value());
    }
  }
  const double denom = row_sums.maxCoeff() * x.lpNorm<Eigen::Infinity>() +
                       b.lpNorm<Eigen::Infinity>();
  return denom > 0.0 ? r / denom : r;
}

}  // namespace

ElementMatrix element_stiffness(double nu) {
  if (!(nu > 0.0 && nu < 0.5)) throw std::invalid_argument("Poisson ratio must lie in (0, 0.5)");
  const double k[8] = {0.5 - nu / 6.0,         0.125 + nu / 8.0, -0.25 - nu / 12.0,
                       -0.125 + 3.0 * nu / 8.0, -0.25 + nu / 12.0, -0.125 - nu / 8.0,
                       nu / 6.0,               0.125 - 3.0 * nu / 8.0};
  ElementMatrix ke;
  // clang-format off
  ke << k[0], k[1], k[2], k[3], k[4], k[5], k[6], k[7],
        k[1], k[0], k[7], k[6], k[5], k[4], k[3], k[2],
        k[2], k[7], k[0], k[5], k[6], k[3], k[4], k[1],
        k[3], k[6], k[5], k[0], k[7], k[2], k[1], k[4],
        k[4], k[5], k[6], k[7], k[0], k[1], k[2], k[3],
        k[5], k[4], k[3], k[2], k[1], k[0], k[7], k[6],
        k[6], k[3], k[4], k[1], k[2], k[7], k[0], k[5],
        k[7], k[2], k[1], k[4], k[3], k[6], k[5], k[0];
  // clang-format on
  return ke / (1.0 - nu * nu);
}

std::array<int, 8> FemModel::element_dofs(int e) const {
  const int col = e / ny;
  const int row = e % ny;
  const int ul = node(col, row);
  const int ur = node(col + 1, row);
  const int ll = ul + 1;
  const int lr = ur + 1;
  return {2 * ll, 2 * ll + 1, 2 * lr, 2 * lr + 1, 2 * ur, 2 * ur + 1, 2 * ul, 2 * ul + 1};
}

std::array<double, 2> FemModel::centroid(int e) const {
  return {e / ny + 0.5, e % ny + 0.5};
}

Eigen::VectorXd FemModel::objective_selector() const {
  if (objective == Objective::Compliance) return load;
  Eigen::VectorXd l = Eigen::VectorXd::Zero(n_dofs());
  l[output_dof] = 1.0;
  return l;
}

FemModel make_grid(int nx, int ny, double poisson) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("grid needs at least one element");
  FemModel m;
  m.nx = nx;
  m.ny = ny;
  m.poisson = poisson;
  m.ke = element_stiffness(poisson);
  m.load = Eigen::VectorXd::Zero(m.n_dofs());
  return m;
}

FemModel make_model(const ProblemSpec& spec) {
  FemModel m = make_grid(spec.nx, spec.ny, spec.poisson);
  const int nx = spec.nx, ny = spec.ny;
  switch (spec.support) {
    case Support::Mbb:
      for (int j = 0; j <= ny; ++j) m.fixed.push_back(2 * m.node(0, j));
      m.fixed.push_back(2 * m.node(nx, ny) + 1);
      m.load[2 * m.node(0, 0) + 1] = -spec.load;
      break;
    case Support::Cantilever:
      for (int j = 0; j <= ny; ++j) {
        m.fixed.push_back(2 * m.node(0, j));
        m.fixed.push_back(2 * m.node(0, j) + 1);
      }
      m.load[2 * m.node(nx, ny / 2) + 1] = -spec.load;
      break;
    case Support::Mechanism: {
      m.objective = Objective::Mechanism;
      for (int i = 0; i <= nx; ++i) m.fixed.push_back(2 * m.node(i, 0) + 1);
      for (int j : {ny - 1, ny}) {
        if (j < 0) continue;
        m.fixed.push_back(2 * m.node(0, j));
        m.fixed.push_back(2 * m.node(0, j) + 1);
      }
      const int din = 2 * m.node(0, 0);
      const int dout = 2 * m.node(nx, 0);
      m.load[din] = spec.load;
      m.springs = {{din, spec.spring_in}, {dout, spec.spring_out}};
      m.output_dof = dout;
      break;
    }
  }
  std::sort(m.fixed.begin(), m.fixed.end());
  m.fixed.erase(std::unique(m.fixed.begin(), m.fixed.end()), m.fixed.end());
  return m;
}

std::vector<double> element_moduli(const DesignField& design, const MaterialSet& materials) {
  if (design.n_materials() != materials.count()) {
    throw std::invalid_argument("design channels do not match the material set");
  }
  const double e0 = materials.e_min;
  std::vector<double> out(design.n_elements(), e0);
  for (int e = 0; e < design.n_elements(); ++e) {
    for (int m = 0; m < design.n_materials(); ++m) {
      out[e] += (materials.materials[m].young - e0) * design(e, m);
    }
  }
  return out;
}

std::vector<double> element_products(const FemModel& model, const Eigen::VectorXd& a,
                                     const Eigen::VectorXd& b) {
  std::vector<double> out(model.n_elements());
#pragma omp parallel for schedule(static)
  for (int e = 0; e < model.n_elements(); ++e) {
    const auto dofs = model.element_dofs(e);
    Eigen::Matrix<double, 8, 1> ae, be;
    for (int i = 0; i < 8; ++i) {
      ae[i] = a[dofs[i]];
      be[i] = b[dofs[i]];
    }
    out[e] = ae.dot(model.ke * be);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct StateSolver::Factor {
#ifdef DVTO_HAVE_CHOLMOD
  Eigen::CholmodSupernodalLLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
#else
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> llt;
#endif
};

StateSolver::StateSolver(const FemModel& model)
    : model_(&model), factor_(std::make_unique<Factor>()) {
  const int n = model.n_dofs();
  reduced_of_.assign(n, 0);
  for (int d : model.fixed) reduced_of_[d] = -1;
  for (int d = 0; d < n; ++d) {
    if (reduced_of_[d] < 0) continue;
    reduced_of_[d] = static_cast<int>(full_of_.size());
    full_of_.push_back(d);
  }
  const int nr = static_cast<int>(full_of_.size());

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(model.n_elements()) * 64 + model.springs.size());
  for (int e = 0; e < model.n_elements(); ++e) {
    const auto dofs = model.element_dofs(e);
    for (int a = 0; a < 8; ++a) {
      const int ra = reduced_of_[dofs[a]];
      if (ra < 0) continue;
      for (int b = 0; b < 8; ++b) {
        const int rb = reduced_of_[dofs[b]];
        if (rb >= 0) trips.emplace_back(ra, rb, 1.0);
      }
    }
  }
  for (const auto& s : model.springs) {
    const int r = reduced_of_[s.dof];
    if (r >= 0) trips.emplace_back(r, r, 1.0);
  }
  k_.resize(nr, nr);
  k_.setFromTriplets(trips.begin(), trips.end());
  k_.makeCompressed();

  auto position = [&](int r, int c) {
    const int* begin = k_.innerIndexPtr() + k_.outerIndexPtr()[c];
    const int* end = k_.innerIndexPtr() + k_.outerIndexPtr()[c + 1];
    return static_cast<int>(std::lower_bound(begin, end, r) - k_.innerIndexPtr());
  };
  scatter_.assign(static_cast<std::size_t>(model.n_elements()) * 64, -1);
  for (int e = 0; e < model.n_elements(); ++e) {
    const auto dofs = model.element_dofs(e);
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        const int ra = reduced_of_[dofs[a]];
        const int rb = reduced_of_[dofs[b]];
        if (ra >= 0 && rb >= 0) scatter_[e * 64 + a * 8 + b] = position(ra, rb);
      }
    }
  }
  for (const auto& s : model.springs) {
    const int r = reduced_of_[s.dof];
    spring_pos_.push_back(r >= 0 ? position(r, r) : -1);
  }
  std::fill(k_.valuePtr(), k_.valuePtr() + k_.nonZeros(), 0.0);
  factor_->llt.analyzePattern(k_);
}

StateSolver::~StateSolver() = default;

void StateSolver::assemble(const DesignField& design, const MaterialSet& materials) {
  assemble(element_moduli(design, materials));
}

void StateSolver::assemble(const std::vector<double>& moduli) {
  const FemModel& m = *model_;
  if (static_cast<int>(moduli.size()) != m.n_elements()) {
    throw std::invalid_argument("one modulus per element expected");
  }
  double* v = k_.valuePtr();
  std::fill(v, v + k_.nonZeros(), 0.0);
  const double* ke = m.ke.data();  // symmetric, storage order irrelevant
  for (int e = 0; e < m.n_elements(); ++e) {
    const int* pos = scatter_.data() + static_cast<std::size_t>(e) * 64;
    const double s = moduli[e];
    for (int i = 0; i < 64; ++i) {
      if (pos[i] >= 0) v[pos[i]] += s * ke[i];
    }
  }
  for (std::size_t i = 0; i < m.springs.size(); ++i) {
    if (spring_pos_[i] >= 0) v[spring_pos_[i]] += m.springs[i].stiffness;
  }
  last_moduli_ = moduli;
  factorize();
}

void StateSolver::factorize() {
  factor_->llt.factorize(k_);
  factor_ok_ = factor_->llt.info() == Eigen::Success;
}

Eigen::VectorXd StateSolver::reduce(const Eigen::VectorXd& full) const {
  Eigen::VectorXd r(full_of_.size());
  for (std::size_t i = 0; i < full_of_.size(); ++i) r[i] = full[full_of_[i]];
  return r;
}

Eigen::VectorXd StateSolver::expand(const Eigen::VectorXd& reduced) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(model_->n_dofs());
  for (std::size_t i = 0; i < full_of_.size(); ++i) f[full_of_[i]] = reduced[i];
  return f;
}

Eigen::VectorXd StateSolver::solve(const Eigen::VectorXd& rhs) {
  ++solves_;
  used_fallback_ = false;
  const Eigen::VectorXd b = reduce(rhs);
  Eigen::VectorXd x;
  double rel = 1.0;
  if (factor_ok_) {
    x = factor_->llt.solve(b);
    rel = relative_residual(k_, x, b);
    for (int step = 0; step < kRefinementSteps && rel > 1e-12 && std::isfinite(rel); ++step) {
      x += factor_->llt.solve(b - k_ * x);
      rel = relative_residual(k_, x, b);
    }
  }
  if (!factor_ok_ || !(rel <= kResidualTarget)) {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(kResidualTarget);
    cg.setMaxIterations(std::max<Eigen::Index>(1000, 20 * b.size()));
    cg.compute(k_);
    x = cg.solve(b);
    rel = relative_residual(k_, x, b);
    used_fallback_ = true;
  }
  if (!(rel <= kResidualTarget * 10.0)) {
    std::ostringstream msg;
    double lo = 0.0, hi = 0.0;
    if (!last_moduli_.empty()) {
      lo = *std::min_element(last_moduli_.begin(), last_moduli_.end());
      hi = *std::max_element(last_moduli_.begin(), last_moduli_.end());
    }
    msg << "state solve failed: relative residual " << rel << " (element moduli in [" << lo
        << ", " << hi << "], " << k_.rows() << " free dofs)";
    throw SolveError(msg.str());
  }
  return expand(x);
}

StateSolution objective_and_adjoint(StateSolver& solver, const Eigen::VectorXd& u) {
  const FemModel& m = solver.model();
  StateSolution s;
  s.u = u;
  if (m.objective == Objective::Compliance) {
    s.objective = m.load.dot(u);
    s.mu = -u;
  } else {
    s.objective = u[m.output_dof];
    s.mu = -solver.solve(m.objective_selector());
  }
  return s;
}

StateSolution StateSolver::analyze(const DesignField& design, const MaterialSet& materials) {
  assemble(design, materials);
  return objective_and_adjoint(*this, solve(model_->load));
}

}  // namespace dvto
