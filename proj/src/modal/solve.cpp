#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "mmii/error.hpp"
#include "mmii/modal.hpp"

namespace mmii::modal {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

struct Eigenpairs {
  VectorXd values;   // ascending
  MatrixXd vectors;  // orthonormal columns
  double max_value = 0.0;
};

// Free-dof reduction and symmetric scaling A = M^-1/2 K M^-1/2.
struct ReducedProblem {
  std::vector<Index> free_dofs;
  VectorXd inv_sqrt_mass;
  SpMat a;
};

ReducedProblem reduce(const AssembledSystem& sys) {
  const int dpv = sys.dof_per_vertex;
  const auto n = static_cast<Index>(sys.dof_count());
  if (sys.stiffness.rows() != n || sys.stiffness.cols() != n ||
      sys.vertex_mass.size() != static_cast<Index>(sys.vertex_count)) {
    throw Error(Errc::invalid_argument, "assembled system dimensions disagree");
  }
  std::vector<bool> fixed(sys.vertex_count, false);
  for (auto b : sys.boundary) {
    if (b >= sys.vertex_count) throw Error(Errc::invalid_argument, "boundary vertex out of range");
    fixed[b] = true;
  }
  ReducedProblem r;
  std::vector<Index> slot(static_cast<std::size_t>(n), -1);
  for (std::size_t vtx = 0; vtx < sys.vertex_count; ++vtx) {
    if (fixed[vtx]) continue;
    if (!(sys.vertex_mass[static_cast<Index>(vtx)] > 0.0)) {
      throw Error(Errc::invalid_argument, "vertex " + std::to_string(vtx) + " has no mass");
    }
    for (int c = 0; c < dpv; ++c) {
      const Index dof = static_cast<Index>(vtx) * dpv + c;
      slot[static_cast<std::size_t>(dof)] = static_cast<Index>(r.free_dofs.size());
      r.free_dofs.push_back(dof);
    }
  }
  const auto m = static_cast<Index>(r.free_dofs.size());
  if (m == 0) throw Error(Errc::empty_model, "every degree of freedom is fixed");
  r.inv_sqrt_mass.resize(m);
  for (Index i = 0; i < m; ++i) {
    r.inv_sqrt_mass[i] = 1.0 / std::sqrt(sys.vertex_mass[r.free_dofs[static_cast<std::size_t>(i)] / dpv]);
  }
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(sys.stiffness.nonZeros()));
  for (Index col = 0; col < sys.stiffness.outerSize(); ++col) {
    for (SpMat::InnerIterator it(sys.stiffness, col); it; ++it) {
      const Index i = slot[static_cast<std::size_t>(it.row())];
      const Index j = slot[static_cast<std::size_t>(it.col())];
      if (i < 0 || j < 0) continue;
      t.emplace_back(i, j, it.value() * r.inv_sqrt_mass[i] * r.inv_sqrt_mass[j]);
    }
  }
  r.a.resize(m, m);
  r.a.setFromTriplets(t.begin(), t.end());
  return r;
}

Eigenpairs solve_dense(const SpMat& a) {
  const MatrixXd dense = MatrixXd(a);
  if (!dense.isApprox(dense.transpose(), 1e-12)) {
    throw Error(Errc::invalid_argument, "stiffness matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(dense);
  if (es.info() != Eigen::Success) {
    throw Error(Errc::no_convergence, "dense eigensolver did not converge");
  }
  Eigenpairs out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  out.max_value = std::max(std::abs(out.values.maxCoeff()), std::abs(out.values.minCoeff()));
  return out;
}

// Deterministic, non-degenerate start vector.
VectorXd start_vector(Index n) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3);
  return v.normalized();
}

// Largest eigenvalue by a short unshifted Lanczos run.
double estimate_max_eigenvalue(const SpMat& a) {
  const Index n = a.rows();
  const Index steps = std::min<Index>(n, 60);
  MatrixXd q(n, steps);
  VectorXd alpha(steps), beta(steps);
  q.col(0) = start_vector(n);
  Index used = steps;
  for (Index j = 0; j < steps; ++j) {
    VectorXd w = a * q.col(j);
    alpha[j] = q.col(j).dot(w);
    w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
    beta[j] = w.norm();
    if (j + 1 == steps) break;
    if (beta[j] < 1e-14 * std::abs(alpha[j])) {
      used = j + 1;
      break;
    }
    q.col(j + 1) = w / beta[j];
  }
  MatrixXd t = MatrixXd::Zero(used, used);
  for (Index j = 0; j < used; ++j) {
    t(j, j) = alpha[j];
    if (j + 1 < used) t(j, j + 1) = t(j + 1, j) = beta[j];
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(t, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// `want` eigenpairs of A nearest zero via shift-invert Lanczos with full
// reorthogonalization. The shift sits just below zero so that rigid-body
// modes keep the factorization nonsingular.
Eigenpairs solve_lanczos(const SpMat& a, Index want) {
  const Index n = a.rows();
  want = std::min(want, n);
  const double max_value = estimate_max_eigenvalue(a);
  const double shift = -1e-6 * max_value;

  SpMat shifted = a;
  for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= shift;
  shifted.makeCompressed();
  Eigen::SimplicialLDLT<SpMat> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) {
    throw Error(Errc::no_convergence, "factorization of the shifted stiffness failed");
  }

  Index steps = std::min(n, std::max<Index>(2 * want + 20, want + 40));
  for (int attempt = 0; attempt < 8; ++attempt) {
    MatrixXd q(n, steps);
    VectorXd alpha = VectorXd::Zero(steps);
    VectorXd beta = VectorXd::Zero(steps);
    q.col(0) = start_vector(n);
    Index used = steps;
    for (Index j = 0; j < steps; ++j) {
      VectorXd w = ldlt.solve(q.col(j));
      alpha[j] = q.col(j).dot(w);
      // Two passes of classical Gram-Schmidt keep the basis orthogonal.
      for (int pass = 0; pass < 2; ++pass) {
        w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
      }
      beta[j] = w.norm();
      if (j + 1 == steps) break;
      if (beta[j] < 1e-13 * std::abs(alpha[j])) {
        used = j + 1;  // invariant subspace found
        break;
      }
      q.col(j + 1) = w / beta[j];
    }
    MatrixXd t = MatrixXd::Zero(used, used);
    for (Index j = 0; j < used; ++j) {
      t(j, j) = alpha[j];
      if (j + 1 < used) t(j, j + 1) = t(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
    // Ritz values of the inverse: largest magnitude <-> eigenvalues nearest the shift.
    std::vector<Index> idx(static_cast<std::size_t>(used));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](Index l, Index r) {
      return std::abs(es.eigenvalues()[l]) > std::abs(es.eigenvalues()[r]);
    });
    const Index take = std::min(want, used);
    bool converged = true;
    const double theta_max = std::abs(es.eigenvalues()[idx[0]]);
    for (Index k = 0; k < take; ++k) {
      const Index i = idx[static_cast<std::size_t>(k)];
      const double residual = std::abs(beta[used - 1] * es.eigenvectors()(used - 1, i));
      if (used < n && residual > 1e-10 * theta_max) converged = false;
    }
    if (!converged && steps < n) {
      steps = std::min(n, steps * 2);
      continue;
    }
    if (!converged) break;

    Eigenpairs out;
    out.max_value = max_value;
    out.values.resize(take);
    out.vectors.resize(n, take);
    std::vector<std::pair<double, Index>> order;
    for (Index k = 0; k < take; ++k) {
      const Index i = idx[static_cast<std::size_t>(k)];
      order.emplace_back(shift + 1.0 / es.eigenvalues()[i], i);
    }
    std::sort(order.begin(), order.end());
    for (Index k = 0; k < take; ++k) {
      out.values[k] = order[static_cast<std::size_t>(k)].first;
      out.vectors.col(k) =
          (q.leftCols(used) * es.eigenvectors().col(order[static_cast<std::size_t>(k)].second))
              .normalized();
    }
    return out;
  }
  throw Error(Errc::no_convergence, "Lanczos iteration did not converge");
}

void fix_sign(Eigen::Ref<VectorXd> v) {
  Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0) v = -v;
}

}  // namespace

ModalModel compute_modes(const AssembledSystem& sys, int max_modes, double loss_factor,
                         const SolveOptions& opts) {
  if (max_modes < 1) throw Error(Errc::invalid_argument, "max_modes must be at least 1");
  if (!(loss_factor > 0.0) || !(loss_factor < 2.0 * opts.max_damping_ratio)) {
    throw Error(Errc::invalid_argument, "loss factor must lie in (0, 2 * max damping ratio)");
  }
  const ReducedProblem r = reduce(sys);
  const auto m = static_cast<std::size_t>(r.a.rows());

  const bool dense = opts.solver == Solver::dense ||
                     (opts.solver == Solver::automatic && m <= opts.dense_limit);
  Eigenpairs pairs;
  if (dense) {
    pairs = solve_dense(r.a);
  } else {
    // Up to six rigid-body modes precede the ones we keep.
    Index want = static_cast<Index>(max_modes) + 6;
    for (;;) {
      pairs = solve_lanczos(r.a, want);
      Index rigid = 0;
      for (Index k = 0; k < pairs.values.size(); ++k) {
        if (pairs.values[k] < opts.rigid_tolerance * pairs.max_value) ++rigid;
      }
      if (pairs.values.size() - rigid >= max_modes || want >= static_cast<Index>(m)) break;
      want = std::min<Index>(static_cast<Index>(m), want * 2);
    }
  }

  const double lambda_max = pairs.max_value;
  const double psd_floor = -opts.rigid_tolerance * lambda_max;
  if (pairs.values.size() > 0 && pairs.values.minCoeff() < psd_floor) {
    throw Error(Errc::not_psd, "stiffness has a negative eigenvalue " +
                                   std::to_string(pairs.values.minCoeff()) +
                                   " beyond tolerance");
  }

  ModalModel model;
  model.dof_per_vertex = sys.dof_per_vertex;
  model.omega_max = std::sqrt(std::max(lambda_max, 0.0));
  std::vector<Index> keep;
  for (Index k = 0; k < pairs.values.size(); ++k) {
    if (pairs.values[k] < opts.rigid_tolerance * lambda_max) {
      ++model.rigid_modes;
    } else if (keep.size() < static_cast<std::size_t>(max_modes)) {
      keep.push_back(k);
    }
  }
  const auto count = static_cast<Index>(keep.size());
  model.frequencies.resize(count);
  model.damping.resize(count);
  model.mode_shapes = MatrixXd::Zero(static_cast<Index>(sys.dof_count()), count);
  for (Index c = 0; c < count; ++c) {
    const Index k = keep[static_cast<std::size_t>(c)];
    model.frequencies[c] = std::sqrt(pairs.values[k]);
    VectorXd shape = pairs.vectors.col(k).cwiseProduct(r.inv_sqrt_mass);
    fix_sign(shape);
    for (std::size_t i = 0; i < r.free_dofs.size(); ++i) {
      model.mode_shapes(r.free_dofs[i], c) = shape[static_cast<Index>(i)];
    }
  }
  if (count > 0) {
    const double omega_top = model.frequencies[count - 1];
    const double beta = std::min(loss_factor, 2.0 * opts.max_damping_ratio - loss_factor) / omega_top;
    for (Index c = 0; c < count; ++c) {
      model.damping[c] = 0.5 * loss_factor + 0.5 * beta * model.frequencies[c];
    }
  }
  return model;
}

ModalModel pitch_map(const ModalModel& model, double f_lo, double f_hi) {
  if (model.mode_count() == 0) throw Error(Errc::empty_model, "model has no retained modes");
  if (!(f_lo > 0.0) || !(f_lo < f_hi)) {
    throw Error(Errc::invalid_argument, "pitch band must satisfy 0 < f_lo < f_hi");
  }
  constexpr double kTwoPi = 6.283185307179586;
  const double fundamental = model.frequencies[0] / kTwoPi;
  const double target = std::clamp(fundamental, f_lo, f_hi);
  const double scale = target / fundamental;

  Index keep = 0;
  while (keep < model.frequencies.size() &&
         (keep == 0 || model.frequencies[keep] * scale / kTwoPi <= f_hi)) {
    ++keep;
  }
  ModalModel out = model;
  out.frequencies = model.frequencies.head(keep) * scale;
  out.damping = model.damping.head(keep);
  out.mode_shapes = model.mode_shapes.leftCols(keep);
  out.pitch_scale = model.pitch_scale * scale;
  return out;
}

}  // namespace mmii::modal
