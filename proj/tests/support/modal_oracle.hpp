#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mmii/modal.hpp"

namespace mmii::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Cyclic Jacobi rotations on a dense symmetric matrix. Returns ascending
// eigenvalues with eigenvectors in the matching columns of `vectors`.
inline VectorXd jacobi_eigen(MatrixXd a, MatrixXd& vectors) {
  const Eigen::Index n = a.rows();
  vectors = MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30 * a.squaredNorm()) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = vectors(k, p), vkq = vectors(k, q);
          vectors(k, p) = c * vkp - s * vkq;
          vectors(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  VectorXd values = a.diagonal();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return values[x] < values[y]; });
  VectorXd sorted(n);
  MatrixXd vs(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sorted[i] = values[order[static_cast<std::size_t>(i)]];
    vs.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
  }
  vectors = vs;
  return sorted;
}

inline modal::AssembledSystem random_system(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = g(rng);
  const MatrixXd k = b * b.transpose() + 0.5 * MatrixXd::Identity(n, n);
  modal::AssembledSystem sys;
  sys.dof_per_vertex = 1;
  sys.vertex_count = static_cast<std::size_t>(n);
  sys.vertex_mass.resize(n);
  for (int i = 0; i < n; ++i) sys.vertex_mass[i] = u(rng);
  sys.stiffness = k.sparseView();
  return sys;
}

}  // namespace mmii::testing
