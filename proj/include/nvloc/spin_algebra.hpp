#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <vector>

#include "nvloc/units.hpp"

namespace nvloc {

using ComplexMatrix = Eigen::MatrixXcd;
using Vec3 = Eigen::Vector3d;

struct SpinOperators {
  ComplexMatrix sx, sy, sz;
};

// Standard angular-momentum matrices in the |s>, |s-1>, ..., |-s> basis.
inline SpinOperators spin_operators(double s) {
  if (s != 0.5 && s != 1.0)
    throw std::invalid_argument("spin_operators: spin must be 1/2 or 1");
  const int dim = static_cast<int>(std::lround(2.0 * s)) + 1;
  ComplexMatrix sp = ComplexMatrix::Zero(dim, dim);
  ComplexMatrix sz = ComplexMatrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const double m = s - i;
    sz(i, i) = m;
    if (i > 0) sp(i - 1, i) = std::sqrt(s * (s + 1.0) - m * (m + 1.0));
  }
  const ComplexMatrix sm = sp.adjoint();
  SpinOperators ops;
  ops.sx = 0.5 * (sp + sm);
  ops.sy = std::complex<double>(0, -0.5) * (sp - sm);
  ops.sz = sz;
  return ops;
}

inline ComplexMatrix kron_all(const std::vector<ComplexMatrix>& ms) {
  if (ms.empty()) throw std::invalid_argument("kron_all: empty operator list");
  ComplexMatrix out = ms.front();
  for (std::size_t i = 1; i < ms.size(); ++i) {
    ComplexMatrix next(out.rows() * ms[i].rows(), out.cols() * ms[i].cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r)
      for (Eigen::Index c = 0; c < out.cols(); ++c)
        next.block(r * ms[i].rows(), c * ms[i].cols(), ms[i].rows(),
                   ms[i].cols()) = out(r, c) * ms[i];
    out = std::move(next);
  }
  return out;
}

// ||M - M^dag||_F relative to ||M||_F (absolute for near-zero M).
inline double hermiticity_error(const ComplexMatrix& m) {
  const double scale = m.norm();
  const double err = (m - m.adjoint()).norm();
  return scale > 1.0 ? err / scale : err;
}

inline double unitarity_error(const ComplexMatrix& u) {
  return (u.adjoint() * u -
          ComplexMatrix::Identity(u.rows(), u.cols()))
      .norm();
}

// U = exp(-i H t) for Hermitian H via eigendecomposition; exact at the small
// dimensions used here.
inline ComplexMatrix propagator(const ComplexMatrix& h, double t) {
  if (h.rows() != h.cols())
    throw std::invalid_argument("propagator: matrix not square");
  if (hermiticity_error(h) > 1e-12)
    throw std::invalid_argument("propagator: Hamiltonian not Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  const Eigen::VectorXd& w = es.eigenvalues();
  Eigen::VectorXcd phases(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    phases(i) = std::exp(std::complex<double>(0, -w(i) * t));
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint();
}

}  // namespace nvloc
