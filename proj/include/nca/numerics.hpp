#ifndef NCA_NUMERICS_HPP
#define NCA_NUMERICS_HPP

/*
 Dense kernels for correspondence analysis.

 - svd                 thin SVD by one-sided (Hestenes) Jacobi rotations
 - sym_eig             symmetric eigendecomposition by cyclic Jacobi rotations
 - inv_sqrt_psd        (C + ridge I)^{-1/2}
 - dinv_sqrt_psd       directional derivative of inv_sqrt_psd (Daleckii-Krein)
 - ky_fan_norm         sum of the k largest singular values
 - ky_fan_subgradient  U_k V_k^T
 - batch_covariances   1/n second moments of two feature batches

 Eigen supplies storage and BLAS-3 products only; the decompositions are
 implemented here so that reference solvers in Eigen stay usable as
 independent oracles in the tests.
*/

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "nca/error.hpp"

namespace nca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct SvdResult {
  Matrix u;                // rows x k, orthonormal columns
  Vector singular_values;  // k, non-increasing
  Matrix v;                // cols x k, orthonormal columns
};

struct SymEig {
  Vector values;   // non-increasing
  Matrix vectors;  // columns are eigenvectors
};

namespace detail {

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(Errc::InvalidArgument, std::string(what) + ": non-finite entry");
}

inline void require_nonempty(const Matrix& m, const char* what) {
  if (m.rows() == 0 || m.cols() == 0) throw Error(Errc::InvalidArgument, std::string(what) + ": empty matrix");
}

// Gram-Schmidt completion of columns [from, k) of `q` against the columns
// before them, seeded with the standard basis vector that has the largest
// residual.
inline void complete_orthonormal(Matrix& q, Index from) {
  const Index m = q.rows();
  for (Index j = from; j < q.cols(); ++j) {
    Vector best;
    double best_norm = -1.0;
    for (Index e = 0; e < m; ++e) {
      Vector cand = Vector::Unit(m, e);
      for (int pass = 0; pass < 2; ++pass)
        for (Index i = 0; i < j; ++i) cand -= q.col(i).dot(cand) * q.col(i);
      const double nrm = cand.norm();
      if (nrm > best_norm + 1e-12) {
        best_norm = nrm;
        best = cand;
      }
    }
    q.col(j) = best / best_norm;
  }
}

// One-sided Jacobi on a matrix with rows >= cols.
inline SvdResult jacobi_svd_tall(Matrix work, int max_sweeps) {
  const Index m = work.rows();
  const Index n = work.cols();
  Matrix v = Matrix::Identity(n, n);
  const double tol = static_cast<double>(m) * std::numeric_limits<double>::epsilon();

  bool converged = (n < 2);
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double alpha = work.col(p).squaredNorm();
        const double beta = work.col(q).squaredNorm();
        const double gamma = work.col(p).dot(work.col(q));
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (Index i = 0; i < m; ++i) {
          const double wp = work(i, p), wq = work(i, q);
          work(i, p) = c * wp - s * wq;
          work(i, q) = s * wp + c * wq;
        }
        for (Index i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) throw Error(Errc::ConvergenceFailure, "svd: sweep cap exceeded");

  Vector sigma(n);
  for (Index j = 0; j < n; ++j) sigma(j) = work.col(j).norm();

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return sigma(a) > sigma(b); });

  SvdResult out;
  out.u.resize(m, n);
  out.v.resize(n, n);
  out.singular_values.resize(n);
  const double floor = sigma.size() > 0 ? sigma.maxCoeff() * tol : 0.0;
  Index rank = 0;
  for (Index j = 0; j < n; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    out.singular_values(j) = sigma(src);
    out.v.col(j) = v.col(src);
    if (sigma(src) > floor && sigma(src) > 0.0) {
      out.u.col(j) = work.col(src) / sigma(src);
      rank = j + 1;
    }
  }
  complete_orthonormal(out.u, rank);
  return out;
}

inline void apply_sign_convention(SvdResult& r) {
  for (Index j = 0; j < r.u.cols(); ++j) {
    Index arg = 0;
    for (Index i = 1; i < r.u.rows(); ++i)
      if (std::abs(r.u(i, j)) > std::abs(r.u(arg, j))) arg = i;
    if (r.u(arg, j) < 0.0) {
      r.u.col(j) = -r.u.col(j);
      r.v.col(j) = -r.v.col(j);
    }
  }
}

}  // namespace detail

/// Thin SVD m = U diag(s) V^T with s sorted descending. In every column of U
/// the entry of largest magnitude (first on ties) is non-negative.
inline SvdResult svd(const Matrix& m, int max_sweeps = 80) {
  detail::require_nonempty(m, "svd");
  detail::require_finite(m, "svd");
  SvdResult r;
  if (m.rows() >= m.cols()) {
    r = detail::jacobi_svd_tall(m, max_sweeps);
  } else {
    SvdResult t = detail::jacobi_svd_tall(m.transpose(), max_sweeps);
    r.u = std::move(t.v);
    r.v = std::move(t.u);
    r.singular_values = std::move(t.singular_values);
  }
  detail::apply_sign_convention(r);
  return r;
}

/// Eigendecomposition of a symmetric matrix, eigenvalues non-increasing.
/// Only the upper triangle's mirror image is assumed; callers check symmetry.
inline SymEig sym_eig(const Matrix& s, int max_sweeps = 100) {
  detail::require_nonempty(s, "sym_eig");
  detail::require_finite(s, "sym_eig");
  if (s.rows() != s.cols()) throw Error(Errc::ShapeMismatch, "sym_eig: matrix is not square");
  const Index n = s.rows();
  Matrix a = 0.5 * (s + s.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double eps = std::numeric_limits<double>::epsilon();

  bool converged = (n < 2);
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        if (std::abs(apq) <= eps * 0.5 * std::sqrt(std::abs(app * aqq))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double sn = t * c;
        const double tau = sn / (1.0 + c);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (Index r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double g = a(r, p), h = a(r, q);
          a(r, p) = a(p, r) = g - sn * (h + g * tau);
          a(r, q) = a(q, r) = h + sn * (g - h * tau);
        }
        for (Index r = 0; r < n; ++r) {
          const double g = v(r, p), h = v(r, q);
          v(r, p) = g - sn * (h + g * tau);
          v(r, q) = h + sn * (g - h * tau);
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) throw Error(Errc::ConvergenceFailure, "sym_eig: sweep cap exceeded");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) > a(j, j); });
  SymEig out{Vector(n), Matrix(n, n)};
  for (Index j = 0; j < n; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    out.values(j) = a(src, src);
    out.vectors.col(j) = v.col(src);
  }
  return out;
}

/// Eigenpairs of (c + ridge I) after symmetry and positivity checks.
struct PsdSpectrum {
  Vector values;  // shifted by ridge, all > 0
  Matrix vectors;
};

inline PsdSpectrum psd_spectrum(const Matrix& c, double ridge) {
  detail::require_nonempty(c, "inv_sqrt_psd");
  if (c.rows() != c.cols()) throw Error(Errc::ShapeMismatch, "inv_sqrt_psd: matrix is not square");
  if (!(ridge >= 0.0)) throw Error(Errc::InvalidArgument, "inv_sqrt_psd: ridge must be >= 0");
  detail::require_finite(c, "inv_sqrt_psd");
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(Errc::NotSymmetric, "inv_sqrt_psd: asymmetry exceeds 1e-10");

  Matrix shifted = 0.5 * (c + c.transpose());
  shifted.diagonal().array() += ridge;
  SymEig eig = sym_eig(shifted);
  const double smallest = eig.values(eig.values.size() - 1);
  if (smallest < 0.0)
    throw Error(Errc::NegativeEigenvalue,
                "inv_sqrt_psd: eigenvalue " + std::to_string(smallest - ridge) + " below -ridge");
  if (smallest <= std::numeric_limits<double>::min())
    throw Error(Errc::RankDeficient, "inv_sqrt_psd: matrix is singular");
  return {std::move(eig.values), std::move(eig.vectors)};
}

inline Matrix inv_sqrt_from(const PsdSpectrum& s) {
  const Vector w = s.values.array().rsqrt();
  Matrix r = s.vectors * w.asDiagonal() * s.vectors.transpose();
  return 0.5 * (r + r.transpose());
}

// K_ij = (l_i^{-1/2} - l_j^{-1/2}) / (l_i - l_j), written in the cancellation-free
// form -1 / (sqrt(l_i) sqrt(l_j) (sqrt(l_i) + sqrt(l_j))), which reduces to
// -l^{-3/2}/2 on the diagonal and on ties.
inline Matrix dinv_sqrt_from(const PsdSpectrum& s, const Matrix& dc) {
  const Index n = s.values.size();
  if (dc.rows() != n || dc.cols() != n) throw Error(Errc::ShapeMismatch, "dinv_sqrt_psd: direction shape");
  const Vector root = s.values.array().sqrt();
  Matrix kernel(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) kernel(i, j) = -1.0 / (root(i) * root(j) * (root(i) + root(j)));
  const Matrix rotated = s.vectors.transpose() * dc * s.vectors;
  return s.vectors * kernel.cwiseProduct(rotated) * s.vectors.transpose();
}

inline Matrix inv_sqrt_psd(const Matrix& c, double ridge = 0.0) { return inv_sqrt_from(psd_spectrum(c, ridge)); }

/// d/dt (c + t dc + ridge I)^{-1/2} at t = 0. The map dc -> result is
/// self-adjoint under the Frobenius inner product, so the same routine also
/// pulls a gradient w.r.t. the inverse root back to a gradient w.r.t. c.
inline Matrix dinv_sqrt_psd(const Matrix& c, const Matrix& dc, double ridge = 0.0) {
  return dinv_sqrt_from(psd_spectrum(c, ridge), dc);
}

inline void check_ky_fan_index(const Matrix& m, Index k) {
  if (k < 1 || k > std::min(m.rows(), m.cols()))
    throw Error(Errc::InvalidArgument, "ky_fan: k must lie in [1, min(rows, cols)]");
}

inline double ky_fan_norm(const Matrix& m, Index k) {
  check_ky_fan_index(m, k);
  return svd(m).singular_values.head(k).sum();
}

struct KyFanSubgradient {
  Matrix value;
  // sigma_k within 1e-9 of sigma_{k+1} (taken as 0 when k = min(rows, cols));
  // the subgradient is then not unique and this is one valid selection.
  bool degenerate = false;
};

inline KyFanSubgradient ky_fan_subgradient(const Matrix& m, Index k) {
  check_ky_fan_index(m, k);
  const SvdResult r = svd(m);
  const Index full = r.singular_values.size();
  const double next = k < full ? r.singular_values(k) : 0.0;
  KyFanSubgradient out;
  out.value = r.u.leftCols(k) * r.v.leftCols(k).transpose();
  out.degenerate = std::abs(r.singular_values(k - 1) - next) <= 1e-9;
  return out;
}

struct Moments {
  Matrix c_f;   // E[f f^T] + ridge I
  Matrix c_g;   // E[g g^T] + ridge I
  Matrix c_fg;  // E[f g^T]
  Vector mean_f;  // subtracted means (zero when not centering)
  Vector mean_g;
};

inline Moments batch_covariances(const Matrix& f, const Matrix& g, bool center, double ridge) {
  if (f.rows() != g.rows()) throw Error(Errc::ShapeMismatch, "batch_covariances: row counts differ");
  if (f.rows() < 2) throw Error(Errc::InvalidArgument, "batch_covariances: need n >= 2");
  const double n = static_cast<double>(f.rows());
  Moments m;
  if (center) {
    m.mean_f = f.colwise().mean().transpose();
    m.mean_g = g.colwise().mean().transpose();
  } else {
    m.mean_f = Vector::Zero(f.cols());
    m.mean_g = Vector::Zero(g.cols());
  }
  const Matrix fc = f.rowwise() - m.mean_f.transpose();
  const Matrix gc = g.rowwise() - m.mean_g.transpose();
  m.c_f = fc.transpose() * fc / n;
  m.c_g = gc.transpose() * gc / n;
  m.c_fg = fc.transpose() * gc / n;
  m.c_f.diagonal().array() += ridge;
  m.c_g.diagonal().array() += ridge;
  return m;
}

}  // namespace nca

#endif  // NCA_NUMERICS_HPP
