#pragma once

#include "bcsdp/block_sparse_sym.hpp"

#include <string>

namespace bcsdp {

/// Default feasibility tolerance, max-abs of Y^T Y - I.
inline constexpr double kStiefelTol = 1e-10;

/// kStiefelTol, widened for scalar types too coarse to reach it.
template <typename Scalar>
constexpr Scalar stiefel_tol() {
  return std::max(Scalar(kStiefelTol), Scalar(1000) * std::numeric_limits<Scalar>::epsilon());
}

/// max |Y^T Y - I|
template <typename Derived>
typename Derived::Scalar feasibility_residual(const Eigen::MatrixBase<Derived>& y) {
  using Scalar = typename Derived::Scalar;
  if (y.cols() == 0) return Scalar(0);
  const Matrix<Scalar> gram = y.transpose() * y;
  return (gram - Matrix<Scalar>::Identity(y.cols(), y.cols())).cwiseAbs().maxCoeff();
}

template <typename Scalar>
class StiefelBlock;

/// Closest point on St(d, r) to m in Frobenius norm: U V^T from the thin SVD.
/// Throws std::domain_error if m does not have full column rank.
template <typename Derived>
StiefelBlock<typename Derived::Scalar> project_stiefel(const Eigen::MatrixBase<Derived>& m);

/// An r x d matrix with orthonormal columns.
template <typename Scalar>
class StiefelBlock {
 public:
  using MatrixType = Matrix<Scalar>;

  /// Checks the invariant and throws std::domain_error when it fails.
  explicit StiefelBlock(MatrixType data, Scalar tol = stiefel_tol<Scalar>()) : data_(std::move(data)) {
    if (data_.cols() > data_.rows())
      throw std::domain_error("StiefelBlock: need d <= r, got " + std::to_string(data_.rows()) + "x" +
                              std::to_string(data_.cols()));
    if (!data_.allFinite()) throw std::domain_error("StiefelBlock: non-finite entries");
    const Scalar res = feasibility_residual(data_);
    if (res > tol)
      throw std::domain_error("StiefelBlock: columns not orthonormal (residual " + std::to_string(res) + ")");
  }

  /// Keeps m if it is feasible within tol, otherwise re-projects it.
  static StiefelBlock sanitize(const MatrixType& m, Scalar tol = stiefel_tol<Scalar>()) {
    if (m.cols() <= m.rows() && m.allFinite() && feasibility_residual(m) <= tol) return StiefelBlock(m, tol);
    return project_stiefel(m);
  }

  static StiefelBlock identity(Index r, Index d) { return StiefelBlock(MatrixType::Identity(r, d)); }

  static StiefelBlock random(Index r, Index d, Rng& rng) {
    for (;;) {
      MatrixType m = rng.gaussian<Scalar>(r, d);
      try {
        return project_stiefel(m);
      } catch (const std::domain_error&) {
      }
    }
  }

  const MatrixType& matrix() const { return data_; }
  Index rows() const { return data_.rows(); }
  Index cols() const { return data_.cols(); }

 private:
  MatrixType data_;
};

template <typename Derived>
StiefelBlock<typename Derived::Scalar> project_stiefel(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.cols() > m.rows()) throw std::domain_error("project_stiefel: more columns than rows");
  if (!m.allFinite()) throw std::domain_error("project_stiefel: non-finite entries");
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m.eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Scalar cutoff = std::numeric_limits<Scalar>::epsilon() * Scalar(m.rows()) *
                        (sv.size() > 0 ? sv(0) : Scalar(0));
  Index rank = 0;
  for (Index k = 0; k < sv.size(); ++k)
    if (sv(k) > cutoff) ++rank;
  if (rank < m.cols())
    throw std::domain_error("project_stiefel: rank-deficient input, " + std::to_string(m.cols() - rank) +
                            " of " + std::to_string(m.cols()) + " columns deficient");
  Matrix<Scalar> p = svd.matrixU() * svd.matrixV().transpose();
  return StiefelBlock<Scalar>(std::move(p), stiefel_tol<Scalar>());
}

template <typename Scalar>
struct BlockMinimizer {
  StiefelBlock<Scalar> block;
  /// <G, Y*> = -||G||_*
  Scalar achieved;
  /// ||G||_*
  Scalar nuclear;
  /// ||G||_* + <G, Y_current> >= 0, evaluated without cancellation
  Scalar gap;
};

/// argmin over St(d, r) of <G, Y>, from the thin SVD of -G: Y* = U V^T.
/// An exactly-zero G leaves `current` unchanged.
///
/// With -G = U S V^T and unit columns Y v_k, U e_k, the gap
/// ||G||_* + <G, Y> = sum_k s_k (1 - <U e_k, Y v_k>) = sum_k s_k |U e_k - Y v_k|^2 / 2
/// is formed from squares, so it keeps full relative accuracy near optimality.
template <typename Scalar>
BlockMinimizer<Scalar> block_minimize(const Matrix<Scalar>& g, const StiefelBlock<Scalar>& current) {
  if (g.rows() != current.rows() || g.cols() != current.cols())
    throw std::invalid_argument("block_minimize: shape mismatch");
  if ((g.array() == Scalar(0)).all()) return {current, Scalar(0), Scalar(0), Scalar(0)};
  if (!g.allFinite()) throw NumericalError("block_minimize: non-finite coupling matrix");
  Eigen::JacobiSVD<Matrix<Scalar>> svd((-g).eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix<Scalar> y = svd.matrixU() * svd.matrixV().transpose();
  const Scalar nuclear = svd.singularValues().sum();
  const Matrix<Scalar> diff = svd.matrixU() - current.matrix() * svd.matrixV();
  const Scalar gap = Scalar(0.5) * (diff.colwise().squaredNorm().transpose().array() * svd.singularValues().array()).sum();
  return {StiefelBlock<Scalar>(std::move(y), stiefel_tol<Scalar>()), -nuclear, nuclear, gap};
}

/// The iterate Y = [Y_1 ... Y_n] (r x dn) with the coupling cache
/// G_i = sum_{j != i} Y_j Q_[j,i] (also r x dn) and the cost F(Y).
template <typename Scalar>
class FactorPoint {
 public:
  using MatrixType = Matrix<Scalar>;

  FactorPoint() = default;
  FactorPoint(Index r, Index d, Index n) : r_(r), d_(d), n_(n), y_(r, d * n), g_(MatrixType::Zero(r, d * n)) {
    for (Index i = 0; i < n; ++i) y_.middleCols(i * d, d) = MatrixType::Identity(r, d);
  }

  Index rank() const { return r_; }
  Index block_dim() const { return d_; }
  Index num_blocks() const { return n_; }

  auto block(Index i) const { return y_.middleCols(i * d_, d_); }
  auto block(Index i) { return y_.middleCols(i * d_, d_); }
  auto coupling(Index i) const { return g_.middleCols(i * d_, d_); }
  auto coupling(Index i) { return g_.middleCols(i * d_, d_); }

  const MatrixType& factor() const { return y_; }
  MatrixType& factor() { return y_; }
  const MatrixType& coupling_cache() const { return g_; }
  MatrixType& coupling_cache() { return g_; }

  Scalar cost() const { return cost_; }
  void set_cost(Scalar c) { cost_ = c; }

 private:
  Index r_ = 0;
  Index d_ = 0;
  Index n_ = 0;
  MatrixType y_;
  MatrixType g_;
  Scalar cost_ = Scalar(0);
};

/// G_i = sum_{j != i} Y_j Q_[j,i] for every i, from scratch.
template <typename Scalar>
Matrix<Scalar> coupling_from_scratch(const Matrix<Scalar>& y, const BlockSparseSym<Scalar>& q) {
  const Index d = q.block_dim();
  Matrix<Scalar> g = Matrix<Scalar>::Zero(y.rows(), y.cols());
  for (Index i = 0; i < q.num_block_rows(); ++i)
    for (const auto& nb : q.neighbors(i))
      q.add_right_product_transposed(g.middleCols(i * d, d), y.middleCols(nb.j * d, d), nb, Scalar(1));
  return g;
}

/// tr(Q Y^T Y) evaluated pair by pair over the stored blocks, without the cache.
template <typename Scalar>
Scalar cost_from_scratch(const Matrix<Scalar>& y, const BlockSparseSym<Scalar>& q) {
  const Index d = q.block_dim();
  Scalar total(0);
  for (Index s = 0; s < q.num_stored(); ++s) {
    const auto [i, j] = q.stored_pair(s);
    // tr(Q_[i,j] Y_j^T Y_i)
    total += (q.stored(s) * (y.middleCols(j * d, d).transpose() * y.middleCols(i * d, d))).trace();
  }
  return Scalar(2) * total;
}

/// sum_i <G_i, Y_i>
template <typename Scalar>
Scalar cost_from_cache(const FactorPoint<Scalar>& p) {
  return (p.factor().array() * p.coupling_cache().array()).sum();
}

template <typename Scalar>
void check_dimensions(const FactorPoint<Scalar>& p, const BlockSparseSym<Scalar>& q) {
  if (p.block_dim() != q.block_dim() || p.num_blocks() != q.num_block_rows())
    throw std::invalid_argument("factor (d=" + std::to_string(p.block_dim()) + ", n=" +
                                std::to_string(p.num_blocks()) + ") does not match cost (d=" +
                                std::to_string(q.block_dim()) + ", n=" + std::to_string(q.num_block_rows()) +
                                ")");
}

/// Rebuilds the coupling cache and the cost from the current factor.
template <typename Scalar>
void refresh(FactorPoint<Scalar>& p, const BlockSparseSym<Scalar>& q) {
  check_dimensions(p, q);
  p.coupling_cache() = coupling_from_scratch(p.factor(), q);
  p.set_cost(cost_from_cache(p));
}

/// What make_factor_point does with blocks that violate the feasibility tolerance.
enum class Ingest {
  kStrict,     // throw std::domain_error
  kReproject,  // replace with the closest Stiefel point
  kAsIs,       // keep unchanged (diagnostics on corrupted input)
};

/// Builds a point from an r x dn factor and fills its coupling cache and cost.
template <typename Scalar>
FactorPoint<Scalar> make_factor_point(const Matrix<Scalar>& y, const BlockSparseSym<Scalar>& q,
                                      Ingest policy = Ingest::kStrict, Scalar tol = stiefel_tol<Scalar>()) {
  const Index d = q.block_dim();
  const Index n = q.num_block_rows();
  if (y.cols() != d * n)
    throw std::invalid_argument("factor has " + std::to_string(y.cols()) + " columns, expected " +
                                std::to_string(d * n));
  if (y.rows() < d) throw std::invalid_argument("rank must be at least the block dimension");
  if (!y.allFinite()) throw std::invalid_argument("factor has non-finite entries");
  FactorPoint<Scalar> p(y.rows(), d, n);
  for (Index i = 0; i < n; ++i) {
    Matrix<Scalar> b = y.middleCols(i * d, d);
    switch (policy) {
      case Ingest::kStrict: p.block(i) = StiefelBlock<Scalar>(b, tol).matrix(); break;
      case Ingest::kReproject: p.block(i) = StiefelBlock<Scalar>::sanitize(b, tol).matrix(); break;
      case Ingest::kAsIs: p.block(i) = b; break;
    }
  }
  refresh(p, q);
  return p;
}

/// Gaussian blocks projected onto the manifold.
template <typename Scalar>
FactorPoint<Scalar> random_factor_point(const BlockSparseSym<Scalar>& q, Index r, Rng& rng) {
  const Index d = q.block_dim();
  if (r < d) throw std::invalid_argument("rank must be at least the block dimension");
  FactorPoint<Scalar> p(r, d, q.num_block_rows());
  for (Index i = 0; i < p.num_blocks(); ++i) p.block(i) = StiefelBlock<Scalar>::random(r, d, rng).matrix();
  // St(d, d) = O(d) has two components. Blocks drawn in opposite ones can start
  // on a flat region of F (for d = 2 the cross terms are constant), so every
  // block is flipped into the component of block 1.
  if (r == d && d >= 2 && p.num_blocks() > 0) {
    const bool flip_ref = p.block(0).determinant() < 0;
    for (Index i = 1; i < p.num_blocks(); ++i)
      if ((p.block(i).determinant() < 0) != flip_ref) p.block(i).col(d - 1) *= Scalar(-1);
  }
  refresh(p, q);
  return p;
}

/// Ambient Euclidean gradient 2 Y Q, from the stored blocks.
template <typename Scalar>
Matrix<Scalar> euclidean_gradient(const Matrix<Scalar>& y, const BlockSparseSym<Scalar>& q) {
  return Scalar(2) * coupling_from_scratch(y, q);
}

/// Tangent-space projection on each block: Z_i - Y_i sym(Y_i^T Z_i).
template <typename Scalar>
Matrix<Scalar> project_tangent(const Matrix<Scalar>& y, const Matrix<Scalar>& z, Index d) {
  Matrix<Scalar> out(z.rows(), z.cols());
  for (Index i = 0; i < y.cols() / d; ++i) {
    const auto yi = y.middleCols(i * d, d);
    const Matrix<Scalar> m = yi.transpose() * z.middleCols(i * d, d);
    out.middleCols(i * d, d) = z.middleCols(i * d, d) - yi * (Scalar(0.5) * (m + m.transpose()));
  }
  return out;
}

/// Riemannian gradient proj_Y(2 Y Q) built directly from Q and the factor.
/// Block i equals 2(G_i - Y_i A_i). With `verify_cache` the point's coupling
/// cache is compared against Y Q and a std::logic_error is thrown if stale.
template <typename Scalar>
Matrix<Scalar> riemannian_grad_oracle(const FactorPoint<Scalar>& p, const BlockSparseSym<Scalar>& q,
                                      bool verify_cache = false, Scalar cache_tol = Scalar(1e-8)) {
  check_dimensions(p, q);
  const Matrix<Scalar> egrad = euclidean_gradient(p.factor(), q);
  if (verify_cache) {
    const Scalar drift = (Scalar(0.5) * egrad - p.coupling_cache()).norm();
    if (drift > cache_tol)
      throw std::logic_error("riemannian_grad_oracle: stale coupling cache (drift " + std::to_string(drift) + ")");
  }
  return project_tangent(p.factor(), egrad, q.block_dim());
}

}  // namespace bcsdp
