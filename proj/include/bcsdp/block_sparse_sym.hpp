#pragma once

#include "bcsdp/common.hpp"

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

namespace bcsdp {

/// Sum of singular values.
template <typename Derived>
typename Derived::Scalar nuclear_norm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) return Scalar(0);
  if (!m.allFinite()) throw NumericalError("nuclear_norm: non-finite entries");
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m.eval());
  return svd.singularValues().sum();
}

/// Symmetric dn x dn matrix stored as a sparse grid of d x d blocks with zero
/// diagonal blocks.
///
/// Only one orientation of each off-diagonal pair is kept: the slot for the
/// unordered pair {i, j} with i < j holds Q_[i,j], and Q_[j,i] is read as its
/// transpose. Per-block nuclear norms and per-column sums are maintained on
/// every mutation, so c1()/c2() never touch an SVD and const access is
/// thread-safe.
template <typename Scalar>
class BlockSparseSym {
 public:
  using MatrixType = Matrix<Scalar>;

  /// Adjacency entry of block-row i: neighbour j and the slot holding
  /// the pair. When `transposed` is set, Q_[i,j] = stored(slot)^T.
  struct Neighbor {
    Index j;
    Index slot;
    bool transposed;
  };

  BlockSparseSym() = default;
  BlockSparseSym(Index d, Index n) : d_(d), n_(n), adjacency_(n), column_nuclear_(n, Scalar(0)) {
    if (d < 1) throw std::invalid_argument("BlockSparseSym: block dimension must be positive");
    if (n < 0) throw std::invalid_argument("BlockSparseSym: negative block count");
  }

  Index block_dim() const { return d_; }
  Index num_block_rows() const { return n_; }
  Index dim() const { return d_ * n_; }
  Index num_stored() const { return static_cast<Index>(blocks_.size()); }
  bool empty() const { return blocks_.empty(); }

  /// Sets Q_[i,j] (and implicitly Q_[j,i] = B^T). An all-zero B removes the pair.
  void set_block(Index i, Index j, const MatrixType& b) {
    check_pair(i, j);
    if (b.rows() != d_ || b.cols() != d_)
      throw std::invalid_argument("set_block: block must be " + std::to_string(d_) + "x" +
                                  std::to_string(d_));
    if (!b.allFinite()) throw std::invalid_argument("set_block: non-finite entries");
    const bool swap = i > j;
    const auto key = swap ? std::make_pair(j, i) : std::make_pair(i, j);
    MatrixType canonical = swap ? MatrixType(b.transpose()) : b;
    const bool zero = (canonical.array() == Scalar(0)).all();

    auto it = slot_of_.find(key);
    if (it == slot_of_.end()) {
      if (zero) return;
      const Index slot = num_stored();
      blocks_.push_back(std::move(canonical));
      pairs_.push_back(key);
      block_nuclear_.push_back(nuclear_norm(blocks_.back()));
      slot_of_.emplace(key, slot);
      insert_neighbor(key.first, {key.second, slot, false});
      insert_neighbor(key.second, {key.first, slot, true});
    } else if (zero) {
      erase_slot(it->second);
    } else {
      blocks_[it->second] = std::move(canonical);
      block_nuclear_[it->second] = nuclear_norm(blocks_[it->second]);
    }
    refresh_column(key.first);
    refresh_column(key.second);
  }

  bool has_block(Index i, Index j) const {
    if (i == j) return false;
    return slot_of_.count(i < j ? std::make_pair(i, j) : std::make_pair(j, i)) > 0;
  }

  /// Q_[i,j]; zero when the pair is not stored or i == j.
  MatrixType block(Index i, Index j) const {
    check_index(i);
    check_index(j);
    if (i == j) return MatrixType::Zero(d_, d_);
    auto it = slot_of_.find(i < j ? std::make_pair(i, j) : std::make_pair(j, i));
    if (it == slot_of_.end()) return MatrixType::Zero(d_, d_);
    const MatrixType& b = blocks_[it->second];
    return i < j ? b : MatrixType(b.transpose());
  }

  const std::vector<Neighbor>& neighbors(Index i) const { return adjacency_[i]; }

  const MatrixType& stored(Index slot) const { return blocks_[slot]; }
  /// (i, j) with i < j for a slot.
  std::pair<Index, Index> stored_pair(Index slot) const { return pairs_[slot]; }
  Scalar stored_nuclear(Index slot) const { return block_nuclear_[slot]; }

  /// dst += alpha * lhs * Q_[i,j] for the neighbour entry nb of row i.
  template <typename Dst, typename Lhs>
  void add_right_product(Dst&& dst, const Lhs& lhs, const Neighbor& nb, Scalar alpha) const {
    if (nb.transposed)
      dst.noalias() += alpha * lhs * blocks_[nb.slot].transpose();
    else
      dst.noalias() += alpha * lhs * blocks_[nb.slot];
  }

  /// dst += alpha * lhs * Q_[j,i] for the neighbour entry nb of row i.
  template <typename Dst, typename Lhs>
  void add_right_product_transposed(Dst&& dst, const Lhs& lhs, const Neighbor& nb,
                                    Scalar alpha) const {
    if (nb.transposed)
      dst.noalias() += alpha * lhs * blocks_[nb.slot];
    else
      dst.noalias() += alpha * lhs * blocks_[nb.slot].transpose();
  }

  /// sum_{j != i} ||Q_[j,i]||_*
  Scalar column_nuclear_sum(Index i) const { return column_nuclear_[i]; }

  Scalar c1() const {
    Scalar best(0);
    for (Scalar s : column_nuclear_) best = std::max(best, s);
    return best;
  }

  Scalar c2() const {
    Scalar total(0);
    for (Scalar s : block_nuclear_) total += s;
    return Scalar(2) * total;
  }

  Scalar frobenius_norm() const {
    Scalar sq(0);
    for (const auto& b : blocks_) sq += b.squaredNorm();
    return std::sqrt(Scalar(2) * sq);
  }

  MatrixType to_dense() const {
    MatrixType q = MatrixType::Zero(dim(), dim());
    for (Index s = 0; s < num_stored(); ++s) {
      const auto [i, j] = pairs_[s];
      q.block(i * d_, j * d_, d_, d_) = blocks_[s];
      q.block(j * d_, i * d_, d_, d_) = blocks_[s].transpose();
    }
    return q;
  }

 private:
  void check_index(Index i) const {
    if (i < 0 || i >= n_) throw std::out_of_range("block index " + std::to_string(i) + " out of range");
  }
  void check_pair(Index i, Index j) const {
    check_index(i);
    check_index(j);
    if (i == j) throw std::invalid_argument("diagonal blocks are not stored");
  }

  void insert_neighbor(Index row, Neighbor nb) {
    auto& list = adjacency_[row];
    auto pos = std::lower_bound(list.begin(), list.end(), nb.j,
                                [](const Neighbor& a, Index j) { return a.j < j; });
    list.insert(pos, nb);
  }

  void remove_neighbor(Index row, Index j) {
    auto& list = adjacency_[row];
    list.erase(std::remove_if(list.begin(), list.end(), [j](const Neighbor& a) { return a.j == j; }),
               list.end());
  }

  void erase_slot(Index slot) {
    const auto key = pairs_[slot];
    remove_neighbor(key.first, key.second);
    remove_neighbor(key.second, key.first);
    slot_of_.erase(key);
    const Index last = num_stored() - 1;
    if (slot != last) {
      blocks_[slot] = std::move(blocks_[last]);
      pairs_[slot] = pairs_[last];
      block_nuclear_[slot] = block_nuclear_[last];
      slot_of_[pairs_[slot]] = slot;
      for (Index row : {pairs_[slot].first, pairs_[slot].second})
        for (auto& nb : adjacency_[row])
          if (nb.slot == last) nb.slot = slot;
    }
    blocks_.pop_back();
    pairs_.pop_back();
    block_nuclear_.pop_back();
  }

  void refresh_column(Index i) {
    Scalar s(0);
    for (const auto& nb : adjacency_[i]) s += block_nuclear_[nb.slot];
    column_nuclear_[i] = s;
  }

  Index d_ = 1;
  Index n_ = 0;
  std::vector<MatrixType> blocks_;
  std::vector<std::pair<Index, Index>> pairs_;
  std::vector<Scalar> block_nuclear_;
  std::map<std::pair<Index, Index>, Index> slot_of_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<Scalar> column_nuclear_;
};

template <typename Scalar>
Scalar c1(const BlockSparseSym<Scalar>& q) {
  return q.c1();
}

template <typename Scalar>
Scalar c2(const BlockSparseSym<Scalar>& q) {
  return q.c2();
}

/// Symmetric, zero-diagonal cost plus the constant dropped from the diagonal,
/// so that tr(Q_raw X) = tr(Q X) + offset whenever every X_[i,i] = I.
template <typename Scalar>
struct Preprocessed {
  BlockSparseSym<Scalar> q;
  Scalar offset = Scalar(0);
};

/// One (possibly non-symmetric, possibly diagonal) block of a raw cost matrix.
template <typename Scalar>
struct RawBlock {
  Index i;
  Index j;
  Matrix<Scalar> value;
};

/// Symmetrizes a block-sparse raw cost: off-diagonal pairs become
/// (Q_[i,j] + Q_[j,i]^T) / 2 and the diagonal blocks are folded into the offset.
/// Repeated (i, j) entries are summed.
template <typename Scalar>
Preprocessed<Scalar> preprocess(Index d, Index n, const std::vector<RawBlock<Scalar>>& raw) {
  Preprocessed<Scalar> out{BlockSparseSym<Scalar>(d, n), Scalar(0)};
  std::map<std::pair<Index, Index>, Matrix<Scalar>> sums;
  for (const auto& rb : raw) {
    if (rb.i < 0 || rb.i >= n || rb.j < 0 || rb.j >= n)
      throw std::invalid_argument("preprocess: block index out of range");
    if (rb.value.rows() != d || rb.value.cols() != d)
      throw std::invalid_argument("preprocess: block shape does not match d");
    if (!rb.value.allFinite()) throw std::invalid_argument("preprocess: non-finite entries");
    if (rb.i == rb.j) {
      out.offset += rb.value.trace();
      continue;
    }
    const bool swap = rb.i > rb.j;
    const auto key = swap ? std::make_pair(rb.j, rb.i) : std::make_pair(rb.i, rb.j);
    Matrix<Scalar> oriented = swap ? Matrix<Scalar>(rb.value.transpose()) : rb.value;
    auto [it, inserted] = sums.try_emplace(key, Matrix<Scalar>::Zero(d, d));
    it->second += oriented;
  }
  for (const auto& [key, sum] : sums) out.q.set_block(key.first, key.second, Scalar(0.5) * sum);
  return out;
}

/// Dense overload; `qraw` must be (d n) x (d n).
template <typename Derived>
Preprocessed<typename Derived::Scalar> preprocess(const Eigen::MatrixBase<Derived>& qraw, Index d) {
  using Scalar = typename Derived::Scalar;
  if (d < 1) throw std::invalid_argument("preprocess: block dimension must be positive");
  if (qraw.rows() != qraw.cols() || qraw.rows() % d != 0)
    throw std::invalid_argument("preprocess: expected a square matrix with side divisible by d, got " +
                                std::to_string(qraw.rows()) + "x" + std::to_string(qraw.cols()));
  if (!qraw.allFinite()) throw std::invalid_argument("preprocess: non-finite entries");
  const Index n = qraw.rows() / d;
  std::vector<RawBlock<Scalar>> raw;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      Matrix<Scalar> b = qraw.block(i * d, j * d, d, d);
      if ((b.array() != Scalar(0)).any()) raw.push_back({i, j, std::move(b)});
    }
  return preprocess<Scalar>(d, n, raw);
}

}  // namespace bcsdp
