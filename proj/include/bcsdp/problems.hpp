#pragma once

#include "bcsdp/block_sparse_sym.hpp"
#include "bcsdp/stiefel.hpp"

#include <numeric>
#include <set>
#include <vector>

namespace bcsdp {

struct WeightedEdge {
  Index i;
  Index j;
  double w;
};

/// Undirected weighted graph on vertices 0..n-1 (0-based in memory; the
/// edge-list file format is 1-based).
struct EdgeListGraph {
  Index n = 0;
  std::vector<WeightedEdge> edges;

  void validate() const {
    std::set<std::pair<Index, Index>> seen;
    for (const auto& e : edges) {
      if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n)
        throw std::invalid_argument("edge (" + std::to_string(e.i + 1) + ", " + std::to_string(e.j + 1) + ") out of range");
      if (e.i == e.j) throw std::invalid_argument("self-loop at vertex " + std::to_string(e.i + 1));
      if (!std::isfinite(e.w)) throw std::invalid_argument("non-finite edge weight");
      const auto key = std::minmax(e.i, e.j);
      if (!seen.insert(key).second)
        throw std::invalid_argument("duplicate edge (" + std::to_string(key.first + 1) + ", " +
                                    std::to_string(key.second + 1) + ")");
    }
  }
};

/// d = 1 cost with Q_ij = w_ij, so tr(QX) = 2 sum_edges w_ij x_ij and the
/// relaxed cut value is (sum w - tr(QX)/2) / 2.
template <typename Scalar = double>
BlockSparseSym<Scalar> maxcut_to_Q(const EdgeListGraph& g) {
  g.validate();
  BlockSparseSym<Scalar> q(1, g.n);
  for (const auto& e : g.edges) q.set_block(e.i, e.j, Matrix<Scalar>::Constant(1, 1, static_cast<Scalar>(e.w)));
  return q;
}

/// Connectivity of an undirected graph given as an edge list.
inline bool is_connected(Index n, const std::vector<std::pair<Index, Index>>& edges) {
  if (n <= 1) return true;
  std::vector<Index> parent(n);
  std::iota(parent.begin(), parent.end(), Index(0));
  auto find = [&](Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  Index components = n;
  for (const auto& [a, b] : edges) {
    const Index ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

/// Erdos-Renyi graph with unit weights; pairs visited in lexicographic order.
inline EdgeListGraph random_graph(Index n, double edge_prob, Rng& rng) {
  if (n < 1) throw std::invalid_argument("random_graph: need n >= 1");
  if (!(edge_prob > 0.0 && edge_prob <= 1.0)) throw std::invalid_argument("random_graph: edge_prob must be in (0, 1]");
  EdgeListGraph g;
  g.n = n;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform() < edge_prob) g.edges.push_back({i, j, 1.0});
  return g;
}

/// Haar-distributed rotation in SO(d): QR of a Gaussian matrix with the
/// signs of R's diagonal absorbed, then one column flipped if det < 0.
template <typename Scalar = double>
Matrix<Scalar> random_rotation(Index d, Rng& rng) {
  const Matrix<Scalar> a = rng.gaussian<Scalar>(d, d);
  Eigen::HouseholderQR<Matrix<Scalar>> qr(a);
  Matrix<Scalar> qm = qr.householderQ() * Matrix<Scalar>::Identity(d, d);
  const Matrix<Scalar> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Index k = 0; k < d; ++k)
    if (r(k, k) < 0) qm.col(k) = -qm.col(k);
  if (qm.determinant() < 0) qm.col(0) = -qm.col(0);
  return qm;
}

/// Rotation by an angle drawn from N(0, sigma^2) wrapped to (-pi, pi]: in the
/// plane for d = 2, about a uniformly random axis for d = 3.
template <typename Scalar = double>
Matrix<Scalar> noise_rotation(Index d, double sigma, Rng& rng) {
  double angle = sigma * rng.normal();
  angle = std::remainder(angle, 2.0 * std::numbers::pi);
  if (d == 2) {
    Matrix<Scalar> m(2, 2);
    m << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return m;
  }
  if (d == 3) {
    Eigen::Matrix<Scalar, 3, 1> axis;
    do {
      axis << Scalar(rng.normal()), Scalar(rng.normal()), Scalar(rng.normal());
    } while (axis.norm() < Scalar(1e-12));
    axis.normalize();
    return Eigen::AngleAxis<Scalar>(static_cast<Scalar>(angle), axis).toRotationMatrix();
  }
  throw std::invalid_argument("noise_rotation: d must be 2 or 3");
}

template <typename Scalar = double>
struct SyncEdge {
  Index i;
  Index j;
  /// noisy R_i R_j^T
  Matrix<Scalar> measurement;
};

/// Rotation synchronization instance over SO(d).
template <typename Scalar = double>
struct SyncInstance {
  Index n = 0;
  Index d = 0;
  double noise = 0.0;
  std::vector<SyncEdge<Scalar>> edges;
  /// true rotations R_i
  std::vector<Matrix<Scalar>> ground_truth;

  /// Q_[i,j] = -R~_ij / 2, so F(Y) = -sum_edges tr(R~_ij Y_j^T Y_i).
  BlockSparseSym<Scalar> cost() const {
    BlockSparseSym<Scalar> q(d, n);
    for (const auto& e : edges) q.set_block(e.i, e.j, Scalar(-0.5) * e.measurement);
    return q;
  }

  /// d x dn factor Y_i = R_i^T, which attains -d |E| without noise.
  Matrix<Scalar> ground_truth_factor() const {
    Matrix<Scalar> y(d, d * n);
    for (Index i = 0; i < n; ++i) y.middleCols(i * d, d) = ground_truth[i].transpose();
    return y;
  }
};

/// Random SO(d) synchronization problem on a connected Erdos-Renyi graph.
/// Graphs are resampled until connected, at most 100 times.
template <typename Scalar = double>
SyncInstance<Scalar> generate_rotsync(Index n, Index d, double edge_prob, double noise, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_rotsync: need n >= 2");
  if (d != 2 && d != 3) throw std::invalid_argument("generate_rotsync: d must be 2 or 3, got " + std::to_string(d));
  if (!(edge_prob > 0.0 && edge_prob <= 1.0)) throw std::invalid_argument("generate_rotsync: edge_prob must be in (0, 1]");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw std::invalid_argument("generate_rotsync: noise must be >= 0");
  Rng rng(seed, stream::kGenerator);
  SyncInstance<Scalar> inst;
  inst.n = n;
  inst.d = d;
  inst.noise = noise;
  for (Index i = 0; i < n; ++i) inst.ground_truth.push_back(random_rotation<Scalar>(d, rng));

  std::vector<std::pair<Index, Index>> pairs;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw std::runtime_error("generate_rotsync: no connected graph after 100 attempts");
    pairs.clear();
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j)
        if (rng.uniform() < edge_prob) pairs.emplace_back(i, j);
    if (is_connected(n, pairs)) break;
  }
  for (const auto& [i, j] : pairs) {
    Matrix<Scalar> m = inst.ground_truth[i] * inst.ground_truth[j].transpose();
    if (noise > 0) m = m * noise_rotation<Scalar>(d, noise, rng);
    inst.edges.push_back({i, j, std::move(m)});
  }
  return inst;
}

template <typename Scalar>
struct Alignment {
  /// d x r orthonormal rows, applied on the left of every estimated block
  Matrix<Scalar> transform;
  Matrix<Scalar> aligned;
  Scalar max_block_error;
};

/// Best global orthogonal transform O (O O^T = I) taking the estimate onto
/// the reference: minimizes sum_i ||O Yhat_i - Yref_i||_F.
template <typename Scalar>
Alignment<Scalar> align_to_reference(const Matrix<Scalar>& estimate, const Matrix<Scalar>& reference, Index d) {
  if (estimate.cols() != reference.cols() || estimate.rows() < reference.rows())
    throw std::invalid_argument("align_to_reference: incompatible shapes");
  const Matrix<Scalar> m = reference * estimate.transpose();
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Alignment<Scalar> out;
  out.transform = svd.matrixU() * svd.matrixV().transpose();
  out.aligned = out.transform * estimate;
  out.max_block_error = Scalar(0);
  for (Index i = 0; i < reference.cols() / d; ++i)
    out.max_block_error = std::max(out.max_block_error,
                                   (out.aligned.middleCols(i * d, d) - reference.middleCols(i * d, d)).norm());
  return out;
}

}  // namespace bcsdp
