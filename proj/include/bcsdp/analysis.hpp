#pragma once

#include "bcsdp/stiefel.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace bcsdp {

/// A_i = (Y_i^T G_i + G_i^T Y_i) / 2
template <typename DerivedY, typename DerivedG>
Matrix<typename DerivedY::Scalar> symmetric_multiplier(const Eigen::MatrixBase<DerivedY>& yi,
                                                       const Eigen::MatrixBase<DerivedG>& gi) {
  using Scalar = typename DerivedY::Scalar;
  const Matrix<Scalar> m = yi.transpose() * gi;
  return Scalar(0.5) * (m + m.transpose());
}

/// ||grad F(Y)||_F^2 = 4 sum_i (||G_i||_F^2 - ||A_i||_F^2), read off the
/// coupling cache. Each term is summed as ||G_i - Y_i A_i||_F^2, which is the
/// same quantity on the manifold but avoids cancellation near critical points.
template <typename Scalar>
Scalar grad_norm_sq_fast(const FactorPoint<Scalar>& p) {
  Scalar total(0);
  for (Index i = 0; i < p.num_blocks(); ++i) {
    const auto gi = p.coupling(i);
    const auto yi = p.block(i);
    total += (gi - yi * symmetric_multiplier(yi, gi)).squaredNorm();
  }
  return Scalar(4) * total;
}

/// The unstabilized form 4 sum_i (||G_i||_F^2 - ||A_i||_F^2), clamped at 0.
template <typename Scalar>
Scalar grad_norm_sq_difference(const FactorPoint<Scalar>& p) {
  Scalar total(0);
  for (Index i = 0; i < p.num_blocks(); ++i) {
    const auto gi = p.coupling(i);
    total += gi.squaredNorm() - symmetric_multiplier(p.block(i), gi).squaredNorm();
  }
  return std::max(Scalar(0), Scalar(4) * total);
}

// ---------------------------------------------------------------------------
// Iteration bounds
// ---------------------------------------------------------------------------

/// Inputs of the iteration-count bounds. `constant` is C1(Q) for uniform
/// sampling and C2(Q) for importance sampling; `lower_bound` is F* or any
/// valid lower bound on it.
template <typename Scalar>
struct BoundInputs {
  Index d = 1;
  Index n = 1;
  Scalar constant = Scalar(0);
  Scalar initial_cost = Scalar(0);
  Scalar lower_bound = Scalar(0);
  Scalar eps = Scalar(1);
};

namespace detail {

/// ceil(x) saturating at uint64 max; x within a few ulps above an integer is
/// treated as that integer, since eps itself is rarely representable.
inline std::uint64_t ceil_saturating(long double x) {
  if (!(x > 0)) return 0;
  if (x >= 1.8e19L) return std::numeric_limits<std::uint64_t>::max();
  const long double nearest = std::nearbyint(x);
  if (std::fabs(x - nearest) <= 8 * std::numeric_limits<double>::epsilon() * x)
    return static_cast<std::uint64_t>(nearest);
  return static_cast<std::uint64_t>(std::ceil(x));
}

template <typename Scalar>
void check_bound_inputs(const BoundInputs<Scalar>& b) {
  if (!(b.eps > 0)) throw std::invalid_argument("iteration bound: eps must be positive");
  if (b.d < 1 || b.n < 1) throw std::invalid_argument("iteration bound: d and n must be positive");
  if (b.constant < 0) throw std::invalid_argument("iteration bound: negative rate constant");
  if (b.initial_cost < b.lower_bound)
    throw std::invalid_argument("iteration bound: initial cost below the supplied lower bound");
}

}  // namespace detail

/// ceil(2 d n C1 (F(Y0) - F*) / eps), uniform sampling.
template <typename Scalar>
std::uint64_t iteration_bound_uniform(const BoundInputs<Scalar>& b) {
  detail::check_bound_inputs(b);
  const long double num = 2.0L * b.d * b.n * static_cast<long double>(b.constant) *
                          (static_cast<long double>(b.initial_cost) - static_cast<long double>(b.lower_bound));
  return detail::ceil_saturating(num / static_cast<long double>(b.eps));
}

/// ceil(2 d C2 (F(Y0) - F*) / eps), importance sampling.
template <typename Scalar>
std::uint64_t iteration_bound_importance(const BoundInputs<Scalar>& b) {
  detail::check_bound_inputs(b);
  const long double num = 2.0L * b.d * static_cast<long double>(b.constant) *
                          (static_cast<long double>(b.initial_cost) - static_cast<long double>(b.lower_bound));
  return detail::ceil_saturating(num / static_cast<long double>(b.eps));
}

/// -C2(Q) <= F(Y) for every feasible Y, since each |tr(Q_[i,j] Y_j^T Y_i)| <= ||Q_[i,j]||_*.
template <typename Scalar>
Scalar trivial_lower_bound(const BlockSparseSym<Scalar>& q) {
  return -q.c2();
}

// ---------------------------------------------------------------------------
// SDP lift
// ---------------------------------------------------------------------------

template <typename Scalar>
struct LiftCheck {
  /// tr(Q X) with X = Y^T Y
  Scalar objective;
  /// max_i max|Y_i^T Y_i - I|
  Scalar feasibility_residual;
};

template <typename Scalar>
LiftCheck<Scalar> sdp_lift_check(const FactorPoint<Scalar>& p, const BlockSparseSym<Scalar>& q) {
  check_dimensions(p, q);
  Scalar residual(0);
  for (Index i = 0; i < p.num_blocks(); ++i) residual = std::max(residual, feasibility_residual(p.block(i)));
  return {cost_from_scratch(p.factor(), q), residual};
}

// ---------------------------------------------------------------------------
// Dual certificate
// ---------------------------------------------------------------------------

enum class Verdict { kCertifiedGlobal, kFirstOrderOnly, kNotStationary };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kCertifiedGlobal: return "certified-global";
    case Verdict::kFirstOrderOnly: return "first-order-only";
    case Verdict::kNotStationary: return "not-stationary";
  }
  return "unknown";
}

struct CertifyOptions {
  /// Relative tolerance; both thresholds below are tol * (1 + ||Q||_F).
  double tol = 1e-8;
  /// ||S Y^T||_F above stationarity_gate * (1 + ||Q||_F) means not-stationary.
  double stationarity_gate = 1e-3;
  /// Dense eigensolver up to this dimension, Lanczos above.
  Index dense_limit = 2000;
  int lanczos_steps = 200;
  int lanczos_restarts = 50;
  std::uint64_t lanczos_seed = 0;
};

template <typename Scalar>
struct CertificateReport {
  Scalar lambda_min = Scalar(0);
  /// ||S Y^T||_F, which equals ||grad F(Y)||_F / 2.
  Scalar stationarity = Scalar(0);
  Scalar grad_norm_sq = Scalar(0);
  Scalar threshold = Scalar(0);
  Verdict verdict = Verdict::kNotStationary;
  bool dense = true;
  /// False when the iterative eigensolver did not reach its tolerance; the
  /// verdict is then never certified-global.
  bool eigensolver_converged = true;
  std::string diagnostic;
};

template <typename Scalar>
struct EigenEstimate {
  Scalar value;
  Scalar residual;
  bool converged;
};

/// Smallest eigenvalue of a symmetric operator by restarted Lanczos with full
/// reorthogonalization. `apply(x, y)` must set y = S x.
template <typename Scalar, typename Apply>
EigenEstimate<Scalar> smallest_eigenvalue_lanczos(Apply&& apply, Index dim, Scalar tol, int steps,
                                                  int restarts, std::uint64_t seed) {
  Rng rng(seed, stream::kGenerator);
  Vector<Scalar> start(dim);
  for (Index k = 0; k < dim; ++k) start(k) = static_cast<Scalar>(rng.normal());
  start.normalize();
  const Index m = std::min<Index>(steps, dim);
  EigenEstimate<Scalar> best{Scalar(0), std::numeric_limits<Scalar>::infinity(), false};
  Vector<Scalar> w(dim);
  for (int restart = 0; restart <= restarts; ++restart) {
    Matrix<Scalar> basis(dim, m);
    Vector<Scalar> alpha(m), beta(m);
    basis.col(0) = start;
    Index used = m;
    for (Index k = 0; k < m; ++k) {
      apply(basis.col(k), w);
      alpha(k) = basis.col(k).dot(w);
      // full reorthogonalization, twice
      for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(k + 1) * (basis.leftCols(k + 1).transpose() * w);
      beta(k) = w.norm();
      if (k + 1 < m) {
        if (beta(k) <= std::numeric_limits<Scalar>::epsilon() * (std::abs(alpha(k)) + 1)) {
          used = k + 1;
          break;
        }
        basis.col(k + 1) = w / beta(k);
      }
    }
    Matrix<Scalar> t = Matrix<Scalar>::Zero(used, used);
    for (Index k = 0; k < used; ++k) {
      t(k, k) = alpha(k);
      if (k + 1 < used) t(k, k + 1) = t(k + 1, k) = beta(k);
    }
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(t);
    const Scalar theta = es.eigenvalues()(0);
    Vector<Scalar> ritz = basis.leftCols(used) * es.eigenvectors().col(0);
    ritz.normalize();
    apply(ritz, w);
    const Scalar residual = (w - theta * ritz).norm();
    best = {theta, residual, residual <= tol};
    if (best.converged) break;
    start = ritz;
  }
  return best;
}

/// Checks whether a first-order critical point is a global minimizer by
/// testing S = Q - BDiag(A_1, ..., A_n) for positive semidefiniteness.
/// At a critical point S Y^T = 0, so S >= 0 makes Y^T Y optimal for the SDP.
template <typename Scalar>
CertificateReport<Scalar> certify_global(const FactorPoint<Scalar>& p, const BlockSparseSym<Scalar>& q,
                                         const CertifyOptions& opts = {}) {
  check_dimensions(p, q);
  const Index d = q.block_dim();
  const Index n = q.num_block_rows();
  const Matrix<Scalar> g = coupling_from_scratch(p.factor(), q);

  std::vector<Matrix<Scalar>> multipliers(n);
  Scalar stationarity_sq(0);
  for (Index i = 0; i < n; ++i) {
    const auto yi = p.block(i);
    const auto gi = g.middleCols(i * d, d);
    multipliers[i] = symmetric_multiplier(yi, gi);
    // block row i of S Y^T is (G_i - Y_i A_i)^T
    stationarity_sq += (gi - yi * multipliers[i]).squaredNorm();
  }

  CertificateReport<Scalar> rep;
  const Scalar scale = Scalar(1) + q.frobenius_norm();
  rep.stationarity = std::sqrt(stationarity_sq);
  rep.grad_norm_sq = Scalar(4) * stationarity_sq;
  rep.threshold = Scalar(opts.tol) * scale;

  const Index dim = d * n;
  if (dim == 0) {
    rep.verdict = Verdict::kCertifiedGlobal;
    return rep;
  }
  if (dim <= opts.dense_limit) {
    Matrix<Scalar> s = q.to_dense();
    for (Index i = 0; i < n; ++i) s.block(i * d, i * d, d, d) -= multipliers[i];
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(s, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
      rep.eigensolver_converged = false;
      rep.diagnostic = "dense eigensolver failed";
    } else {
      rep.lambda_min = es.eigenvalues()(0);
    }
  } else {
    rep.dense = false;
    auto apply = [&](const auto& x, Vector<Scalar>& out) {
      out.setZero(dim);
      for (Index i = 0; i < n; ++i) {
        auto oi = out.segment(i * d, d);
        oi.noalias() -= multipliers[i] * x.segment(i * d, d);
        for (const auto& nb : q.neighbors(i)) {
          if (nb.transposed)
            oi.noalias() += q.stored(nb.slot).transpose() * x.segment(nb.j * d, d);
          else
            oi.noalias() += q.stored(nb.slot) * x.segment(nb.j * d, d);
        }
      }
    };
    const auto est = smallest_eigenvalue_lanczos<Scalar>(apply, dim, rep.threshold, opts.lanczos_steps,
                                                         opts.lanczos_restarts, opts.lanczos_seed);
    rep.lambda_min = est.value;
    rep.eigensolver_converged = est.converged;
    if (!est.converged) rep.diagnostic = "lanczos residual " + std::to_string(double(est.residual));
  }

  if (rep.stationarity > Scalar(opts.stationarity_gate) * scale)
    rep.verdict = Verdict::kNotStationary;
  else if (rep.eigensolver_converged && rep.stationarity <= rep.threshold && rep.lambda_min >= -rep.threshold)
    rep.verdict = Verdict::kCertifiedGlobal;
  else
    rep.verdict = Verdict::kFirstOrderOnly;
  return rep;
}

// ---------------------------------------------------------------------------
// Matrix inequality oracles (implemented in src/lemma_oracles.cpp)
// ---------------------------------------------------------------------------

struct InequalityTally {
  std::string name;
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;
  /// max of (lhs - rhs) / (1 + |rhs|) seen over all trials
  double worst_excess = -std::numeric_limits<double>::infinity();
  /// offending matrices of the first violation, YFACTOR text
  std::string first_failure;
};

struct LemmaOracleSummary {
  std::vector<InequalityTally> tallies;
  bool passed() const {
    for (const auto& t : tallies)
      if (t.violations > 0) return false;
    return true;
  }
};

/// Random trials of the spectral inequalities behind the convergence proof:
///   sum |lambda_i|^p <= sum sigma_i^p (p = 1, 2) for square M;
///   sum_{i<j} |lambda_i lambda_j| <= sum_{i<j} sigma_i sigma_j;
///   sigma_i(Y^T G) <= sigma_i(G) for Y on St(d, r);
///   tr(A)^2 - ||A||_F^2 <= ||G||_*^2 - ||G||_F^2 with A = sym(G^T Y).
/// Each is checked with slack 1e-9 (1 + |rhs|).
LemmaOracleSummary lemma_oracles(std::uint64_t seed, std::uint64_t trials, double slack = 1e-9);

}  // namespace bcsdp
