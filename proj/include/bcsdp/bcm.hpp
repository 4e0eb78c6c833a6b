#pragma once

#include "bcsdp/analysis.hpp"

#include <chrono>
#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace bcsdp {

enum class Sampling { kUniform, kImportance };
enum class Termination { kTolerance, kMaxIters, kStalled };

inline const char* to_string(Sampling s) { return s == Sampling::kUniform ? "uniform" : "importance"; }

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::kTolerance: return "tolerance";
    case Termination::kMaxIters: return "max_iters";
    case Termination::kStalled: return "stalled";
  }
  return "unknown";
}

struct SolverConfig {
  Index rank = 0;
  Sampling sampling = Sampling::kUniform;
  /// target for ||grad F||_F^2
  double grad_tol = 1e-6;
  /// unset: the uniform/importance iteration bound with F* replaced by -C2(Q)
  std::optional<std::uint64_t> max_iters;
  /// unset: n
  std::optional<std::uint64_t> check_period;
  /// unset: 10 n
  std::optional<std::uint64_t> refresh_period;
  std::uint64_t seed = 0;
  /// 0 disables the iteration log
  std::uint64_t log_every = 0;
  /// return the checked iterate with the smallest gradient norm instead of the last
  bool return_best = false;

  void validate(Index d, Index n) const {
    if (rank < d) throw std::invalid_argument("rank " + std::to_string(rank) + " below block dimension " + std::to_string(d));
    if (!(grad_tol > 0)) throw std::invalid_argument("grad_tol must be positive");
    if (check_period && *check_period < 1) throw std::invalid_argument("check_period must be >= 1");
    if (refresh_period && *refresh_period < 1) throw std::invalid_argument("refresh_period must be >= 1");
    (void)n;
  }
};

/// Binary sum tree over nonnegative weights. Parents are recomputed from their
/// children on every update, so the tree carries no accumulated drift.
template <typename Scalar>
class SamplingTree {
 public:
  SamplingTree() = default;
  explicit SamplingTree(const std::vector<Scalar>& weights) { build(weights); }

  void build(const std::vector<Scalar>& weights) {
    size_ = static_cast<Index>(weights.size());
    leaves_ = 1;
    while (leaves_ < size_) leaves_ *= 2;
    tree_.assign(2 * leaves_, Scalar(0));
    for (Index i = 0; i < size_; ++i) tree_[leaves_ + i] = checked(weights[i]);
    for (Index k = leaves_ - 1; k >= 1; --k) tree_[k] = tree_[2 * k] + tree_[2 * k + 1];
  }

  void set(Index i, Scalar w) {
    Index k = leaves_ + i;
    tree_[k] = checked(w);
    for (k /= 2; k >= 1; k /= 2) tree_[k] = tree_[2 * k] + tree_[2 * k + 1];
  }

  Scalar weight(Index i) const { return tree_[leaves_ + i]; }
  Scalar total() const { return tree_.empty() ? Scalar(0) : tree_[1]; }
  Index size() const { return size_; }

  /// Index with probability weight(i) / total(), for u uniform on [0, 1).
  /// Zero-weight leaves are never returned. Requires total() > 0.
  Index sample(double u) const {
    Scalar target = static_cast<Scalar>(u) * total();
    Index k = 1;
    while (k < leaves_) {
      const Scalar left = tree_[2 * k];
      const Scalar right = tree_[2 * k + 1];
      if (left > 0 && (target < left || !(right > 0))) {
        k = 2 * k;
      } else {
        target -= left;
        k = 2 * k + 1;
      }
    }
    return k - leaves_;
  }

 private:
  static Scalar checked(Scalar w) {
    if (!(w >= 0) || !std::isfinite(static_cast<double>(w)))
      throw NumericalError("sampling weight must be finite and nonnegative");
    return w;
  }

  Index size_ = 0;
  Index leaves_ = 1;
  std::vector<Scalar> tree_;
};

template <typename Scalar>
struct SolverState {
  FactorPoint<Scalar> point;
  std::uint64_t iter = 0;
  /// most recent costs, newest last
  std::deque<Scalar> cost_history;
  Rng rng{0, stream::kSampling};
  Sampling sampling = Sampling::kUniform;
  /// ||G_i||_* per block; maintained only under importance sampling
  SamplingTree<Scalar> nuclear_cache;
  Scalar descent_residual = Scalar(0);

  static constexpr std::size_t kHistory = 64;

  void push_cost(Scalar c) {
    cost_history.push_back(c);
    if (cost_history.size() > kHistory) cost_history.pop_front();
  }
};

/// Recomputes the per-block nuclear norms from the coupling cache.
template <typename Scalar>
void rebuild_nuclear_cache(SolverState<Scalar>& state) {
  std::vector<Scalar> w(state.point.num_blocks());
  for (Index i = 0; i < state.point.num_blocks(); ++i) w[i] = nuclear_norm(state.point.coupling(i));
  state.nuclear_cache.build(w);
}

/// Fresh state around a point whose cache is already valid.
template <typename Scalar>
SolverState<Scalar> make_state(FactorPoint<Scalar> point, Sampling sampling, std::uint64_t seed) {
  SolverState<Scalar> s;
  s.point = std::move(point);
  s.rng = Rng(seed, stream::kSampling);
  s.sampling = sampling;
  if (sampling == Sampling::kImportance) rebuild_nuclear_cache(s);
  s.push_cost(s.point.cost());
  return s;
}

/// Draws i_k: uniform, or proportional to ||G_i||_*. Returns nullopt when
/// every ||G_i||_* is zero, in which case the gradient vanishes.
template <typename Scalar>
std::optional<Index> sample_block(SolverState<Scalar>& state) {
  const Index n = state.point.num_blocks();
  if (n == 0) return std::nullopt;
  if (state.sampling == Sampling::kUniform) return static_cast<Index>(state.rng.uniform_index(static_cast<std::uint64_t>(n)));
  if (!(state.nuclear_cache.total() > 0)) return std::nullopt;
  return state.nuclear_cache.sample(state.rng.uniform());
}

/// max_i 2 (||G_i||_* + <G_i, Y_i>): the largest single-block decrease available.
template <typename Scalar>
Scalar max_available_descent(const FactorPoint<Scalar>& p) {
  Scalar best(0);
  for (Index i = 0; i < p.num_blocks(); ++i) {
    const auto gi = p.coupling(i);
    best = std::max(best, Scalar(2) * block_minimize(Matrix<Scalar>(gi), StiefelBlock<Scalar>(p.block(i), Scalar(1e-6))).gap);
  }
  return best;
}

template <typename Scalar>
struct StepRecord {
  Index block = 0;
  /// -2 (||G||_* + <G, Y_old>)
  Scalar predicted = Scalar(0);
  /// 2 <G, Y_new - Y_old>, the exact change of F for a single-block move
  Scalar measured = Scalar(0);
  Scalar nuclear = Scalar(0);
  /// <G, Y_old>
  Scalar inner = Scalar(0);
  bool noop = false;
};

/// One block update: Y_i <- argmin <G_i, Y>, then G_j += (Y_i^new - Y_i^old) Q_[i,j]
/// for the neighbours j of i only, and F += predicted descent.
template <typename Scalar>
StepRecord<Scalar> bcm_step(SolverState<Scalar>& state, const BlockSparseSym<Scalar>& q, Index i) {
  auto& p = state.point;
  if (i < 0 || i >= p.num_blocks()) throw std::out_of_range("bcm_step: block index out of range");
  StepRecord<Scalar> rec;
  rec.block = i;
  const Matrix<Scalar> gi = p.coupling(i);
  const Matrix<Scalar> y_old = p.block(i);
  if ((gi.array() == Scalar(0)).all()) {
    rec.noop = true;
    state.descent_residual = Scalar(0);
    ++state.iter;
    state.push_cost(p.cost());
    return rec;
  }
  const auto best = block_minimize(gi, StiefelBlock<Scalar>(y_old, Scalar(1e-6)));
  const Matrix<Scalar>& y_new = best.block.matrix();
  rec.nuclear = best.nuclear;
  rec.inner = (gi.array() * y_old.array()).sum();
  rec.predicted = Scalar(-2) * best.gap;
  rec.measured = Scalar(2) * ((gi.array() * y_new.array()).sum() - rec.inner);
  if (!std::isfinite(static_cast<double>(rec.predicted)) || !std::isfinite(static_cast<double>(rec.measured)))
    throw NumericalError("bcm_step: non-finite descent at block " + std::to_string(i));

  const Matrix<Scalar> delta = y_new - y_old;
  p.block(i) = y_new;
  for (const auto& nb : q.neighbors(i)) {
    auto gj = p.coupling(nb.j);
    q.add_right_product(gj, delta, nb, Scalar(1));
    if (!gj.allFinite()) throw NumericalError("bcm_step: non-finite coupling at block " + std::to_string(nb.j));
    if (state.sampling == Sampling::kImportance) state.nuclear_cache.set(nb.j, nuclear_norm(gj));
  }
  p.set_cost(p.cost() + rec.predicted);
  state.descent_residual = std::abs(rec.measured - rec.predicted);
  ++state.iter;
  state.push_cost(p.cost());
  return rec;
}

template <typename Scalar>
struct LogRecord {
  std::uint64_t k;
  /// F(Y^k), before the step
  Scalar cost;
  Index block;
  Scalar pred_descent;
  Scalar meas_descent;
  /// measured at Y^k when k was a check point
  std::optional<Scalar> grad_norm_sq;
  std::int64_t wall_ns;
};

template <typename Scalar>
struct RunReport {
  FactorPoint<Scalar> point;
  /// config with every optional field resolved
  SolverConfig config;
  std::string max_iters_source;
  std::uint64_t iterations = 0;
  Scalar initial_cost = Scalar(0);
  Scalar final_cost = Scalar(0);
  Scalar final_grad_norm_sq = Scalar(0);
  Termination reason = Termination::kMaxIters;
  Scalar best_grad_norm_sq = std::numeric_limits<Scalar>::infinity();
  std::uint64_t best_iteration = 0;
  /// first check point with grad norm^2 <= grad_tol
  std::optional<std::uint64_t> first_below_tol;
  /// largest |recurrence cost - recomputed cost| seen at refresh points
  Scalar max_cost_drift = Scalar(0);
  /// largest |measured - predicted| descent over all steps
  Scalar max_descent_residual = Scalar(0);
  std::vector<LogRecord<Scalar>> log;
};

/// Randomized block-coordinate minimization over St(d, r)^n.
template <typename Scalar>
RunReport<Scalar> solve(const BlockSparseSym<Scalar>& q, const SolverConfig& config,
                        const std::optional<FactorPoint<Scalar>>& warm_start = std::nullopt) {
  const Index d = q.block_dim();
  const Index n = q.num_block_rows();
  config.validate(d, n);

  RunReport<Scalar> rep;
  rep.config = config;
  FactorPoint<Scalar> start;
  if (warm_start) {
    if (warm_start->rank() != config.rank)
      throw std::invalid_argument("warm start rank " + std::to_string(warm_start->rank()) + " differs from configured rank " +
                                  std::to_string(config.rank));
    check_dimensions(*warm_start, q);
    start = *warm_start;
    refresh(start, q);
  } else {
    Rng init(config.seed, stream::kInit);
    start = random_factor_point(q, config.rank, init);
  }
  rep.initial_cost = start.cost();

  const std::uint64_t un = static_cast<std::uint64_t>(std::max<Index>(n, 1));
  const std::uint64_t check_period = config.check_period.value_or(un);
  const std::uint64_t refresh_period = config.refresh_period.value_or(10 * un);
  std::uint64_t max_iters = 0;
  if (config.max_iters) {
    max_iters = *config.max_iters;
    rep.max_iters_source = "configured";
  } else {
    BoundInputs<Scalar> b;
    b.d = d;
    b.n = std::max<Index>(n, 1);
    b.initial_cost = rep.initial_cost;
    b.lower_bound = std::min(trivial_lower_bound(q), rep.initial_cost);
    b.eps = static_cast<Scalar>(config.grad_tol);
    b.constant = config.sampling == Sampling::kUniform ? q.c1() : q.c2();
    max_iters = config.sampling == Sampling::kUniform ? iteration_bound_uniform(b) : iteration_bound_importance(b);
    rep.max_iters_source = config.sampling == Sampling::kUniform ? "uniform bound with F* >= -C2(Q)"
                                                                 : "importance bound with F* >= -C2(Q)";
  }
  rep.config.check_period = check_period;
  rep.config.refresh_period = refresh_period;
  rep.config.max_iters = max_iters;

  SolverState<Scalar> state = make_state(std::move(start), config.sampling, config.seed);
  std::optional<FactorPoint<Scalar>> best_point;
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t stall_window = 5 * un;
  std::uint64_t stall_count = 0;
  // grad-norm^2 at the end of the previous flat window
  Scalar flat_grad = std::numeric_limits<Scalar>::infinity();

  auto measure = [&](std::uint64_t k) {
    const Scalar gn = grad_norm_sq_fast(state.point);
    if (gn < rep.best_grad_norm_sq) {
      rep.best_grad_norm_sq = gn;
      rep.best_iteration = k;
      if (config.return_best) best_point = state.point;
    }
    if (gn <= Scalar(config.grad_tol) && !rep.first_below_tol) rep.first_below_tol = k;
    return gn;
  };

  std::optional<Termination> reason;
  for (std::uint64_t k = 0;; ++k) {
    std::optional<Scalar> gn;
    if (k % check_period == 0) {
      gn = measure(k);
      if (*gn <= Scalar(config.grad_tol)) {
        reason = Termination::kTolerance;
        break;
      }
    }
    if (k >= max_iters) {
      reason = Termination::kMaxIters;
      break;
    }
    const auto pick = sample_block(state);
    if (!pick) {
      measure(k);
      reason = Termination::kTolerance;
      break;
    }
    const Scalar cost_before = state.point.cost();
    const auto rec = bcm_step(state, q, *pick);
    rep.max_descent_residual = std::max(rep.max_descent_residual, state.descent_residual);
    rep.iterations = k + 1;

    if (config.log_every > 0 && k % config.log_every == 0) {
      const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
      rep.log.push_back({k, cost_before, rec.block, rec.predicted, rec.measured, gn, static_cast<std::int64_t>(ns)});
    }

    if ((k + 1) % refresh_period == 0) {
      const Scalar tracked = state.point.cost();
      refresh(state.point, q);
      rep.max_cost_drift = std::max(rep.max_cost_drift, std::abs(tracked - state.point.cost()));
      if (state.sampling == Sampling::kImportance) rebuild_nuclear_cache(state);
    }

    const Scalar scale = Scalar(1) + std::abs(state.point.cost());
    if (std::abs(rec.predicted) < Scalar(1e-14) * scale)
      ++stall_count;
    else
      stall_count = 0;
    if (stall_count >= stall_window) {
      const Scalar g = measure(k + 1);
      if (g <= Scalar(config.grad_tol)) {
        reason = Termination::kTolerance;
        break;
      }
      // Flat steps alone are not a plateau. Near a nondegenerate optimum every
      // step is tiny while the gradient still shrinks geometrically, and
      // importance sampling may keep re-picking heavy blocks that are already
      // optimal. Stop only when the gradient has stopped improving and no
      // block has descent left.
      if (!(g < Scalar(0.5) * flat_grad) && max_available_descent(state.point) < Scalar(1e-14) * scale) {
        reason = Termination::kStalled;
        break;
      }
      flat_grad = g;
      stall_count = 0;
    }
  }

  rep.reason = *reason;
  if (config.return_best && best_point) state.point = std::move(*best_point);
  refresh(state.point, q);
  rep.final_cost = state.point.cost();
  rep.final_grad_norm_sq = grad_norm_sq_fast(state.point);
  rep.point = std::move(state.point);
  return rep;
}

}  // namespace bcsdp
