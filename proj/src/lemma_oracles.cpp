#include "bcsdp/analysis.hpp"
#include "bcsdp/io.hpp"

#include <sstream>

namespace bcsdp {

namespace {

using Mat = Matrix<double>;

struct Check {
  Check(std::string name, double tol) : slack(tol) { tally.name = std::move(name); }

  InequalityTally tally;
  double slack;

  /// Records lhs <= rhs + slack (1 + |rhs|); `dump` is only called on a violation.
  template <typename Dump>
  void record(double lhs, double rhs, Dump&& dump) {
    ++tally.trials;
    const double excess = (lhs - rhs) / (1.0 + std::abs(rhs));
    tally.worst_excess = std::max(tally.worst_excess, excess);
    if (lhs > rhs + slack * (1.0 + std::abs(rhs))) {
      if (tally.violations == 0) {
        std::ostringstream os;
        os << "# lhs " << lhs << " rhs " << rhs << '\n';
        dump(os);
        tally.first_failure = os.str();
      }
      ++tally.violations;
    }
  }
};

Vector<double> singular_values(const Mat& m) { return Eigen::JacobiSVD<Mat>(m).singularValues(); }

/// Pairwise elementary sum e_2 over |values|.
template <typename V>
double pair_sum(const V& v) {
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i)
    for (Index j = i + 1; j < v.size(); ++j) s += std::abs(v(i)) * std::abs(v(j));
  return s;
}

}  // namespace

LemmaOracleSummary lemma_oracles(std::uint64_t seed, std::uint64_t trials, double slack) {
  if (trials < 1) throw std::invalid_argument("lemma_oracles: need at least one trial");
  Rng rng(seed, stream::kGenerator);
  Check eig_sv_p1("eigen-vs-singular p=1", slack);
  Check eig_sv_p2("eigen-vs-singular p=2", slack);
  Check eig_sv_pairs("eigen-vs-singular pairwise products", slack);
  Check sv_interlace("sigma_i(Y^T G) <= sigma_i(G)", slack);
  Check trace_gap("tr(A)^2 - ||A||_F^2 <= ||G||_*^2 - ||G||_F^2", slack);

  for (std::uint64_t t = 0; t < trials; ++t) {
    // Square matrix inequalities.
    const Index m = 1 + static_cast<Index>(rng.uniform_index(6));
    const Mat sq = rng.gaussian<double>(m, m);
    const Eigen::VectorXcd lambda = Eigen::EigenSolver<Mat>(sq, false).eigenvalues();
    const Vector<double> sigma = singular_values(sq);
    const Vector<double> abs_lambda = lambda.cwiseAbs();
    auto dump_square = [&](std::ostream& os) { io::write_yfactor(os, sq, m); };
    eig_sv_p1.record(abs_lambda.sum(), sigma.sum(), dump_square);
    eig_sv_p2.record(abs_lambda.squaredNorm(), sigma.squaredNorm(), dump_square);
    eig_sv_pairs.record(pair_sum(abs_lambda), pair_sum(sigma), dump_square);

    // Stiefel inequalities.
    const Index d = 1 + static_cast<Index>(rng.uniform_index(3));
    const Index r = d + static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(7 - d)));
    const Mat g = rng.gaussian<double>(r, d);
    const Mat y = StiefelBlock<double>::random(r, d, rng).matrix();
    auto dump_pair = [&](std::ostream& os) {
      Mat both(r, 2 * d);
      both << g, y;
      io::write_yfactor(os, both, d);
    };
    const Vector<double> sg = singular_values(g);
    const Vector<double> syg = singular_values(y.transpose() * g);
    double worst_gap = -std::numeric_limits<double>::infinity();
    Index worst_k = 0;
    for (Index k = 0; k < d; ++k)
      if (syg(k) - sg(k) > worst_gap) {
        worst_gap = syg(k) - sg(k);
        worst_k = k;
      }
    sv_interlace.record(syg(worst_k), sg(worst_k), dump_pair);

    const Mat gy = g.transpose() * y;
    const Mat a = 0.5 * (gy + gy.transpose());
    const double nuc = sg.sum();
    trace_gap.record(a.trace() * a.trace() - a.squaredNorm(), nuc * nuc - g.squaredNorm(), dump_pair);
  }

  LemmaOracleSummary out;
  for (auto* c : {&eig_sv_p1, &eig_sv_p2, &eig_sv_pairs, &sv_interlace, &trace_gap}) out.tallies.push_back(c->tally);
  return out;
}

}  // namespace bcsdp
