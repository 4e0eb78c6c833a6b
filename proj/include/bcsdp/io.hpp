#pragma once

#include "bcsdp/block_sparse_sym.hpp"
#include "bcsdp/problems.hpp"

#include <iosfwd>
#include <string>

namespace bcsdp::io {

enum class InstanceFormat { kBsm, kMatrixMarket, kEdgeList };

/// "bsm", "mm" / "matrix-market", "edgelist" / "edges"
InstanceFormat parse_format(const std::string& name);
const char* to_string(InstanceFormat f);
/// Guess from the file extension: .mtx -> Matrix Market, .edges/.txt/.el -> edge list, else BSM.
InstanceFormat format_from_extension(const std::string& path);

/// A preprocessed cost read from disk.
struct Instance {
  BlockSparseSym<double> q;
  /// constant dropped when diagonal blocks were removed
  double offset = 0.0;
};

/// Header `BSM d n m`, then m lines `i j b11 ... bdd` (1-based, i < j, row-major block).
Instance read_bsm(std::istream& in);
void write_bsm(std::ostream& out, const BlockSparseSym<double>& q);

/// Matrix Market coordinate real/integer/pattern, general or symmetric; d = 1.
Instance read_matrix_market(std::istream& in);

/// Lines `i j w` (1-based). '#' and '%' start comments.
EdgeListGraph read_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const EdgeListGraph& g);

Instance read_instance(std::istream& in, InstanceFormat format);
/// Throws std::runtime_error naming the path when the file cannot be opened.
Instance read_instance(const std::string& path, InstanceFormat format);
void write_bsm_file(const std::string& path, const BlockSparseSym<double>& q);

/// Header `YFACTOR r d n`, then n sections of r lines with d values each.
struct Factor {
  Index r = 0;
  Index d = 0;
  Index n = 0;
  Matrix<double> y;  // r x dn
};

Factor read_yfactor(std::istream& in);
Factor read_yfactor_file(const std::string& path);
void write_yfactor(std::ostream& out, const Matrix<double>& y, Index d);
void write_yfactor_file(const std::string& path, const Matrix<double>& y, Index d);

/// Writes `contents` to `path` as a whole file.
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace bcsdp::io
