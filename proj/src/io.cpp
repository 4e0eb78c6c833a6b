#include "bcsdp/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

namespace bcsdp::io {

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string> tokens;
};

/// Next line with content once comments are cut off, split on whitespace.
bool next_line(std::istream& in, std::size_t& counter, Line& line, const std::string& comment_chars) {
  std::string raw;
  while (std::getline(in, raw)) {
    ++counter;
    const auto cut = raw.find_first_of(comment_chars);
    if (cut != std::string::npos) raw.resize(cut);
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    line.number = counter;
    line.tokens.clear();
    std::istringstream ss(raw);
    std::string tok;
    while (ss >> tok) line.tokens.push_back(tok);
    return true;
  }
  return false;
}

double parse_real(const std::string& tok, std::size_t line) {
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("invalid number '" + tok + "'", line);
  if (!std::isfinite(v)) throw ParseError("non-finite value '" + tok + "'", line);
  return v;
}

Index parse_index(const std::string& tok, std::size_t line) {
  long long v = 0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("invalid integer '" + tok + "'", line);
  return static_cast<Index>(v);
}

void expect_tokens(const Line& line, std::size_t count, const std::string& what) {
  if (line.tokens.size() != count)
    throw ParseError(what + ": expected " + std::to_string(count) + " fields, got " + std::to_string(line.tokens.size()),
                     line.number);
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

}  // namespace

InstanceFormat parse_format(const std::string& name) {
  if (name == "bsm") return InstanceFormat::kBsm;
  if (name == "mm" || name == "mtx" || name == "matrix-market") return InstanceFormat::kMatrixMarket;
  if (name == "edgelist" || name == "edges") return InstanceFormat::kEdgeList;
  throw std::invalid_argument("unknown instance format '" + name + "'");
}

const char* to_string(InstanceFormat f) {
  switch (f) {
    case InstanceFormat::kBsm: return "bsm";
    case InstanceFormat::kMatrixMarket: return "mm";
    case InstanceFormat::kEdgeList: return "edgelist";
  }
  return "unknown";
}

InstanceFormat format_from_extension(const std::string& path) {
  auto ends_with = [&](const std::string& suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".mtx")) return InstanceFormat::kMatrixMarket;
  if (ends_with(".edges") || ends_with(".el") || ends_with(".txt")) return InstanceFormat::kEdgeList;
  return InstanceFormat::kBsm;
}

Instance read_bsm(std::istream& in) {
  std::size_t counter = 0;
  Line line;
  if (!next_line(in, counter, line, "#")) throw ParseError("empty BSM input", counter);
  if (line.tokens.size() != 4 || line.tokens[0] != "BSM") throw ParseError("expected header 'BSM d n m'", line.number);
  const Index d = parse_index(line.tokens[1], line.number);
  const Index n = parse_index(line.tokens[2], line.number);
  const Index m = parse_index(line.tokens[3], line.number);
  if (d < 1 || n < 0 || m < 0) throw ParseError("invalid BSM dimensions", line.number);
  if (n > 0 && m > n * (n - 1) / 2) throw ParseError("more blocks than unordered pairs", line.number);

  Instance inst{BlockSparseSym<double>(d, n), 0.0};
  std::map<std::pair<Index, Index>, std::size_t> seen;
  for (Index k = 0; k < m; ++k) {
    if (!next_line(in, counter, line, "#"))
      throw ParseError("expected " + std::to_string(m) + " blocks, found " + std::to_string(k), counter);
    expect_tokens(line, static_cast<std::size_t>(2 + d * d), "BSM block");
    const Index i = parse_index(line.tokens[0], line.number);
    const Index j = parse_index(line.tokens[1], line.number);
    if (i < 1 || j < 1 || i > n || j > n) throw ParseError("block index out of range", line.number);
    if (i >= j) throw ParseError("BSM blocks need i < j", line.number);
    if (auto [it, fresh] = seen.emplace(std::make_pair(i, j), line.number); !fresh)
      throw ParseError("duplicate block (" + std::to_string(i) + ", " + std::to_string(j) + "), first on line " +
                           std::to_string(it->second),
                       line.number);
    Matrix<double> b(d, d);
    for (Index r = 0; r < d; ++r)
      for (Index c = 0; c < d; ++c) b(r, c) = parse_real(line.tokens[2 + r * d + c], line.number);
    inst.q.set_block(i - 1, j - 1, b);
  }
  if (next_line(in, counter, line, "#")) throw ParseError("trailing content after the declared blocks", line.number);
  return inst;
}

void write_bsm(std::ostream& out, const BlockSparseSym<double>& q) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  const Index d = q.block_dim();
  // canonical order so identical matrices give identical files
  std::vector<Index> order(q.num_stored());
  for (Index s = 0; s < q.num_stored(); ++s) order[s] = s;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return q.stored_pair(a) < q.stored_pair(b); });
  out << "BSM " << d << ' ' << q.num_block_rows() << ' ' << q.num_stored() << '\n';
  for (Index s : order) {
    const auto [i, j] = q.stored_pair(s);
    out << i + 1 << ' ' << j + 1;
    const auto& b = q.stored(s);
    for (Index r = 0; r < d; ++r)
      for (Index c = 0; c < d; ++c) out << ' ' << b(r, c);
    out << '\n';
  }
  out.precision(old_precision);
}

Instance read_matrix_market(std::istream& in) {
  std::size_t counter = 0;
  std::string banner;
  if (!std::getline(in, banner)) throw ParseError("empty Matrix Market input", 1);
  ++counter;
  std::istringstream bs(banner);
  std::string tag, object, layout, field, symmetry;
  bs >> tag >> object >> layout >> field >> symmetry;
  auto lower = [](std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
  };
  if (tag != "%%MatrixMarket" || lower(object) != "matrix" || lower(layout) != "coordinate")
    throw ParseError("expected '%%MatrixMarket matrix coordinate ...' banner", 1);
  field = lower(field);
  symmetry = lower(symmetry);
  const bool pattern = field == "pattern";
  if (!pattern && field != "real" && field != "integer") throw ParseError("unsupported field '" + field + "'", 1);
  if (symmetry != "general" && symmetry != "symmetric") throw ParseError("unsupported symmetry '" + symmetry + "'", 1);

  Line line;
  if (!next_line(in, counter, line, "%")) throw ParseError("missing size line", counter);
  expect_tokens(line, 3, "size line");
  const Index rows = parse_index(line.tokens[0], line.number);
  const Index cols = parse_index(line.tokens[1], line.number);
  const Index nnz = parse_index(line.tokens[2], line.number);
  if (rows != cols || rows < 0) throw ParseError("matrix must be square", line.number);
  if (nnz < 0) throw ParseError("negative entry count", line.number);

  std::vector<RawBlock<double>> raw;
  std::map<std::pair<Index, Index>, std::size_t> seen;
  for (Index k = 0; k < nnz; ++k) {
    if (!next_line(in, counter, line, "%"))
      throw ParseError("expected " + std::to_string(nnz) + " entries, found " + std::to_string(k), counter);
    expect_tokens(line, pattern ? 2 : 3, "entry");
    const Index i = parse_index(line.tokens[0], line.number);
    const Index j = parse_index(line.tokens[1], line.number);
    if (i < 1 || j < 1 || i > rows || j > rows) throw ParseError("entry index out of range", line.number);
    if (!seen.emplace(std::make_pair(i, j), line.number).second) throw ParseError("duplicate entry", line.number);
    const double v = pattern ? 1.0 : parse_real(line.tokens[2], line.number);
    raw.push_back({i - 1, j - 1, Matrix<double>::Constant(1, 1, v)});
    if (symmetry == "symmetric" && i != j) raw.push_back({j - 1, i - 1, Matrix<double>::Constant(1, 1, v)});
  }
  auto pre = preprocess<double>(1, rows, raw);
  return {std::move(pre.q), pre.offset};
}

EdgeListGraph read_edge_list(std::istream& in) {
  std::size_t counter = 0;
  Line line;
  EdgeListGraph g;
  Index max_vertex = 0;
  std::map<std::pair<Index, Index>, std::size_t> seen;
  while (next_line(in, counter, line, "#%")) {
    expect_tokens(line, 3, "edge 'i j w'");
    const Index i = parse_index(line.tokens[0], line.number);
    const Index j = parse_index(line.tokens[1], line.number);
    const double w = parse_real(line.tokens[2], line.number);
    if (i < 1 || j < 1) throw ParseError("vertex indices are 1-based", line.number);
    if (i == j) throw ParseError("self-loop", line.number);
    const auto key = std::minmax(i, j);
    if (auto [it, fresh] = seen.emplace(key, line.number); !fresh)
      throw ParseError("duplicate edge, first on line " + std::to_string(it->second), line.number);
    max_vertex = std::max({max_vertex, i, j});
    g.edges.push_back({key.first - 1, key.second - 1, w});
  }
  g.n = max_vertex;
  return g;
}

void write_edge_list(std::ostream& out, const EdgeListGraph& g) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& e : g.edges) out << e.i + 1 << ' ' << e.j + 1 << ' ' << e.w << '\n';
  out.precision(old_precision);
}

Instance read_instance(std::istream& in, InstanceFormat format) {
  switch (format) {
    case InstanceFormat::kBsm: return read_bsm(in);
    case InstanceFormat::kMatrixMarket: return read_matrix_market(in);
    case InstanceFormat::kEdgeList: return {maxcut_to_Q<double>(read_edge_list(in)), 0.0};
  }
  throw std::invalid_argument("unknown instance format");
}

Instance read_instance(const std::string& path, InstanceFormat format) {
  auto in = open_input(path);
  try {
    return read_instance(in, format);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

void write_bsm_file(const std::string& path, const BlockSparseSym<double>& q) {
  auto out = open_output(path);
  write_bsm(out, q);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

Factor read_yfactor(std::istream& in) {
  std::size_t counter = 0;
  Line line;
  if (!next_line(in, counter, line, "#")) throw ParseError("empty YFACTOR input", counter);
  if (line.tokens.size() != 4 || line.tokens[0] != "YFACTOR") throw ParseError("expected header 'YFACTOR r d n'", line.number);
  Factor f;
  f.r = parse_index(line.tokens[1], line.number);
  f.d = parse_index(line.tokens[2], line.number);
  f.n = parse_index(line.tokens[3], line.number);
  if (f.r < 1 || f.d < 1 || f.n < 0) throw ParseError("invalid YFACTOR dimensions", line.number);
  f.y.resize(f.r, f.d * f.n);
  for (Index i = 0; i < f.n; ++i)
    for (Index row = 0; row < f.r; ++row) {
      if (!next_line(in, counter, line, "#")) throw ParseError("truncated YFACTOR block " + std::to_string(i + 1), counter);
      expect_tokens(line, static_cast<std::size_t>(f.d), "YFACTOR row");
      for (Index c = 0; c < f.d; ++c) f.y(row, i * f.d + c) = parse_real(line.tokens[c], line.number);
    }
  if (next_line(in, counter, line, "#")) throw ParseError("trailing content after the declared blocks", line.number);
  return f;
}

Factor read_yfactor_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return read_yfactor(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

void write_yfactor(std::ostream& out, const Matrix<double>& y, Index d) {
  if (d < 1 || y.cols() % d != 0) throw std::invalid_argument("write_yfactor: columns not a multiple of d");
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  const Index n = y.cols() / d;
  out << "YFACTOR " << y.rows() << ' ' << d << ' ' << n << '\n';
  for (Index i = 0; i < n; ++i)
    for (Index row = 0; row < y.rows(); ++row) {
      for (Index c = 0; c < d; ++c) out << (c ? " " : "") << y(row, i * d + c);
      out << '\n';
    }
  out.precision(old_precision);
}

void write_yfactor_file(const std::string& path, const Matrix<double>& y, Index d) {
  auto out = open_output(path);
  write_yfactor(out, y, d);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

void write_text_file(const std::string& path, const std::string& contents) {
  auto out = open_output(path);
  out << contents;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace bcsdp::io
