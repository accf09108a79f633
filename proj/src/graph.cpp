#include "hgs/graph.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "hgs/error.hpp"
#include "hgs/rng.hpp"

namespace hgs {

Graph::Graph(std::vector<std::size_t> row_ptr, std::vector<NodeId> col_idx, Matrix features,
             std::vector<std::int32_t> labels, std::size_t num_classes)
    : row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      features_(std::move(features)),
      labels_(std::move(labels)),
      num_classes_(num_classes) {
  if (row_ptr_.empty() || row_ptr_.front() != 0) {
    throw ParameterError("row_ptr must start at 0");
  }
  if (row_ptr_.back() != col_idx_.size()) {
    throw ParameterError("row_ptr must end at num_edges");
  }
  if (!std::is_sorted(row_ptr_.begin(), row_ptr_.end())) {
    throw ParameterError("row_ptr must be non-decreasing");
  }
  const std::size_t n = num_nodes();
  for (NodeId u : col_idx_) {
    if (u >= n) throw ParameterError("col_idx entry " + std::to_string(u) + " out of range");
  }
  if (static_cast<std::size_t>(features_.rows()) != n) {
    throw ParameterError("feature rows must equal num_nodes");
  }
  if (labels_.size() != n) throw ParameterError("labels length must equal num_nodes");
  for (auto y : labels_) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes_) {
      throw ParameterError("label " + std::to_string(y) + " outside [0, num_classes)");
    }
  }
}

std::span<const NodeId> Graph::neighbors(NodeId v) const {
  if (v >= num_nodes()) {
    throw RangeError("node " + std::to_string(v) + " out of range (num_nodes " +
                     std::to_string(num_nodes()) + ")");
  }
  return std::span<const NodeId>(col_idx_).subspan(row_ptr_[v], row_ptr_[v + 1] - row_ptr_[v]);
}

std::int32_t Graph::label(NodeId v) const {
  if (v >= num_nodes()) throw RangeError("node " + std::to_string(v) + " out of range");
  return labels_[v];
}

bool operator==(const Graph& a, const Graph& b) {
  return a.row_ptr_ == b.row_ptr_ && a.col_idx_ == b.col_idx_ && a.labels_ == b.labels_ &&
         a.num_classes_ == b.num_classes_ && a.features_.rows() == b.features_.rows() &&
         a.features_.cols() == b.features_.cols() && a.features_ == b.features_;
}

void build_csr(std::size_t num_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
               std::vector<std::size_t>& row_ptr, std::vector<NodeId>& col_idx) {
  row_ptr.assign(num_nodes + 1, 0);
  for (auto [s, d] : edges) {
    if (s >= num_nodes || d >= num_nodes) throw RangeError("edge endpoint out of range");
    if (s != d) ++row_ptr[s + 1];
  }
  for (std::size_t v = 0; v < num_nodes; ++v) row_ptr[v + 1] += row_ptr[v];
  col_idx.assign(row_ptr[num_nodes], 0);
  std::vector<std::size_t> cursor(row_ptr.begin(), row_ptr.end() - 1);
  for (auto [s, d] : edges) {
    if (s != d) col_idx[cursor[s]++] = d;
  }
  // Sort and dedup each row, compacting in place.
  std::size_t out = 0;
  std::size_t begin = 0;
  for (std::size_t v = 0; v < num_nodes; ++v) {
    const std::size_t end = row_ptr[v + 1];
    auto first = col_idx.begin() + static_cast<std::ptrdiff_t>(begin);
    auto last = col_idx.begin() + static_cast<std::ptrdiff_t>(end);
    std::sort(first, last);
    last = std::unique(first, last);
    const std::size_t row_start = out;
    for (auto it = first; it != last; ++it) col_idx[out++] = *it;
    row_ptr[v] = row_start;
    begin = end;
  }
  row_ptr[num_nodes] = out;
  col_idx.resize(out);
}

Matrix random_features(std::size_t num_nodes, std::size_t num_features, std::uint64_t seed) {
  Matrix x(static_cast<Eigen::Index>(num_nodes), static_cast<Eigen::Index>(num_features));
  CounterRng rng(seed, {0xfea7});
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  }
  return x;
}

std::vector<std::int32_t> random_labels(std::size_t num_nodes, std::size_t num_classes,
                                        std::uint64_t seed) {
  if (num_classes == 0) throw ParameterError("num_classes must be >= 1");
  std::vector<std::int32_t> y(num_nodes);
  CounterRng rng(seed, {0x1abe1});
  for (auto& v : y) v = static_cast<std::int32_t>(rng.below(num_classes));
  return y;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

// Parses one signed integer token at the front of s and advances s.
bool next_int(std::string_view& s, std::int64_t& value) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{}) return false;
  const auto consumed = static_cast<std::size_t>(ptr - s.data());
  if (consumed < s.size() && !std::isspace(static_cast<unsigned char>(s[consumed]))) return false;
  s.remove_prefix(consumed);
  return true;
}

}  // namespace

Graph parse_edge_list(std::string_view text, const EdgeListOptions& opts) {
  std::vector<std::pair<std::int64_t, std::int64_t>> raw;
  std::size_t line_no = 0;
  std::int64_t max_id = -1;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::int64_t s = 0;
    std::int64_t d = 0;
    std::string_view rest = line;
    if (!next_int(rest, s) || !next_int(rest, d) || !trim(rest).empty()) {
      throw ParseError(line_no, "expected \"src dst\", got \"" + std::string(line) + "\"");
    }
    if (s < 0 || d < 0) {
      throw RangeError("line " + std::to_string(line_no) + ": negative node id");
    }
    if (opts.num_nodes && (static_cast<std::uint64_t>(s) >= *opts.num_nodes ||
                           static_cast<std::uint64_t>(d) >= *opts.num_nodes)) {
      throw RangeError("line " + std::to_string(line_no) + ": node id outside [0, " +
                       std::to_string(*opts.num_nodes) + ")");
    }
    if (std::max(s, d) >= static_cast<std::int64_t>(std::numeric_limits<NodeId>::max())) {
      throw RangeError("line " + std::to_string(line_no) + ": node id too large");
    }
    max_id = std::max({max_id, s, d});
    raw.emplace_back(s, d);
  }
  const std::size_t n = opts.num_nodes ? *opts.num_nodes : static_cast<std::size_t>(max_id + 1);

  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(raw.size());
  for (auto [s, d] : raw) edges.emplace_back(static_cast<NodeId>(s), static_cast<NodeId>(d));
  std::vector<std::size_t> row_ptr;
  std::vector<NodeId> col_idx;
  build_csr(n, edges, row_ptr, col_idx);

  Matrix features = opts.feature_file
                        ? load_feature_file(*opts.feature_file, n, opts.num_features)
                        : random_features(n, opts.num_features, opts.seed);
  return Graph(std::move(row_ptr), std::move(col_idx), std::move(features),
               random_labels(n, opts.num_classes, opts.seed), opts.num_classes);
}

Graph load_edge_list(const std::filesystem::path& path, const EdgeListOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open edge list " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_edge_list(buf.str(), opts);
}

Matrix load_feature_file(const std::filesystem::path& path, std::size_t num_nodes,
                         std::size_t num_features) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + path.string());
  Matrix x(static_cast<Eigen::Index>(num_nodes), static_cast<Eigen::Index>(num_features));
  const auto bytes = static_cast<std::streamsize>(num_nodes * num_features * sizeof(float));
  in.read(reinterpret_cast<char*>(x.data()), bytes);
  if (in.gcount() != bytes || in.peek() != std::char_traits<char>::eof()) {
    throw IoError("feature file " + path.string() + " must hold exactly " +
                  std::to_string(num_nodes) + "x" + std::to_string(num_features) + " float32");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      auto bits = std::bit_cast<std::uint32_t>(x.data()[i]);
      bits = __builtin_bswap32(bits);
      x.data()[i] = std::bit_cast<float>(bits);
    }
  }
  return x;
}

void save_feature_file(const std::filesystem::path& path, const Matrix& features) {
  static_assert(std::endian::native == std::endian::little, "writer assumes little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write feature file " + path.string());
  out.write(reinterpret_cast<const char*>(features.data()),
            static_cast<std::streamsize>(features.size() * sizeof(float)));
}

std::string_view to_string(SyntheticKind kind) {
  return kind == SyntheticKind::uniform ? "uniform" : "power_law";
}

SyntheticKind parse_synthetic_kind(std::string_view s) {
  if (s == "uniform") return SyntheticKind::uniform;
  if (s == "power_law") return SyntheticKind::power_law;
  throw ParameterError("unknown synthetic kind \"" + std::string(s) + "\"");
}

namespace {

// Floyd's algorithm: `count` distinct ids from [0, n) excluding `self`.
void sample_targets(std::size_t n, NodeId self, std::size_t count, CounterRng& rng,
                    std::vector<NodeId>& out) {
  out.clear();
  const std::size_t pool = n - 1;
  if (count >= pool) {
    for (std::size_t t = 0; t < n; ++t) {
      if (t != self) out.push_back(static_cast<NodeId>(t));
    }
    return;
  }
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(count * 2);
  for (std::size_t j = pool - count; j < pool; ++j) {
    const std::size_t t = rng.below(j + 1);
    chosen.insert(chosen.contains(t) ? j : t);
  }
  for (auto t : chosen) out.push_back(static_cast<NodeId>(t >= self ? t + 1 : t));
  std::sort(out.begin(), out.end());
}

std::vector<std::size_t> power_law_degrees(std::size_t n, std::size_t avg_degree,
                                           CounterRng& rng) {
  std::vector<std::size_t> deg(n, 0);
  if (n < 2 || avg_degree == 0) return deg;
  const std::size_t kmax = n - 1;
  std::vector<double> cdf(kmax);
  double acc = 0.0;
  for (std::size_t k = 1; k <= kmax; ++k) {
    acc += std::pow(static_cast<double>(k), -kPowerLawExponent);
    cdf[k - 1] = acc;
  }
  std::vector<double> raw(n);
  double sum = 0.0;
  for (auto& r : raw) {
    const double u = rng.uniform() * acc;
    r = static_cast<double>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin() + 1);
    r = std::min(r, static_cast<double>(kmax));
    sum += r;
  }
  const double scale = static_cast<double>(avg_degree) * static_cast<double>(n) / sum;
  for (std::size_t v = 0; v < n; ++v) {
    deg[v] = std::min(kmax, static_cast<std::size_t>(std::llround(raw[v] * scale)));
  }
  return deg;
}

}  // namespace

Graph generate_synthetic(const SyntheticSpec& spec) {
  const std::size_t n = spec.num_nodes;
  if (n < 1) throw ParameterError("num_nodes must be >= 1");
  if (spec.avg_degree >= n) {
    throw ParameterError("avg_degree (" + std::to_string(spec.avg_degree) +
                         ") must be < num_nodes (" + std::to_string(n) + ")");
  }
  if (n >= std::numeric_limits<NodeId>::max()) throw ParameterError("num_nodes too large");

  CounterRng deg_rng(spec.seed, {0xde9});
  std::vector<std::size_t> deg = spec.kind == SyntheticKind::uniform
                                     ? std::vector<std::size_t>(n, spec.avg_degree)
                                     : power_law_degrees(n, spec.avg_degree, deg_rng);

  std::vector<std::size_t> row_ptr(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) row_ptr[v + 1] = row_ptr[v] + deg[v];
  std::vector<NodeId> col_idx(row_ptr[n]);
  std::vector<NodeId> row;
  for (std::size_t v = 0; v < n; ++v) {
    CounterRng rng(spec.seed, {0xed9e, v});
    sample_targets(n, static_cast<NodeId>(v), deg[v], rng, row);
    std::copy(row.begin(), row.end(), col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[v]));
  }
  return Graph(std::move(row_ptr), std::move(col_idx),
               random_features(n, spec.num_features, spec.seed),
               random_labels(n, spec.num_classes, spec.seed), spec.num_classes);
}

}  // namespace hgs
