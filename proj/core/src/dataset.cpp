#include "dyna/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <zlib.h>

#include "dyna/error.hpp"

namespace dyna {

ParseError::ParseError(std::size_t line, const std::string& message)
    : Error(fmt::format("line {}: {}", line, message)), line_(line) {}

HandoverViolation::HandoverViolation(int stage, double lambda, double eta, double limit)
    : Error(fmt::format("hand-over violated at stage {}: decrement {:.6g} exceeds {:.6g} (eta = {:.6g})",
                        stage, lambda, limit, eta)),
      stage_(stage),
      lambda_(lambda),
      eta_(eta) {}

double SparseRow::dot(const Vector& x) const noexcept {
  double acc = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) acc += values[k] * x[indices[k]];
  return acc;
}

double SparseRow::squared_norm() const noexcept {
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return acc;
}

void SparseRow::axpy(double scale, Vector& x) const noexcept {
  for (std::size_t k = 0; k < indices.size(); ++k) x[indices[k]] += scale * values[k];
}

namespace {

void check_label(double y, LabelKind kind, std::size_t row) {
  if (!std::isfinite(y)) throw Error(fmt::format("row {}: non-finite label", row));
  if (kind == LabelKind::Binary && y != 1.0 && y != -1.0)
    throw Error(fmt::format("row {}: binary label must be -1 or +1, got {}", row, y));
}

}  // namespace

Dataset Dataset::from_rows(const std::vector<SparseEntries>& rows, std::vector<double> labels,
                           std::size_t dim, LabelKind kind) {
  if (rows.size() != labels.size())
    throw Error(fmt::format("{} rows but {} labels", rows.size(), labels.size()));
  Dataset out;
  out.dim_ = dim;
  out.kind_ = kind;
  std::size_t total = 0;
  for (const auto& r : rows) total += r.size();
  out.offsets_.reserve(rows.size() + 1);
  out.indices_.reserve(total);
  out.values_.reserve(total);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check_label(labels[i], kind, i);
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      const auto [idx, val] = rows[i][k];
      if (idx >= dim) throw Error(fmt::format("row {}: feature index {} >= dim {}", i, idx, dim));
      if (k > 0 && idx <= rows[i][k - 1].first)
        throw Error(fmt::format("row {}: feature indices not strictly increasing", i));
      if (!std::isfinite(val)) throw Error(fmt::format("row {}: non-finite feature value", i));
      out.indices_.push_back(idx);
      out.values_.push_back(val);
    }
    out.offsets_.push_back(out.indices_.size());
  }
  out.labels_ = std::move(labels);
  return out;
}

Dataset Dataset::from_dense(const Matrix& features, const Vector& labels, LabelKind kind) {
  std::vector<SparseEntries> rows(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j)
      if (features(i, j) != 0.0) rows[i].emplace_back(static_cast<std::uint32_t>(j), features(i, j));
  }
  return from_rows(rows, std::vector<double>(labels.data(), labels.data() + labels.size()),
                   static_cast<std::size_t>(features.cols()), kind);
}

Dataset Dataset::with_dim(std::size_t dim) const {
  if (dim < dim_) throw Error(fmt::format("cannot shrink dim from {} to {}", dim_, dim));
  Dataset out = *this;
  out.dim_ = dim;
  return out;
}

Dataset Dataset::select(std::span<const std::size_t> order) const {
  Dataset out;
  out.dim_ = dim_;
  out.kind_ = kind_;
  out.offsets_.reserve(order.size() + 1);
  out.labels_.reserve(order.size());
  for (std::size_t i : order) {
    if (i >= size()) throw Error(fmt::format("row {} out of range", i));
    const SparseRow r = row(i);
    out.indices_.insert(out.indices_.end(), r.indices.begin(), r.indices.end());
    out.values_.insert(out.values_.end(), r.values.begin(), r.values.end());
    out.offsets_.push_back(out.indices_.size());
    out.labels_.push_back(labels_[i]);
  }
  return out;
}

Matrix Dataset::to_dense() const {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < size(); ++i) {
    const SparseRow r = row(i);
    for (std::size_t k = 0; k < r.nnz(); ++k) out(i, r.indices[k]) = r.values[k];
  }
  return out;
}

std::uint64_t Dataset::content_hash() const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t header[2] = {dim_, size()};
  mix(header, sizeof(header));
  mix(labels_.data(), labels_.size() * sizeof(double));
  mix(offsets_.data(), offsets_.size() * sizeof(std::size_t));
  mix(indices_.data(), indices_.size() * sizeof(std::uint32_t));
  mix(values_.data(), values_.size() * sizeof(double));
  return h;
}

PrefixView::PrefixView(const Dataset& data, std::size_t n) : data_(&data), n_(n) {
  if (n < 1 || n > data.size())
    throw Error(fmt::format("prefix length {} outside [1, {}]", n, data.size()));
}

PrefixView prefix(const Dataset& data, std::size_t n) { return PrefixView(data, n); }

// ---------------------------------------------------------------------------
// svmlight

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view token, std::size_t line, const char* what) {
  double value = 0.0;
  // from_chars rejects a leading '+'.
  std::string_view digits = token;
  if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty())
    throw ParseError(line, fmt::format("cannot parse {} '{}'", what, token));
  if (!std::isfinite(value)) throw ParseError(line, fmt::format("non-finite {} '{}'", what, token));
  return value;
}

struct ParsedLine {
  double label;
  SparseEntries entries;
};

ParsedLine parse_line(std::string_view text, std::size_t line) {
  ParsedLine out{};
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string_view {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    const std::size_t start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '\t') ++pos;
    return text.substr(start, pos - start);
  };

  const double raw = parse_double(next_token(), line, "label");
  if (raw == 1.0) {
    out.label = 1.0;
  } else if (raw == -1.0 || raw == 0.0) {
    out.label = -1.0;
  } else {
    throw ParseError(line, fmt::format("label {} is not one of -1, 0, +1", raw));
  }

  for (std::string_view tok = next_token(); !tok.empty(); tok = next_token()) {
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos || colon == 0)
      throw ParseError(line, fmt::format("expected <index>:<value>, got '{}'", tok));
    std::uint64_t idx = 0;
    const auto idx_text = tok.substr(0, colon);
    const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
    if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || idx == 0 ||
        idx > std::numeric_limits<std::uint32_t>::max())
      throw ParseError(line, fmt::format("bad feature index '{}'", idx_text));
    const double val = parse_double(tok.substr(colon + 1), line, "feature value");
    const auto zero_based = static_cast<std::uint32_t>(idx - 1);
    if (!out.entries.empty() && zero_based <= out.entries.back().first)
      throw ParseError(line, "feature indices must be strictly increasing");
    out.entries.emplace_back(zero_based, val);
  }
  return out;
}

Dataset parse_lines(std::istream& in) {
  std::vector<SparseEntries> rows;
  std::vector<double> labels;
  std::size_t dim = 0;
  std::string buffer;
  std::size_t line = 0;
  while (std::getline(in, buffer)) {
    ++line;
    std::string_view text = buffer;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    ParsedLine parsed = parse_line(text, line);
    if (!parsed.entries.empty())
      dim = std::max<std::size_t>(dim, parsed.entries.back().first + 1);
    rows.push_back(std::move(parsed.entries));
    labels.push_back(parsed.label);
  }
  if (rows.empty()) throw ParseError(line, "no samples in input");
  return Dataset::from_rows(rows, std::move(labels), dim, LabelKind::Binary);
}

std::string read_gzip(const std::filesystem::path& path) {
  gzFile file = gzopen(path.c_str(), "rb");
  if (file == nullptr) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string out;
  char chunk[1 << 16];
  int got = 0;
  while ((got = gzread(file, chunk, sizeof(chunk))) > 0) out.append(chunk, static_cast<std::size_t>(got));
  const bool failed = got < 0;
  gzclose(file);
  if (failed) throw IoError(fmt::format("corrupt gzip stream in '{}'", path.string()));
  return out;
}

}  // namespace

Dataset parse_svmlight(std::istream& in) { return parse_lines(in); }

Dataset parse_svmlight(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_lines(in);
}

Dataset load_svmlight(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(fmt::format("no such file '{}'", path.string()));
  if (path.extension() == ".gz") return parse_svmlight(read_gzip(path));
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  return parse_lines(in);
}

void write_svmlight(std::ostream& out, const Dataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double y = data.label(i);
    out << (y > 0 ? "+1" : "-1");
    const SparseRow r = data.row(i);
    for (std::size_t k = 0; k < r.nnz(); ++k)
      out << ' ' << (r.indices[k] + 1) << ':' << fmt::format("{:.17g}", r.values[k]);
    out << '\n';
  }
}

std::string to_svmlight(const Dataset& data) {
  std::ostringstream out;
  write_svmlight(out, data);
  return out.str();
}

// ---------------------------------------------------------------------------
// splits and generators

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(fmt::format("test fraction {} outside (0, 1)", test_fraction));
  const std::size_t n = data.size();
  const auto n_train = static_cast<std::size_t>(std::llround((1.0 - test_fraction) * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n)
    throw Error(fmt::format("split of {} rows at fraction {} leaves an empty side", n, test_fraction));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const std::span<const std::size_t> all(order);
  return {data.select(all.first(n_train)), data.select(all.subspan(n_train))};
}

Vector synthetic_planted_weights(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal;
  Vector w(static_cast<Eigen::Index>(d));
  for (auto& v : w) v = normal(rng);
  return w;
}

Dataset synthesize_logistic(std::size_t n, std::size_t d, std::uint64_t seed, double margin) {
  if (n < 2 || d < 1) throw Error("synthesize_logistic needs n >= 2 and d >= 1");
  const Vector w = synthetic_planted_weights(d, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  std::vector<SparseEntries> rows(n);
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    double score = 0.0;
    rows[i].reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = normal(rng);
      rows[i].emplace_back(static_cast<std::uint32_t>(j), v);
      score += v * w[static_cast<Eigen::Index>(j)];
    }
    const double u = uniform(rng);
    if (std::isinf(margin)) {
      labels[i] = score >= 0.0 ? 1.0 : -1.0;
    } else {
      const double p = 1.0 / (1.0 + std::exp(-margin * score));
      labels[i] = u < p ? 1.0 : -1.0;
    }
  }
  return Dataset::from_rows(rows, std::move(labels), d);
}

Dataset synthesize_sparse_binary(const SparseBinarySpec& spec) {
  if (spec.n < 2 || spec.d < 1) throw Error("synthesize_sparse_binary needs n >= 2 and d >= 1");
  if (!(spec.positive_rate > 0.0 && spec.positive_rate < 1.0))
    throw Error("positive_rate must lie in (0, 1)");
  std::mt19937_64 rng(spec.seed);

  std::vector<double> freq(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) freq[j] = 1.0 / std::pow(static_cast<double>(j + 1), spec.zipf_exponent);
  std::discrete_distribution<std::size_t> feature(freq.begin(), freq.end());
  std::poisson_distribution<int> count(spec.mean_nnz);
  std::normal_distribution<double> normal;

  std::vector<SparseEntries> rows(spec.n);
  for (auto& row : rows) {
    std::vector<std::uint32_t> idx;
    const auto k = std::min<std::size_t>(spec.d, static_cast<std::size_t>(std::max(1, count(rng))));
    // Redraw repeats so that the row really has k distinct features.
    while (idx.size() < k) {
      const auto j = static_cast<std::uint32_t>(feature(rng));
      if (std::find(idx.begin(), idx.end(), j) == idx.end()) idx.push_back(j);
    }
    std::sort(idx.begin(), idx.end());
    for (auto j : idx) row.emplace_back(j, 1.0);
  }

  // Keyword rule: a row is positive when it contains a trigger feature. Triggers
  // are taken in random order while the covered fraction stays within the target rate.
  std::vector<std::vector<std::size_t>> rows_with(spec.d);
  for (std::size_t i = 0; i < spec.n; ++i)
    for (const auto& [j, v] : rows[i]) rows_with[j].push_back(i);
  std::vector<std::size_t> order(spec.d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> covered(spec.n, 0);
  std::size_t positives = 0;
  const auto target = static_cast<std::size_t>(spec.positive_rate * static_cast<double>(spec.n));
  for (std::size_t j : order) {
    std::size_t added = 0;
    for (std::size_t i : rows_with[j]) added += covered[i] ? 0 : 1;
    if (added == 0 || positives + added > target) continue;
    for (std::size_t i : rows_with[j]) covered[i] = 1;
    positives += added;
  }

  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    labels[i] = covered[i] ? 1.0 : -1.0;
    if (uniform(rng) < spec.flip_rate) labels[i] = -labels[i];
  }
  return Dataset::from_rows(rows, std::move(labels), spec.d);
}

}  // namespace dyna
