#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace dyna {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Read-only window on one stored row. Indices are 0-based and strictly increasing.
struct SparseRow {
  std::span<const std::uint32_t> indices;
  std::span<const double> values;

  std::size_t nnz() const noexcept { return indices.size(); }
  double dot(const Vector& x) const noexcept;
  double squared_norm() const noexcept;
  // x += scale * row
  void axpy(double scale, Vector& x) const noexcept;
};

enum class LabelKind {
  Binary,  // every label is -1 or +1
  Real,    // arbitrary finite targets (quadratic loss)
};

using SparseEntries = std::vector<std::pair<std::uint32_t, double>>;

// Immutable sparse labeled sample store.
class Dataset {
 public:
  Dataset() = default;

  // Validates the invariants (sorted unique indices, index < dim, labels) and
  // throws dyna::Error on violation.
  static Dataset from_rows(const std::vector<SparseEntries>& rows, std::vector<double> labels,
                           std::size_t dim, LabelKind kind = LabelKind::Binary);
  static Dataset from_dense(const Matrix& features, const Vector& labels,
                            LabelKind kind = LabelKind::Binary);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return indices_.size(); }
  LabelKind label_kind() const noexcept { return kind_; }

  SparseRow row(std::size_t i) const noexcept {
    const auto begin = offsets_[i];
    const auto count = offsets_[i + 1] - begin;
    return {std::span(indices_).subspan(begin, count), std::span(values_).subspan(begin, count)};
  }
  double label(std::size_t i) const noexcept { return labels_[i]; }
  std::span<const double> labels() const noexcept { return labels_; }

  // Same rows with a wider feature space (train/test files can disagree on max index).
  Dataset with_dim(std::size_t dim) const;
  // Rows in the given order; indices may repeat.
  Dataset select(std::span<const std::size_t> order) const;
  Matrix to_dense() const;

  // FNV-1a over dim, labels and every stored entry; keys on-disk caches.
  std::uint64_t content_hash() const noexcept;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
  std::vector<double> labels_;
  std::size_t dim_ = 0;
  LabelKind kind_ = LabelKind::Binary;
};

// The first n rows of a dataset. Holds a pointer: the dataset must outlive the view.
class PrefixView {
 public:
  PrefixView(const Dataset& data, std::size_t n);

  const Dataset& dataset() const noexcept { return *data_; }
  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return data_->dim(); }
  SparseRow row(std::size_t i) const noexcept { return data_->row(i); }
  double label(std::size_t i) const noexcept { return data_->label(i); }

 private:
  const Dataset* data_;
  std::size_t n_;
};

PrefixView prefix(const Dataset& data, std::size_t n);

// svmlight / libsvm text: "<label> <idx>:<val> ...", 1-based indices on disk.
// Labels 0/1 are mapped to -1/+1. '#' starts a comment.
Dataset parse_svmlight(std::istream& in);
Dataset parse_svmlight(std::string_view text);
// Decompresses transparently when the path ends in ".gz".
Dataset load_svmlight(const std::filesystem::path& path);
void write_svmlight(std::ostream& out, const Dataset& data);
std::string to_svmlight(const Dataset& data);

// Seeded uniform shuffle, then the first round((1 - f) N) rows become the
// training set. Both outputs keep the shuffled order.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed);

// Gaussian rows; P(y = +1) = sigmoid(margin * <w, z>) for a planted w drawn
// from the same seed. margin = +inf gives noiseless labels sign(<w, z>).
Dataset synthesize_logistic(std::size_t n, std::size_t d, std::uint64_t seed, double margin);
Vector synthetic_planted_weights(std::size_t d, std::uint64_t seed);

// Sparse binary rows with Zipf-distributed feature frequencies, labeled by a
// keyword rule: positive when the row contains one of a set of trigger
// features. Used as a stand-in when a real sparse benchmark file is absent.
struct SparseBinarySpec {
  std::size_t n = 49749;
  std::size_t d = 300;
  double mean_nnz = 11.6;
  double positive_rate = 0.03;  // upper bound on the clean positive fraction
  double zipf_exponent = 1.0;
  double flip_rate = 0.01;      // probability that a label is flipped
  std::uint64_t seed = 8;
};
Dataset synthesize_sparse_binary(const SparseBinarySpec& spec);

}  // namespace dyna
