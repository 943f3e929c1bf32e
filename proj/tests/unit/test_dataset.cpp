#include <cmath>
#include <fstream>
#include <set>

#include <zlib.h>

#include "doctest.h"
#include "dyna/dataset.hpp"
#include "dyna/error.hpp"
#include "support.hpp"

using namespace dyna;

TEST_SUITE("dataset") {

TEST_CASE("svmlight basics") {
  const Dataset d = parse_svmlight("+1 1:0.5 3:2\n-1 2:1\n0 1:1 # trailing comment\n\n# whole-line comment\n1\n");
  REQUIRE(d.size() == 4);
  CHECK(d.dim() == 3);
  CHECK(d.nnz() == 4);
  CHECK(d.label(0) == 1.0);
  CHECK(d.label(1) == -1.0);
  CHECK(d.label(2) == -1.0);  // 0 maps to -1
  CHECK(d.label(3) == 1.0);
  CHECK(d.row(3).nnz() == 0);

  const SparseRow r = d.row(0);
  CHECK(r.indices[0] == 0);
  CHECK(r.indices[1] == 2);
  CHECK(r.values[1] == 2.0);
}

TEST_CASE("svmlight rejects malformed lines with the line number") {
  auto line_of = [](std::string_view text) -> std::size_t {
    try {
      parse_svmlight(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("1 1:1\n2 1:1\n") == 2);           // label outside {-1, 0, 1}
  CHECK(line_of("1 0:1\n") == 1);                  // indices are 1-based
  CHECK(line_of("1 1:1\n-1 3:1 2:1\n") == 2);      // decreasing
  CHECK(line_of("1 2:1 2:4\n") == 1);              // duplicate
  CHECK(line_of("1 1:abc\n") == 1);
  CHECK(line_of("1 1:inf\n") == 1);
  CHECK(line_of("1 :3\n") == 1);
  CHECK(line_of("one 1:3\n") == 1);
  CHECK(line_of("# nothing\n\n") > 0);             // no samples at all
}

TEST_CASE("svmlight round trip preserves content") {
  const Dataset d = synthesize_sparse_binary({.n = 300, .d = 40, .seed = 2});
  const Dataset back = parse_svmlight(to_svmlight(d));
  // Trailing all-zero columns are invisible in the text format.
  CHECK(back.with_dim(d.dim()) == d);
}

TEST_CASE("gzip files decompress transparently") {
  const auto dir = testing::scratch_dir("gz");
  const std::string text = "1 1:1 4:0.25\n-1 2:3\n";
  const auto path = (dir / "tiny.svm.gz").string();
  gzFile out = gzopen(path.c_str(), "wb");
  REQUIRE(out != nullptr);
  gzwrite(out, text.data(), static_cast<unsigned>(text.size()));
  gzclose(out);
  CHECK(load_svmlight(path) == parse_svmlight(text));
  CHECK_THROWS_AS(load_svmlight(dir / "absent.svm"), IoError);
}

TEST_CASE("from_rows validates invariants") {
  CHECK_THROWS_AS(Dataset::from_rows({{{1, 1.0}, {1, 2.0}}}, {1.0}, 3), Error);
  CHECK_THROWS_AS(Dataset::from_rows({{{5, 1.0}}}, {1.0}, 3), Error);
  CHECK_THROWS_AS(Dataset::from_rows({{{0, 1.0}}}, {0.5}, 3), Error);
  CHECK_THROWS_AS(Dataset::from_rows({{{0, 1.0}}}, {1.0, -1.0}, 3), Error);
  CHECK_NOTHROW(Dataset::from_rows({{{0, 1.0}}}, {0.5}, 3, LabelKind::Real));
}

TEST_CASE("prefix views expose the leading rows") {
  const Dataset d = synthesize_logistic(50, 4, 1, 1.0);
  const PrefixView v = prefix(d, 10);
  CHECK(v.size() == 10);
  CHECK(v.row(9).dot(Vector::Ones(4)) == d.row(9).dot(Vector::Ones(4)));
  CHECK_THROWS_AS(prefix(d, 0), Error);
  CHECK_THROWS_AS(prefix(d, 51), Error);
}

TEST_CASE("train/test split is a seeded partition") {
  const Dataset d = synthesize_logistic(200, 3, 5, 1.0);
  const auto [train, test] = train_test_split(d, 0.1, 7);
  CHECK(train.size() == 180);
  CHECK(test.size() == 20);
  const auto again = train_test_split(d, 0.1, 7);
  CHECK(again.first == train);
  CHECK_FALSE(train_test_split(d, 0.1, 8).first == train);

  // Every original row appears exactly once across the two sides.
  std::multiset<std::vector<double>> original, split;
  auto key = [](const Dataset& s, std::size_t i) {
    std::vector<double> k{s.label(i)};
    for (double v : s.row(i).values) k.push_back(v);
    return k;
  };
  for (std::size_t i = 0; i < d.size(); ++i) original.insert(key(d, i));
  for (std::size_t i = 0; i < train.size(); ++i) split.insert(key(train, i));
  for (std::size_t i = 0; i < test.size(); ++i) split.insert(key(test, i));
  CHECK(original == split);
}

TEST_CASE("content hash separates datasets") {
  const Dataset a = synthesize_logistic(40, 3, 1, 1.0);
  const Dataset b = synthesize_logistic(40, 3, 2, 1.0);
  CHECK(a.content_hash() == synthesize_logistic(40, 3, 1, 1.0).content_hash());
  CHECK(a.content_hash() != b.content_hash());
  CHECK(a.content_hash() != a.with_dim(4).content_hash());
}

TEST_CASE("sparse surrogate matches its configured statistics") {
  const SparseBinarySpec spec{.n = 20000, .d = 300, .seed = 3};
  const Dataset d = synthesize_sparse_binary(spec);
  CHECK(d.size() == spec.n);
  const double mean_nnz = static_cast<double>(d.nnz()) / static_cast<double>(d.size());
  CHECK(mean_nnz == doctest::Approx(spec.mean_nnz).epsilon(0.05));
  std::size_t positives = 0;
  for (double y : d.labels()) positives += y > 0 ? 1 : 0;
  const double rate = static_cast<double>(positives) / static_cast<double>(d.size());
  // Clean positives stay at or below the target; flips move about 1% of labels.
  CHECK(rate > 0.02);
  CHECK(rate < spec.positive_rate + 2 * spec.flip_rate);
  for (std::size_t i = 0; i < d.size(); ++i)
    for (double v : d.row(i).values) REQUIRE(v == 1.0);
  CHECK(synthesize_sparse_binary(spec) == d);
}

TEST_CASE("planted logistic generator") {
  const Dataset noiseless = synthesize_logistic(300, 5, 9, INFINITY);
  const Vector w = synthetic_planted_weights(5, 9);
  for (std::size_t i = 0; i < noiseless.size(); ++i) {
    const double s = noiseless.row(i).dot(w);
    if (s != 0.0) REQUIRE(noiseless.label(i) == (s > 0 ? 1.0 : -1.0));
  }
}

}  // TEST_SUITE
