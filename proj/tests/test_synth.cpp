#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fairlat/errors.hpp"
#include "fairlat/losses.hpp"
#include "fairlat/synth.hpp"
#include "fairlat/textio.hpp"
#include "test_util.hpp"

using namespace fairlat;
using synth::AttrKind;
using synth::AttrRole;
using synth::GenSpec;

namespace {

GenSpec exp1_spec(int rows, std::uint64_t seed) {
  GenSpec spec;
  spec.rows = rows;
  spec.dims = 60;
  spec.attributes = {{"h", AttrKind::kContinuous, AttrRole::kTarget},
                     {"b", AttrKind::kContinuous, AttrRole::kBias},
                     {"g", AttrKind::kBinary, AttrRole::kBias}};
  spec.corr = Matrix::Identity(3, 3);
  spec.corr(0, 1) = spec.corr(1, 0) = 0.243;
  spec.corr(0, 2) = spec.corr(2, 0) = -0.033;
  spec.corr(1, 2) = spec.corr(2, 1) = 0.035;
  spec.noise_sigma = 1.0;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("gen spec validation") {
  GenSpec spec = exp1_spec(100, 1);
  CHECK_NOTHROW(spec.validate());
  spec.dims = 5;  // < attributes + 4
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = exp1_spec(100, 1);
  spec.corr(0, 1) = 0.5;  // asymmetric
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = exp1_spec(100, 1);
  spec.attributes[1].name = "h";
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = exp1_spec(100, 1);
  spec.attributes[1].name = "x3";  // reserved feature column name
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = exp1_spec(100, 1);
  spec.labelled_fraction = 0.0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("non-PSD correlation matrix rejected naming the eigenvalue") {
  GenSpec spec = exp1_spec(100, 1);
  spec.corr(0, 1) = spec.corr(1, 0) = 0.9;
  spec.corr(0, 2) = spec.corr(2, 0) = 0.9;
  spec.corr(1, 2) = spec.corr(2, 1) = -0.9;
  CHECK_THROWS_WITH_AS(synth::generate(spec),
                       doctest::Contains("eigenvalue"), DataError);
}

TEST_CASE("generate is deterministic") {
  const GenSpec spec = exp1_spec(200, 9);
  const synth::GenResult a = synth::generate(spec);
  const synth::GenResult b = synth::generate(spec);
  CHECK(a.dataset.X == b.dataset.X);
  CHECK(a.factors == b.factors);
  for (std::size_t i = 0; i < a.dataset.attributes.size(); ++i)
    CHECK(a.dataset.attributes[i].values == b.dataset.attributes[i].values);
}

TEST_CASE("empirical attribute correlations converge to the spec matrix") {
  const GenSpec spec = exp1_spec(5000, 101);
  const synth::GenResult gen = synth::generate(spec);
  const Matrix emp = synth::empirical_attribute_corr(gen.dataset);
  // Template value +0.243 within the sampling tolerance.
  CHECK(std::abs(emp(0, 1) - 0.243) < 0.03);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) {
      INFO("entry ", i, ",", j);
      CHECK(std::abs(emp(i, j) - spec.corr(i, j)) < 0.05);
    }
}

TEST_CASE("identity correlation matrix gives near-independent attributes") {
  GenSpec spec = exp1_spec(5000, 55);
  spec.corr = Matrix::Identity(3, 3);
  const synth::GenResult gen = synth::generate(spec);
  const Matrix emp = synth::empirical_attribute_corr(gen.dataset);
  for (Index i = 0; i < 3; ++i)
    for (Index j = i + 1; j < 3; ++j) CHECK(std::abs(emp(i, j)) < 0.05);
}

TEST_CASE("strong binary-binary correlations survive thresholding") {
  GenSpec spec;
  spec.rows = 5000;
  spec.dims = 20;
  spec.attributes = {{"t", AttrKind::kBinary, AttrRole::kTarget},
                     {"e", AttrKind::kBinary, AttrRole::kBias}};
  spec.corr = Matrix::Identity(2, 2);
  spec.corr(0, 1) = spec.corr(1, 0) = 0.479;
  spec.seed = 3;
  const synth::GenResult gen = synth::generate(spec);
  const Matrix emp = synth::empirical_attribute_corr(gen.dataset);
  CHECK(std::abs(emp(0, 1) - 0.479) < 0.05);
  // Balanced classes from thresholding at zero.
  const Vector t = gen.dataset.attribute("t").values;
  const double rate = t.mean();
  CHECK(rate > 0.45);
  CHECK(rate < 0.55);
}

TEST_CASE("binary thresholding preserves association signs") {
  GenSpec spec = exp1_spec(5000, 77);
  spec.corr(0, 2) = spec.corr(2, 0) = 0.3;  // h vs binary g
  const synth::GenResult gen = synth::generate(spec);
  const Matrix emp = synth::empirical_attribute_corr(gen.dataset);
  CHECK(emp(0, 2) > 0.0);
}

TEST_CASE("noise-free linear map lies in the factor span") {
  GenSpec spec = exp1_spec(300, 13);
  spec.noise_sigma = 0.0;
  const synth::GenResult gen = synth::generate(spec);
  // Least-squares fit of X on the factors has (numerically) zero residual.
  const Matrix& F = gen.factors;
  const Matrix coef = F.colPivHouseholderQr().solve(gen.dataset.X);
  const double residual = (F * coef - gen.dataset.X).cwiseAbs().maxCoeff();
  CHECK(residual < 1e-9);
}

TEST_CASE("wiring exposes target and bias dims with overlap") {
  const synth::GenResult gen = synth::generate(exp1_spec(50, 21));
  const std::vector<int> h_dims = synth::wired_dims(gen, "h");
  const std::vector<int> b_dims = synth::wired_dims(gen, "b");
  CHECK_FALSE(h_dims.empty());
  CHECK_FALSE(b_dims.empty());
  // Factors overlap on part of their dims so disentangling is nontrivial.
  std::set<int> h_set(h_dims.begin(), h_dims.end());
  bool overlap = false;
  for (int d : b_dims) overlap = overlap || h_set.count(d) > 0;
  CHECK(overlap);
  CHECK_THROWS_AS(synth::wired_dims(gen, "nope"), DataError);
}

TEST_CASE("labelled fraction controls the mask deterministically") {
  GenSpec spec = exp1_spec(400, 5);
  spec.labelled_fraction = 0.3;
  const synth::GenResult a = synth::generate(spec);
  const synth::GenResult b = synth::generate(spec);
  CHECK(a.dataset.labelled == b.dataset.labelled);
  CHECK(a.dataset.labelled_rows().size() == 120);
  CHECK(a.dataset.unlabelled_rows().size() == 280);
}

TEST_CASE("csv roundtrip preserves the dataset exactly") {
  GenSpec spec = exp1_spec(120, 19);
  spec.labelled_fraction = 0.5;
  const synth::GenResult gen = synth::generate(spec);
  testutil::TempDir dir("csv");
  const std::string path = dir.file("data.csv");
  synth::write_csv(gen.dataset, path);
  const synth::Dataset loaded = synth::read_csv(path);
  CHECK(loaded.X == gen.dataset.X);
  CHECK(loaded.labelled == gen.dataset.labelled);
  REQUIRE(loaded.attributes.size() == gen.dataset.attributes.size());
  for (std::size_t i = 0; i < loaded.attributes.size(); ++i) {
    CHECK(loaded.attributes[i].name == gen.dataset.attributes[i].name);
    CHECK(loaded.attributes[i].values == gen.dataset.attributes[i].values);
    CHECK(loaded.attributes[i].kind == gen.dataset.attributes[i].kind);
  }
  // Re-writing the loaded dataset reproduces the bytes.
  const std::string path2 = dir.file("data2.csv");
  synth::write_csv(loaded, path2);
  CHECK(read_text_file(path) == read_text_file(path2));
}

TEST_CASE("csv error surfaces") {
  testutil::TempDir dir("csv_err");
  SUBCASE("missing labelled column defaults to all labelled with a notice") {
    write_text_file(dir.file("a.csv"), "x0,x1,t\n1,2,0.5\n3,4,0.7\n");
    std::vector<std::string> notices;
    const synth::Dataset ds = synth::read_csv(dir.file("a.csv"), &notices);
    CHECK(ds.labelled_rows().size() == 2);
    REQUIRE(notices.size() == 1);
    CHECK(notices[0].find("labelled") != std::string::npos);
  }
  SUBCASE("non-numeric cell is rejected naming the row") {
    std::string body = "x0,t,labelled\n";
    for (int i = 1; i <= 6; ++i) body += "1,2,1\n";
    body += "1,oops,1\n";
    write_text_file(dir.file("b.csv"), body);
    CHECK_THROWS_WITH_AS(synth::read_csv(dir.file("b.csv")),
                         doctest::Contains("row 7"), DataError);
  }
  SUBCASE("ragged row rejected") {
    write_text_file(dir.file("c.csv"), "x0,x1,t\n1,2,3\n1,2\n");
    CHECK_THROWS_WITH_AS(synth::read_csv(dir.file("c.csv")),
                         doctest::Contains("row 2"), DataError);
  }
  SUBCASE("duplicate column names rejected") {
    write_text_file(dir.file("d.csv"), "x0,t,t\n1,2,3\n");
    CHECK_THROWS_WITH_AS(synth::read_csv(dir.file("d.csv")),
                         doctest::Contains("duplicate"), DataError);
  }
}

TEST_CASE("kfold_split partitions labelled rows") {
  GenSpec spec = exp1_spec(60, 41);
  spec.labelled_fraction = 0.5;  // 30 labelled, 30 unlabelled
  const synth::Dataset ds = synth::generate(spec).dataset;

  SUBCASE("exact division") {
    const auto folds = synth::kfold_split(ds, 5, 7);
    REQUIRE(folds.size() == 5);
    std::set<int> all;
    for (const auto& f : folds) {
      CHECK(f.test_rows.size() == 6);
      for (int r : f.test_rows) CHECK(all.insert(r).second);  // disjoint
      CHECK(f.unlabelled_rows.size() == 30);
      // Train and test partition the labelled rows.
      CHECK(f.train_rows.size() + f.test_rows.size() == 30);
    }
    CHECK(all.size() == 30);  // union covers every labelled row
  }
  SUBCASE("remainder distribution: 11 rows, k=5 gives sizes {3,2,2,2,2}") {
    GenSpec s2 = exp1_spec(22, 42);
    s2.labelled_fraction = 0.5;  // 11 labelled
    const synth::Dataset d2 = synth::generate(s2).dataset;
    const auto folds = synth::kfold_split(d2, 5, 1);
    std::vector<std::size_t> sizes;
    for (const auto& f : folds) sizes.push_back(f.test_rows.size());
    std::sort(sizes.begin(), sizes.end(), std::greater<>());
    CHECK(sizes == std::vector<std::size_t>{3, 2, 2, 2, 2});
  }
  SUBCASE("same seed reproduces, different seed changes the split") {
    const auto a = synth::kfold_split(ds, 5, 7);
    const auto b = synth::kfold_split(ds, 5, 7);
    const auto c = synth::kfold_split(ds, 5, 8);
    CHECK(a[0].test_rows == b[0].test_rows);
    bool any_diff = false;
    for (int f = 0; f < 5; ++f) any_diff = any_diff || a[f].test_rows != c[f].test_rows;
    CHECK(any_diff);
  }
}

TEST_CASE("stratified kfold keeps class counts balanced") {
  GenSpec spec;
  spec.rows = 103;
  spec.dims = 10;
  spec.attributes = {{"t", AttrKind::kBinary, AttrRole::kTarget},
                     {"s", AttrKind::kContinuous, AttrRole::kBias}};
  spec.corr = Matrix::Identity(2, 2);
  spec.seed = 10;
  const synth::Dataset ds = synth::generate(spec).dataset;
  const auto folds = synth::kfold_split(ds, 5, 3, std::string("t"));

  const Vector& t = ds.attribute("t").values;
  long total_pos = 0;
  for (Index i = 0; i < t.size(); ++i) total_pos += t(i) == 1.0;
  for (const auto& f : folds) {
    long fold_pos = 0;
    for (int r : f.test_rows) fold_pos += t(r) == 1.0;
    const double expected =
        static_cast<double>(total_pos) * static_cast<double>(f.test_rows.size()) /
        static_cast<double>(t.size());
    CHECK(std::abs(static_cast<double>(fold_pos) - expected) <= 1.0);
  }

  CHECK_THROWS_AS(synth::kfold_split(ds, 5, 3, std::string("s")), DataError);
}
