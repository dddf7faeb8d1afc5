#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "fairlat/errors.hpp"
#include "fairlat/model.hpp"
#include "fairlat/train.hpp"
#include "test_util.hpp"

using namespace fairlat;
using model::Architecture;
using model::ModelParams;

namespace {

Architecture small_arch() {
  Architecture arch;
  arch.input_dim = 10;
  arch.latent_dim = 4;
  arch.enc_hidden = {8};
  arch.dec_hidden = {8};
  return arch;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(),
                     sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool params_bit_equal(const ModelParams& a, const ModelParams& b) {
  const auto fa = a.flatten();
  const auto fb = b.flatten();
  if (fa.size() != fb.size()) return false;
  for (std::size_t i = 0; i < fa.size(); ++i)
    if (!bit_equal(fa[i], fb[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("architecture validation") {
  Architecture arch = small_arch();
  CHECK_NOTHROW(arch.validate());
  arch.latent_dim = 1;
  CHECK_THROWS_AS(arch.validate(), ConfigError);
  arch = small_arch();
  arch.input_dim = 3;  // below latent_dim
  CHECK_THROWS_AS(arch.validate(), ConfigError);
  arch = small_arch();
  arch.enc_hidden.clear();
  CHECK_THROWS_AS(arch.validate(), ConfigError);
}

TEST_CASE("init_params determinism and projection norm") {
  const Architecture arch = small_arch();
  const ModelParams a = model::init_params(arch, 42);
  const ModelParams b = model::init_params(arch, 42);
  CHECK(params_bit_equal(a, b));
  CHECK(std::abs(a.projection.norm() - 1.0) < 1e-12);

  const ModelParams c = model::init_params(arch, 43);
  CHECK_FALSE(bit_equal(a.encoder[0].W, c.encoder[0].W));
  // Biases start at zero.
  CHECK(a.encoder[0].b.isZero(0.0));
  CHECK(a.decoder[1].b.isZero(0.0));
}

TEST_CASE("encode and decode shapes and determinism") {
  const Architecture arch = small_arch();
  const ModelParams params = model::init_params(arch, 1);
  Rng rng(2);
  const Matrix X = testutil::random_matrix(rng, 64, 10);
  const Matrix Z = model::encode(arch, params, X);
  CHECK(Z.rows() == 64);
  CHECK(Z.cols() == 4);
  CHECK(bit_equal(Z, model::encode(arch, params, X)));

  // A duplicated row encodes to identical latent rows.
  Matrix two = Matrix::Zero(2, 10);
  two.row(0) = X.row(5);
  two.row(1) = X.row(5);
  const Matrix Z2 = model::encode(arch, params, two);
  CHECK(Z2.row(0) == Z2.row(1));

  const Matrix X_rec = model::decode(arch, params, Z);
  CHECK(X_rec.rows() == 64);
  CHECK(X_rec.cols() == 10);
  CHECK(X_rec.allFinite());

  // Zero latent batch decodes to identical bias-only rows.
  const Matrix X0 = model::decode(arch, params, Matrix::Zero(3, 4));
  CHECK(X0.row(0) == X0.row(1));
  CHECK(X0.row(1) == X0.row(2));

  CHECK_THROWS_AS(model::encode(arch, params, Matrix::Zero(2, 7)), ShapeError);
  CHECK_THROWS_AS(model::decode(arch, params, Matrix::Zero(2, 7)), ShapeError);
}

TEST_CASE("project examples") {
  Matrix Z(1, 3);
  Z << 1, 2, 3;
  Vector P(3);
  P << 1, 0, 0;
  CHECK(model::project(Z, P)(0) == doctest::Approx(1.0).epsilon(1e-15));

  // Hand dot-product oracle: (1 + 2) / sqrt(2).
  Matrix Z2(1, 3);
  Z2 << 1, 2, 0;
  Vector P2(3);
  P2 << 1, 1, 0;
  CHECK(model::project(Z2, P2)(0) ==
        doctest::Approx(3.0 / std::sqrt(2.0)).epsilon(1e-15));

  Vector tiny = Vector::Constant(3, 1e-9);
  CHECK_THROWS_AS(model::project(Z, tiny), NumericError);
  Vector wrong(2);
  wrong << 1, 0;
  CHECK_THROWS_AS(model::project(Z, wrong), ShapeError);
}

TEST_CASE("projection algebra invariants") {
  Rng rng(7);
  const Matrix Z = testutil::random_matrix(rng, 40, 6);
  const Vector P = testutil::normal_vector(rng, 6);
  const Vector base = model::project(Z, P);

  SUBCASE("invariant to positive rescaling of P") {
    for (double c : {1e-3, 0.5, 7.0, 1e4}) {
      const Vector scaled = model::project(Z, c * P);
      CHECK((scaled - base).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("negating P flips the sign") {
    const Vector neg = model::project(Z, -P);
    CHECK((neg + base).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("linearity along P") {
    const double norm = P.norm();
    for (double k : {-2.0, 0.25, 3.5}) {
      Matrix shifted = Z;
      shifted.rowwise() += (k * P).transpose();
      const Vector moved = model::project(shifted, P);
      for (Index i = 0; i < moved.size(); ++i)
        CHECK(moved(i) - base(i) == doctest::Approx(k * norm).epsilon(1e-9));
    }
  }
}

TEST_CASE("checkpoint roundtrip is bit-exact") {
  const Architecture arch = small_arch();
  const ModelParams params = model::init_params(arch, 77);
  testutil::TempDir dir("ckpt");
  const std::string path = dir.file("model.bin");
  model::save_checkpoint(params, arch, path);
  const auto [loaded, loaded_arch] = model::load_checkpoint(path);
  CHECK(loaded_arch == arch);
  CHECK(params_bit_equal(params, loaded));
}

TEST_CASE("checkpoint corruption and version guards") {
  const Architecture arch = small_arch();
  const ModelParams params = model::init_params(arch, 5);
  testutil::TempDir dir("ckpt2");
  const std::string path = dir.file("model.bin");
  model::save_checkpoint(params, arch, path);

  SUBCASE("truncated file rejected") {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::ofstream out(dir.file("trunc.bin"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(model::load_checkpoint(dir.file("trunc.bin")), DataError);
  }
  SUBCASE("trailing bytes rejected") {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.write("xx", 2);
    out.close();
    CHECK_THROWS_AS(model::load_checkpoint(path), DataError);
  }
  SUBCASE("wrong magic rejected") {
    std::ofstream out(dir.file("bad.bin"), std::ios::binary);
    out.write("NOTACKPT", 8);
    out.close();
    CHECK_THROWS_AS(model::load_checkpoint(dir.file("bad.bin")), DataError);
  }
  SUBCASE("version mismatch rejected") {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(8);
    const std::uint32_t bad_version = 999;
    f.write(reinterpret_cast<const char*>(&bad_version), 4);
    f.close();
    CHECK_THROWS_WITH_AS(model::load_checkpoint(path),
                         doctest::Contains("version"), DataError);
  }
  SUBCASE("latent dim mismatch against an eval request is detectable") {
    const auto [loaded, loaded_arch] = model::load_checkpoint(path);
    Architecture requested = loaded_arch;
    requested.latent_dim = 8;
    CHECK_FALSE(requested == loaded_arch);
  }
}

TEST_CASE("projection guard re-initializes a collapsed direction") {
  const Architecture arch = small_arch();
  ModelParams params = model::init_params(arch, 3);
  Rng rng(9);
  CHECK_FALSE(model::guard_projection(params, rng));
  params.projection.setConstant(1e-12);
  CHECK(model::guard_projection(params, rng));
  CHECK(std::abs(params.projection.norm() - 1.0) < 1e-12);
}

TEST_CASE("a linear identity task trains to near-exact reconstruction") {
  // m = n with identity activation: the autoencoder can represent the
  // identity map, so the reconstruction error must become small.
  Architecture arch;
  arch.input_dim = 4;
  arch.latent_dim = 4;
  arch.enc_hidden = {6};
  arch.dec_hidden = {6};
  arch.activation = model::Activation::kIdentity;

  Rng rng(21);
  train::LabelledData data;
  data.X = testutil::random_matrix(rng, 256, 4, -1.0, 1.0);
  data.t = testutil::normal_vector(rng, 256);
  data.S = Matrix(256, 0);

  train::TrainConfig config;
  config.mode = train::Mode::kAblationPlainAe;
  config.epochs = 400;
  config.batch_size = 64;
  config.learning_rate = 3e-3;
  config.seed = 17;
  const train::TrainResult result =
      train::train_supervised(data, std::nullopt, arch, config);
  const Matrix X_rec = model::decode(
      arch, result.params, model::encode(arch, result.params, data.X));
  const double mse = (data.X - X_rec).array().square().mean();
  CHECK(mse < 1e-2);
}
