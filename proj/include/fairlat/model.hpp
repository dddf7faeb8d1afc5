#pragma once

#include <string>
#include <vector>

#include "fairlat/graph.hpp"
#include "fairlat/rng.hpp"
#include "fairlat/types.hpp"

namespace fairlat::model {

enum class Activation : std::uint8_t { kTanh = 0, kIdentity = 1 };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

/// MLP encoder/decoder layout. Hidden layers use `activation`; the encoder's
/// latent layer and the decoder's output layer are linear.
struct Architecture {
  int input_dim = 0;   // m
  int latent_dim = 0;  // n
  std::vector<int> enc_hidden = {64};
  std::vector<int> dec_hidden = {64};
  Activation activation = Activation::kTanh;

  void validate() const;
  bool operator==(const Architecture&) const = default;
};

struct Layer {
  Matrix W;      // in x out
  RowVector b;   // 1 x out
};

struct ModelParams {
  std::vector<Layer> encoder;
  std::vector<Layer> decoder;
  Vector projection;  // P, length n, stored unnormalized

  /// Flat views used by the optimizer and by grad checks: encoder layers in
  /// order (W then b), decoder layers likewise, projection last.
  std::vector<Matrix> flatten() const;
  static ModelParams unflatten(const Architecture& arch, const std::vector<Matrix>& flat);

  /// Encoder+decoder tensors only, same order as flatten() minus the
  /// projection; the optimizer treats them as one parameter group.
  std::vector<Matrix> flatten_enc_dec() const;
  void assign_enc_dec(const std::vector<Matrix>& flat);
};

/// Glorot-uniform weights, zero biases; P spherically symmetric, normalized
/// to unit length. Deterministic given the seed.
ModelParams init_params(const Architecture& arch, std::uint64_t seed);

/// Re-initializes P from the rng when ||P|| has collapsed below 1e-8.
/// Returns true if a re-initialization happened.
bool guard_projection(ModelParams& params, Rng& rng);

Matrix encode(const Architecture& arch, const ModelParams& params, const MatrixRef& X);
Matrix decode(const Architecture& arch, const ModelParams& params, const MatrixRef& Z);

/// Scalar projection z_p = Z * P / ||P|| per row. Rejects ||P|| < 1e-8.
Vector project(const MatrixRef& Z, const VectorRef& P);
double projection_norm(const VectorRef& P);

// Tape-side forward pass for training. Parameter leaves are created on the
// tape in flatten() order and reported back for the optimizer.
struct ForwardNodes {
  std::vector<int> param_leaves;  // same order as ModelParams::flatten()
  int x = -1;                     // input leaf
  int z = -1;                     // latent batch
  int x_rec = -1;                 // reconstruction
  int z_p = -1;                   // projected batch, d x 1
  int p_norm = -1;                // ||P||, scalar
};

/// Builds leaves for all parameters and the encode -> project -> decode chain.
/// `with_projection` may be false for reconstruction-only phases.
ForwardNodes build_forward(graph::Tape& tape, const Architecture& arch,
                           const ModelParams& params, const MatrixRef& X,
                           bool with_projection = true);

// Checkpoint file: magic + version header describing dims, then flat 64-bit
// little-endian parameter arrays in flatten() order (column-major within each
// tensor). Roundtrip is bit-exact.
void save_checkpoint(const ModelParams& params, const Architecture& arch,
                     const std::string& path);
std::pair<ModelParams, Architecture> load_checkpoint(const std::string& path);

}  // namespace fairlat::model
