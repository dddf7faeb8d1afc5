#include "fairlat/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "fairlat/errors.hpp"

namespace fairlat::model {

namespace {

constexpr double kMinProjectionNorm = 1e-8;
constexpr char kMagic[8] = {'F', 'L', 'C', 'K', 'P', 'T', '0', '0'};
constexpr std::uint32_t kFormatVersion = 1;

std::vector<int> layer_widths(const std::vector<int>& hidden, int out) {
  std::vector<int> widths = hidden;
  widths.push_back(out);
  return widths;
}

Matrix apply_activation(Matrix h, Activation a) {
  if (a == Activation::kTanh) h = h.array().tanh();
  return h;
}

Matrix forward_mlp(const std::vector<Layer>& layers, const MatrixRef& input,
                   Activation activation) {
  Matrix h = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Matrix z = h * layers[i].W;
    z.rowwise() += layers[i].b;
    // Last layer stays linear.
    h = (i + 1 < layers.size()) ? apply_activation(std::move(z), activation)
                                : std::move(z);
  }
  return h;
}

void check_input(const MatrixRef& X, Index expected_cols, const char* what) {
  if (X.cols() != expected_cols)
    throw ShapeError(std::string(what) + ": expected " +
                     std::to_string(expected_cols) + " columns, got " +
                     std::to_string(X.cols()));
  if (!X.allFinite())
    throw NumericError(std::string(what) + ": non-finite input");
}

std::vector<Layer> init_mlp(int in, const std::vector<int>& widths, Rng& rng) {
  std::vector<Layer> layers;
  int fan_in = in;
  for (int out : widths) {
    Layer layer;
    layer.W.resize(fan_in, out);
    const double bound = std::sqrt(6.0 / (fan_in + out));
    for (Index j = 0; j < layer.W.cols(); ++j)
      for (Index i = 0; i < layer.W.rows(); ++i)
        layer.W(i, j) = rng.uniform(-bound, bound);
    layer.b = RowVector::Zero(out);
    layers.push_back(std::move(layer));
    fan_in = out;
  }
  return layers;
}

}  // namespace

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity" || s == "linear") return Activation::kIdentity;
  throw ConfigError("unknown activation: " + s);
}

std::string to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "identity";
}

void Architecture::validate() const {
  if (latent_dim < 2) throw ConfigError("architecture: latent_dim must be >= 2");
  if (input_dim < latent_dim)
    throw ConfigError("architecture: input_dim must be >= latent_dim");
  if (enc_hidden.empty() || dec_hidden.empty())
    throw ConfigError("architecture: at least one hidden layer on each side");
  for (int w : enc_hidden)
    if (w < 1) throw ConfigError("architecture: encoder hidden width must be >= 1");
  for (int w : dec_hidden)
    if (w < 1) throw ConfigError("architecture: decoder hidden width must be >= 1");
}

std::vector<Matrix> ModelParams::flatten() const {
  std::vector<Matrix> flat;
  for (const Layer& l : encoder) {
    flat.push_back(l.W);
    flat.push_back(l.b);
  }
  for (const Layer& l : decoder) {
    flat.push_back(l.W);
    flat.push_back(l.b);
  }
  flat.push_back(projection);
  return flat;
}

ModelParams ModelParams::unflatten(const Architecture& arch,
                                   const std::vector<Matrix>& flat) {
  const std::size_t expected = 2 * (arch.enc_hidden.size() + 1) +
                               2 * (arch.dec_hidden.size() + 1) + 1;
  if (flat.size() != expected)
    throw ShapeError("unflatten: expected " + std::to_string(expected) +
                     " tensors, got " + std::to_string(flat.size()));
  ModelParams p;
  std::size_t idx = 0;
  auto take_layers = [&](std::size_t count) {
    std::vector<Layer> layers(count);
    for (std::size_t i = 0; i < count; ++i) {
      layers[i].W = flat[idx++];
      layers[i].b = flat[idx++];
    }
    return layers;
  };
  p.encoder = take_layers(arch.enc_hidden.size() + 1);
  p.decoder = take_layers(arch.dec_hidden.size() + 1);
  p.projection = flat[idx];
  return p;
}

std::vector<Matrix> ModelParams::flatten_enc_dec() const {
  std::vector<Matrix> flat;
  for (const Layer& l : encoder) {
    flat.push_back(l.W);
    flat.push_back(l.b);
  }
  for (const Layer& l : decoder) {
    flat.push_back(l.W);
    flat.push_back(l.b);
  }
  return flat;
}

void ModelParams::assign_enc_dec(const std::vector<Matrix>& flat) {
  if (flat.size() != 2 * (encoder.size() + decoder.size()))
    throw ShapeError("assign_enc_dec: tensor count mismatch");
  std::size_t idx = 0;
  for (Layer& l : encoder) {
    l.W = flat[idx++];
    l.b = flat[idx++];
  }
  for (Layer& l : decoder) {
    l.W = flat[idx++];
    l.b = flat[idx++];
  }
}

ModelParams init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng = sub_rng(seed, "model-init");
  ModelParams params;
  params.encoder =
      init_mlp(arch.input_dim, layer_widths(arch.enc_hidden, arch.latent_dim), rng);
  params.decoder =
      init_mlp(arch.latent_dim, layer_widths(arch.dec_hidden, arch.input_dim), rng);
  params.projection.resize(arch.latent_dim);
  for (Index i = 0; i < params.projection.size(); ++i)
    params.projection(i) = rng.normal();
  params.projection /= params.projection.norm();
  return params;
}

bool guard_projection(ModelParams& params, Rng& rng) {
  if (params.projection.norm() >= kMinProjectionNorm) return false;
  for (Index i = 0; i < params.projection.size(); ++i)
    params.projection(i) = rng.normal();
  params.projection /= params.projection.norm();
  return true;
}

Matrix encode(const Architecture& arch, const ModelParams& params,
              const MatrixRef& X) {
  check_input(X, arch.input_dim, "encode");
  return forward_mlp(params.encoder, X, arch.activation);
}

Matrix decode(const Architecture& arch, const ModelParams& params,
              const MatrixRef& Z) {
  check_input(Z, arch.latent_dim, "decode");
  return forward_mlp(params.decoder, Z, arch.activation);
}

double projection_norm(const VectorRef& P) { return P.norm(); }

Vector project(const MatrixRef& Z, const VectorRef& P) {
  if (Z.cols() != P.size())
    throw ShapeError("project: latent width " + std::to_string(Z.cols()) +
                     " vs direction length " + std::to_string(P.size()));
  const double norm = P.norm();
  if (norm < kMinProjectionNorm)
    throw NumericError("project: degenerate direction, ||P|| = " +
                       std::to_string(norm));
  return (Z * P) / norm;
}

ForwardNodes build_forward(graph::Tape& tape, const Architecture& arch,
                           const ModelParams& params, const MatrixRef& X,
                           bool with_projection) {
  check_input(X, arch.input_dim, "build_forward");
  ForwardNodes nodes;
  nodes.x = tape.leaf(X, false);

  auto push_layer_leaves = [&](const std::vector<Layer>& layers,
                               std::vector<std::pair<int, int>>& ids) {
    for (const Layer& l : layers) {
      const int w = tape.leaf(l.W, true);
      const int b = tape.leaf(l.b, true);
      ids.emplace_back(w, b);
      nodes.param_leaves.push_back(w);
      nodes.param_leaves.push_back(b);
    }
  };

  std::vector<std::pair<int, int>> enc_ids, dec_ids;
  push_layer_leaves(params.encoder, enc_ids);
  push_layer_leaves(params.decoder, dec_ids);
  const int p_leaf = tape.leaf(params.projection, with_projection);
  nodes.param_leaves.push_back(p_leaf);

  auto run_mlp = [&](int input, const std::vector<std::pair<int, int>>& ids) {
    int h = input;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      h = tape.add_row(tape.matmul(h, ids[i].first), ids[i].second);
      if (i + 1 < ids.size() && arch.activation == Activation::kTanh)
        h = tape.tanh(h);
    }
    return h;
  };

  nodes.z = run_mlp(nodes.x, enc_ids);
  nodes.x_rec = run_mlp(nodes.z, dec_ids);
  if (with_projection) {
    nodes.p_norm = tape.sqrt(tape.sum(tape.square(p_leaf)));
    if (tape.value(nodes.p_norm)(0, 0) < kMinProjectionNorm)
      throw NumericError("build_forward: degenerate projection direction");
    nodes.z_p = tape.div(tape.matmul(nodes.z, p_leaf), nodes.p_norm);
  }
  return nodes;
}

namespace {

struct Writer {
  std::ofstream out;
  explicit Writer(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  }
  void u32(std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
  void doubles(const double* p, std::size_t count) {
    out.write(reinterpret_cast<const char*>(p),
              static_cast<std::streamsize>(count * sizeof(double)));
  }
};

struct Reader {
  std::ifstream in;
  std::string path;
  explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw DataError("cannot open checkpoint for reading: " + p);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw DataError("checkpoint truncated: " + path);
    return v;
  }
  void doubles(double* p, std::size_t count) {
    in.read(reinterpret_cast<char*>(p),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw DataError("checkpoint truncated: " + path);
  }
};

}  // namespace

void save_checkpoint(const ModelParams& params, const Architecture& arch,
                     const std::string& path) {
  arch.validate();
  Writer w(path);
  w.out.write(kMagic, sizeof(kMagic));
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(arch.input_dim));
  w.u32(static_cast<std::uint32_t>(arch.latent_dim));
  w.u32(static_cast<std::uint32_t>(arch.activation));
  w.u32(static_cast<std::uint32_t>(arch.enc_hidden.size()));
  for (int h : arch.enc_hidden) w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(arch.dec_hidden.size()));
  for (int h : arch.dec_hidden) w.u32(static_cast<std::uint32_t>(h));
  for (const Matrix& m : params.flatten())
    w.doubles(m.data(), static_cast<std::size_t>(m.size()));
  if (!w.out) throw DataError("checkpoint write failed: " + path);
}

std::pair<ModelParams, Architecture> load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.in.read(magic, sizeof(magic));
  if (!r.in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file: " + path);
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion)
    throw DataError("checkpoint version mismatch: have " + std::to_string(version) +
                    ", expected " + std::to_string(kFormatVersion));
  Architecture arch;
  arch.input_dim = static_cast<int>(r.u32());
  arch.latent_dim = static_cast<int>(r.u32());
  const std::uint32_t act = r.u32();
  if (act > 1) throw DataError("checkpoint: unknown activation tag");
  arch.activation = static_cast<Activation>(act);
  const std::uint32_t enc_count = r.u32();
  if (enc_count > 64) throw DataError("checkpoint: implausible encoder depth");
  arch.enc_hidden.assign(enc_count, 0);
  for (auto& h : arch.enc_hidden) h = static_cast<int>(r.u32());
  const std::uint32_t dec_count = r.u32();
  if (dec_count > 64) throw DataError("checkpoint: implausible decoder depth");
  arch.dec_hidden.assign(dec_count, 0);
  for (auto& h : arch.dec_hidden) h = static_cast<int>(r.u32());
  arch.validate();

  ModelParams params;
  auto read_layers = [&](int in, const std::vector<int>& hidden, int out) {
    std::vector<Layer> layers;
    int fan_in = in;
    for (int width : layer_widths(hidden, out)) {
      Layer l;
      l.W.resize(fan_in, width);
      r.doubles(l.W.data(), static_cast<std::size_t>(l.W.size()));
      l.b.resize(width);
      r.doubles(l.b.data(), static_cast<std::size_t>(l.b.size()));
      layers.push_back(std::move(l));
      fan_in = width;
    }
    return layers;
  };
  params.encoder = read_layers(arch.input_dim, arch.enc_hidden, arch.latent_dim);
  params.decoder = read_layers(arch.latent_dim, arch.dec_hidden, arch.input_dim);
  params.projection.resize(arch.latent_dim);
  r.doubles(params.projection.data(),
            static_cast<std::size_t>(params.projection.size()));
  r.in.peek();
  if (!r.in.eof()) throw DataError("checkpoint has trailing bytes: " + path);
  for (const Matrix& m : params.flatten())
    if (!m.allFinite()) throw DataError("checkpoint contains non-finite values");
  return {std::move(params), arch};
}

}  // namespace fairlat::model
