#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairlat/train.hpp"
#include "fairlat/types.hpp"

namespace fairlat::synth {

enum class AttrKind : std::uint8_t { kContinuous, kBinary };
enum class AttrRole : std::uint8_t { kTarget, kBias, kUnspecified };

AttrKind kind_from_string(const std::string& s);
AttrRole role_from_string(const std::string& s);
std::string to_string(AttrKind k);
std::string to_string(AttrRole r);

struct AttrSpec {
  std::string name;
  AttrKind kind = AttrKind::kContinuous;
  AttrRole role = AttrRole::kBias;
};

enum class SignalMap : std::uint8_t { kLinear, kTanhNonlinear };
SignalMap map_from_string(const std::string& s);
std::string to_string(SignalMap m);

/// Recipe for a synthetic confounded dataset: attributes drawn jointly
/// Gaussian (binary ones thresholded at 0), wired into the observations
/// together with four independent nuisance factors.
struct GenSpec {
  int rows = 0;  // d
  int dims = 0;  // m
  std::vector<AttrSpec> attributes;
  Matrix corr;  // desired attribute correlation matrix, A x A
  SignalMap map_kind = SignalMap::kLinear;
  double noise_sigma = 1.0;
  double labelled_fraction = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  static constexpr int kNuisanceFactors = 4;
};

struct Attribute {
  std::string name;
  AttrKind kind = AttrKind::kContinuous;
  AttrRole role = AttrRole::kUnspecified;
  Vector values;
};

struct Dataset {
  Matrix X;
  std::vector<Attribute> attributes;
  std::vector<std::uint8_t> labelled;
  std::string provenance;

  const Attribute& attribute(const std::string& name) const;
  bool has_attribute(const std::string& name) const;
  std::vector<int> labelled_rows() const;
  std::vector<int> unlabelled_rows() const;
  void validate() const;
};

/// Generation output. `factors` holds the attribute values followed by the
/// nuisance columns; `weights` is the factor-to-observation wiring used by
/// the signal map. Both are exposed so tests and reports can reason about
/// which observation dims an attribute drives.
struct GenResult {
  Dataset dataset;
  Matrix factors;  // d x (A + 4)
  Matrix weights;  // (A + 4) x m
};

GenResult generate(const GenSpec& spec);

/// Observation dims with nonzero weight for the factor of attribute `name`.
std::vector<int> wired_dims(const GenResult& gen, const std::string& name);

/// Empirical Pearson correlation matrix of the attribute columns.
Matrix empirical_attribute_corr(const Dataset& dataset);

/// Header: x0..x{m-1}, attribute columns by name, then a 0/1 "labelled"
/// column. Values are written with 17 significant digits and round-trip
/// exactly.
void write_csv(const Dataset& dataset, const std::string& path);
Dataset read_csv(const std::string& path, std::vector<std::string>* notices = nullptr);

struct Fold {
  std::vector<int> test_rows;        // labelled
  std::vector<int> train_rows;       // labelled complement
  std::vector<int> unlabelled_rows;  // attached to every training split
};

/// Partitions labelled rows into k folds with sizes differing by at most one;
/// optional stratification on a binary attribute keeps per-fold class counts
/// within one of proportional.
std::vector<Fold> kfold_split(const Dataset& dataset, int k, std::uint64_t seed,
                              const std::optional<std::string>& stratify_on = {});

/// Assembles trainer input from dataset rows and named attribute columns.
train::LabelledData make_labelled(const Dataset& dataset, const std::vector<int>& rows,
                                  const std::string& target,
                                  const std::vector<std::string>& biases);

Matrix rows_of(const Matrix& X, const std::vector<int>& rows);

}  // namespace fairlat::synth
