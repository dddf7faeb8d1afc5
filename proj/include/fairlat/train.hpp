#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairlat/losses.hpp"
#include "fairlat/model.hpp"
#include "fairlat/types.hpp"

namespace fairlat::train {

enum class Mode : std::uint8_t {
  kSupervised,
  kSemiSupervised,
  kAblationNoBias,   // correlation loss keeps only the target term (k = 0)
  kAblationPlainAe,  // lambda = 0, reconstruction only
};

Mode mode_from_string(const std::string& s);
std::string to_string(Mode m);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double eta = 0.5;
  double lambda = 1.0;
  double variance_floor = 1e-8;
  std::uint64_t seed = 0;
  Mode mode = Mode::kSupervised;

  void validate() const;
  losses::LossConfig loss_config() const;
};

/// Labelled rows: observations with target and bias columns aligned by row.
struct LabelledData {
  Matrix X;
  Vector t;
  Matrix S;  // d x k, k may be 0

  void validate() const;
};

struct EpochStats {
  double rec_train = 0.0;
  double corr_train = 0.0;
  double joint_train = 0.0;
  double rec_val = 0.0;
  double corr_val = 0.0;
  double joint_val = 0.0;
  double wall_ms = 0.0;  // diagnostics only; excluded from the CSV export
  int skipped_batches = 0;
  int optimizer_phases = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::vector<std::string> notices;
  long degenerate_skips = 0;
  long nonfinite_skips = 0;
  long n_sample = 0;  // Algorithm-1 per-epoch sample count (semi-supervised)

  /// Columns: epoch, rec_train, corr_train, joint_train, rec_val, corr_val,
  /// joint_val. Deterministic bytes for a deterministic run.
  std::string to_csv() const;
};

struct TrainResult {
  model::ModelParams params;
  TrainHistory history;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long t = 0;

  void init(const std::vector<Matrix>& params);
};

/// Bias-corrected Adam update, applied in place. Returns false and leaves
/// params and state untouched when any gradient entry is non-finite.
bool adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
               AdamState& state, const AdamConfig& config);

/// Joint training on fully labelled data (Eq.-5-style objective). Shuffles
/// per epoch with a seeded generator; trailing batches smaller than the
/// minimum correlation batch size are dropped; degenerate batches (constant
/// target or bias within the batch) are skipped and counted, and an epoch
/// with more than half of its batches skipped aborts with a diagnostic.
/// When `val` is absent the validation columns mirror the training metrics.
TrainResult train_supervised(const LabelledData& data,
                             const std::optional<LabelledData>& val,
                             const model::Architecture& arch,
                             const TrainConfig& config);

/// Two-phase semi-supervised loop: per epoch, N_sample = min(|X_u|, |X_l|)
/// rows are drawn from each pool, then half-batches of batch_size/2 are
/// consumed; phase 1 updates encoder and decoder by the reconstruction loss
/// on an unlabelled half-batch, phase 2 updates all three parameter groups by
/// the joint loss on a labelled half-batch. The projection direction is
/// asserted untouched by every phase-1 update. An empty unlabelled pool falls
/// back to train_supervised with a logged notice.
TrainResult train_semisupervised(const Matrix& X_unlabelled,
                                 const LabelledData& labelled,
                                 const std::optional<LabelledData>& val,
                                 const model::Architecture& arch,
                                 const TrainConfig& config);

}  // namespace fairlat::train
