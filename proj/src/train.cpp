#include "fairlat/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fairlat/errors.hpp"
#include "fairlat/textio.hpp"

namespace fairlat::train {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool all_finite(const std::vector<Matrix>& ms) {
  for (const Matrix& m : ms)
    if (!m.allFinite()) return false;
  return true;
}

std::vector<int> iota_indices(Index n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

Matrix take_rows(const Matrix& m, const std::vector<int>& rows, std::size_t begin,
                 std::size_t end) {
  Matrix out(static_cast<Index>(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i)
    out.row(static_cast<Index>(i - begin)) = m.row(rows[i]);
  return out;
}

Vector take_rows(const Vector& v, const std::vector<int>& rows, std::size_t begin,
                 std::size_t end) {
  Vector out(static_cast<Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i)
    out(static_cast<Index>(i - begin)) = v(rows[i]);
  return out;
}

// Effective loss shape per mode.
struct ModePlan {
  bool use_corr = true;    // correlation term participates in the loss
  bool use_biases = true;  // bias columns enter the correlation term
  double lambda = 1.0;
};

ModePlan plan_for(const TrainConfig& config) {
  ModePlan plan;
  plan.lambda = config.lambda;
  switch (config.mode) {
    case Mode::kSupervised:
    case Mode::kSemiSupervised:
      break;
    case Mode::kAblationNoBias:
      plan.use_biases = false;
      break;
    case Mode::kAblationPlainAe:
      plan.lambda = 0.0;
      plan.use_corr = false;
      break;
  }
  if (plan.lambda == 0.0) plan.use_corr = false;
  return plan;
}

// Shared optimizer state for encoder+decoder and a separate one for the
// projection direction; the two-phase loop advances them at different rates.
struct Optimizer {
  AdamConfig config;
  AdamState enc_dec;
  AdamState projection;
  Rng guard_rng;

  Optimizer(const model::ModelParams& params, double lr, std::uint64_t seed)
      : guard_rng(sub_rng(seed, "projection-guard")) {
    config.learning_rate = lr;
    enc_dec.init(params.flatten_enc_dec());
    projection.init({params.projection});
  }
};

struct StepOutcome {
  bool applied = false;
  bool nonfinite = false;
  double rec = 0.0;
  double corr = 0.0;
  double joint = 0.0;
};

// One optimizer phase: forward, backward, Adam. update_projection selects
// whether theta_pe participates (Algorithm 1 phase 1 leaves it out).
StepOutcome run_step(model::ModelParams& params, const model::Architecture& arch,
                     const Matrix& Xb, const Vector* tb, const Matrix* Sb,
                     const ModePlan& plan, const TrainConfig& config,
                     Optimizer& opt, bool update_projection, TrainHistory& history) {
  StepOutcome out;
  graph::Tape tape;
  const bool with_projection = plan.use_corr && update_projection;
  model::ForwardNodes nodes =
      model::build_forward(tape, arch, params, Xb, with_projection);

  const int rec = losses::rec_loss_node(tape, nodes.x, nodes.x_rec);
  int loss = rec;
  if (with_projection) {
    losses::LossConfig lc = config.loss_config();
    const Matrix empty(Xb.rows(), 0);
    const int corr = losses::corr_loss_node(tape, nodes.z_p, *tb,
                                            plan.use_biases ? *Sb : empty, lc);
    loss = tape.add(rec, tape.scale(corr, plan.lambda));
    out.corr = tape.value(corr)(0, 0);
  }
  out.rec = tape.value(rec)(0, 0);
  out.joint = tape.value(loss)(0, 0);

  tape.backward(loss);

  const std::size_t count = nodes.param_leaves.size();
  std::vector<Matrix> grads;
  grads.reserve(count - 1);
  for (std::size_t i = 0; i + 1 < count; ++i)
    grads.push_back(tape.grad(nodes.param_leaves[i]));
  Matrix p_grad;
  if (with_projection) p_grad = tape.grad(nodes.param_leaves[count - 1]);

  if (!std::isfinite(out.joint) || !all_finite(grads) ||
      (with_projection && !p_grad.allFinite())) {
    out.nonfinite = true;
    history.nonfinite_skips += 1;
    return out;
  }

  std::vector<Matrix> flat = params.flatten_enc_dec();
  adam_step(flat, grads, opt.enc_dec, opt.config);
  params.assign_enc_dec(flat);
  if (with_projection) {
    std::vector<Matrix> p{params.projection};
    adam_step(p, {p_grad}, opt.projection, opt.config);
    params.projection = p[0];
    if (model::guard_projection(params, opt.guard_rng))
      history.notices.push_back("projection direction re-initialized");
  }
  out.applied = true;
  return out;
}

struct ValMetrics {
  double rec = 0.0;
  double corr = 0.0;
  double joint = 0.0;
};

ValMetrics evaluate_split(const LabelledData& data, const model::Architecture& arch,
                          const model::ModelParams& params, const ModePlan& plan,
                          const TrainConfig& config, TrainHistory& history,
                          bool& warned) {
  ValMetrics m;
  const Matrix Z = model::encode(arch, params, data.X);
  m.rec = losses::rec_loss(data.X, model::decode(arch, params, Z));
  if (plan.use_corr) {
    try {
      const Vector z_p = model::project(Z, params.projection);
      const Matrix empty(data.X.rows(), 0);
      m.corr = losses::corr_loss(z_p, data.t, plan.use_biases ? data.S : empty,
                                 config.eta, config.variance_floor);
    } catch (const NumericError& e) {
      if (!warned) {
        history.notices.push_back(std::string("validation correlation unavailable: ") +
                                  e.what());
        warned = true;
      }
      m.corr = 0.0;
    }
  }
  m.joint = m.rec + plan.lambda * m.corr;
  return m;
}

void finish_epoch(EpochStats& stats, const std::optional<LabelledData>& val,
                  const model::Architecture& arch, const model::ModelParams& params,
                  const ModePlan& plan, const TrainConfig& config,
                  TrainHistory& history, bool& warned) {
  if (val.has_value()) {
    const ValMetrics m =
        evaluate_split(*val, arch, params, plan, config, history, warned);
    stats.rec_val = m.rec;
    stats.corr_val = m.corr;
    stats.joint_val = m.joint;
  } else {
    stats.rec_val = stats.rec_train;
    stats.corr_val = stats.corr_train;
    stats.joint_val = stats.joint_train;
  }
}

}  // namespace

Mode mode_from_string(const std::string& s) {
  if (s == "supervised" || s == "fair") return Mode::kSupervised;
  if (s == "semi_supervised") return Mode::kSemiSupervised;
  if (s == "ablation_no_bias" || s == "no_bias") return Mode::kAblationNoBias;
  if (s == "ablation_plain_ae" || s == "plain_ae") return Mode::kAblationPlainAe;
  throw ConfigError("unknown training mode: " + s);
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kSupervised: return "supervised";
    case Mode::kSemiSupervised: return "semi_supervised";
    case Mode::kAblationNoBias: return "ablation_no_bias";
    case Mode::kAblationPlainAe: return "ablation_plain_ae";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (batch_size < 2 || batch_size % 2 != 0)
    throw ConfigError("train config: batch size must be even and >= 2");
  if (mode == Mode::kSemiSupervised && batch_size / 2 < losses::kMinCorrBatch)
    throw ConfigError("train config: semi-supervised batch size must satisfy "
                      "batch_size/2 >= " + std::to_string(losses::kMinCorrBatch));
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning rate must be > 0");
  loss_config().validate();
}

losses::LossConfig TrainConfig::loss_config() const {
  losses::LossConfig lc;
  lc.eta = eta;
  lc.lambda = lambda;
  lc.variance_floor = variance_floor;
  return lc;
}

void LabelledData::validate() const {
  if (X.rows() != t.size())
    throw ShapeError("labelled data: X rows " + std::to_string(X.rows()) +
                     " vs target length " + std::to_string(t.size()));
  if (S.cols() > 0 && S.rows() != X.rows())
    throw ShapeError("labelled data: X rows vs bias rows mismatch");
  if (!X.allFinite() || !t.allFinite() || !S.allFinite())
    throw NumericError("labelled data: non-finite entries");
}

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out << "epoch,rec_train,corr_train,joint_train,rec_val,corr_val,joint_val\n";
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const EpochStats& e = epochs[i];
    out << i << ',' << format_double(e.rec_train) << ',' << format_double(e.corr_train)
        << ',' << format_double(e.joint_train) << ',' << format_double(e.rec_val)
        << ',' << format_double(e.corr_val) << ',' << format_double(e.joint_val)
        << '\n';
  }
  return out.str();
}

void AdamState::init(const std::vector<Matrix>& params) {
  m.clear();
  v.clear();
  for (const Matrix& p : params) {
    m.push_back(Matrix::Zero(p.rows(), p.cols()));
    v.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  t = 0;
}

bool adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
               AdamState& state, const AdamConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError("adam_step: parameter/gradient/state count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols())
      throw ShapeError("adam_step: shape mismatch at tensor " + std::to_string(i));
  if (!all_finite(grads)) return false;

  state.t += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
    state.v[i].array() = config.beta2 * state.v[i].array() +
                         (1.0 - config.beta2) * grads[i].array().square();
    params[i].array() -= config.learning_rate * (state.m[i].array() / bc1) /
                         ((state.v[i].array() / bc2).sqrt() + config.eps);
  }
  return true;
}

TrainResult train_supervised(const LabelledData& data,
                             const std::optional<LabelledData>& val,
                             const model::Architecture& arch,
                             const TrainConfig& config) {
  config.validate();
  arch.validate();
  data.validate();
  if (val.has_value()) val->validate();
  if (data.X.rows() < config.batch_size)
    throw DataError("train_supervised: dataset smaller than one batch (" +
                    std::to_string(data.X.rows()) + " < " +
                    std::to_string(config.batch_size) + ")");

  const ModePlan plan = plan_for(config);
  model::ModelParams params = model::init_params(arch, config.seed);
  Optimizer opt(params, config.learning_rate, config.seed);
  Rng shuffle_rng = sub_rng(config.seed, "train-shuffle");

  TrainResult result;
  TrainHistory& history = result.history;
  bool val_warned = false;
  std::vector<int> order = iota_indices(data.X.rows());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    shuffle_rng.shuffle(order);

    EpochStats stats;
    int executed = 0;
    int considered = 0;
    double rec_sum = 0.0, corr_sum = 0.0, joint_sum = 0.0;
    const std::size_t n = order.size();
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      // Trailing batches below the minimum correlation batch size are dropped.
      if (end - begin < static_cast<std::size_t>(losses::kMinCorrBatch)) break;
      considered += 1;

      const Matrix Xb = take_rows(data.X, order, begin, end);
      const Vector tb = take_rows(data.t, order, begin, end);
      Matrix Sb;
      if (plan.use_corr && plan.use_biases)
        Sb = take_rows(data.S, order, begin, end);
      else
        Sb.resize(static_cast<Index>(end - begin), 0);

      if (plan.use_corr) {
        try {
          losses::check_corr_batch(tb, plan.use_biases ? Sb : Matrix(Xb.rows(), 0));
        } catch (const NumericError&) {
          stats.skipped_batches += 1;
          history.degenerate_skips += 1;
          continue;
        }
      }

      StepOutcome outcome = run_step(params, arch, Xb, &tb, &Sb, plan, config, opt,
                                     /*update_projection=*/true, history);
      if (outcome.nonfinite) {
        stats.skipped_batches += 1;
        continue;
      }
      executed += 1;
      stats.optimizer_phases += 1;
      rec_sum += outcome.rec;
      corr_sum += outcome.corr;
      joint_sum += outcome.joint;
    }

    if (considered > 0 && stats.skipped_batches * 2 > considered)
      throw NumericError("training aborted at epoch " + std::to_string(epoch) +
                         ": " + std::to_string(stats.skipped_batches) + " of " +
                         std::to_string(considered) + " batches skipped");
    if (executed > 0) {
      stats.rec_train = rec_sum / executed;
      stats.corr_train = corr_sum / executed;
      stats.joint_train = joint_sum / executed;
    }
    finish_epoch(stats, val, arch, params, plan, config, history, val_warned);
    stats.wall_ms = ms_since(epoch_start);
    history.epochs.push_back(stats);
  }

  result.params = std::move(params);
  return result;
}

TrainResult train_semisupervised(const Matrix& X_unlabelled,
                                 const LabelledData& labelled,
                                 const std::optional<LabelledData>& val,
                                 const model::Architecture& arch,
                                 const TrainConfig& config) {
  config.validate();
  arch.validate();
  labelled.validate();
  if (val.has_value()) val->validate();

  if (X_unlabelled.rows() == 0) {
    TrainConfig fallback = config;
    fallback.mode = Mode::kSupervised;
    TrainResult result = train_supervised(labelled, val, arch, fallback);
    result.history.notices.push_back(
        "unlabelled pool empty: fell back to supervised training");
    return result;
  }
  if (X_unlabelled.cols() != labelled.X.cols())
    throw ShapeError("train_semisupervised: unlabelled/labelled width mismatch");
  if (!X_unlabelled.allFinite())
    throw NumericError("train_semisupervised: non-finite unlabelled rows");

  const int half = config.batch_size / 2;
  if (labelled.X.rows() < half)
    throw DataError("train_semisupervised: labelled pool smaller than half a batch");

  const ModePlan plan = plan_for(config);
  model::ModelParams params = model::init_params(arch, config.seed);
  Optimizer opt(params, config.learning_rate, config.seed);
  Rng rng_u = sub_rng(config.seed, "semisup-shuffle-unlabelled");
  Rng rng_l = sub_rng(config.seed, "semisup-shuffle-labelled");

  TrainResult result;
  TrainHistory& history = result.history;
  bool val_warned = false;

  const std::size_t n_sample = static_cast<std::size_t>(
      std::min(X_unlabelled.rows(), labelled.X.rows()));
  history.n_sample = static_cast<long>(n_sample);

  std::vector<int> pool_u = iota_indices(X_unlabelled.rows());
  std::vector<int> pool_l = iota_indices(labelled.X.rows());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    rng_u.shuffle(pool_u);
    rng_l.shuffle(pool_l);

    EpochStats stats;
    int executed_joint = 0;
    int considered_joint = 0;
    double rec_sum = 0.0, corr_sum = 0.0, joint_sum = 0.0;
    for (std::size_t j = 0; j < n_sample; j += static_cast<std::size_t>(half)) {
      const std::size_t end = std::min(n_sample, j + static_cast<std::size_t>(half));

      // Phase 1: reconstruction on the unlabelled half-batch, theta_pe frozen.
      const Matrix Xu = take_rows(X_unlabelled, pool_u, j, end);
      const Vector p_before = params.projection;
      StepOutcome rec_outcome = run_step(params, arch, Xu, nullptr, nullptr, plan,
                                         config, opt, /*update_projection=*/false,
                                         history);
      if ((params.projection.array() != p_before.array()).any())
        throw NumericError("internal: projection direction changed during a "
                           "reconstruction-only update");
      if (rec_outcome.applied) stats.optimizer_phases += 1;

      // Phase 2: joint loss on the labelled half-batch.
      considered_joint += 1;
      if (end - j < static_cast<std::size_t>(losses::kMinCorrBatch)) {
        stats.skipped_batches += 1;
        history.degenerate_skips += 1;
        continue;
      }
      const Matrix Xl = take_rows(labelled.X, pool_l, j, end);
      const Vector tl = take_rows(labelled.t, pool_l, j, end);
      Matrix Sl;
      if (plan.use_corr && plan.use_biases)
        Sl = take_rows(labelled.S, pool_l, j, end);
      else
        Sl.resize(static_cast<Index>(end - j), 0);
      if (plan.use_corr) {
        try {
          losses::check_corr_batch(tl, plan.use_biases ? Sl : Matrix(Xl.rows(), 0));
        } catch (const NumericError&) {
          stats.skipped_batches += 1;
          history.degenerate_skips += 1;
          continue;
        }
      }
      StepOutcome outcome = run_step(params, arch, Xl, &tl, &Sl, plan, config, opt,
                                     /*update_projection=*/true, history);
      if (outcome.nonfinite) {
        stats.skipped_batches += 1;
        continue;
      }
      executed_joint += 1;
      stats.optimizer_phases += 1;
      rec_sum += outcome.rec;
      corr_sum += outcome.corr;
      joint_sum += outcome.joint;
    }

    if (considered_joint > 0 && stats.skipped_batches * 2 > considered_joint)
      throw NumericError("semi-supervised training aborted at epoch " +
                         std::to_string(epoch) + ": " +
                         std::to_string(stats.skipped_batches) + " of " +
                         std::to_string(considered_joint) +
                         " labelled half-batches skipped");
    // Train metrics report the joint-phase objective, matching the supervised
    // history semantics.
    if (executed_joint > 0) {
      stats.rec_train = rec_sum / executed_joint;
      stats.corr_train = corr_sum / executed_joint;
      stats.joint_train = joint_sum / executed_joint;
    }
    finish_epoch(stats, val, arch, params, plan, config, history, val_warned);
    stats.wall_ms = ms_since(epoch_start);
    history.epochs.push_back(stats);
  }

  result.params = std::move(params);
  return result;
}

}  // namespace fairlat::train
