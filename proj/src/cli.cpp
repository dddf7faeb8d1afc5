#include "fairlat/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <sstream>

#include "fairlat/config.hpp"
#include "fairlat/errors.hpp"
#include "fairlat/eval.hpp"
#include "fairlat/gradcheck.hpp"
#include "fairlat/losses.hpp"
#include "fairlat/model.hpp"
#include "fairlat/parallel.hpp"
#include "fairlat/synth.hpp"
#include "fairlat/textio.hpp"
#include "fairlat/train.hpp"
#include "fairlat/traverse.hpp"

namespace fairlat::cli {

namespace {

namespace fs = std::filesystem;

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct Context {
  Config config;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
};

Context make_context(const Options& options, bool needs_config) {
  Context ctx;
  if (needs_config) {
    if (options.config_path.empty())
      throw ConfigError("missing --config PATH for command");
    ctx.config = Config::parse_file(options.config_path);
    ctx.config.check_sections(
        {"global", "generate", "arch", "train", "eval", "traverse", "sweep"});
  }
  const std::uint64_t config_seed = ctx.config.get_seed("global", "seed", 0);
  const std::string config_out = ctx.config.get_string("global", "out", "out");
  ctx.seed = options.seed.value_or(config_seed);
  ctx.out_dir = options.out_dir.value_or(config_out);
  ctx.jobs = options.jobs;
  fs::create_directories(ctx.out_dir);
  return ctx;
}

std::string out_path(const Context& ctx, const std::string& name) {
  return (fs::path(ctx.out_dir) / name).string();
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

synth::GenSpec parse_gen_spec(const Context& ctx) {
  const Config& c = ctx.config;
  synth::GenSpec spec;
  spec.rows = static_cast<int>(c.get_int("generate", "rows"));
  spec.dims = static_cast<int>(c.get_int("generate", "dims"));
  spec.map_kind = synth::map_from_string(c.get_string("generate", "map", "linear"));
  spec.noise_sigma = c.get_double("generate", "noise_sigma", 1.0);
  spec.labelled_fraction = c.get_double("generate", "labelled_fraction", 1.0);
  spec.seed = ctx.seed;

  for (const std::string& item : c.get_list("generate", "attributes")) {
    std::istringstream in(item);
    std::string name, kind, role;
    if (!std::getline(in, name, ':') || !std::getline(in, kind, ':') ||
        !std::getline(in, role))
      throw ConfigError("generate.attributes entry '" + item +
                        "' must be name:kind:role");
    synth::AttrSpec attr;
    attr.name = name;
    attr.kind = synth::kind_from_string(kind);
    attr.role = synth::role_from_string(role);
    spec.attributes.push_back(attr);
  }

  const Index a = static_cast<Index>(spec.attributes.size());
  spec.corr = Matrix::Identity(a, a);
  auto attr_index = [&](const std::string& name) {
    for (Index i = 0; i < a; ++i)
      if (spec.attributes[static_cast<std::size_t>(i)].name == name) return i;
    throw ConfigError("generate.corr refers to unknown attribute '" + name + "'");
  };
  if (c.has("generate", "corr")) {
    for (const std::string& item : c.get_list("generate", "corr")) {
      std::istringstream in(item);
      std::string first, second, value;
      if (!std::getline(in, first, ':') || !std::getline(in, second, ':') ||
          !std::getline(in, value))
        throw ConfigError("generate.corr entry '" + item + "' must be a:b:value");
      const auto v = parse_double(value);
      if (!v) throw ConfigError("generate.corr entry '" + item + "': bad number");
      const Index i = attr_index(first);
      const Index j = attr_index(second);
      if (i == j) throw ConfigError("generate.corr: diagonal entries are fixed at 1");
      spec.corr(i, j) = *v;
      spec.corr(j, i) = *v;
    }
  }
  return spec;
}

model::Architecture parse_arch(const Context& ctx, int input_dim) {
  const Config& c = ctx.config;
  model::Architecture arch;
  arch.input_dim = input_dim;
  arch.latent_dim = static_cast<int>(c.get_int("arch", "latent"));
  arch.enc_hidden.clear();
  for (const std::string& w : c.get_list("arch", "enc_hidden", {"64"}))
    arch.enc_hidden.push_back(std::stoi(w));
  arch.dec_hidden.clear();
  for (const std::string& w : c.get_list("arch", "dec_hidden", {"64"}))
    arch.dec_hidden.push_back(std::stoi(w));
  arch.activation =
      model::activation_from_string(c.get_string("arch", "activation", "tanh"));
  arch.validate();
  return arch;
}

struct TrainSetup {
  std::string data_path;
  std::string target;
  std::vector<std::string> biases;
  double val_fraction = 0.1;
  train::TrainConfig config;
};

TrainSetup parse_train(const Context& ctx) {
  const Config& c = ctx.config;
  TrainSetup setup;
  setup.data_path = c.get_string("train", "data");
  setup.target = c.get_string("train", "target");
  setup.biases = c.get_list("train", "biases", {});
  setup.val_fraction = c.get_double("train", "val_fraction", 0.1);
  if (setup.val_fraction < 0.0 || setup.val_fraction >= 1.0)
    throw ConfigError("train.val_fraction must lie in [0, 1)");
  setup.config.mode = train::mode_from_string(c.get_string("train", "mode", "supervised"));
  setup.config.epochs = static_cast<int>(c.get_int("train", "epochs", 200));
  setup.config.batch_size = static_cast<int>(c.get_int("train", "batch", 64));
  setup.config.learning_rate = c.get_double("train", "lr", 1e-3);
  setup.config.eta = c.get_double("train", "eta", 0.5);
  setup.config.lambda = c.get_double("train", "lambda", 1.0);
  setup.config.variance_floor = c.get_double("train", "variance_floor", 1e-8);
  setup.config.seed = ctx.seed;
  setup.config.validate();
  return setup;
}

void echo_train(Manifest& manifest, const TrainSetup& setup) {
  manifest.set("train", "data", setup.data_path);
  manifest.set("train", "target", setup.target);
  manifest.set("train", "biases", join(setup.biases, ","));
  manifest.set("train", "mode", train::to_string(setup.config.mode));
  manifest.set("train", "epochs", static_cast<long>(setup.config.epochs));
  manifest.set("train", "batch", static_cast<long>(setup.config.batch_size));
  manifest.set("train", "lr", setup.config.learning_rate);
  manifest.set("train", "eta", setup.config.eta);
  manifest.set("train", "lambda", setup.config.lambda);
  manifest.set("train", "variance_floor", setup.config.variance_floor);
  manifest.set("train", "val_fraction", setup.val_fraction);
}

void echo_arch(Manifest& manifest, const model::Architecture& arch) {
  manifest.set("arch", "input_dim", static_cast<long>(arch.input_dim));
  manifest.set("arch", "latent", static_cast<long>(arch.latent_dim));
  std::vector<std::string> enc, dec;
  for (int w : arch.enc_hidden) enc.push_back(std::to_string(w));
  for (int w : arch.dec_hidden) dec.push_back(std::to_string(w));
  manifest.set("arch", "enc_hidden", join(enc, ","));
  manifest.set("arch", "dec_hidden", join(dec, ","));
  manifest.set("arch", "activation", model::to_string(arch.activation));
}

// Deterministic validation carve-out from the labelled rows.
struct ValSplit {
  std::vector<int> train_rows;
  std::vector<int> val_rows;
};

ValSplit split_validation(const std::vector<int>& labelled, double fraction,
                          std::uint64_t seed) {
  ValSplit split;
  split.train_rows = labelled;
  if (fraction <= 0.0) return split;
  std::vector<int> order = labelled;
  Rng rng = sub_rng(seed, "val-split");
  rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(order.size())));
  split.val_rows.assign(order.begin(), order.begin() + n_val);
  split.train_rows.assign(order.begin() + n_val, order.end());
  std::sort(split.val_rows.begin(), split.val_rows.end());
  std::sort(split.train_rows.begin(), split.train_rows.end());
  return split;
}

int cmd_generate(const Options& options) {
  Context ctx = make_context(options, true);
  const synth::GenSpec spec = parse_gen_spec(ctx);
  ctx.config.check_consumed({"global", "generate"});

  const synth::GenResult gen = synth::generate(spec);
  const std::string csv_path = out_path(ctx, "dataset.csv");
  synth::write_csv(gen.dataset, csv_path);

  Manifest manifest;
  manifest.set("global", "seed", ctx.seed);
  manifest.set("global", "out", ctx.out_dir);
  manifest.set("generate", "rows", static_cast<long>(spec.rows));
  manifest.set("generate", "dims", static_cast<long>(spec.dims));
  manifest.set("generate", "map", synth::to_string(spec.map_kind));
  manifest.set("generate", "noise_sigma", spec.noise_sigma);
  manifest.set("generate", "labelled_fraction", spec.labelled_fraction);
  std::vector<std::string> attrs;
  for (const synth::AttrSpec& a : spec.attributes)
    attrs.push_back(a.name + ":" + synth::to_string(a.kind) + ":" +
                    synth::to_string(a.role));
  manifest.set("generate", "attributes", join(attrs, ","));

  const Matrix emp = synth::empirical_attribute_corr(gen.dataset);
  for (Index i = 0; i < emp.rows(); ++i)
    for (Index j = i + 1; j < emp.cols(); ++j)
      manifest.set("empirical_corr",
                   spec.attributes[static_cast<std::size_t>(i)].name + "__" +
                       spec.attributes[static_cast<std::size_t>(j)].name,
                   emp(i, j));
  for (const synth::AttrSpec& a : spec.attributes) {
    std::vector<std::string> dims;
    for (int d : synth::wired_dims(gen, a.name)) dims.push_back(std::to_string(d));
    manifest.set("wiring", a.name, join(dims, ","));
  }
  manifest.set("artifacts", "dataset.csv", hex64(hash_file(csv_path)));
  manifest.write(out_path(ctx, "manifest_generate.txt"));
  return kExitOk;
}

int cmd_train(const Options& options) {
  Context ctx = make_context(options, true);
  TrainSetup setup = parse_train(ctx);
  std::vector<std::string> notices;
  const synth::Dataset dataset = synth::read_csv(setup.data_path, &notices);
  const model::Architecture arch = parse_arch(ctx, static_cast<int>(dataset.X.cols()));
  ctx.config.check_consumed({"global", "train", "arch"});

  const ValSplit split =
      split_validation(dataset.labelled_rows(), setup.val_fraction, ctx.seed);
  const train::LabelledData train_data =
      synth::make_labelled(dataset, split.train_rows, setup.target, setup.biases);
  std::optional<train::LabelledData> val;
  if (!split.val_rows.empty())
    val = synth::make_labelled(dataset, split.val_rows, setup.target, setup.biases);

  train::TrainResult result;
  if (setup.config.mode == train::Mode::kSemiSupervised) {
    const Matrix X_u = synth::rows_of(dataset.X, dataset.unlabelled_rows());
    result = train::train_semisupervised(X_u, train_data, val, arch, setup.config);
  } else {
    result = train::train_supervised(train_data, val, arch, setup.config);
  }

  const std::string ckpt_path = out_path(ctx, "checkpoint.bin");
  const std::string history_path = out_path(ctx, "history.csv");
  model::save_checkpoint(result.params, arch, ckpt_path);
  write_text_file(history_path, result.history.to_csv());

  Manifest manifest;
  manifest.set("global", "seed", ctx.seed);
  manifest.set("global", "out", ctx.out_dir);
  echo_train(manifest, setup);
  echo_arch(manifest, arch);
  manifest.set("result", "epochs_run", static_cast<long>(result.history.epochs.size()));
  manifest.set("result", "n_sample", result.history.n_sample);
  manifest.set("result", "degenerate_skips", result.history.degenerate_skips);
  manifest.set("result", "nonfinite_skips", result.history.nonfinite_skips);
  for (const std::string& n : result.history.notices) notices.push_back(n);
  if (!notices.empty()) manifest.set("result", "notices", join(notices, "; "));
  manifest.set("artifacts", "dataset", hex64(hash_file(setup.data_path)));
  manifest.set("artifacts", "checkpoint.bin", hex64(hash_file(ckpt_path)));
  manifest.set("artifacts", "history.csv", hex64(hash_file(history_path)));
  manifest.write(out_path(ctx, "manifest_train.txt"));
  return kExitOk;
}

eval::EvalReport checkpoint_eval(const Context& ctx, const synth::Dataset& dataset,
                                 const TrainSetup& setup,
                                 const std::string& checkpoint_path, int folds,
                                 const std::optional<std::string>& stratify) {
  auto [params, arch] = model::load_checkpoint(checkpoint_path);
  if (static_cast<Index>(arch.input_dim) != dataset.X.cols())
    throw DataError("checkpoint input dim " + std::to_string(arch.input_dim) +
                    " does not match dataset dims " + std::to_string(dataset.X.cols()));
  if (ctx.config.has_section("arch")) {
    const model::Architecture requested =
        parse_arch(ctx, static_cast<int>(dataset.X.cols()));
    if (!(requested == arch))
      throw DataError("checkpoint architecture (latent " +
                      std::to_string(arch.latent_dim) +
                      ") does not match the requested architecture (latent " +
                      std::to_string(requested.latent_dim) + ")");
  }

  const synth::Attribute& target_attr = dataset.attribute(setup.target);
  const bool binary = target_attr.kind == synth::AttrKind::kBinary;
  const auto fold_defs = synth::kfold_split(dataset, folds, ctx.seed, stratify);

  eval::EvalReport report;
  report.target = setup.target;
  report.bias_names = setup.biases;
  report.folds = folds;
  for (const std::string& b : setup.biases)
    report.truth_corr.push_back(
        losses::pearson_corr(target_attr.values, dataset.attribute(b).values));

  eval::MethodReport method;
  method.method = "checkpoint";
  method.accuracy_metric = binary ? "AUC" : "R-MSE";
  method.has_prediction = true;
  for (const synth::Fold& fold : fold_defs) {
    const train::LabelledData tr =
        synth::make_labelled(dataset, fold.train_rows, setup.target, setup.biases);
    const train::LabelledData te =
        synth::make_labelled(dataset, fold.test_rows, setup.target, setup.biases);
    const Vector zp_train =
        model::project(model::encode(arch, params, tr.X), params.projection);
    const eval::Predictor pred = eval::fit_predictor(
        zp_train, tr.t,
        binary ? eval::PredictorKind::kLogistic : eval::PredictorKind::kLinear);
    const Matrix Z_test = model::encode(arch, params, te.X);
    const Vector scores = pred.score(model::project(Z_test, params.projection));
    eval::FoldMetrics m;
    m.has_prediction = true;
    m.accuracy = binary ? eval::auc(scores, te.t) : eval::rmse(scores, te.t);
    for (Index j = 0; j < te.S.cols(); ++j)
      m.bias_corr.push_back(eval::signed_bias_corr(scores, te.S.col(j)).raw);
    m.rec_l1 = eval::rec_error_l1(te.X, model::decode(arch, params, Z_test));
    m.diversity = eval::latent_corr_matrix(Z_test).mean_abs_offdiag;
    method.folds.push_back(m);
  }
  // Aggregate row mirrors cross_validate.
  eval::FoldMetrics agg;
  agg.has_prediction = true;
  agg.bias_corr.assign(setup.biases.size(), 0.0);
  for (const eval::FoldMetrics& f : method.folds) {
    agg.accuracy += f.accuracy;
    agg.rec_l1 += f.rec_l1;
    agg.diversity += f.diversity;
    for (std::size_t j = 0; j < agg.bias_corr.size(); ++j)
      agg.bias_corr[j] += f.bias_corr[j];
  }
  const double n = static_cast<double>(method.folds.size());
  agg.accuracy /= n;
  agg.rec_l1 /= n;
  agg.diversity /= n;
  for (double& c : agg.bias_corr) c /= n;
  method.aggregate = agg;
  report.methods.push_back(std::move(method));
  return report;
}

int cmd_eval(const Options& options) {
  Context ctx = make_context(options, true);
  TrainSetup setup = parse_train(ctx);
  const std::string data_path =
      ctx.config.get_string("eval", "data", setup.data_path);
  const int folds = static_cast<int>(ctx.config.get_int("eval", "folds", 5));
  std::optional<std::string> stratify;
  if (ctx.config.has("eval", "stratify"))
    stratify = ctx.config.get_string("eval", "stratify");
  const std::vector<std::string> method_names =
      ctx.config.get_list("eval", "methods", {"fair", "no_bias", "plain_ae"});
  std::optional<std::string> checkpoint;
  if (ctx.config.has("eval", "checkpoint"))
    checkpoint = ctx.config.get_string("eval", "checkpoint");

  std::vector<std::string> notices;
  const synth::Dataset dataset = synth::read_csv(data_path, &notices);

  eval::EvalReport report;
  if (checkpoint.has_value()) {
    report = checkpoint_eval(ctx, dataset, setup, *checkpoint, folds, stratify);
    ctx.config.check_consumed({"global", "train", "arch", "eval"});
  } else {
    const model::Architecture arch =
        parse_arch(ctx, static_cast<int>(dataset.X.cols()));
    ctx.config.check_consumed({"global", "train", "arch", "eval"});
    std::vector<train::Mode> methods;
    for (const std::string& name : method_names)
      methods.push_back(train::mode_from_string(name));
    eval::CvSpec spec;
    spec.target = setup.target;
    spec.biases = setup.biases;
    spec.folds = folds;
    spec.stratify = stratify;
    spec.seed = ctx.seed;
    spec.jobs = ctx.jobs;
    report = eval::evaluate_methods(dataset, arch, setup.config, methods, spec);
  }

  const std::string csv_path = out_path(ctx, "report.csv");
  const std::string table_path = out_path(ctx, "report.txt");
  write_text_file(csv_path, report.to_csv());
  write_text_file(table_path, report.to_table());
  if (!options.quiet) std::cout << report.to_table();

  Manifest manifest;
  manifest.set("global", "seed", ctx.seed);
  manifest.set("global", "out", ctx.out_dir);
  echo_train(manifest, setup);
  manifest.set("eval", "data", data_path);
  manifest.set("eval", "folds", static_cast<long>(folds));
  manifest.set("eval", "methods", join(method_names, ","));
  if (stratify) manifest.set("eval", "stratify", *stratify);
  if (checkpoint) manifest.set("eval", "checkpoint", *checkpoint);
  if (!notices.empty()) manifest.set("result", "notices", join(notices, "; "));
  manifest.set("artifacts", "dataset", hex64(hash_file(data_path)));
  manifest.set("artifacts", "report.csv", hex64(hash_file(csv_path)));
  manifest.set("artifacts", "report.txt", hex64(hash_file(table_path)));
  manifest.write(out_path(ctx, "manifest_eval.txt"));
  return kExitOk;
}

int cmd_traverse(const Options& options) {
  Context ctx = make_context(options, true);
  const std::string data_path = ctx.config.get_string("traverse", "data");
  const std::string ckpt_path = ctx.config.get_string("traverse", "checkpoint");
  const int frames = static_cast<int>(ctx.config.get_int("traverse", "frames", 10));
  const traverse::ScheduleMode schedule_mode = traverse::schedule_from_string(
      ctx.config.get_string("traverse", "schedule", "sigma_range"));
  const std::string rows_kind = ctx.config.get_string("traverse", "rows", "all");
  const std::string target = ctx.config.get_string("train", "target");
  double range_min = 0.0, range_max = 0.0;
  if (schedule_mode == traverse::ScheduleMode::kTargetRange) {
    range_min = ctx.config.get_double("traverse", "range_min");
    range_max = ctx.config.get_double("traverse", "range_max");
  }
  ctx.config.check_consumed({"global", "traverse"});

  std::vector<std::string> notices;
  const synth::Dataset dataset = synth::read_csv(data_path, &notices);
  auto [params, arch] = model::load_checkpoint(ckpt_path);
  if (static_cast<Index>(arch.input_dim) != dataset.X.cols())
    throw DataError("checkpoint input dim does not match dataset");

  std::vector<int> rows;
  if (rows_kind == "all") {
    rows.resize(static_cast<std::size_t>(dataset.X.rows()));
    std::iota(rows.begin(), rows.end(), 0);
  } else if (rows_kind == "labelled") {
    rows = dataset.labelled_rows();
  } else if (rows_kind == "unlabelled") {
    rows = dataset.unlabelled_rows();
  } else {
    throw ConfigError("traverse.rows must be all|labelled|unlabelled");
  }
  if (rows.empty()) throw DataError("traverse: no rows selected");

  const Matrix X = synth::rows_of(dataset.X, rows);
  const Matrix Z = model::encode(arch, params, X);
  const Vector z_p = model::project(Z, params.projection);
  const synth::Attribute& target_attr = dataset.attribute(target);
  Vector t(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    t(static_cast<Index>(i)) = target_attr.values(rows[i]);
  const bool binary = target_attr.kind == synth::AttrKind::kBinary;
  const eval::Predictor predictor = eval::fit_predictor(
      z_p, t, binary ? eval::PredictorKind::kLogistic : eval::PredictorKind::kLinear);

  const Vector d_bar = traverse::mean_latent(Z);
  const double p_norm = params.projection.norm();
  std::vector<double> schedule;
  if (schedule_mode == traverse::ScheduleMode::kSigmaRange) {
    schedule = traverse::k_schedule_sigma(z_p, frames, p_norm);
  } else {
    const double z_ref = model::project(d_bar.transpose(), params.projection)(0);
    schedule = traverse::k_schedule_target(predictor, z_ref, p_norm, frames,
                                           range_min, range_max);
  }
  const traverse::TraversalResult result =
      traverse::run_traversal(arch, params, predictor, d_bar, schedule);
  traverse::export_traversal(result, out_path(ctx, "traversal_"));

  Manifest manifest;
  manifest.set("global", "seed", ctx.seed);
  manifest.set("global", "out", ctx.out_dir);
  manifest.set("traverse", "data", data_path);
  manifest.set("traverse", "checkpoint", ckpt_path);
  manifest.set("traverse", "frames", static_cast<long>(frames));
  manifest.set("traverse", "schedule", traverse::to_string(schedule_mode));
  manifest.set("traverse", "rows", rows_kind);
  manifest.set("train", "target", target);
  if (schedule_mode == traverse::ScheduleMode::kTargetRange) {
    manifest.set("traverse", "range_min", range_min);
    manifest.set("traverse", "range_max", range_max);
  }
  if (!notices.empty()) manifest.set("result", "notices", join(notices, "; "));
  manifest.set("artifacts", "traversal_frames.csv",
               hex64(hash_file(out_path(ctx, "traversal_frames.csv"))));
  manifest.set("artifacts", "traversal_difference_map.csv",
               hex64(hash_file(out_path(ctx, "traversal_difference_map.csv"))));
  manifest.write(out_path(ctx, "manifest_traverse.txt"));
  return kExitOk;
}

int cmd_sweep(const Options& options) {
  Context ctx = make_context(options, true);
  TrainSetup setup = parse_train(ctx);
  const std::vector<std::string> bias_order = ctx.config.get_list("sweep", "bias_order");
  const double split_fraction = ctx.config.get_double("sweep", "split_fraction", 0.8);
  if (bias_order.empty()) throw ConfigError("sweep.bias_order must name at least one bias");
  if (split_fraction <= 0.0 || split_fraction >= 1.0)
    throw ConfigError("sweep.split_fraction must lie in (0, 1)");

  std::vector<std::string> notices;
  const synth::Dataset dataset = synth::read_csv(setup.data_path, &notices);
  const model::Architecture arch = parse_arch(ctx, static_cast<int>(dataset.X.cols()));
  ctx.config.check_consumed({"global", "train", "arch", "sweep"});

  // One deterministic train/test split shared by every setting.
  std::vector<int> labelled = dataset.labelled_rows();
  Rng rng = sub_rng(ctx.seed, "sweep-split");
  rng.shuffle(labelled);
  const auto n_train = static_cast<std::size_t>(
      std::floor(split_fraction * static_cast<double>(labelled.size())));
  std::vector<int> train_rows(labelled.begin(), labelled.begin() + n_train);
  std::vector<int> test_rows(labelled.begin() + n_train, labelled.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  const synth::Attribute& target_attr = dataset.attribute(setup.target);
  const bool binary = target_attr.kind == synth::AttrKind::kBinary;
  const std::size_t n_settings = bias_order.size() + 1;

  struct SettingRow {
    std::vector<std::string> biases;
    double accuracy = 0.0;
    std::vector<double> corr;  // over all biases in bias_order
    double rec_l1 = 0.0;
  };
  std::vector<SettingRow> rows(n_settings);

  run_parallel(n_settings, ctx.jobs, [&](std::size_t i) {
    SettingRow& row = rows[i];
    row.biases.assign(bias_order.begin(), bias_order.begin() + i);
    const train::LabelledData tr =
        synth::make_labelled(dataset, train_rows, setup.target, row.biases);
    const train::LabelledData te =
        synth::make_labelled(dataset, test_rows, setup.target, bias_order);

    train::TrainConfig config = setup.config;
    config.mode = train::Mode::kSupervised;
    config.seed = fnv1a64("sweep-setting-" + std::to_string(i)) ^ ctx.seed;
    const train::TrainResult trained =
        train::train_supervised(tr, std::nullopt, arch, config);

    const Vector zp_train = model::project(
        model::encode(arch, trained.params, tr.X), trained.params.projection);
    const eval::Predictor pred = eval::fit_predictor(
        zp_train, tr.t,
        binary ? eval::PredictorKind::kLogistic : eval::PredictorKind::kLinear);
    const Matrix Z_test = model::encode(arch, trained.params, te.X);
    const Vector zp_test = model::project(Z_test, trained.params.projection);
    const Vector scores = pred.score(zp_test);
    row.accuracy = binary ? eval::auc(scores, te.t) : eval::rmse(scores, te.t);
    for (Index j = 0; j < te.S.cols(); ++j)
      row.corr.push_back(eval::signed_bias_corr(scores, te.S.col(j)).raw);
    row.rec_l1 = eval::rec_error_l1(te.X, model::decode(arch, trained.params, Z_test));

    const Vector d_bar = traverse::mean_latent(Z_test);
    const std::vector<double> schedule =
        traverse::k_schedule_sigma(zp_test, 10, trained.params.projection.norm());
    const traverse::TraversalResult traversal =
        traverse::run_traversal(arch, trained.params, pred, d_bar, schedule);
    traverse::export_traversal(
        traversal, out_path(ctx, "sweep_setting_" + std::to_string(i) + "_"));
  });

  std::ostringstream csv;
  csv << "setting,included_biases," << (binary ? "auc" : "rmse");
  for (const std::string& b : bias_order) csv << ",corr_" << b;
  csv << ",rec_error_l1\n";
  for (std::size_t i = 0; i < n_settings; ++i) {
    csv << i << ',' << join(rows[i].biases, "|") << ','
        << format_double(rows[i].accuracy);
    for (double c : rows[i].corr) csv << ',' << format_double(c);
    csv << ',' << format_double(rows[i].rec_l1) << '\n';
  }
  const std::string csv_path = out_path(ctx, "sweep.csv");
  write_text_file(csv_path, csv.str());

  Manifest manifest;
  manifest.set("global", "seed", ctx.seed);
  manifest.set("global", "out", ctx.out_dir);
  echo_train(manifest, setup);
  echo_arch(manifest, arch);
  manifest.set("sweep", "bias_order", join(bias_order, ","));
  manifest.set("sweep", "split_fraction", split_fraction);
  manifest.set("sweep", "settings", static_cast<long>(n_settings));
  if (!notices.empty()) manifest.set("result", "notices", join(notices, "; "));
  manifest.set("artifacts", "sweep.csv", hex64(hash_file(csv_path)));
  manifest.write(out_path(ctx, "manifest_sweep.txt"));
  return kExitOk;
}

int cmd_gradcheck(const Options& options) {
  const std::uint64_t seed = options.seed.has_value() ? *options.seed : 20240901ULL;
  const gradcheck::Summary summary = gradcheck::run_suite(seed, 100);
  std::cout << summary.to_table();
  return summary.pass ? kExitOk : kExitFailure;
}

}  // namespace

int run(const Options& options) {
  try {
    if (options.command == "generate") return cmd_generate(options);
    if (options.command == "train") return cmd_train(options);
    if (options.command == "eval") return cmd_eval(options);
    if (options.command == "traverse") return cmd_traverse(options);
    if (options.command == "sweep") return cmd_sweep(options);
    if (options.command == "gradcheck") return cmd_gradcheck(options);
    std::cerr << "unknown command: " << options.command << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace fairlat::cli
