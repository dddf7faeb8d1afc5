#include "fairlat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "fairlat/errors.hpp"
#include "fairlat/losses.hpp"
#include "fairlat/rng.hpp"
#include "fairlat/textio.hpp"

namespace fairlat::synth {

namespace {

constexpr double kTanhGain = 0.8;

bool is_binary_column(const VectorRef& v) {
  for (Index i = 0; i < v.size(); ++i)
    if (v(i) != 0.0 && v(i) != 1.0) return false;
  return true;
}

// Latent Gaussian correlation that realizes the requested attribute
// correlation after thresholding: continuous pairs pass through, mixed pairs
// divide out the point-biserial attenuation, binary pairs invert the
// orthant-probability identity corr = (2/pi) asin(rho).
double latent_corr_for(double target, AttrKind a, AttrKind b) {
  const bool ab = a == AttrKind::kBinary;
  const bool bb = b == AttrKind::kBinary;
  double rho;
  if (!ab && !bb) {
    rho = target;
  } else if (ab && bb) {
    if (std::abs(target) >= 1.0)
      throw DataError("correlation " + std::to_string(target) +
                      " unachievable for a binary/binary pair");
    rho = std::sin(M_PI * target / 2.0);
  } else {
    rho = target * std::sqrt(M_PI / 2.0);
  }
  if (std::abs(rho) > 1.0)
    throw DataError("correlation " + std::to_string(target) +
                    " unachievable for this attribute kind pair (latent " +
                    std::to_string(rho) + ")");
  return rho;
}

Matrix psd_factor(const Matrix& corr, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(corr);
  if (es.info() != Eigen::Success)
    throw NumericError(std::string(what) + ": eigendecomposition failed");
  const Vector& lam = es.eigenvalues();
  if (lam.minCoeff() < -1e-9)
    throw DataError(std::string(what) + " is not positive semi-definite: eigenvalue " +
                    format_double(lam.minCoeff()));
  Vector clamped = lam.cwiseMax(0.0);
  return es.eigenvectors() * clamped.cwiseSqrt().asDiagonal();
}

}  // namespace

AttrKind kind_from_string(const std::string& s) {
  if (s == "continuous") return AttrKind::kContinuous;
  if (s == "binary") return AttrKind::kBinary;
  throw ConfigError("unknown attribute kind: " + s);
}

AttrRole role_from_string(const std::string& s) {
  if (s == "target") return AttrRole::kTarget;
  if (s == "bias") return AttrRole::kBias;
  throw ConfigError("unknown attribute role: " + s);
}

std::string to_string(AttrKind k) {
  return k == AttrKind::kContinuous ? "continuous" : "binary";
}

std::string to_string(AttrRole r) {
  switch (r) {
    case AttrRole::kTarget: return "target";
    case AttrRole::kBias: return "bias";
    default: return "unspecified";
  }
}

SignalMap map_from_string(const std::string& s) {
  if (s == "linear") return SignalMap::kLinear;
  if (s == "tanh" || s == "tanh_nonlinear") return SignalMap::kTanhNonlinear;
  throw ConfigError("unknown signal map: " + s);
}

std::string to_string(SignalMap m) {
  return m == SignalMap::kLinear ? "linear" : "tanh_nonlinear";
}

void GenSpec::validate() const {
  const Index a = static_cast<Index>(attributes.size());
  if (a == 0) throw ConfigError("gen spec: at least one attribute required");
  if (rows < 2) throw ConfigError("gen spec: rows must be >= 2");
  if (dims < static_cast<int>(a) + kNuisanceFactors)
    throw ConfigError("gen spec: dims must be >= attributes + " +
                      std::to_string(kNuisanceFactors));
  if (corr.rows() != a || corr.cols() != a)
    throw ConfigError("gen spec: correlation matrix must be " + std::to_string(a) +
                      "x" + std::to_string(a));
  for (Index i = 0; i < a; ++i) {
    if (corr(i, i) != 1.0)
      throw ConfigError("gen spec: correlation matrix diagonal must be 1");
    for (Index j = 0; j < a; ++j) {
      if (std::abs(corr(i, j) - corr(j, i)) > 1e-12)
        throw ConfigError("gen spec: correlation matrix must be symmetric");
      if (std::abs(corr(i, j)) > 1.0)
        throw ConfigError("gen spec: correlation entries must lie in [-1, 1]");
    }
  }
  if (noise_sigma < 0.0) throw ConfigError("gen spec: noise sigma must be >= 0");
  if (!(labelled_fraction > 0.0) || labelled_fraction > 1.0)
    throw ConfigError("gen spec: labelled fraction must lie in (0, 1]");
  std::set<std::string> names;
  for (const AttrSpec& attr : attributes) {
    if (attr.name.empty()) throw ConfigError("gen spec: attribute name empty");
    if (attr.name == "labelled" || (attr.name.size() > 1 && attr.name[0] == 'x' &&
                                    attr.name.find_first_not_of("0123456789", 1) ==
                                        std::string::npos))
      throw ConfigError("gen spec: attribute name '" + attr.name +
                        "' collides with a reserved column name");
    if (!names.insert(attr.name).second)
      throw ConfigError("gen spec: duplicate attribute name '" + attr.name + "'");
  }
}

const Attribute& Dataset::attribute(const std::string& name) const {
  for (const Attribute& a : attributes)
    if (a.name == name) return a;
  throw DataError("no attribute named '" + name + "'");
}

bool Dataset::has_attribute(const std::string& name) const {
  for (const Attribute& a : attributes)
    if (a.name == name) return true;
  return false;
}

std::vector<int> Dataset::labelled_rows() const {
  std::vector<int> rows;
  for (std::size_t i = 0; i < labelled.size(); ++i)
    if (labelled[i]) rows.push_back(static_cast<int>(i));
  return rows;
}

std::vector<int> Dataset::unlabelled_rows() const {
  std::vector<int> rows;
  for (std::size_t i = 0; i < labelled.size(); ++i)
    if (!labelled[i]) rows.push_back(static_cast<int>(i));
  return rows;
}

void Dataset::validate() const {
  if (!X.allFinite()) throw DataError("dataset: non-finite observations");
  if (labelled.size() != static_cast<std::size_t>(X.rows()))
    throw DataError("dataset: label mask length mismatch");
  const std::vector<int> lab = labelled_rows();
  for (const Attribute& a : attributes) {
    if (a.values.size() != X.rows())
      throw DataError("dataset: attribute '" + a.name + "' length mismatch");
    if (!a.values.allFinite())
      throw DataError("dataset: attribute '" + a.name + "' has non-finite values");
    if (!lab.empty()) {
      double lo = a.values(lab.front()), hi = lo;
      for (int r : lab) {
        lo = std::min(lo, a.values(r));
        hi = std::max(hi, a.values(r));
      }
      if (lo == hi)
        throw DataError("dataset: attribute '" + a.name +
                        "' is constant over labelled rows");
    }
  }
}

GenResult generate(const GenSpec& spec) {
  spec.validate();
  const Index d = spec.rows;
  const Index a = static_cast<Index>(spec.attributes.size());
  const Index f = a + GenSpec::kNuisanceFactors;
  const Index m = spec.dims;

  // Reject on the requested matrix first so the reported eigenvalue refers
  // to the user's input; calibration errors come after.
  psd_factor(spec.corr, "correlation matrix");

  // Calibrated latent correlation so the observed (possibly thresholded)
  // attributes hit the requested matrix.
  Matrix latent_corr = Matrix::Identity(a, a);
  for (Index i = 0; i < a; ++i)
    for (Index j = i + 1; j < a; ++j) {
      const double rho = latent_corr_for(spec.corr(i, j), spec.attributes[i].kind,
                                         spec.attributes[j].kind);
      latent_corr(i, j) = rho;
      latent_corr(j, i) = rho;
    }
  const Matrix B = psd_factor(latent_corr, "calibrated latent correlation matrix");

  Rng rng_latent = sub_rng(spec.seed, "synth-latent");
  Matrix L(d, a);
  for (Index j = 0; j < a; ++j)
    for (Index i = 0; i < d; ++i) L(i, j) = rng_latent.normal();
  Matrix attr_values = L * B.transpose();
  for (Index j = 0; j < a; ++j)
    if (spec.attributes[j].kind == AttrKind::kBinary)
      attr_values.col(j) = (attr_values.col(j).array() > 0.0).cast<double>();

  Rng rng_nuisance = sub_rng(spec.seed, "synth-nuisance");
  GenResult gen;
  gen.factors.resize(d, f);
  gen.factors.leftCols(a) = attr_values;
  for (Index j = a; j < f; ++j)
    for (Index i = 0; i < d; ++i) gen.factors(i, j) = rng_nuisance.normal();

  // Wiring: dim i is owned by factor i mod F at weight 1 and also receives
  // the preceding factor at weight 0.5, so consecutive factors share dims and
  // disentangling is nontrivial.
  gen.weights = Matrix::Zero(f, m);
  for (Index i = 0; i < m; ++i) {
    const Index owner = i % f;
    const Index neighbour = (owner + f - 1) % f;
    gen.weights(owner, i) = 1.0;
    gen.weights(neighbour, i) += 0.5;
  }

  Matrix X = gen.factors * gen.weights;
  if (spec.map_kind == SignalMap::kTanhNonlinear)
    X = (kTanhGain * X.array()).tanh();
  if (spec.noise_sigma > 0.0) {
    Rng rng_noise = sub_rng(spec.seed, "synth-noise");
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < d; ++i)
        X(i, j) += spec.noise_sigma * rng_noise.normal();
  }

  Dataset& ds = gen.dataset;
  ds.X = std::move(X);
  for (Index j = 0; j < a; ++j) {
    Attribute attr;
    attr.name = spec.attributes[j].name;
    attr.kind = spec.attributes[j].kind;
    attr.role = spec.attributes[j].role;
    attr.values = attr_values.col(j);
    ds.attributes.push_back(std::move(attr));
  }
  ds.labelled.assign(static_cast<std::size_t>(d), 1);
  if (spec.labelled_fraction < 1.0) {
    const auto n_labelled = static_cast<std::size_t>(
        std::floor(spec.labelled_fraction * static_cast<double>(d)));
    if (n_labelled == 0)
      throw ConfigError("gen spec: labelled fraction leaves no labelled rows");
    std::vector<int> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    Rng rng_labels = sub_rng(spec.seed, "synth-labels");
    rng_labels.shuffle(order);
    ds.labelled.assign(static_cast<std::size_t>(d), 0);
    for (std::size_t i = 0; i < n_labelled; ++i) ds.labelled[order[i]] = 1;
  }
  ds.provenance = "generated seed=" + std::to_string(spec.seed) +
                  " rows=" + std::to_string(spec.rows) +
                  " dims=" + std::to_string(spec.dims) +
                  " map=" + to_string(spec.map_kind);
  ds.validate();
  return gen;
}

std::vector<int> wired_dims(const GenResult& gen, const std::string& name) {
  Index idx = -1;
  for (std::size_t j = 0; j < gen.dataset.attributes.size(); ++j)
    if (gen.dataset.attributes[j].name == name) idx = static_cast<Index>(j);
  if (idx < 0) throw DataError("wired_dims: no attribute named '" + name + "'");
  std::vector<int> dims;
  for (Index i = 0; i < gen.weights.cols(); ++i)
    if (gen.weights(idx, i) != 0.0) dims.push_back(static_cast<int>(i));
  return dims;
}

Matrix empirical_attribute_corr(const Dataset& dataset) {
  const Index a = static_cast<Index>(dataset.attributes.size());
  Matrix corr = Matrix::Identity(a, a);
  for (Index i = 0; i < a; ++i)
    for (Index j = i + 1; j < a; ++j) {
      const double c = losses::pearson_corr(dataset.attributes[i].values,
                                            dataset.attributes[j].values);
      corr(i, j) = c;
      corr(j, i) = c;
    }
  return corr;
}

void write_csv(const Dataset& dataset, const std::string& path) {
  dataset.validate();
  std::ostringstream out;
  const Index m = dataset.X.cols();
  for (Index i = 0; i < m; ++i) out << (i ? "," : "") << 'x' << i;
  for (const Attribute& a : dataset.attributes) out << ',' << a.name;
  out << ",labelled\n";
  for (Index r = 0; r < dataset.X.rows(); ++r) {
    for (Index c = 0; c < m; ++c)
      out << (c ? "," : "") << format_double(dataset.X(r, c));
    for (const Attribute& a : dataset.attributes)
      out << ',' << format_double(a.values(r));
    out << ',' << (dataset.labelled[static_cast<std::size_t>(r)] ? 1 : 0) << '\n';
  }
  write_text_file(path, out.str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell += ch;
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace

Dataset read_csv(const std::string& path, std::vector<std::string>* notices) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: empty file " + path);
  const std::vector<std::string> header = split_csv_line(line);

  std::set<std::string> seen;
  for (const std::string& name : header)
    if (!seen.insert(name).second)
      throw DataError("csv: duplicate column name '" + name + "'");

  std::size_t m = 0;
  while (m < header.size() && header[m] == "x" + std::to_string(m)) ++m;
  if (m == 0)
    throw DataError("csv: header must start with feature columns x0, x1, ...");
  bool has_labelled = !header.empty() && header.back() == "labelled";
  const std::size_t attr_begin = m;
  const std::size_t attr_end = header.size() - (has_labelled ? 1 : 0);
  for (std::size_t i = attr_begin; i < attr_end; ++i)
    if (header[i] == "labelled")
      throw DataError("csv: 'labelled' must be the final column");

  std::vector<std::vector<double>> columns(header.size());
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row_number;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("csv: row " + std::to_string(row_number) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_double(cells[c]);
      if (!v.has_value())
        throw DataError("csv: non-numeric cell at row " + std::to_string(row_number) +
                        ", column '" + header[c] + "'");
      columns[c].push_back(*v);
    }
  }
  if (row_number == 0) throw DataError("csv: no data rows in " + path);

  Dataset ds;
  const Index d = static_cast<Index>(row_number);
  ds.X.resize(d, static_cast<Index>(m));
  for (std::size_t c = 0; c < m; ++c)
    for (Index r = 0; r < d; ++r) ds.X(r, static_cast<Index>(c)) = columns[c][r];
  for (std::size_t c = attr_begin; c < attr_end; ++c) {
    Attribute attr;
    attr.name = header[c];
    attr.values = Eigen::Map<const Vector>(columns[c].data(), d);
    attr.kind = is_binary_column(attr.values) ? AttrKind::kBinary
                                              : AttrKind::kContinuous;
    attr.role = AttrRole::kUnspecified;
    ds.attributes.push_back(std::move(attr));
  }
  ds.labelled.assign(static_cast<std::size_t>(d), 1);
  if (has_labelled) {
    const std::vector<double>& lab = columns.back();
    for (Index r = 0; r < d; ++r) {
      if (lab[r] != 0.0 && lab[r] != 1.0)
        throw DataError("csv: 'labelled' column must be 0/1, row " +
                        std::to_string(r + 1));
      ds.labelled[static_cast<std::size_t>(r)] = lab[r] == 1.0 ? 1 : 0;
    }
  } else if (notices) {
    notices->push_back("csv: no 'labelled' column, treating all rows as labelled");
  }
  ds.provenance = "file " + path;
  ds.validate();
  return ds;
}

std::vector<Fold> kfold_split(const Dataset& dataset, int k, std::uint64_t seed,
                              const std::optional<std::string>& stratify_on) {
  if (k < 2) throw ConfigError("kfold: k must be >= 2");
  std::vector<int> lab = dataset.labelled_rows();
  if (lab.size() < static_cast<std::size_t>(k))
    throw DataError("kfold: fewer labelled rows than folds");

  Rng rng = sub_rng(seed, "kfold");
  std::vector<std::vector<int>> fold_members(static_cast<std::size_t>(k));
  if (stratify_on.has_value()) {
    const Attribute& attr = dataset.attribute(*stratify_on);
    std::vector<int> cls0, cls1;
    for (int r : lab) {
      const double v = attr.values(r);
      if (v == 0.0)
        cls0.push_back(r);
      else if (v == 1.0)
        cls1.push_back(r);
      else
        throw DataError("kfold: stratify attribute '" + *stratify_on +
                        "' is not binary");
    }
    rng.shuffle(cls0);
    rng.shuffle(cls1);
    std::size_t cursor = 0;
    for (const std::vector<int>* cls : {&cls0, &cls1})
      for (int r : *cls) fold_members[cursor++ % k].push_back(r);
  } else {
    rng.shuffle(lab);
    const std::size_t base = lab.size() / k;
    const std::size_t extra = lab.size() % k;
    std::size_t pos = 0;
    for (int f = 0; f < k; ++f) {
      const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
      fold_members[f].assign(lab.begin() + pos, lab.begin() + pos + size);
      pos += size;
    }
  }

  const std::vector<int> unlabelled = dataset.unlabelled_rows();
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    Fold& fold = folds[f];
    fold.test_rows = fold_members[f];
    std::sort(fold.test_rows.begin(), fold.test_rows.end());
    for (int g = 0; g < k; ++g)
      if (g != f)
        fold.train_rows.insert(fold.train_rows.end(), fold_members[g].begin(),
                               fold_members[g].end());
    std::sort(fold.train_rows.begin(), fold.train_rows.end());
    fold.unlabelled_rows = unlabelled;
  }
  return folds;
}

Matrix rows_of(const Matrix& X, const std::vector<int>& rows) {
  Matrix out(static_cast<Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = X.row(rows[i]);
  return out;
}

train::LabelledData make_labelled(const Dataset& dataset, const std::vector<int>& rows,
                                  const std::string& target,
                                  const std::vector<std::string>& biases) {
  train::LabelledData data;
  data.X = rows_of(dataset.X, rows);
  const Attribute& t = dataset.attribute(target);
  data.t.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    data.t(static_cast<Index>(i)) = t.values(rows[i]);
  data.S.resize(static_cast<Index>(rows.size()), static_cast<Index>(biases.size()));
  for (std::size_t j = 0; j < biases.size(); ++j) {
    const Attribute& s = dataset.attribute(biases[j]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      data.S(static_cast<Index>(i), static_cast<Index>(j)) = s.values(rows[i]);
  }
  data.validate();
  return data;
}

}  // namespace fairlat::synth
