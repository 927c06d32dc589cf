#include "synseg/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "synseg/errors.hpp"
#include "synseg/io.hpp"
#include "synseg/rng.hpp"

namespace synseg {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr char kMagic[8] = {'S', 'S', 'E', 'G', 'M', 'L', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint code assumes a little-endian host");

template <typename T>
void Put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T Get() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw FormatError(FormatError::Kind::kTruncatedPayload, pos_, "model checkpoint ends early");
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string GetString(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(FormatError::Kind::kTruncatedPayload, pos_, "model checkpoint ends early");
    }
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

MlpClassifier::MlpClassifier(int hidden, int classes, std::string taxonomy)
    : hidden_(hidden), classes_(classes), taxonomy_(std::move(taxonomy)) {
  if (hidden < 1) throw InvalidArgument("hidden layer size must be >= 1");
  if (classes < 2) throw InvalidArgument("classifier needs at least 2 classes");
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b2_offset()) + classes);
}

MlpClassifier MlpClassifier::Random(int hidden, int classes, std::string taxonomy, std::uint64_t seed) {
  MlpClassifier m(hidden, classes, std::move(taxonomy));
  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / (kFeatureDim + hidden));
  const double a2 = std::sqrt(6.0 / (hidden + classes));
  const std::size_t w1 = static_cast<std::size_t>(hidden) * kFeatureDim;
  const std::size_t w2_begin = w1 + hidden;
  for (std::size_t i = 0; i < w1; ++i) m.params_[static_cast<Eigen::Index>(i)] = rng.Uniform(-a1, a1);
  for (std::size_t i = w2_begin; i < m.b2_offset(); ++i) m.params_[static_cast<Eigen::Index>(i)] = rng.Uniform(-a2, a2);
  return m;
}

std::size_t MlpClassifier::b2_offset() const {
  return static_cast<std::size_t>(hidden_) * kFeatureDim + hidden_ + static_cast<std::size_t>(classes_) * hidden_;
}

void MlpClassifier::SetNormalization(const Eigen::Matrix<double, 1, kFeatureDim>& mean,
                                     const Eigen::Matrix<double, 1, kFeatureDim>& scale) {
  if (!mean.allFinite() || !scale.allFinite()) throw InvalidArgument("normalization must be finite");
  mean_ = mean;
  scale_ = scale;
}

void MlpClassifier::FitNormalization(const FeatureMatrix& features) {
  if (features.rows() == 0) throw InvalidArgument("cannot fit normalization on zero rows");
  const Eigen::Matrix<double, 1, kFeatureDim> mean = features.colwise().mean();
  Eigen::Matrix<double, 1, kFeatureDim> scale;
  for (int j = 0; j < kFeatureDim; ++j) {
    const double var = (features.col(j).array() - mean(j)).square().mean();
    scale(j) = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  SetNormalization(mean, scale);
}

Eigen::MatrixXd MlpClassifier::Normalize(const FeatureMatrix& features) const {
  return (features.rowwise() - mean_).array().rowwise() * scale_.array();
}

Eigen::MatrixXd MlpClassifier::Scores(const FeatureMatrix& features) const {
  const double* p = params_.data();
  const Eigen::Map<const RowMajor> w1(p, hidden_, kFeatureDim);
  const Eigen::Map<const Eigen::VectorXd> b1(p + hidden_ * kFeatureDim, hidden_);
  const Eigen::Map<const RowMajor> w2(p + hidden_ * kFeatureDim + hidden_, classes_, hidden_);
  const Eigen::Map<const Eigen::VectorXd> b2(p + b2_offset(), classes_);
  const Eigen::MatrixXd a = ((Normalize(features) * w1.transpose()).rowwise() + b1.transpose()).array().tanh();
  return (a * w2.transpose()).rowwise() + b2.transpose();
}

LossGrad MlpClassifier::LossAndGrad(const FeatureMatrix& features, std::span<const LabelId> labels,
                                    std::span<const double> class_weights) const {
  const Eigen::Index n = features.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw InvalidArgument("features/labels length mismatch");
  if (!class_weights.empty() && class_weights.size() != static_cast<std::size_t>(classes_)) {
    throw InvalidArgument("class weight count must equal the class count");
  }
  auto weight = [&](LabelId c) { return class_weights.empty() ? 1.0 : class_weights[c]; };
  double total_w = 0.0;
  for (LabelId y : labels) {
    if (y >= classes_) throw InvalidArgument("label " + std::to_string(y) + " outside the model's classes");
    if (y != kUnlabelled) total_w += weight(y);
  }
  if (!(total_w > 0.0)) throw DataError("batch has no labelled points");

  const double* p = params_.data();
  const Eigen::Map<const RowMajor> w1(p, hidden_, kFeatureDim);
  const Eigen::Map<const Eigen::VectorXd> b1(p + hidden_ * kFeatureDim, hidden_);
  const Eigen::Map<const RowMajor> w2(p + hidden_ * kFeatureDim + hidden_, classes_, hidden_);
  const Eigen::Map<const Eigen::VectorXd> b2(p + b2_offset(), classes_);

  const Eigen::MatrixXd x = Normalize(features);
  const Eigen::MatrixXd a = ((x * w1.transpose()).rowwise() + b1.transpose()).array().tanh();
  const Eigen::MatrixXd s = (a * w2.transpose()).rowwise() + b2.transpose();

  // dL/ds per row: w_y (softmax - onehot) / total_w; zero for unlabelled.
  Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(n, classes_);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const LabelId y = labels[static_cast<std::size_t>(i)];
    if (y == kUnlabelled) continue;
    const double mx = s.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (s.row(i).array() - mx).exp();
    const double z = e.sum();
    const double w = weight(y) / total_w;
    loss += w * (std::log(z) + mx - s(i, y));
    ds.row(i) = (w / z) * e;
    ds(i, y) -= w;
  }

  LossGrad out;
  out.loss = loss;
  out.grad.resize(params_.size());
  double* g = out.grad.data();
  Eigen::Map<RowMajor> gw1(g, hidden_, kFeatureDim);
  Eigen::Map<Eigen::VectorXd> gb1(g + hidden_ * kFeatureDim, hidden_);
  Eigen::Map<RowMajor> gw2(g + hidden_ * kFeatureDim + hidden_, classes_, hidden_);
  Eigen::Map<Eigen::VectorXd> gb2(g + b2_offset(), classes_);
  gw2.noalias() = ds.transpose() * a;
  gb2 = ds.colwise().sum().transpose();
  const Eigen::MatrixXd dz = ((ds * w2).array() * (1.0 - a.array().square())).matrix();
  gw1.noalias() = dz.transpose() * x;
  gb1 = dz.colwise().sum().transpose();
  return out;
}

bool operator==(const MlpClassifier& a, const MlpClassifier& b) {
  return a.hidden_ == b.hidden_ && a.classes_ == b.classes_ && a.taxonomy_ == b.taxonomy_ && a.params_ == b.params_ &&
         a.mean_ == b.mean_ && a.scale_ == b.scale_ && a.modality == b.modality && a.sample_size == b.sample_size &&
         a.feature_options.radius == b.feature_options.radius &&
         a.feature_options.max_neighbors == b.feature_options.max_neighbors;
}

Eigen::MatrixXd Softmax(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd out(scores.rows(), scores.cols());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const Eigen::RowVectorXd e = (scores.row(i).array() - scores.row(i).maxCoeff()).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

std::vector<LabelId> ArgmaxLabels(const Eigen::MatrixXd& scores) {
  std::vector<LabelId> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<LabelId>(best);
  }
  return out;
}

double AdamState::LearningRateAt(int epoch) const {
  if (decay_interval < 1) return learning_rate;
  return learning_rate * std::pow(lr_decay, std::max(0, epoch) / decay_interval);
}

void AdamStep(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, int epoch) {
  if (params.size() != grads.size()) throw InvalidArgument("parameter/gradient size mismatch");
  if (state.m.size() != params.size()) {
    if (state.step != 0) throw InvalidArgument("Adam state does not match the parameters");
    state.m = Eigen::VectorXd::Zero(params.size());
    state.v = Eigen::VectorXd::Zero(params.size());
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double lr = state.LearningRateAt(epoch);
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.epsilon);
}

std::vector<LabelId> PredictLabels(const MlpClassifier& model, const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  std::vector<LabelId> out(n, kUnlabelled);
  if (n == 0) return out;
  const std::size_t chunk_count = (n + model.sample_size - 1) / model.sample_size;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (chunk_count > 1) {
    Rng rng(MixSeed(n, 0x9e7d));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.Index(i)]);
  }
  std::vector<Point3> pos;
  std::vector<Rgb> col;
  for (std::size_t c = 0; c < chunk_count; ++c) {
    pos.clear();
    col.clear();
    std::vector<std::size_t> members;
    for (std::size_t k = c; k < n; k += chunk_count) {
      members.push_back(order[k]);
      pos.push_back(cloud.positions()[order[k]]);
      if (cloud.has_colors()) col.push_back(cloud.colors()[order[k]]);
    }
    const auto labels = ArgmaxLabels(model.Scores(ExtractFeatures(pos, col, model.modality, model.feature_options)));
    for (std::size_t k = 0; k < members.size(); ++k) out[members[k]] = labels[k];
  }
  return out;
}

PointCloud PredictCloud(const MlpClassifier& model, const PointCloud& cloud) {
  return cloud.WithLabels(PredictLabels(model, cloud), model.taxonomy());
}

std::string EncodeModel(const MlpClassifier& model) {
  std::string out(kMagic, sizeof kMagic);
  Put<std::uint32_t>(out, kVersion);
  Put<std::uint32_t>(out, kFeatureDim);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden()));
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(model.classes()));
  Put<std::uint32_t>(out, model.modality == Modality::kRgbd ? 0u : 1u);
  Put<std::uint64_t>(out, model.sample_size);
  Put<double>(out, model.feature_options.radius);
  Put<std::uint64_t>(out, model.feature_options.max_neighbors);
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(model.taxonomy().size()));
  out += model.taxonomy();
  for (int j = 0; j < kFeatureDim; ++j) Put<double>(out, model.feature_mean()(j));
  for (int j = 0; j < kFeatureDim; ++j) Put<double>(out, model.feature_scale()(j));
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i) Put<double>(out, model.parameters()[i]);
  return out;
}

MlpClassifier DecodeModel(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(FormatError::Kind::kBadMagic, 0, "not a model checkpoint");
  }
  Reader r(bytes.substr(sizeof kMagic));
  auto offset = [&] { return sizeof kMagic + r.pos(); };
  const auto version = r.Get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError(FormatError::Kind::kMalformedHeader, offset() - 4,
                      "unsupported checkpoint version " + std::to_string(version));
  }
  const auto in_dim = r.Get<std::uint32_t>();
  if (in_dim != kFeatureDim) throw FormatError(FormatError::Kind::kMalformedHeader, offset() - 4, "bad input dimension");
  const auto hidden = r.Get<std::uint32_t>();
  const auto classes = r.Get<std::uint32_t>();
  if (hidden < 1 || hidden > 1u << 16 || classes < 2 || classes > 1u << 16) {
    throw FormatError(FormatError::Kind::kMalformedHeader, offset() - 4, "implausible layer sizes");
  }
  const auto modality = r.Get<std::uint32_t>();
  if (modality > 1) throw FormatError(FormatError::Kind::kMalformedHeader, offset() - 4, "bad modality");
  const auto sample_size = r.Get<std::uint64_t>();
  const auto radius = r.Get<double>();
  const auto max_neighbors = r.Get<std::uint64_t>();
  if (sample_size < 1 || !(radius > 0.0) || max_neighbors < 1) {
    throw FormatError(FormatError::Kind::kMalformedHeader, offset(), "bad feature settings");
  }
  const auto name_len = r.Get<std::uint32_t>();
  if (name_len > 4096) throw FormatError(FormatError::Kind::kMalformedHeader, offset() - 4, "taxonomy name too long");
  MlpClassifier m(static_cast<int>(hidden), static_cast<int>(classes), r.GetString(name_len));
  m.modality = modality == 0 ? Modality::kRgbd : Modality::kDepth;
  m.sample_size = sample_size;
  m.feature_options.radius = radius;
  m.feature_options.max_neighbors = max_neighbors;
  Eigen::Matrix<double, 1, kFeatureDim> mean, scale;
  for (int j = 0; j < kFeatureDim; ++j) mean(j) = r.Get<double>();
  for (int j = 0; j < kFeatureDim; ++j) scale(j) = r.Get<double>();
  m.SetNormalization(mean, scale);
  for (Eigen::Index i = 0; i < m.parameters().size(); ++i) m.parameters()[i] = r.Get<double>();
  if (!m.parameters().allFinite()) throw FormatError(FormatError::Kind::kMalformedHeader, offset(), "non-finite weights");
  if (!r.done()) throw FormatError(FormatError::Kind::kMalformedHeader, offset(), "trailing bytes after weights");
  return m;
}

void SaveModel(const MlpClassifier& model, const std::filesystem::path& path) {
  io::WriteFileAtomic(path, EncodeModel(model));
}

MlpClassifier LoadModel(const std::filesystem::path& path) { return DecodeModel(io::ReadFile(path)); }

}  // namespace synseg
