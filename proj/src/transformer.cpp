#include "longeval/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "longeval/error.hpp"

namespace longeval {

namespace {

enum ParamIndex : std::size_t {
  kWp, kBp,
  kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo,
  kLn1G, kLn1B,
  kW1, kB1, kW2, kB2,
  kLn2G, kLn2B,
  kWout, kBout,
  kParamCount,
};

Eigen::MatrixXd xavier(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return m;
}

struct LayerNormCache {
  Eigen::MatrixXd xhat;
  Eigen::VectorXd inv_sd;
};

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gain,
                           const Eigen::MatrixXd& shift, double eps, LayerNormCache& cache) {
  const Eigen::Index n = x.rows();
  const double width = static_cast<double>(x.cols());
  cache.xhat.resize(n, x.cols());
  cache.inv_sd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).sum() / width;
    const Eigen::RowVectorXd centered = x.row(i).array() - mu;
    const double var = centered.squaredNorm() / width;
    cache.inv_sd(i) = 1.0 / std::sqrt(var + eps);
    cache.xhat.row(i) = centered * cache.inv_sd(i);
  }
  return (cache.xhat.array().rowwise() * gain.row(0).array()).rowwise() + shift.row(0).array();
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& dy, const Eigen::MatrixXd& gain,
                                    const LayerNormCache& cache, Eigen::MatrixXd& d_gain,
                                    Eigen::MatrixXd& d_shift) {
  d_gain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  d_shift.row(0) += dy.colwise().sum();
  const double width = static_cast<double>(dy.cols());
  Eigen::MatrixXd dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const Eigen::RowVectorXd dxhat = dy.row(i).array() * gain.row(0).array();
    const double mean_d = dxhat.sum() / width;
    const double mean_dx = dxhat.dot(cache.xhat.row(i)) / width;
    dx.row(i) = cache.inv_sd(i) * (dxhat.array() - mean_d - cache.xhat.row(i).array() * mean_dx);
  }
  return dx;
}

}  // namespace

struct MicroTransformer::Cache {
  int anchor = 0;
  Eigen::MatrixXd x, z, q, k, v, attn, attn_dropped, attn_mask, context, h1, u, h2;
  LayerNormCache ln1, ln2;
  Eigen::RowVectorXd readout, out_mask;
  bool dropout = false;
};

MicroTransformer::MicroTransformer(int input_dim, const TransformerConfig& config, std::uint64_t seed)
    : input_dim_(input_dim), config_(config) {
  if (input_dim <= 0 || config.model_dim <= 0 || config.ffn_dim <= 0 || config.window <= 0) {
    throw Error(ErrorKind::Parameter, "transformer dimensions and window must be positive");
  }
  if (!(config.attention_dropout >= 0.0 && config.attention_dropout < 1.0) ||
      !(config.output_dropout >= 0.0 && config.output_dropout < 1.0)) {
    throw Error(ErrorKind::Parameter, "dropout rates must be in [0, 1)");
  }
  Rng rng(seed);
  const Eigen::Index d = input_dim, m = config.model_dim, f = config.ffn_dim;
  params_.resize(kParamCount);
  auto set = [&](ParamIndex i, std::string name, Eigen::MatrixXd value, bool decay) {
    params_[i] = {std::move(name), std::move(value), decay};
  };
  set(kWp, "proj.weight", xavier(d, m, rng), true);
  set(kBp, "proj.bias", Eigen::MatrixXd::Zero(1, m), false);
  set(kWq, "attn.q.weight", xavier(m, m, rng), true);
  set(kBq, "attn.q.bias", Eigen::MatrixXd::Zero(1, m), false);
  set(kWk, "attn.k.weight", xavier(m, m, rng), true);
  set(kBk, "attn.k.bias", Eigen::MatrixXd::Zero(1, m), false);
  set(kWv, "attn.v.weight", xavier(m, m, rng), true);
  set(kBv, "attn.v.bias", Eigen::MatrixXd::Zero(1, m), false);
  set(kWo, "attn.out.weight", xavier(m, m, rng), true);
  set(kBo, "attn.out.bias", Eigen::MatrixXd::Zero(1, m), false);
  set(kLn1G, "norm1.gain", Eigen::MatrixXd::Ones(1, m), false);
  set(kLn1B, "norm1.shift", Eigen::MatrixXd::Zero(1, m), false);
  set(kW1, "ffn.in.weight", xavier(m, f, rng), true);
  set(kB1, "ffn.in.bias", Eigen::MatrixXd::Zero(1, f), false);
  set(kW2, "ffn.out.weight", xavier(f, m, rng), true);
  set(kB2, "ffn.out.bias", Eigen::MatrixXd::Zero(1, m), false);
  set(kLn2G, "norm2.gain", Eigen::MatrixXd::Ones(1, m), false);
  set(kLn2B, "norm2.shift", Eigen::MatrixXd::Zero(1, m), false);
  set(kWout, "head.weight", xavier(m, 1, rng), true);
  set(kBout, "head.bias", Eigen::MatrixXd::Zero(1, 1), false);
  shift_ = Eigen::RowVectorXd::Zero(d);
  scale_ = Eigen::RowVectorXd::Ones(d);
}

void MicroTransformer::set_input_scaling(Eigen::RowVectorXd shift, Eigen::RowVectorXd scale) {
  if (shift.size() != input_dim_ || scale.size() != input_dim_) {
    throw Error(ErrorKind::Shape, "input scaling width mismatch");
  }
  if ((scale.array() <= 0.0).any()) throw Error(ErrorKind::Parameter, "input scale must be positive");
  shift_ = std::move(shift);
  scale_ = std::move(scale);
}

double MicroTransformer::forward(const Eigen::MatrixXd& sequence, int anchor, Rng* dropout_rng,
                                 Cache* cache) const {
  if (sequence.cols() != input_dim_) {
    throw Error(ErrorKind::Shape, "sequence width " + std::to_string(sequence.cols()) + ", expected " +
                                      std::to_string(input_dim_));
  }
  const Eigen::Index L = sequence.rows();
  if (L == 0 || anchor < 0 || anchor >= L) throw Error(ErrorKind::Shape, "anchor outside sequence");
  const auto& P = params_;
  const int window = config_.window;
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(config_.model_dim));

  Cache local;
  Cache& c = cache ? *cache : local;
  c.anchor = anchor;
  c.dropout = dropout_rng != nullptr;

  c.x = (sequence.rowwise() - shift_).array().rowwise() / scale_.array();
  c.z = (c.x * P[kWp].value).rowwise() + P[kBp].value.row(0);
  c.q = (c.z * P[kWq].value).rowwise() + P[kBq].value.row(0);
  c.k = (c.z * P[kWk].value).rowwise() + P[kBk].value.row(0);
  c.v = (c.z * P[kWv].value).rowwise() + P[kBv].value.row(0);

  Eigen::MatrixXd logits = (c.q * c.k.transpose()) * inv_sqrt_m;
  c.attn.resize(L, L);
  for (Eigen::Index i = 0; i < L; ++i) {
    for (Eigen::Index j = 0; j < L; ++j) {
      if (j > i || j <= i - window) logits(i, j) = kMaskedLogit;
    }
    const double row_max = logits.row(i).maxCoeff();
    c.attn.row(i) = (logits.row(i).array() - row_max).exp();
    c.attn.row(i) /= c.attn.row(i).sum();
  }

  if (c.dropout && config_.attention_dropout > 0.0) {
    const double keep = 1.0 - config_.attention_dropout;
    c.attn_mask.resize(L, L);
    for (Eigen::Index j = 0; j < L; ++j) {
      for (Eigen::Index i = 0; i < L; ++i) c.attn_mask(i, j) = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    }
    c.attn_dropped = c.attn.cwiseProduct(c.attn_mask);
  } else {
    c.attn_mask.resize(0, 0);
    c.attn_dropped = c.attn;
  }

  c.context = c.attn_dropped * c.v;
  const Eigen::MatrixXd attn_out = (c.context * P[kWo].value).rowwise() + P[kBo].value.row(0);
  c.h1 = layer_norm(c.z + attn_out, P[kLn1G].value, P[kLn1B].value, config_.layer_norm_eps, c.ln1);

  if (config_.use_ffn) {
    c.u = (c.h1 * P[kW1].value).rowwise() + P[kB1].value.row(0);
    const Eigen::MatrixXd g = c.u.cwiseMax(0.0);
    const Eigen::MatrixXd ffn = (g * P[kW2].value).rowwise() + P[kB2].value.row(0);
    c.h2 = layer_norm(c.h1 + ffn, P[kLn2G].value, P[kLn2B].value, config_.layer_norm_eps, c.ln2);
  } else {
    c.h2 = c.h1;
  }

  c.readout = c.h2.row(anchor);
  if (c.dropout && config_.output_dropout > 0.0) {
    const double keep = 1.0 - config_.output_dropout;
    c.out_mask.resize(c.readout.size());
    for (Eigen::Index j = 0; j < c.readout.size(); ++j) {
      c.out_mask(j) = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    }
    c.readout = c.readout.cwiseProduct(c.out_mask);
  } else {
    c.out_mask.resize(0);
  }
  return c.readout.dot(P[kWout].value.col(0)) + P[kBout].value(0, 0);
}

void MicroTransformer::backward(const Cache& c, double d_output,
                                std::vector<Eigen::MatrixXd>& G) const {
  const auto& P = params_;
  const Eigen::Index L = c.x.rows();
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(config_.model_dim));

  G[kWout].col(0) += d_output * c.readout.transpose();
  G[kBout](0, 0) += d_output;
  Eigen::RowVectorXd d_readout = d_output * P[kWout].value.col(0).transpose();
  if (c.out_mask.size() > 0) d_readout = d_readout.cwiseProduct(c.out_mask);

  Eigen::MatrixXd d_h2 = Eigen::MatrixXd::Zero(L, c.h2.cols());
  d_h2.row(c.anchor) = d_readout;

  Eigen::MatrixXd d_h1;
  if (config_.use_ffn) {
    const Eigen::MatrixXd d_r2 = layer_norm_backward(d_h2, P[kLn2G].value, c.ln2, G[kLn2G], G[kLn2B]);
    const Eigen::MatrixXd g = c.u.cwiseMax(0.0);
    G[kW2] += g.transpose() * d_r2;
    G[kB2].row(0) += d_r2.colwise().sum();
    Eigen::MatrixXd d_u = d_r2 * P[kW2].value.transpose();
    d_u = (c.u.array() > 0.0).select(d_u, 0.0);
    G[kW1] += c.h1.transpose() * d_u;
    G[kB1].row(0) += d_u.colwise().sum();
    d_h1 = d_r2 + d_u * P[kW1].value.transpose();
  } else {
    d_h1 = d_h2;
  }

  const Eigen::MatrixXd d_r1 = layer_norm_backward(d_h1, P[kLn1G].value, c.ln1, G[kLn1G], G[kLn1B]);
  Eigen::MatrixXd d_z = d_r1;

  G[kWo] += c.context.transpose() * d_r1;
  G[kBo].row(0) += d_r1.colwise().sum();
  const Eigen::MatrixXd d_context = d_r1 * P[kWo].value.transpose();

  Eigen::MatrixXd d_attn = d_context * c.v.transpose();
  const Eigen::MatrixXd d_v = c.attn_dropped.transpose() * d_context;
  if (c.attn_mask.size() > 0) d_attn = d_attn.cwiseProduct(c.attn_mask);

  // Softmax backward; masked entries have zero weight and zero gradient.
  Eigen::MatrixXd d_logits(L, L);
  for (Eigen::Index i = 0; i < L; ++i) {
    const double dot = d_attn.row(i).dot(c.attn.row(i));
    d_logits.row(i) = c.attn.row(i).array() * (d_attn.row(i).array() - dot);
  }
  d_logits *= inv_sqrt_m;
  const Eigen::MatrixXd d_q = d_logits * c.k;
  const Eigen::MatrixXd d_k = d_logits.transpose() * c.q;

  G[kWq] += c.z.transpose() * d_q;
  G[kBq].row(0) += d_q.colwise().sum();
  G[kWk] += c.z.transpose() * d_k;
  G[kBk].row(0) += d_k.colwise().sum();
  G[kWv] += c.z.transpose() * d_v;
  G[kBv].row(0) += d_v.colwise().sum();
  d_z += d_q * P[kWq].value.transpose() + d_k * P[kWk].value.transpose() +
         d_v * P[kWv].value.transpose();

  G[kWp] += c.x.transpose() * d_z;
  G[kBp].row(0) += d_z.colwise().sum();
}

double MicroTransformer::predict(const Eigen::MatrixXd& sequence) const {
  return forward(sequence, static_cast<int>(sequence.rows()) - 1, nullptr, nullptr);
}

double MicroTransformer::predict_at(const Eigen::MatrixXd& sequence, int anchor) const {
  return forward(sequence, anchor, nullptr, nullptr);
}

Eigen::MatrixXd MicroTransformer::attention_weights(const Eigen::MatrixXd& sequence) const {
  Cache cache;
  forward(sequence, static_cast<int>(sequence.rows()) - 1, nullptr, &cache);
  return cache.attn;
}

double MicroTransformer::loss_and_gradients(std::span<const Eigen::MatrixXd> sequences,
                                            std::span<const double> targets,
                                            std::vector<Eigen::MatrixXd>& gradients,
                                            Rng* dropout_rng) const {
  if (sequences.size() != targets.size() || sequences.empty()) {
    throw Error(ErrorKind::Shape, "batch sequences and targets must be non-empty and aligned");
  }
  gradients.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    gradients[i] = Eigen::MatrixXd::Zero(params_[i].value.rows(), params_[i].value.cols());
  }
  const double inv_n = 1.0 / static_cast<double>(sequences.size());
  double loss = 0.0;
  Cache cache;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const double pred =
        forward(sequences[s], static_cast<int>(sequences[s].rows()) - 1, dropout_rng, &cache);
    const double err = pred - targets[s];
    loss += err * err * inv_n;
    backward(cache, 2.0 * err * inv_n, gradients);
  }
  return loss;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string matrix_rows(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ' ';
      out += fmt17(m(i, j));
    }
    out += '\n';
  }
  return out;
}

template <class T>
T read_value(std::istream& in, std::string_view what) {
  T v{};
  if (!(in >> v)) throw Error(ErrorKind::Parse, "transformer text: bad " + std::string(what));
  return v;
}

void expect(std::istream& in, std::string_view word) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw Error(ErrorKind::Parse, "transformer text: expected '" + std::string(word) + "'");
  }
}

}  // namespace

std::string MicroTransformer::to_text() const {
  const auto& c = config_;
  std::string out = "model transformer\n";
  out += "input_dim " + std::to_string(input_dim_) + "\n";
  out += "model_dim " + std::to_string(c.model_dim) + "\n";
  out += "ffn_dim " + std::to_string(c.ffn_dim) + "\n";
  out += "use_ffn " + std::to_string(c.use_ffn ? 1 : 0) + "\n";
  out += "window " + std::to_string(c.window) + "\n";
  out += "attention_dropout " + fmt17(c.attention_dropout) + "\n";
  out += "output_dropout " + fmt17(c.output_dropout) + "\n";
  out += "layer_norm_eps " + fmt17(c.layer_norm_eps) + "\n";
  out += "input_shift 1 " + std::to_string(input_dim_) + "\n" + matrix_rows(shift_);
  out += "input_scale 1 " + std::to_string(input_dim_) + "\n" + matrix_rows(scale_);
  for (const auto& p : params_) {
    out += "param " + p.name + " " + std::to_string(p.value.rows()) + " " +
           std::to_string(p.value.cols()) + "\n" + matrix_rows(p.value);
  }
  return out;
}

MicroTransformer MicroTransformer::from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  expect(in, "model");
  expect(in, "transformer");
  TransformerConfig c;
  expect(in, "input_dim");
  const int input_dim = read_value<int>(in, "input_dim");
  expect(in, "model_dim");
  c.model_dim = read_value<int>(in, "model_dim");
  expect(in, "ffn_dim");
  c.ffn_dim = read_value<int>(in, "ffn_dim");
  expect(in, "use_ffn");
  c.use_ffn = read_value<int>(in, "use_ffn") != 0;
  expect(in, "window");
  c.window = read_value<int>(in, "window");
  expect(in, "attention_dropout");
  c.attention_dropout = read_value<double>(in, "attention_dropout");
  expect(in, "output_dropout");
  c.output_dropout = read_value<double>(in, "output_dropout");
  expect(in, "layer_norm_eps");
  c.layer_norm_eps = read_value<double>(in, "layer_norm_eps");

  MicroTransformer model(input_dim, c, 0);
  auto read_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = read_value<double>(in, "matrix entry");
    }
    return m;
  };
  expect(in, "input_shift");
  auto r = read_value<Eigen::Index>(in, "rows");
  auto k = read_value<Eigen::Index>(in, "cols");
  const Eigen::RowVectorXd shift = read_matrix(r, k).row(0);
  expect(in, "input_scale");
  r = read_value<Eigen::Index>(in, "rows");
  k = read_value<Eigen::Index>(in, "cols");
  const Eigen::RowVectorXd scale = read_matrix(r, k).row(0);
  model.set_input_scaling(shift, scale);
  for (auto& p : model.params_) {
    expect(in, "param");
    expect(in, p.name);
    r = read_value<Eigen::Index>(in, "rows");
    k = read_value<Eigen::Index>(in, "cols");
    if (r != p.value.rows() || k != p.value.cols()) {
      throw Error(ErrorKind::Parse, "transformer text: shape mismatch for " + p.name);
    }
    p.value = read_matrix(r, k);
  }
  return model;
}

TransformerFit fit_transformer(std::span<const Eigen::MatrixXd> train_sequences,
                               std::span<const double> train_targets,
                               std::span<const Eigen::MatrixXd> dev_sequences,
                               std::span<const double> dev_targets, const TransformerConfig& config,
                               std::uint64_t seed) {
  if (train_sequences.empty() || train_sequences.size() != train_targets.size()) {
    throw Error(ErrorKind::Parameter, "transformer needs aligned, non-empty training data");
  }
  if (dev_sequences.empty() || dev_sequences.size() != dev_targets.size()) {
    throw Error(ErrorKind::DegeneratePartition, "transformer needs aligned, non-empty dev data");
  }
  const Eigen::Index d = train_sequences.front().cols();
  const Eigen::Index h = train_sequences.front().rows();
  for (const auto* set : {&train_sequences, &dev_sequences}) {
    for (const auto& s : *set) {
      if (s.cols() != d || s.rows() != h) throw Error(ErrorKind::Shape, "sequences must all be h x d");
      if (!s.allFinite()) throw Error(ErrorKind::NonFinite, "non-finite transformer input");
    }
  }

  MicroTransformer model(static_cast<int>(d), config, derive_seed(seed, "init"));

  // Standardize inputs with training statistics.
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(d);
  double rows = 0.0;
  for (const auto& s : train_sequences) {
    mean += s.colwise().sum();
    sq += s.array().square().colwise().sum().matrix();
    rows += static_cast<double>(s.rows());
  }
  mean /= rows;
  Eigen::RowVectorXd sd = (sq / rows - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(sd(j) > 1e-12)) sd(j) = 1.0;
  }
  model.set_input_scaling(mean, sd);
  model.params()[kBout].value(0, 0) =
      std::accumulate(train_targets.begin(), train_targets.end(), 0.0) /
      static_cast<double>(train_targets.size());

  auto& params = model.params();
  std::vector<Eigen::MatrixXd> m1(params.size()), m2(params.size()), grads;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m1[i] = Eigen::MatrixXd::Zero(params[i].value.rows(), params[i].value.cols());
    m2[i] = m1[i];
  }

  auto dev_mae = [&]() {
    double sum = 0.0;
    for (std::size_t i = 0; i < dev_sequences.size(); ++i) {
      sum += std::fabs(model.predict(dev_sequences[i]) - dev_targets[i]);
    }
    return sum / static_cast<double>(dev_sequences.size());
  };

  TransformerFit fit;
  Rng order_rng(derive_seed(seed, "order"));
  Rng dropout_rng(derive_seed(seed, "dropout"));
  std::vector<std::size_t> order(train_sequences.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(std::max(1, config.batch_size));
  std::vector<Eigen::MatrixXd> batch_x;
  std::vector<double> batch_y;
  std::vector<TransformerParam> best_params = params;
  double best = INFINITY;
  int since_best = 0;
  long long step = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t j = start; j < end; ++j) {
        batch_x.push_back(train_sequences[order[j]]);
        batch_y.push_back(train_targets[order[j]]);
      }
      ++step;
      const double loss = model.loss_and_gradients(batch_x, batch_y, grads, &dropout_rng);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::Divergence, "non-finite training loss at epoch " + std::to_string(epoch) +
                                               ", step " + std::to_string(step));
      }
      const double t = static_cast<double>(step);
      const double bias1 = 1.0 - std::pow(config.beta1, t);
      const double bias2 = 1.0 - std::pow(config.beta2, t);
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].value;
        if (params[i].decay) p *= 1.0 - config.learning_rate * config.weight_decay;
        m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * grads[i];
        m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * grads[i].cwiseProduct(grads[i]);
        p.array() -= config.learning_rate * (m1[i].array() / bias1) /
                     ((m2[i].array() / bias2).sqrt() + config.adam_eps);
      }
    }
    const double score = dev_mae();
    fit.dev_mae.push_back(score);
    fit.epochs_run = epoch;
    if (!std::isfinite(score)) {
      throw Error(ErrorKind::Divergence, "non-finite dev MAE at epoch " + std::to_string(epoch));
    }
    if (score < best) {
      best = score;
      best_params = params;
      fit.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  params = std::move(best_params);
  fit.model = std::move(model);
  return fit;
}

}  // namespace longeval
