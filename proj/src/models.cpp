#include "longeval/models.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "longeval/error.hpp"

namespace longeval {

MeanBaseline fit_mean_baseline(std::span<const double> train_targets) {
  if (train_targets.empty()) throw Error(ErrorKind::Parameter, "mean baseline needs training targets");
  double sum = 0.0;
  for (double y : train_targets) sum += y;
  return {sum / static_cast<double>(train_targets.size())};
}

double RidgeModel::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != weights.size()) {
    throw Error(ErrorKind::Shape, "ridge input has length " + std::to_string(x.size()) + ", expected " +
                                      std::to_string(weights.size()));
  }
  return bias + weights.dot(x);
}

Eigen::VectorXd RidgeModel::predict_rows(const Eigen::MatrixXd& X) const {
  if (X.cols() != weights.size()) throw Error(ErrorKind::Shape, "ridge design width mismatch");
  return (X * weights).array() + bias;
}

namespace {

// Centered normal equations, built once and solved for many penalties.
class CenteredSystem {
 public:
  CenteredSystem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() < 1) throw Error(ErrorKind::Parameter, "ridge needs at least one row");
    if (X.rows() != y.size()) throw Error(ErrorKind::Shape, "ridge X and y disagree in length");
    if (!X.allFinite() || !y.allFinite()) throw Error(ErrorKind::NonFinite, "ridge inputs must be finite");
    x_mean_ = X.colwise().mean().transpose();
    y_mean_ = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean_.transpose();
    gram_ = Xc.transpose() * Xc;
    rhs_ = Xc.transpose() * (y.array() - y_mean_).matrix();
  }

  RidgeModel solve(double lambda) const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw Error(ErrorKind::Parameter, "ridge penalty must be positive and finite");
    }
    Eigen::MatrixXd A = gram_;
    A.diagonal().array() += lambda;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::NonFinite, "ridge factorization failed");
    Eigen::VectorXd w = ldlt.solve(rhs_);
    const double scale = std::max(rhs_.norm(), 1e-300);
    for (int refine = 0; refine < 3; ++refine) {
      const Eigen::VectorXd residual = rhs_ - A * w;
      if (residual.norm() <= 1e-8 * scale) break;
      w += ldlt.solve(residual);
    }
    RidgeModel model;
    model.weights = std::move(w);
    model.bias = y_mean_ - x_mean_.dot(model.weights);
    model.lambda = lambda;
    return model;
  }

 private:
  Eigen::VectorXd x_mean_;
  double y_mean_ = 0.0;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;
};

}  // namespace

RidgeModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  return CenteredSystem(X, y).solve(lambda);
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int i = -2; i <= 5; ++i) grid.push_back(std::pow(10.0, i));
  return grid;
}

RidgeSelection select_ridge(const Design& train, const Design& dev, std::span<const double> grid,
                            Regime dev_regime, HistoryEncoding encoding, int history_len) {
  if (grid.empty()) throw Error(ErrorKind::Parameter, "empty penalty grid");
  if (dev.X.rows() == 0) throw Error(ErrorKind::DegeneratePartition, "empty dev set");
  if (dev.X.cols() != train.X.cols()) throw Error(ErrorKind::Shape, "train/dev width mismatch");

  const CenteredSystem system(train.X, train.y);
  RidgeSelection out;
  out.trace.dev_regime = dev_regime;
  double best = INFINITY;
  for (double lambda : grid) {
    const RidgeModel m = system.solve(lambda);
    const Eigen::VectorXd pred = m.predict_rows(dev.X);
    const double score = (pred - dev.y).cwiseAbs().mean();
    out.trace.grid.emplace_back(lambda, score);
    if (score < best || (score == best && lambda > out.trace.chosen)) {
      best = score;
      out.trace.chosen = lambda;
    }
  }

  Eigen::MatrixXd X(train.X.rows() + dev.X.rows(), train.X.cols());
  X << train.X, dev.X;
  Eigen::VectorXd y(train.y.size() + dev.y.size());
  y << train.y, dev.y;
  out.model = fit_ridge(X, y, out.trace.chosen);
  out.model.encoding = encoding;
  out.model.history_len = history_len;
  return out;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

HistoryEncoding parse_encoding(std::string_view s) {
  if (s == "stacked") return HistoryEncoding::Stacked;
  if (s == "pooled") return HistoryEncoding::Pooled;
  if (s == "sequence") return HistoryEncoding::Sequence;
  throw Error(ErrorKind::Parse, "unknown encoding '" + std::string(s) + "'");
}

void expect(std::istream& in, std::string_view word) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw Error(ErrorKind::Parse, "model text: expected '" + std::string(word) + "', got '" + got + "'");
  }
}

template <class T>
T read_value(std::istream& in, std::string_view what) {
  T v{};
  if (!(in >> v)) throw Error(ErrorKind::Parse, "model text: bad " + std::string(what));
  return v;
}

}  // namespace

std::string mean_baseline_to_text(const MeanBaseline& model) {
  return "model mean\nmean " + fmt17(model.mean) + "\n";
}

MeanBaseline mean_baseline_from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  expect(in, "model");
  expect(in, "mean");
  expect(in, "mean");
  return {read_value<double>(in, "mean")};
}

std::string ridge_to_text(const RidgeModel& model) {
  std::string out = "model ridge\n";
  out += "encoding " + std::string(to_string(model.encoding)) + "\n";
  out += "history " + std::to_string(model.history_len) + "\n";
  out += "lambda " + fmt17(model.lambda) + "\n";
  out += "bias " + fmt17(model.bias) + "\n";
  out += "weights " + std::to_string(model.weights.size()) + "\n";
  for (Eigen::Index k = 0; k < model.weights.size(); ++k) out += fmt17(model.weights(k)) + "\n";
  return out;
}

RidgeModel ridge_from_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  RidgeModel m;
  expect(in, "model");
  expect(in, "ridge");
  expect(in, "encoding");
  m.encoding = parse_encoding(read_value<std::string>(in, "encoding"));
  expect(in, "history");
  m.history_len = read_value<int>(in, "history");
  expect(in, "lambda");
  m.lambda = read_value<double>(in, "lambda");
  expect(in, "bias");
  m.bias = read_value<double>(in, "bias");
  expect(in, "weights");
  const auto n = read_value<Eigen::Index>(in, "weight count");
  m.weights.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) m.weights(k) = read_value<double>(in, "weight");
  return m;
}

}  // namespace longeval
