#include "longeval/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "longeval/csv.hpp"
#include "longeval/error.hpp"

namespace longeval {

PcaModel fit_pca(const Eigen::MatrixXd& data, int d) {
  const Eigen::Index n = data.rows();
  const Eigen::Index D = data.cols();
  if (d <= 0 || d > D) {
    throw Error(ErrorKind::Parameter, "PCA output dimension must be in [1, " + std::to_string(D) + "]");
  }
  if (n < 2) throw Error(ErrorKind::Rank, "PCA needs at least 2 observations");
  if (!data.allFinite()) throw Error(ErrorKind::NonFinite, "PCA input contains non-finite values");

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = (centered.adjoint() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::Rank, "covariance eigensolver failed");
  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd values = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  const double top = std::max(values(0), 0.0);
  const double tol = top * static_cast<double>(D) * 1e-12;
  Eigen::Index rank = 0;
  while (rank < values.size() && values(rank) > tol) ++rank;
  if (d > rank) {
    throw Error(ErrorKind::Rank, "requested " + std::to_string(d) + " components but centered data has rank " +
                                     std::to_string(rank));
  }

  model.components = vectors.leftCols(d).transpose();
  model.explained_variance = values.head(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::Index arg = 0;
    model.components.row(k).cwiseAbs().maxCoeff(&arg);
    if (model.components(k, arg) < 0.0) model.components.row(k) *= -1.0;
  }
  return model;
}

Eigen::VectorXd transform(const PcaModel& model, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != model.mean.size()) {
    throw Error(ErrorKind::Shape, "PCA transform expects length " + std::to_string(model.mean.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  return model.components * (v - model.mean);
}

Eigen::MatrixXd transform_rows(const PcaModel& model, const Eigen::MatrixXd& rows) {
  if (rows.cols() != model.mean.size()) throw Error(ErrorKind::Shape, "PCA transform width mismatch");
  return (rows.rowwise() - model.mean.transpose()) * model.components.transpose();
}

PcaModel fit_pca_on_rows(const HistoryDataset& data, const SplitPlan& plan,
                         const std::set<std::size_t>& rows, int d) {
  if (plan.keys.size() != data.instances.size()) {
    throw Error(ErrorKind::Shape, "plan does not match dataset");
  }
  std::set<std::size_t> train_rows;
  for (auto i : plan.indices(Assignment::Train)) {
    if (plan.keys[i] != data.instances[i].key()) {
      throw Error(ErrorKind::Shape, "plan keys out of step with dataset");
    }
    train_rows.insert(data.instances[i].history.begin(), data.instances[i].history.end());
  }
  for (auto row : rows) {
    if (!train_rows.contains(row)) {
      const auto& key = data.row_keys.at(row);
      throw Error(ErrorKind::Leakage, "PCA fit row (" + key.person + ", " + std::to_string(key.day) +
                                          ") is not part of any Train history");
    }
  }
  Eigen::MatrixXd fit(static_cast<Eigen::Index>(rows.size()), data.day_features.cols());
  Eigen::Index r = 0;
  for (auto row : rows) fit.row(r++) = data.day_features.row(static_cast<Eigen::Index>(row));
  return fit_pca(fit, d);
}

PcaModel fit_pca_on_train(const HistoryDataset& data, const SplitPlan& plan, int d) {
  std::set<std::size_t> rows;
  for (auto i : plan.indices(Assignment::Train)) {
    const auto& h = data.instances.at(i).history;
    rows.insert(h.begin(), h.end());
  }
  return fit_pca_on_rows(data, plan, rows, d);
}

namespace {

std::string row_csv(std::string_view tag, const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  std::string out(tag);
  for (Eigen::Index k = 0; k < v.size(); ++k) out += "," + csv::format_exact(v(k));
  return out + "\n";
}

}  // namespace

std::string pca_to_csv(const PcaModel& model) {
  std::string out = row_csv("mean", model.mean.transpose());
  for (Eigen::Index k = 0; k < model.components.rows(); ++k) {
    out += row_csv("component", model.components.row(k));
  }
  out += row_csv("variance", model.explained_variance.transpose());
  return out;
}

PcaModel pca_from_csv(std::string_view text) {
  std::vector<double> mean, variance;
  std::vector<std::vector<double>> comps;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split_fields(line);
    std::vector<double> values;
    for (std::size_t k = 1; k < f.size(); ++k) {
      const auto v = csv::parse_double(f[k]);
      if (!v) throw ParseError(ErrorKind::Parse, line_no, "bad number in PCA bundle");
      values.push_back(*v);
    }
    const auto tag = csv::trim(f[0]);
    if (tag == "mean") mean = std::move(values);
    else if (tag == "component") comps.push_back(std::move(values));
    else if (tag == "variance") variance = std::move(values);
    else throw ParseError(ErrorKind::Parse, line_no, "unknown PCA row tag");
  }
  if (mean.empty() || comps.size() != variance.size()) {
    throw Error(ErrorKind::Parse, "incomplete PCA bundle");
  }
  PcaModel m;
  m.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  m.explained_variance = Eigen::Map<Eigen::VectorXd>(variance.data(), static_cast<Eigen::Index>(variance.size()));
  m.components.resize(static_cast<Eigen::Index>(comps.size()), m.mean.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (comps[k].size() != mean.size()) throw Error(ErrorKind::Parse, "PCA component width mismatch");
    m.components.row(static_cast<Eigen::Index>(k)) =
        Eigen::Map<Eigen::RowVectorXd>(comps[k].data(), m.mean.size());
  }
  return m;
}

std::string_view to_string(HistoryEncoding encoding) {
  switch (encoding) {
    case HistoryEncoding::Stacked: return "stacked";
    case HistoryEncoding::Pooled: return "pooled";
    case HistoryEncoding::Sequence: return "sequence";
  }
  return "unknown";
}

namespace {

Eigen::Index check_days(std::span<const Eigen::VectorXd> days) {
  if (days.empty()) throw Error(ErrorKind::Shape, "history must contain at least one day");
  const Eigen::Index d = days.front().size();
  for (const auto& v : days) {
    if (v.size() != d) throw Error(ErrorKind::Shape, "history days differ in width");
  }
  return d;
}

}  // namespace

Eigen::VectorXd encode_history(std::span<const Eigen::VectorXd> days, HistoryEncoding encoding) {
  const Eigen::Index d = check_days(days);
  const auto h = static_cast<Eigen::Index>(days.size());
  switch (encoding) {
    case HistoryEncoding::Stacked: {
      Eigen::VectorXd out(h * d);
      for (Eigen::Index k = 0; k < h; ++k) out.segment(k * d, d) = days[static_cast<std::size_t>(k)];
      return out;
    }
    case HistoryEncoding::Pooled: {
      Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
      for (const auto& v : days) out += v;
      return out / static_cast<double>(h);
    }
    case HistoryEncoding::Sequence:
      break;
  }
  throw Error(ErrorKind::Parameter, "sequence encoding is a matrix; use encode_sequence");
}

Eigen::MatrixXd encode_sequence(std::span<const Eigen::VectorXd> days) {
  const Eigen::Index d = check_days(days);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(days.size()), d);
  for (std::size_t k = 0; k < days.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = days[k].transpose();
  return out;
}

Design build_design(const HistoryDataset& data, std::span<const std::size_t> indices,
                    HistoryEncoding encoding) {
  if (encoding == HistoryEncoding::Sequence) {
    throw Error(ErrorKind::Parameter, "design matrices need a vector encoding");
  }
  const Eigen::Index d = data.day_features.cols();
  const Eigen::Index h = data.history_len;
  const Eigen::Index width = encoding == HistoryEncoding::Stacked ? h * d : d;
  Design out;
  out.X.resize(static_cast<Eigen::Index>(indices.size()), width);
  out.y.resize(static_cast<Eigen::Index>(indices.size()));
  std::vector<Eigen::VectorXd> days(static_cast<std::size_t>(h));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& inst = data.instances.at(indices[r]);
    for (std::size_t k = 0; k < inst.history.size(); ++k) {
      days[k] = data.day_features.row(static_cast<Eigen::Index>(inst.history[k])).transpose();
    }
    out.X.row(static_cast<Eigen::Index>(r)) = encode_history(days, encoding).transpose();
    out.y(static_cast<Eigen::Index>(r)) = inst.target;
  }
  return out;
}

}  // namespace longeval
