#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "longeval/features.hpp"
#include "longeval/splits.hpp"

namespace longeval {

struct MeanBaseline {
  double mean = 0.0;

  double predict() const { return mean; }
};

MeanBaseline fit_mean_baseline(std::span<const double> train_targets);

// Linear model with an unpenalized intercept.
struct RidgeModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double lambda = 1.0;
  HistoryEncoding encoding = HistoryEncoding::Stacked;
  int history_len = 1;

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // One prediction per row.
  Eigen::VectorXd predict_rows(const Eigen::MatrixXd& X) const;
};

// Centers X and y, solves (Xc'Xc + lambda I) w = Xc'yc with an LDLT
// factorization and recovers bias = mean(y) - mean(X) w.
RidgeModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

// {10^i : i = -2..5}
std::vector<double> default_lambda_grid();

struct SelectionTrace {
  std::vector<std::pair<double, double>> grid;  // (hyperparameter, dev score)
  double chosen = 0.0;
  Regime dev_regime = Regime::Traditional;
  std::string note;
};

struct RidgeSelection {
  RidgeModel model;
  SelectionTrace trace;
};

// Fits every grid value on train, scores flattened MAE on dev, and refits the
// winner on train + dev. Ties go to the larger penalty.
RidgeSelection select_ridge(const Design& train, const Design& dev, std::span<const double> grid,
                            Regime dev_regime, HistoryEncoding encoding, int history_len);

std::string mean_baseline_to_text(const MeanBaseline& model);
std::string ridge_to_text(const RidgeModel& model);
RidgeModel ridge_from_text(std::string_view text);
MeanBaseline mean_baseline_from_text(std::string_view text);

}  // namespace longeval
