#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "longeval/panel.hpp"
#include "longeval/splits.hpp"

namespace longeval {

// Centered PCA. components is d x D with orthonormal rows; each row's
// largest-magnitude coordinate is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;
  Eigen::VectorXd explained_variance;  // descending

  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(components.rows()); }
};

// Rows of `data` are observations. Throws a Rank error when d exceeds the
// rank of the centered data.
PcaModel fit_pca(const Eigen::MatrixXd& data, int d);

Eigen::VectorXd transform(const PcaModel& model, std::span<const double> x);
// Row-wise transform of a whole table.
Eigen::MatrixXd transform_rows(const PcaModel& model, const Eigen::MatrixXd& rows);

// Fits PCA on the given day_features rows. Throws a Leakage error if any row
// is not part of some Train instance's history.
PcaModel fit_pca_on_rows(const HistoryDataset& data, const SplitPlan& plan,
                         const std::set<std::size_t>& rows, int d);

// Fits PCA on every day vector referenced by Train instances.
PcaModel fit_pca_on_train(const HistoryDataset& data, const SplitPlan& plan, int d);

std::string pca_to_csv(const PcaModel& model);
PcaModel pca_from_csv(std::string_view text);

enum class HistoryEncoding { Stacked, Pooled, Sequence };

std::string_view to_string(HistoryEncoding encoding);

// Stacked: oldest-first concatenation (h*d). Pooled: mean (d). Sequence is a
// matrix and is produced by encode_sequence instead.
Eigen::VectorXd encode_history(std::span<const Eigen::VectorXd> days, HistoryEncoding encoding);
Eigen::MatrixXd encode_sequence(std::span<const Eigen::VectorXd> days);

// Design matrix over selected instances: one encoded row per instance.
struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Design build_design(const HistoryDataset& data, std::span<const std::size_t> indices,
                    HistoryEncoding encoding);

}  // namespace longeval
