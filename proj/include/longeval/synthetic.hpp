#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "longeval/metrics.hpp"
#include "longeval/panel.hpp"

namespace longeval {

enum class MissingnessMode { Random, Block };

struct CohortSpec {
  int n_people = 20;
  int study_length = 90;
  int feature_dim = 16;
  double outcome_mean = 3.0;
  double sd_between = 0.8;     // person intercept sd
  double ar_coef = 0.5;        // within-person AR(1) coefficient, [0, 1)
  double sd_innovation = 0.2;  // AR(1) innovation sd
  double sd_noise = 0.2;       // outcome measurement noise sd
  double loading_scale = 1.0;
  double feature_noise_sd = 0.5;
  // Persistent per-person offset added to every feature vector. Zero keeps
  // features a pure function of (intercept, state) plus noise.
  double person_style_sd = 0.0;
  double feature_missing_rate = 0.0;
  double outcome_missing_rate = 0.0;
  MissingnessMode missingness = MissingnessMode::Random;
  int block_length = 5;  // mean run length in Block mode
  double outcome_min = 1.0;
  double outcome_max = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
  PanelSchema schema() const;
};

struct GroundTruth {
  double outcome_mean = 0.0;
  std::map<PersonId, double> intercept;              // b_i
  std::map<PersonId, std::vector<double>> state;     // s_{i,t}, one per day
  Eigen::MatrixXd loading;                           // D x 2, columns (b, s)
};

struct SyntheticCohort {
  Panel panel;
  GroundTruth truth;
};

// b_i ~ N(0, sd_between^2); s_{i,0} from the stationary AR(1) law, then
// s_{i,t} = ar_coef * s_{i,t-1} + N(0, sd_innovation^2);
// y = clamp(mu + b_i + s_{i,t} + N(0, sd_noise^2));
// x = W [b_i, s_{i,t}]' + style_i + N(0, feature_noise_sd^2 I).
SyntheticCohort generate(const CohortSpec& spec);

// Predicts mu + b_i at every observed outcome of the panel.
PredictionSet oracle_between_only_predictor(const GroundTruth& truth, const Panel& panel);

// `person_id,day,b,s`
std::string truth_to_csv(const GroundTruth& truth);

std::string person_label(int index, int n_people);

}  // namespace longeval
