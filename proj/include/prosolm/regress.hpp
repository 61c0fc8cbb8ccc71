#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "prosolm/corpus.hpp"
#include "prosolm/error.hpp"
#include "prosolm/rng.hpp"
#include "prosolm/standardize.hpp"
#include "prosolm/textio.hpp"

namespace prosolm {

// Raw (log-transformed but unstandardized) predictors for a set of target
// words. Standardization happens where the train/test split is known.
struct DesignMatrix {
  std::vector<std::string> column_names;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> word_index;
  std::vector<std::string> dropped_words;  // rows lost during assembly, with reason
};

struct RidgeModel {
  double lambda = 0.0;
  Eigen::VectorXd beta;
  double intercept = 0.0;  // mean of y; never penalized
  Standardizer column_stats;
  std::vector<std::string> column_names;
};

struct CvResult {
  std::vector<double> fold_mses;
  double mean_mse = 0.0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
};

// Penalized least squares on centered data: (XᵀX + λI)β = Xᵀy. Callers pass
// standardized predictors; the columns are re-centered here so the intercept
// (the target mean) stays out of the penalty. The returned model standardizes
// with identity stats — callers that fitted a Standardizer overwrite
// column_stats so predict() can accept raw rows.
inline RidgeModel fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  if (X.rows() != y.size()) {
    throw usage_error("fit_ridge: X has " + std::to_string(X.rows()) + " rows but y has " +
                      std::to_string(y.size()));
  }
  if (X.rows() < 2) throw infeasible_error("fit_ridge: need at least 2 rows");
  if (!X.allFinite() || !y.allFinite()) throw usage_error("fit_ridge: non-finite inputs");
  if (lambda < 0.0) throw usage_error("fit_ridge: lambda must be non-negative");

  const Eigen::Index p = X.cols();
  const Eigen::RowVectorXd col_mean = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - col_mean;
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;

  const Eigen::MatrixXd A =
      Xc.transpose() * Xc + lambda * Eigen::MatrixXd::Identity(p, p);
  const Eigen::VectorXd b = Xc.transpose() * yc;
  Eigen::LDLT<Eigen::MatrixXd> solver(A);
  // Exactly collinear columns keep the normal equations consistent, so a
  // residual test alone cannot see the rank deficiency; inspect the pivots.
  const Eigen::VectorXd pivots = solver.vectorD().cwiseAbs();
  const double pivot_max = pivots.maxCoeff();
  Eigen::VectorXd beta = solver.solve(b);
  if (solver.info() != Eigen::Success || !(pivot_max > 0.0) ||
      pivots.minCoeff() <= pivot_max * 1e-12 || !beta.allFinite() ||
      (A * beta - b).norm() > 1e-6 * std::max(1.0, b.norm())) {
    throw infeasible_error(
        "fit_ridge: singular normal equations (collinear predictors); use lambda > 0");
  }

  RidgeModel model;
  model.lambda = lambda;
  model.beta = std::move(beta);
  model.intercept = y_mean;
  model.column_stats = Standardizer::identity(p);
  // Fold the centering back into the stats so predict() on the same raw rows
  // reproduces the fit even without caller-provided statistics.
  model.column_stats.mean = col_mean.transpose();
  return model;
}

// Standardize raw predictor rows, then fit. The model keeps the fitted column
// statistics, so predict() takes raw rows.
inline RidgeModel fit_ridge_raw(const Eigen::MatrixXd& X_raw, const Eigen::VectorXd& y,
                                double lambda) {
  const Standardizer stats = fit_standardizer(X_raw);
  RidgeModel model = fit_ridge(stats.apply_rows(X_raw), y, lambda);
  model.column_stats = stats;
  return model;
}

// intercept + standardized(X_new)·beta, standardizing with the training-fold
// statistics carried by the model.
inline Eigen::VectorXd predict(const RidgeModel& model, const Eigen::MatrixXd& X_new) {
  if (X_new.cols() != model.column_stats.dim()) {
    throw schema_error("predict: " + std::to_string(X_new.cols()) +
                       " columns do not match the model's " +
                       std::to_string(model.column_stats.dim()));
  }
  if (!X_new.allFinite()) throw usage_error("predict: non-finite inputs");
  const Eigen::MatrixXd Xs = model.column_stats.apply_rows(X_new);
  return (Xs * model.beta).array() + model.intercept;
}

// Seeded 10-fold (by default) cross validation. Rows are shuffled once, cut
// into near-equal contiguous folds, and each fold's standardization is fitted
// on its training rows only, so no held-out statistics leak into the fit.
inline CvResult cv_mse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                       std::size_t folds, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (folds < 2) throw usage_error("cv_mse: need at least 2 folds");
  if (n < folds) {
    throw infeasible_error("cv_mse: " + std::to_string(n) + " rows cannot fill " +
                           std::to_string(folds) + " folds");
  }
  if (X.rows() != y.size()) throw usage_error("cv_mse: X and y row counts differ");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  CvResult result;
  result.seed = seed;
  result.lambda = lambda;
  std::size_t start = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = n / folds + (f < n % folds ? 1 : 0);
    const std::size_t stop = start + size;

    Eigen::MatrixXd X_train(n - size, X.cols());
    Eigen::VectorXd y_train(n - size);
    Eigen::MatrixXd X_test(size, X.cols());
    Eigen::VectorXd y_test(size);
    Eigen::Index tr = 0, te = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(order[i]);
      if (i >= start && i < stop) {
        X_test.row(te) = X.row(row);
        y_test(te++) = y(row);
      } else {
        X_train.row(tr) = X.row(row);
        y_train(tr++) = y(row);
      }
    }

    const RidgeModel model = fit_ridge_raw(X_train, y_train, lambda);
    const Eigen::VectorXd pred = predict(model, X_test);
    result.fold_mses.push_back((pred - y_test).squaredNorm() /
                               static_cast<double>(size));
    start = stop;
  }
  result.mean_mse = std::accumulate(result.fold_mses.begin(), result.fold_mses.end(), 0.0) /
                    static_cast<double>(folds);
  return result;
}

inline CvResult cv_mse(const DesignMatrix& design, double lambda, std::size_t folds,
                       std::uint64_t seed) {
  return cv_mse(design.X, design.y, lambda, folds, seed);
}

// ---------------------------------------------------------------------------
// Single-feature sweep
// ---------------------------------------------------------------------------

enum class SweepMode { alone, with_frequency };

inline const char* to_string(SweepMode m) {
  return m == SweepMode::alone ? "alone" : "with_frequency";
}

inline SweepMode sweep_mode_from_string(const std::string& s) {
  if (s == "alone") return SweepMode::alone;
  if (s == "with_frequency") return SweepMode::with_frequency;
  throw usage_error("unknown sweep mode '" + s + "' (expected alone|with_frequency)");
}

inline std::string feature_column_name(std::size_t index) {
  std::string n = std::to_string(index);
  if (n.size() < 2) n.insert(n.begin(), '0');
  return "egemaps_" + n;
}

struct SweepEntry {
  std::string feature;
  double mean_mse = 0.0;
  std::vector<double> fold_mses;
};

struct SweepResult {
  SweepMode mode = SweepMode::alone;
  std::vector<SweepEntry> ranked;  // ascending mean MSE; includes "frequency" baseline
  std::vector<std::string> words;  // row universe the sweep ran on
  double lambda = 0.0;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
};

struct SweepOptions {
  double lambda = 1.0;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

// Ranks each per-word feature column (plus a frequency-only baseline row) by
// cross-validated MSE against AoA, either on its own or paired with log
// frequency.
inline SweepResult single_feature_sweep(const std::map<std::string, std::uint64_t>& freq,
                                        const std::map<std::string, std::vector<double>>& features,
                                        const AoaDataset& aoa, SweepMode mode,
                                        const SweepOptions& options = {}) {
  std::vector<std::string> words;
  std::size_t dim = 0;
  for (const auto& [word, months] : aoa.entries) {
    const auto fit = freq.find(word);
    const auto vit = features.find(word);
    if (fit == freq.end() || fit->second == 0 || vit == features.end()) continue;
    if (dim == 0) {
      dim = vit->second.size();
    } else if (vit->second.size() != dim) {
      throw schema_error("single_feature_sweep: inconsistent feature width for '" + word + "'");
    }
    words.push_back(word);
  }
  if (words.size() < 10) {
    throw infeasible_error("single_feature_sweep: only " + std::to_string(words.size()) +
                           " words are covered by frequency, features, and AoA (need 10)");
  }

  const auto n = static_cast<Eigen::Index>(words.size());
  Eigen::VectorXd y(n), log_freq(n);
  Eigen::MatrixXd feat(n, static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = aoa.entries.at(words[static_cast<std::size_t>(i)]);
    log_freq(i) = std::log(static_cast<double>(freq.at(words[static_cast<std::size_t>(i)])));
    const auto& v = features.at(words[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < dim; ++j) {
      feat(i, static_cast<Eigen::Index>(j)) = v[j];
    }
  }

  SweepResult result;
  result.mode = mode;
  result.words = words;
  result.lambda = options.lambda;
  result.folds = options.folds;
  result.seed = options.seed;

  auto run = [&](const std::string& name, const Eigen::MatrixXd& X) {
    const CvResult cv = cv_mse(X, y, options.lambda, options.folds, options.seed);
    result.ranked.push_back({name, cv.mean_mse, cv.fold_mses});
  };
  run("frequency", log_freq);
  for (std::size_t j = 0; j < dim; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    if (mode == SweepMode::alone) {
      run(feature_column_name(j), feat.col(col));
    } else {
      Eigen::MatrixXd X(n, 2);
      X.col(0) = log_freq;
      X.col(1) = feat.col(col);
      run(feature_column_name(j), X);
    }
  }
  std::sort(result.ranked.begin(), result.ranked.end(),
            [](const SweepEntry& a, const SweepEntry& b) {
              return a.mean_mse != b.mean_mse ? a.mean_mse < b.mean_mse
                                              : a.feature < b.feature;
            });
  return result;
}

// `rank,feature,mode,mean_mse,fold_mse_0,…`
inline void save_sweep_csv(const std::string& path, const SweepResult& sweep) {
  auto out = open_output(path);
  out << "rank,feature,mode,mean_mse";
  for (std::size_t f = 0; f < sweep.folds; ++f) out << ",fold_mse_" << f;
  out << '\n';
  for (std::size_t i = 0; i < sweep.ranked.size(); ++i) {
    const auto& e = sweep.ranked[i];
    out << (i + 1) << ',' << e.feature << ',' << to_string(sweep.mode) << ','
        << format_double(e.mean_mse);
    for (double m : e.fold_mses) out << ',' << format_double(m);
    out << '\n';
  }
  if (!out) throw io_error("failed writing '" + path + "'");
}

// Union of the top-n feature names of two sweeps over the same feature set.
// The frequency baseline row is not a feature and never selected.
inline std::vector<std::string> select_features(const SweepResult& sweep_a,
                                                const SweepResult& sweep_b,
                                                std::size_t top_n = 10) {
  auto names_of = [](const SweepResult& s) {
    std::set<std::string> names;
    for (const auto& e : s.ranked) {
      if (e.feature != "frequency") names.insert(e.feature);
    }
    return names;
  };
  const auto names_a = names_of(sweep_a);
  if (names_a != names_of(sweep_b)) {
    throw usage_error("select_features: the two sweeps cover different feature sets");
  }
  if (names_a.size() < top_n) {
    throw infeasible_error("select_features: sweeps cover " + std::to_string(names_a.size()) +
                           " features, fewer than top_n=" + std::to_string(top_n));
  }
  std::set<std::string> selected;
  for (const SweepResult* s : {&sweep_a, &sweep_b}) {
    std::size_t taken = 0;
    for (const auto& e : s->ranked) {
      if (taken == top_n) break;
      if (e.feature == "frequency") continue;
      selected.insert(e.feature);
      ++taken;
    }
  }
  return {selected.begin(), selected.end()};
}

// ---------------------------------------------------------------------------
// Predictor assembly from language-model probabilities
// ---------------------------------------------------------------------------

// Expands a predictor-combo name into column names: "f" (log frequency),
// "all" (frequency plus every model), "f_<model>", or a comma-separated list
// of "f" and model names.
inline std::vector<std::string> expand_predictor_combo(
    const std::string& combo, const std::vector<std::string>& model_names) {
  auto is_model = [&](const std::string& name) {
    return std::find(model_names.begin(), model_names.end(), name) != model_names.end();
  };
  std::vector<std::string> columns;
  if (combo == "all") {
    columns.push_back("f");
    columns.insert(columns.end(), model_names.begin(), model_names.end());
    return columns;
  }
  for (const auto& token : split_char(combo, ',')) {
    if (token == "f" || is_model(token)) {
      columns.push_back(token);
    } else if (token.rfind("f_", 0) == 0 && is_model(token.substr(2))) {
      columns.push_back("f");
      columns.push_back(token.substr(2));
    } else {
      throw usage_error("unknown predictor '" + token + "' in combo '" + combo + "'");
    }
  }
  if (columns.empty()) throw usage_error("empty predictor combo");
  return columns;
}

// Builds the AoA design matrix for a predictor combo. All selected predictors
// are log-transformed; words missing from any selected source are dropped and
// logged. Non-positive probabilities cannot be mapped to log space and are an
// error naming the word.
inline DesignMatrix lm_predictor_matrix(
    const std::vector<std::pair<std::string, std::map<std::string, double>>>& prob_maps,
    const std::map<std::string, std::uint64_t>& freq, const AoaDataset& aoa,
    const std::string& combo) {
  std::vector<std::string> model_names;
  model_names.reserve(prob_maps.size());
  for (const auto& [name, probs] : prob_maps) model_names.push_back(name);
  const std::vector<std::string> columns = expand_predictor_combo(combo, model_names);

  auto probs_of = [&](const std::string& name) -> const std::map<std::string, double>& {
    for (const auto& [n, probs] : prob_maps) {
      if (n == name) return probs;
    }
    throw usage_error("no probability map for model '" + name + "'");
  };

  DesignMatrix design;
  design.column_names = columns;
  std::vector<std::vector<double>> rows;
  for (const auto& [word, months] : aoa.entries) {
    std::vector<double> row;
    row.reserve(columns.size());
    std::string missing_from;
    for (const auto& col : columns) {
      if (col == "f") {
        const auto it = freq.find(word);
        if (it == freq.end() || it->second == 0) {
          missing_from = "corpus frequency";
          break;
        }
        row.push_back(std::log(static_cast<double>(it->second)));
      } else {
        const auto& probs = probs_of(col);
        const auto it = probs.find(word);
        if (it == probs.end()) {
          missing_from = "model " + col;
          break;
        }
        if (!(it->second > 0.0)) {
          throw infeasible_error("lm_predictor_matrix: probability for word '" + word +
                                 "' under model " + col + " is not positive; cannot log-transform");
        }
        row.push_back(std::log(it->second));
      }
    }
    if (!missing_from.empty()) {
      design.dropped_words.push_back(word + ": missing from " + missing_from);
      continue;
    }
    design.word_index.push_back(word);
    rows.push_back(std::move(row));
  }

  design.X.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(columns.size()));
  design.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    design.y(static_cast<Eigen::Index>(i)) = aoa.entries.at(design.word_index[i]);
    for (std::size_t j = 0; j < columns.size(); ++j) {
      design.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return design;
}

// CV result JSON: predictors, penalty, seed, per-fold and mean MSE, and the
// rows dropped while assembling predictors.
inline void save_cv_json(const std::string& path, const CvResult& cv,
                         const std::vector<std::string>& predictors, std::size_t rows,
                         const std::vector<std::string>& dropped_words) {
  nlohmann::ordered_json j;
  j["predictors"] = predictors;
  j["rows"] = rows;
  j["lambda"] = cv.lambda;
  j["folds"] = cv.fold_mses.size();
  j["seed"] = cv.seed;
  j["fold_mses"] = cv.fold_mses;
  j["mean_mse"] = cv.mean_mse;
  j["dropped_words"] = dropped_words;
  j["standardization"] = "per-fold (training rows only)";
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw io_error("failed writing '" + path + "'");
}

}  // namespace prosolm
