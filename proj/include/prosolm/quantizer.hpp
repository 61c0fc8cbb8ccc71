#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "prosolm/corpus.hpp"
#include "prosolm/error.hpp"
#include "prosolm/rng.hpp"
#include "prosolm/standardize.hpp"
#include "prosolm/textio.hpp"

namespace prosolm {

// Nearest-centroid vector quantizer. Centroids live in standardized space;
// quantize() standardizes its input with the stored statistics first.
struct QuantizerModel {
  int k = 0;
  Eigen::MatrixXd centroids;  // k x dim, standardized space, pairwise distinct
  Standardizer standardizer;
  std::uint64_t seed = 0;
  double distortion = 0.0;  // final sum of squared distances
  std::vector<double> distortion_trace;  // per Lloyd iteration; not serialized

  Eigen::Index dim() const { return centroids.cols(); }
};

struct KmeansOptions {
  bool standardize = true;  // identity mode (false) clusters raw coordinates
  int max_iterations = 100;
  double relative_tolerance = 1e-6;
  int threads = 1;  // 0 = one per hardware thread
};

namespace detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Assignment for rows [begin, end): nearest centroid, ties to the lowest
// index. Writes labels and clamped squared distances. Row-blocked so the
// cross-product matrix stays small.
inline void assign_range(const Eigen::MatrixXd& points, const Eigen::VectorXd& point_sq,
                         const Eigen::MatrixXd& centroids, const Eigen::VectorXd& centroid_sq,
                         Eigen::Index begin, Eigen::Index end, std::vector<int>& labels,
                         Eigen::VectorXd& sq_dist) {
  constexpr Eigen::Index kBlock = 2048;
  const int k = static_cast<int>(centroids.rows());
  for (Eigen::Index b = begin; b < end; b += kBlock) {
    const Eigen::Index rows = std::min(kBlock, end - b);
    const Eigen::MatrixXd cross = points.middleRows(b, rows) * centroids.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      int best = 0;
      double best_score = centroid_sq(0) - 2.0 * cross(r, 0);
      for (int j = 1; j < k; ++j) {
        const double score = centroid_sq(j) - 2.0 * cross(r, j);
        if (score < best_score) {
          best_score = score;
          best = j;
        }
      }
      labels[static_cast<std::size_t>(b + r)] = best;
      sq_dist(b + r) = std::max(0.0, point_sq(b + r) + best_score);
    }
  }
}

inline void assign_all(const Eigen::MatrixXd& points, const Eigen::VectorXd& point_sq,
                       const Eigen::MatrixXd& centroids, std::vector<int>& labels,
                       Eigen::VectorXd& sq_dist, int threads) {
  const Eigen::VectorXd centroid_sq = centroids.rowwise().squaredNorm();
  const Eigen::Index n = points.rows();
  threads = std::min<int>(resolve_threads(threads), std::max<Eigen::Index>(1, n / 2048) + 1);
  if (threads <= 1 || n < 4096) {
    assign_range(points, point_sq, centroids, centroid_sq, 0, n, labels, sq_dist);
    return;
  }
  // Fixed partition by index; outputs are per-point, so the result does not
  // depend on the thread count or scheduling.
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  const Eigen::Index step = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const Eigen::Index begin = t * step;
    const Eigen::Index end = std::min(n, begin + step);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      assign_range(points, point_sq, centroids, centroid_sq, begin, end, labels, sq_dist);
    });
  }
  for (auto& th : pool) th.join();
}

inline Eigen::Index count_distinct_rows(const Eigen::MatrixXd& points) {
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    std::vector<double> row(points.cols());
    Eigen::VectorXd::Map(row.data(), points.cols()) = points.row(i);
    seen.insert(std::move(row));
  }
  return static_cast<Eigen::Index>(seen.size());
}

// k-means++: first centroid uniform, then proportional to squared distance
// from the chosen set.
inline Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  const auto first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.row(0) = points.row(first);
  Eigen::VectorXd sq_dist =
      (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = sq_dist.sum();
    Eigen::Index chosen = -1;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        cum += sq_dist(i);
        if (cum >= r && sq_dist(i) > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    if (chosen < 0) {
      // All mass at zero distance; fall back to the first point with any
      // spread left (cannot happen when k <= distinct rows).
      for (Eigen::Index i = 0; i < n && chosen < 0; ++i) {
        if (sq_dist(i) > 0.0) chosen = i;
      }
      if (chosen < 0) chosen = 0;
    }
    centroids.row(j) = points.row(chosen);
    sq_dist = sq_dist.cwiseMin(
        (points.rowwise() - centroids.row(j)).rowwise().squaredNorm());
  }
  return centroids;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed
// (points, k, seed) triple at any thread count. Stops when the relative
// distortion change drops below the tolerance or after max_iterations.
// A cluster that loses all members is reseeded with the point farthest from
// its assigned centroid.
inline QuantizerModel fit_kmeans(const Eigen::MatrixXd& raw_points, int k, std::uint64_t seed,
                                 const KmeansOptions& options = {}) {
  const Eigen::Index n = raw_points.rows();
  if (k < 1) throw infeasible_error("fit_kmeans: k must be >= 1");
  if (n < 1) throw infeasible_error("fit_kmeans: no input vectors");
  const Eigen::Index distinct = detail::count_distinct_rows(raw_points);
  if (static_cast<Eigen::Index>(k) > distinct) {
    throw infeasible_error("fit_kmeans: k=" + std::to_string(k) + " exceeds " +
                           std::to_string(distinct) + " distinct vectors");
  }

  QuantizerModel model;
  model.k = k;
  model.seed = seed;
  model.standardizer = options.standardize ? fit_standardizer(raw_points)
                                           : Standardizer::identity(raw_points.cols());
  const Eigen::MatrixXd points = options.standardize
                                     ? model.standardizer.apply_rows(raw_points)
                                     : raw_points;
  const Eigen::VectorXd point_sq = points.rowwise().squaredNorm();

  Rng rng(seed);
  Eigen::MatrixXd centroids = detail::kmeanspp_seed(points, k, rng);

  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd sq_dist(n);
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
  double prev = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    detail::assign_all(points, point_sq, centroids, labels, sq_dist, options.threads);

    std::fill(sizes.begin(), sizes.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) ++sizes[static_cast<std::size_t>(labels[i])];

    // Reseed empty clusters with the worst-served point of a cluster that can
    // spare one. Strictly decreases the distortion.
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] != 0) continue;
      Eigen::Index donor = -1;
      double worst = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (sizes[static_cast<std::size_t>(labels[i])] < 2) continue;
        if (sq_dist(i) > worst) {
          worst = sq_dist(i);
          donor = i;
        }
      }
      if (donor < 0) continue;  // k == n; every cluster is a singleton
      --sizes[static_cast<std::size_t>(labels[donor])];
      labels[donor] = c;
      sizes[static_cast<std::size_t>(c)] = 1;
      centroids.row(c) = points.row(donor);
      sq_dist(donor) = 0.0;
    }

    const double distortion = sq_dist.sum();
    model.distortion_trace.push_back(distortion);
    model.distortion = distortion;
    if (distortion == 0.0) break;
    if (std::isfinite(prev) && prev - distortion <= options.relative_tolerance * prev) break;
    prev = distortion;

    // Means update, accumulated in point order.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[i]) += points.row(i);
    }
    for (int c = 0; c < k; ++c) {
      centroids.row(c) = sums.row(c) / static_cast<double>(sizes[static_cast<std::size_t>(c)]);
    }
  }

  model.centroids = std::move(centroids);
  return model;
}

// Label of the nearest centroid in standardized Euclidean distance; ties go
// to the lowest index.
inline int quantize(const QuantizerModel& model, const Eigen::VectorXd& vector) {
  if (vector.size() != model.dim()) {
    throw usage_error("quantize: vector has " + std::to_string(vector.size()) +
                      " dimensions, model expects " + std::to_string(model.dim()));
  }
  if (!vector.allFinite()) throw usage_error("quantize: non-finite input entries");
  const Eigen::VectorXd z = model.standardizer.apply(vector);
  int best = 0;
  double best_d = (model.centroids.row(0).transpose() - z).squaredNorm();
  for (int j = 1; j < model.k; ++j) {
    const double d = (model.centroids.row(j).transpose() - z).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

// All prosody vectors of a corpus, one row per prosody-bearing token in
// corpus order.
inline Eigen::MatrixXd prosody_matrix(const Corpus& corpus) {
  std::size_t rows = 0;
  for (const auto& utt : corpus.utterances) {
    for (const auto& tok : utt.tokens) {
      if (tok.prosody) ++rows;
    }
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), kFeatureDim);
  Eigen::Index r = 0;
  for (const auto& utt : corpus.utterances) {
    for (const auto& tok : utt.tokens) {
      if (!tok.prosody) continue;
      m.row(r++) = Eigen::Map<const Eigen::VectorXd>(tok.prosody->data(), kFeatureDim);
    }
  }
  return m;
}

inline QuantizedCorpus quantize_corpus(const QuantizerModel& model, const Corpus& corpus) {
  QuantizedCorpus qc;
  qc.base = corpus;
  qc.labels.reserve(corpus.utterances.size());
  for (const auto& utt : corpus.utterances) {
    std::vector<int> row;
    row.reserve(utt.tokens.size());
    for (const auto& tok : utt.tokens) {
      if (tok.prosody) {
        row.push_back(quantize(model, Eigen::Map<const Eigen::VectorXd>(tok.prosody->data(),
                                                                        kFeatureDim)));
      } else {
        row.push_back(kNoPros);
      }
    }
    qc.labels.push_back(std::move(row));
  }
  return qc;
}

// Codebook text format: header `k dim seed distortion`, one line of means,
// one of stddevs, then k centroid lines. Full decimal precision throughout.
inline void save_codebook(const QuantizerModel& model, const std::string& path) {
  auto out = open_output(path);
  out << model.k << ' ' << model.dim() << ' ' << model.seed << ' '
      << format_double(model.distortion) << '\n';
  auto write_row = [&out](const Eigen::VectorXd& v) {
    for (Eigen::Index d = 0; d < v.size(); ++d) {
      if (d > 0) out << ' ';
      out << format_double(v(d));
    }
    out << '\n';
  };
  write_row(model.standardizer.mean);
  write_row(model.standardizer.stddev);
  for (int c = 0; c < model.k; ++c) write_row(model.centroids.row(c));
  if (!out) throw io_error("failed writing '" + path + "'");
}

inline QuantizerModel load_codebook(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw schema_error(path + ": empty codebook");
  const auto header = split_ws(strip_cr(line));
  if (header.size() != 4) throw schema_error(path + ": header must be 'k dim seed distortion'");
  QuantizerModel model;
  model.k = static_cast<int>(parse_int(header[0], path + " header"));
  const auto dim = static_cast<Eigen::Index>(parse_int(header[1], path + " header"));
  model.seed = static_cast<std::uint64_t>(parse_int(header[2], path + " header"));
  model.distortion = parse_double(header[3], path + " header");
  if (model.k < 1 || dim < 1) throw schema_error(path + ": invalid k or dim");
  auto read_row = [&](Eigen::VectorXd& v, const std::string& what) {
    if (!std::getline(in, line)) throw schema_error(path + ": truncated codebook (" + what + ")");
    const auto cells = split_ws(strip_cr(line));
    if (static_cast<Eigen::Index>(cells.size()) != dim) {
      throw schema_error(path + ": " + what + " has " + std::to_string(cells.size()) +
                         " entries, expected " + std::to_string(dim));
    }
    v.resize(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
      v(d) = parse_double(cells[static_cast<std::size_t>(d)], path + " " + what);
    }
  };
  read_row(model.standardizer.mean, "means");
  read_row(model.standardizer.stddev, "stddevs");
  model.standardizer.constant_dim.assign(static_cast<std::size_t>(dim), false);
  model.centroids.resize(model.k, dim);
  for (int c = 0; c < model.k; ++c) {
    Eigen::VectorXd row;
    read_row(row, "centroid " + std::to_string(c));
    model.centroids.row(c) = row;
  }
  return model;
}

}  // namespace prosolm
