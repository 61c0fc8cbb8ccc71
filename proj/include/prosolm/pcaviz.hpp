#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "prosolm/corpus.hpp"
#include "prosolm/error.hpp"
#include "prosolm/textio.hpp"

namespace prosolm {

// Top-2 principal directions of a feature matrix.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // 2 x dim, orthonormal rows
  std::array<double, 2> explained_variance_ratio = {0.0, 0.0};
};

// Mean-centering followed by thin SVD; the top-2 right singular directions
// are kept. SVD leaves each direction's sign arbitrary, so the coordinate
// with the largest absolute loading is made positive.
inline PcaModel fit_pca(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() < 3) {
    throw infeasible_error("fit_pca: need at least 3 rows, got " +
                           std::to_string(matrix.rows()));
  }
  if (matrix.cols() < 2) throw usage_error("fit_pca: need at least 2 columns");
  if (!matrix.allFinite()) throw usage_error("fit_pca: non-finite inputs");

  PcaModel model;
  model.mean = matrix.colwise().mean();
  const Eigen::MatrixXd centered = matrix.rowwise() - model.mean.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double total = sigma.array().square().sum();

  model.components.resize(2, matrix.cols());
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::RowVectorXd direction = svd.matrixV().col(c).transpose();
    Eigen::Index largest = 0;
    direction.cwiseAbs().maxCoeff(&largest);
    if (direction(largest) < 0.0) direction = -direction;
    model.components.row(c) = direction;
    model.explained_variance_ratio[static_cast<std::size_t>(c)] =
        total > 0.0 ? sigma(c) * sigma(c) / total : 0.0;
  }
  return model;
}

// components · (vector − mean)
inline std::array<double, 2> project(const PcaModel& model, const Eigen::VectorXd& vector) {
  if (vector.size() != model.mean.size()) {
    throw usage_error("project: vector has " + std::to_string(vector.size()) +
                      " dims, model expects " + std::to_string(model.mean.size()));
  }
  if (!vector.allFinite()) throw usage_error("project: non-finite vector");
  const Eigen::Vector2d p = model.components * (vector - model.mean);
  return {p(0), p(1)};
}

using ScatterMap = std::map<std::string, std::array<double, 2>>;

inline PosTag pos_or_other(const PosLabels& pos, const std::string& word) {
  const auto it = pos.entries.find(word);
  return it == pos.entries.end() ? PosTag::oth : it->second;
}

// Mean silhouette of the 2-D points grouped by POS class: for each point,
// a = mean distance to its own class, b = smallest mean distance to another
// class, s = (b−a)/max(a,b). Singleton classes and degenerate cases score 0.
inline double mean_silhouette(const ScatterMap& points, const PosLabels& pos) {
  std::vector<std::array<double, 2>> xy;
  std::vector<PosTag> tag;
  for (const auto& [word, p] : points) {
    xy.push_back(p);
    tag.push_back(pos_or_other(pos, word));
  }
  const std::size_t n = xy.size();
  if (n < 2) return 0.0;

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<PosTag, std::pair<double, std::size_t>> by_class;  // distance sum, count
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = xy[i][0] - xy[j][0];
      const double dy = xy[i][1] - xy[j][1];
      auto& acc = by_class[tag[j]];
      acc.first += std::sqrt(dx * dx + dy * dy);
      ++acc.second;
    }
    const auto own = by_class.find(tag[i]);
    if (own == by_class.end()) continue;  // singleton class: s = 0
    const double a = own->second.first / static_cast<double>(own->second.second);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [t, acc] : by_class) {
      if (t == tag[i]) continue;
      b = std::min(b, acc.first / static_cast<double>(acc.second));
    }
    if (!std::isfinite(b)) continue;  // only one class present: s = 0
    const double denom = std::max(a, b);
    if (denom > 0.0) sum += (b - a) / denom;
  }
  return sum / static_cast<double>(n);
}

namespace detail {

inline const char* pos_color(PosTag tag) {
  switch (tag) {
    case PosTag::nn: return "#1f77b4";
    case PosTag::vrb: return "#d62728";
    case PosTag::fct: return "#2ca02c";
    case PosTag::adj: return "#ff7f0e";
    case PosTag::oth: return "#7f7f7f";
  }
  return "#000000";
}

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

// CSV rows `word,pc1,pc2,pos`; words without a POS label are tagged oth.
inline void save_scatter_csv(const std::string& path, const ScatterMap& points,
                             const PosLabels& pos) {
  auto out = open_output(path);
  out << "word,pc1,pc2,pos\n";
  for (const auto& [word, p] : points) {
    out << word << ',' << format_double(p[0]) << ',' << format_double(p[1]) << ','
        << to_string(pos_or_other(pos, word)) << '\n';
  }
  if (!out) throw io_error("failed writing '" + path + "'");
}

// Static SVG scatter, one dot per word, colored by the five POS classes.
inline void save_scatter_svg(const std::string& path, const ScatterMap& points,
                             const PosLabels& pos) {
  constexpr double size = 640.0, margin = 48.0;
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x;
  double lo_y = lo_x, hi_y = -lo_x;
  for (const auto& [word, p] : points) {
    lo_x = std::min(lo_x, p[0]);
    hi_x = std::max(hi_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_y = std::max(hi_y, p[1]);
  }
  if (points.empty()) lo_x = hi_x = lo_y = hi_y = 0.0;
  if (hi_x - lo_x < 1e-12) { lo_x -= 1.0; hi_x += 1.0; }
  if (hi_y - lo_y < 1e-12) { lo_y -= 1.0; hi_y += 1.0; }
  const double span = size - 2.0 * margin;
  auto sx = [&](double x) { return margin + (x - lo_x) / (hi_x - lo_x) * span; };
  auto sy = [&](double y) { return size - margin - (y - lo_y) / (hi_y - lo_y) * span; };

  auto out = open_output(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << size
      << "\" height=\"" << size << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
  out << "<rect width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << size - margin << "\" x2=\"" << size - margin
      << "\" y2=\"" << size - margin << "\" stroke=\"#333\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << size - margin << "\" stroke=\"#333\"/>\n";
  out << "<text x=\"" << size / 2 << "\" y=\"" << size - 12
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">PC1</text>\n";
  out << "<text x=\"16\" y=\"" << size / 2
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 16 "
      << size / 2 << ")\">PC2</text>\n";
  for (const auto& [word, p] : points) {
    out << "<circle cx=\"" << detail::svg_num(sx(p[0])) << "\" cy=\"" << detail::svg_num(sy(p[1]))
        << "\" r=\"4\" fill=\"" << detail::pos_color(pos_or_other(pos, word))
        << "\" fill-opacity=\"0.8\"><title>" << word << "</title></circle>\n";
  }
  double ly = margin;
  for (PosTag t : {PosTag::nn, PosTag::vrb, PosTag::fct, PosTag::adj, PosTag::oth}) {
    out << "<circle cx=\"" << size - margin - 70 << "\" cy=\"" << ly << "\" r=\"5\" fill=\""
        << detail::pos_color(t) << "\"/>\n";
    out << "<text x=\"" << size - margin - 58 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << to_string(t) << "</text>\n";
    ly += 18.0;
  }
  out << "</svg>\n";
  if (!out) throw io_error("failed writing '" + path + "'");
}

// Cluster-quality metadata to pin the visual claim down numerically.
inline void save_pca_metadata(const std::string& path, const PcaModel& model,
                              const ScatterMap& points, const PosLabels& pos) {
  std::map<std::string, std::size_t> class_counts;
  for (const auto& [word, p] : points) {
    ++class_counts[to_string(pos_or_other(pos, word))];
  }
  nlohmann::ordered_json j;
  j["points"] = points.size();
  j["explained_variance_ratio"] = model.explained_variance_ratio;
  j["mean_silhouette"] = mean_silhouette(points, pos);
  j["class_counts"] = class_counts;
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw io_error("failed writing '" + path + "'");
}

}  // namespace prosolm
