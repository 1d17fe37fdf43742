#include "qsat/learners/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qsat/error.hpp"
#include "qsat/learners/params.hpp"

namespace qsat {

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw Error(ErrorCode::Schema, "tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n) {
      throw Error(ErrorCode::Schema, "internal tree node with a missing child");
    }
  }
}

double RegressionTree::predict_row(std::span<const double> row) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& node = nodes_[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return nodes_[i].value;
}

std::size_t RegressionTree::split_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return !n.is_leaf(); }));
}

void RegressionTree::accumulate_importance(std::vector<double>& importance) const {
  for (const auto& node : nodes_) {
    if (!node.is_leaf()) importance.at(static_cast<std::size_t>(node.feature)) += node.gain;
  }
}

nlohmann::json RegressionTree::to_json() const {
  std::vector<int> feature, left, right;
  std::vector<double> threshold, value, gain;
  for (const auto& n : nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
    gain.push_back(n.gain);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right},     {"value", value},         {"gain", gain}};
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const auto gain = j.at("gain").get<std::vector<double>>();
  const std::size_t n = feature.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n ||
      gain.size() != n) {
    throw Error(ErrorCode::Schema, "tree arrays differ in length");
  }
  std::vector<TreeNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i], gain[i]};
  }
  return RegressionTree(std::move(nodes));
}

namespace {

double soft_threshold(double g, double alpha) {
  if (alpha <= 0.0) return g;
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

struct Entry {
  double x;
  double g;
  double h;
};

class TreeGrower {
 public:
  TreeGrower(const Matrix& x, std::span<const double> grad, std::span<const double> hess,
             std::span<const std::size_t> features, const TreeGrowConfig& config, Rng& rng)
      : x_(x), grad_(grad), hess_(hess), features_(features.begin(), features.end()),
        config_(config), rng_(rng) {}

  std::vector<TreeNode> run(std::vector<std::size_t> rows) {
    build(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  double term(double g, double h) const {
    const double denom = h + config_.reg_lambda;
    if (denom <= 0.0) return 0.0;
    const double t = soft_threshold(g, config_.reg_alpha);
    return t * t / denom;
  }

  double leaf_value(double g, double h) const {
    const double denom = h + config_.reg_lambda;
    if (denom <= 0.0) return 0.0;
    return -soft_threshold(g, config_.reg_alpha) / denom;
  }

  std::vector<std::size_t> candidate_features(const std::vector<std::size_t>& rows) {
    auto non_constant = [&](std::size_t f) {
      const double first = x_(rows.front(), f);
      for (auto r : rows) {
        if (x_(r, f) != first) return true;
      }
      return false;
    };
    std::vector<std::size_t> chosen;
    if (!config_.max_features) {
      for (auto f : features_) {
        if (non_constant(f)) chosen.push_back(f);
      }
      return chosen;
    }
    // Visit features in random order and keep the first max_features that
    // can actually split this node.
    std::vector<std::size_t> order = features_;
    std::shuffle(order.begin(), order.end(), rng_);
    for (auto f : order) {
      if (chosen.size() >= *config_.max_features) break;
      if (non_constant(f)) chosen.push_back(f);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  int build(std::vector<std::size_t> rows, int depth) {
    double g_sum = 0.0, h_sum = 0.0;
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -g_min;
    for (auto r : rows) {
      g_sum += grad_[r];
      h_sum += hess_[r];
      g_min = std::min(g_min, grad_[r]);
      g_max = std::max(g_max, grad_[r]);
    }

    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    nodes_[index].value = leaf_value(g_sum, h_sum);

    const auto n = static_cast<int>(rows.size());
    const bool pure = g_max - g_min <= 1e-12 * std::max(1.0, std::abs(g_max));
    if (pure || n < config_.min_samples_split || n < 2 * config_.min_samples_leaf ||
        (config_.max_depth && depth >= *config_.max_depth)) {
      return index;
    }

    const double parent = term(g_sum, h_sum);
    bool found = false;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    double best_score = -std::numeric_limits<double>::infinity();

    std::vector<Entry> entries(rows.size());
    for (auto f : candidate_features(rows)) {
      for (std::size_t k = 0; k < rows.size(); ++k) {
        entries[k] = {x_(rows[k], f), grad_[rows[k]], hess_[rows[k]]};
      }
      std::stable_sort(entries.begin(), entries.end(),
                       [](const Entry& a, const Entry& b) { return a.x < b.x; });
      double gl = 0.0, hl = 0.0;
      for (std::size_t k = 0; k + 1 < entries.size(); ++k) {
        gl += entries[k].g;
        hl += entries[k].h;
        if (entries[k].x == entries[k + 1].x) continue;
        const auto n_left = static_cast<int>(k + 1);
        if (n_left < config_.min_samples_leaf || n - n_left < config_.min_samples_leaf) continue;
        const double score = term(gl, hl) + term(g_sum - gl, h_sum - hl) - parent;
        if (!found || score > best_score + 1e-12 * std::max(1.0, std::abs(best_score))) {
          const double lo = entries[k].x, hi = entries[k + 1].x;
          double mid = lo + 0.5 * (hi - lo);
          if (!(mid < hi)) mid = lo;
          found = true;
          best_feature = f;
          best_threshold = mid;
          best_score = score;
        }
      }
    }

    // Zero-gain splits are kept (an impure node keeps splitting); a strictly
    // negative regularized gain is not worth a split.
    if (!found || best_score < -1e-12 * std::max(1.0, std::abs(parent))) return index;

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) {
      (x_(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    nodes_[index].feature = static_cast<int>(best_feature);
    nodes_[index].threshold = best_threshold;
    nodes_[index].gain = std::max(0.0, best_score);
    const int left = build(std::move(left_rows), depth + 1);
    const int right = build(std::move(right_rows), depth + 1);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
  }

  const Matrix& x_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  std::vector<std::size_t> features_;
  const TreeGrowConfig& config_;
  Rng& rng_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RegressionTree grow_tree(const Matrix& x, std::span<const double> grad,
                         std::span<const double> hess, std::span<const std::size_t> rows,
                         std::span<const std::size_t> features, const TreeGrowConfig& config,
                         Rng& rng) {
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "cannot grow a tree on zero rows");
  if (config.min_samples_leaf < 1 || config.min_samples_split < 2) {
    throw Error(ErrorCode::InvalidArgument, "min_samples_leaf >= 1 and min_samples_split >= 2");
  }
  TreeGrower grower(x, grad, hess, features, config, rng);
  return RegressionTree(grower.run(std::vector<std::size_t>(rows.begin(), rows.end())));
}

RegressionTree fit_cart(const Matrix& x, std::span<const double> y,
                        std::span<const std::size_t> rows, const TreeGrowConfig& config,
                        Rng& rng) {
  std::vector<double> grad(y.size()), hess(y.size(), 1.0);
  for (std::size_t i = 0; i < y.size(); ++i) grad[i] = -y[i];
  std::vector<std::size_t> features(x.cols());
  std::iota(features.begin(), features.end(), 0);
  return grow_tree(x, grad, hess, rows, features, config, rng);
}

std::optional<std::size_t> resolve_max_features(MaxFeatures mode, std::size_t feature_count) {
  if (mode == MaxFeatures::All) return std::nullopt;
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(feature_count)))));
}

MaxFeatures parse_max_features(const nlohmann::json* value) {
  if (!value || value->is_null()) return MaxFeatures::All;
  if (value->is_string()) {
    const auto s = value->get<std::string>();
    if (s == "sqrt") return MaxFeatures::Sqrt;
    if (s == "all") return MaxFeatures::All;
  }
  throw Error(ErrorCode::InvalidArgument, "max_features must be \"sqrt\", \"all\" or null",
              "max_features");
}

nlohmann::json max_features_json(MaxFeatures mode) {
  return mode == MaxFeatures::Sqrt ? "sqrt" : "all";
}

DecisionTreeParams DecisionTreeParams::from_json(const nlohmann::json& j) {
  ParamReader r(j);
  DecisionTreeParams p;
  if (r.text("criterion", "squared_error") != "squared_error") {
    r.fail("criterion", "only squared_error is supported");
  }
  p.max_depth = r.optional_integer("max_depth", std::nullopt);
  p.min_samples_split = r.integer("min_samples_split", 2);
  p.min_samples_leaf = r.integer("min_samples_leaf", 1);
  const auto* mf = r.raw("max_features");
  p.max_features = mf ? parse_max_features(mf) : MaxFeatures::Sqrt;
  r.finish();
  if (p.max_depth && *p.max_depth < 1) r.fail("max_depth", "must be >= 1 or null");
  if (p.min_samples_split < 2) r.fail("min_samples_split", "must be >= 2");
  if (p.min_samples_leaf < 1) r.fail("min_samples_leaf", "must be >= 1");
  return p;
}

nlohmann::json DecisionTreeParams::to_json() const {
  return {{"criterion", "squared_error"},
          {"max_depth", max_depth ? nlohmann::json(*max_depth) : nlohmann::json(nullptr)},
          {"max_features", max_features_json(max_features)},
          {"min_samples_leaf", min_samples_leaf},
          {"min_samples_split", min_samples_split}};
}

nlohmann::json DecisionTreeModel::state() const {
  return {{"feature_count", features_}, {"tree", tree_.to_json()}};
}

DecisionTreeModel DecisionTreeModel::from_state(const nlohmann::json& params,
                                                const nlohmann::json& state) {
  return DecisionTreeModel(DecisionTreeParams::from_json(params),
                           RegressionTree::from_json(state.at("tree")),
                           state.at("feature_count").get<std::size_t>());
}

DecisionTreeModel fit_decision_tree(const Matrix& x, std::span<const double> y,
                                    const DecisionTreeParams& params, std::uint64_t seed) {
  check_training_data(x, y);
  TreeGrowConfig cfg;
  cfg.max_depth = params.max_depth;
  cfg.min_samples_split = params.min_samples_split;
  cfg.min_samples_leaf = params.min_samples_leaf;
  cfg.max_features = resolve_max_features(params.max_features, x.cols());
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), 0);
  auto rng = make_rng(seed, {0xd7});
  return DecisionTreeModel(params, fit_cart(x, y, rows, cfg, rng), x.cols());
}

}  // namespace qsat
