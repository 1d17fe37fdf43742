#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "qsat/learners/regressor.hpp"
#include "qsat/random.hpp"

namespace qsat {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output
  double gain = 0.0;   // objective decrease of this split (SSE for plain CART)

  bool is_leaf() const noexcept { return feature < 0; }
};

/// Binary regression tree stored as a preorder node array (root at 0).
class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes);

  double predict_row(std::span<const double> row) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t split_count() const;
  /// Adds each split's gain to `importance[feature]`.
  void accumulate_importance(std::vector<double>& importance) const;

  nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json& j);

 private:
  std::vector<TreeNode> nodes_;
};

struct TreeGrowConfig {
  std::optional<int> max_depth;  // nullopt = unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  /// Non-constant features examined per node; nullopt = all of them.
  std::optional<std::size_t> max_features;
  double reg_lambda = 0.0;
  double reg_alpha = 0.0;
};

/// Greedy second-order tree growth over per-row gradients `grad` and
/// hessians `hess`. Leaf weight is -T(G)/(H + lambda) with T the alpha
/// soft-threshold; split score is
///   T(G_L)^2/(H_L+lambda) + T(G_R)^2/(H_R+lambda) - T(G)^2/(H+lambda).
/// With grad = -y, hess = 1 and no regularization this is exactly CART:
/// leaves are node means and the score is the SSE decrease.
///
/// Thresholds are midpoints between consecutive distinct values. Ties go to
/// the lowest feature index, then the lowest threshold. `rows` may contain
/// duplicates (bootstrap samples). `rng` is only touched when
/// `max_features` is set.
RegressionTree grow_tree(const Matrix& x, std::span<const double> grad,
                         std::span<const double> hess, std::span<const std::size_t> rows,
                         std::span<const std::size_t> features, const TreeGrowConfig& config,
                         Rng& rng);

/// CART on raw targets over all rows/features.
RegressionTree fit_cart(const Matrix& x, std::span<const double> y,
                        std::span<const std::size_t> rows, const TreeGrowConfig& config, Rng& rng);

enum class MaxFeatures { All, Sqrt };

std::optional<std::size_t> resolve_max_features(MaxFeatures mode, std::size_t feature_count);

struct DecisionTreeParams {
  std::optional<int> max_depth;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  MaxFeatures max_features = MaxFeatures::Sqrt;

  static DecisionTreeParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

class DecisionTreeModel final : public Regressor {
 public:
  DecisionTreeModel(DecisionTreeParams params, RegressionTree tree, std::size_t features)
      : params_(params), tree_(std::move(tree)), features_(features) {}

  ModelKind kind() const override { return ModelKind::DecisionTree; }
  std::size_t feature_count() const override { return features_; }
  nlohmann::json hyperparams() const override { return params_.to_json(); }
  nlohmann::json state() const override;
  const RegressionTree& tree() const noexcept { return tree_; }

  static DecisionTreeModel from_state(const nlohmann::json& params, const nlohmann::json& state);

 protected:
  double predict_row(std::span<const double> row) const override {
    return tree_.predict_row(row);
  }

 private:
  DecisionTreeParams params_;
  RegressionTree tree_;
  std::size_t features_;
};

DecisionTreeModel fit_decision_tree(const Matrix& x, std::span<const double> y,
                                    const DecisionTreeParams& params = {},
                                    std::uint64_t seed = 0);

// Shared helpers for parameter parsing of tree-shaped learners.
MaxFeatures parse_max_features(const nlohmann::json* value);
nlohmann::json max_features_json(MaxFeatures mode);

}  // namespace qsat
