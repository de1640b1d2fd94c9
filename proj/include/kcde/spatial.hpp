#pragma once

#include "kcde/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace kcde {

struct KdNode
{
  std::size_t begin = 0; ///< first slot (tree order)
  std::size_t end = 0;   ///< one past the last slot
  std::int32_t left = -1;
  std::int32_t right = -1;

  std::size_t count() const { return end - begin; }
  bool is_leaf() const { return left < 0; }
};

//! Closed interval [lo, hi] of a distance or a squared distance.
struct Range
{
  double lo;
  double hi;
};

//! kd-tree over the joint (x, y) space, y stored as the last coordinate.
//!
//! Points are copied into tree order so that every node owns a contiguous
//! slot range. point_index() maps slots back to dataset rows.
class JointKdTree
{
public:
  static constexpr std::size_t default_leaf_size = 16;

  JointKdTree(const StandardizedDataset& data,
              std::size_t leaf_size = default_leaf_size);

  std::size_t size() const { return index_.size(); }
  std::size_t x_dim() const { return x_dim_; }
  std::size_t joint_dim() const { return x_dim_ + 1; }
  std::size_t leaf_size() const { return leaf_size_; }

  static constexpr std::int32_t root = 0;
  const std::vector<KdNode>& nodes() const { return nodes_; }
  const KdNode& node(std::int32_t id) const { return nodes_[id]; }

  std::span<const double> box_lo(std::int32_t id) const
  {
    return { lo_.data() + id * joint_dim(), joint_dim() };
  }
  std::span<const double> box_hi(std::int32_t id) const
  {
    return { hi_.data() + id * joint_dim(), joint_dim() };
  }

  //! Joint coordinates of the point in a slot.
  std::span<const double> point(std::size_t slot) const
  {
    return { points_.data() + slot * joint_dim(), joint_dim() };
  }
  double point_y(std::size_t slot) const
  {
    return points_[slot * joint_dim() + x_dim_];
  }

  const std::vector<std::size_t>& point_index() const { return index_; }

  //! Squared Euclidean distance range in the x-subspace between two nodes.
  Range node_dist_sq_x(std::int32_t a, std::int32_t b) const;
  //! Squared |y| difference range between two nodes.
  Range node_dist_sq_y(std::int32_t a, std::int32_t b) const;

  //! Same ranges as plain distances.
  Range node_dist_x(std::int32_t a, std::int32_t b) const;
  Range node_dist_y(std::int32_t a, std::int32_t b) const;

  //! For each dataset row, the squared x-distance to its nearest other row.
  std::vector<double> nearest_neighbor_sq_x() const;

  //! True when every point has another point with squared y-distance below
  //! h1_sq and squared x-distance below h2_sq, i.e. inside both kernel
  //! supports. Stops at the first isolated point.
  bool all_points_have_neighbor(double h1_sq, double h2_sq) const;

private:
  std::int32_t build(std::size_t begin, std::size_t end);
  void fit_box(std::int32_t id);
  void nn_search(std::int32_t id,
                 std::span<const double> q,
                 std::size_t self_slot,
                 double& best) const;
  bool has_neighbor(std::size_t slot, double h1_sq, double h2_sq) const;

  std::size_t x_dim_;
  std::size_t leaf_size_;
  std::vector<double> points_;
  std::vector<std::size_t> index_;
  std::vector<KdNode> nodes_;
  std::vector<double> lo_;
  std::vector<double> hi_;
};

//! Squared Euclidean distance over the first `dim` coordinates.
inline double
squared_distance(const double* a, const double* b, std::size_t dim)
{
  double s = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

} // namespace kcde
