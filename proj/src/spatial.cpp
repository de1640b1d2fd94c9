#include "kcde/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace kcde {

JointKdTree::JointKdTree(const StandardizedDataset& data, std::size_t leaf_size)
  : x_dim_(data.dim())
  , leaf_size_(leaf_size)
{
  if (leaf_size_ == 0) {
    throw std::invalid_argument("leaf size must be at least 1");
  }
  const std::size_t n = data.size();
  if (n == 0) {
    throw DataError("cannot build a tree over an empty dataset");
  }
  const std::size_t dims = joint_dim();

  // Build on a row permutation, then gather coordinates in tree order.
  std::vector<double> joint(n * dims);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = data.x_row(i);
    std::copy(row.begin(), row.end(), joint.begin() + i * dims);
    joint[i * dims + x_dim_] = data.y(i);
  }
  points_ = std::move(joint);
  index_.resize(n);
  std::iota(index_.begin(), index_.end(), std::size_t{ 0 });

  nodes_.reserve(2 * (n / leaf_size_ + 1));
  build(0, n);

  std::vector<double> ordered(n * dims);
  for (std::size_t slot = 0; slot < n; ++slot) {
    std::copy_n(points_.begin() + index_[slot] * dims,
                dims,
                ordered.begin() + slot * dims);
  }
  points_ = std::move(ordered);

  lo_.resize(nodes_.size() * dims);
  hi_.resize(nodes_.size() * dims);
  // Children are always created after their parent, so a reverse sweep
  // sees both children before the parent.
  for (auto id = static_cast<std::int32_t>(nodes_.size()) - 1; id >= 0; --id) {
    fit_box(id);
  }
}

std::int32_t
JointKdTree::build(std::size_t begin, std::size_t end)
{
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(KdNode{ begin, end, -1, -1 });
  if (end - begin <= leaf_size_) {
    return id;
  }

  // Split the widest-spread dimension at the median slot.
  const std::size_t dims = joint_dim();
  std::size_t split_dim = 0;
  double widest = -1.0;
  for (std::size_t k = 0; k < dims; ++k) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t s = begin; s < end; ++s) {
      const double v = points_[index_[s] * dims + k];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      split_dim = k;
    }
  }
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(index_.begin() + begin,
                   index_.begin() + mid,
                   index_.begin() + end,
                   [&](std::size_t a, std::size_t b) {
                     const double va = points_[a * dims + split_dim];
                     const double vb = points_[b * dims + split_dim];
                     return va < vb || (va == vb && a < b);
                   });

  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void
JointKdTree::fit_box(std::int32_t id)
{
  const std::size_t dims = joint_dim();
  double* lo = lo_.data() + id * dims;
  double* hi = hi_.data() + id * dims;
  const KdNode& nd = nodes_[id];
  if (nd.is_leaf()) {
    std::fill_n(lo, dims, std::numeric_limits<double>::infinity());
    std::fill_n(hi, dims, -std::numeric_limits<double>::infinity());
    for (std::size_t s = nd.begin; s < nd.end; ++s) {
      const double* p = points_.data() + s * dims;
      for (std::size_t k = 0; k < dims; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    }
    return;
  }
  const double* llo = lo_.data() + nd.left * dims;
  const double* lhi = hi_.data() + nd.left * dims;
  const double* rlo = lo_.data() + nd.right * dims;
  const double* rhi = hi_.data() + nd.right * dims;
  for (std::size_t k = 0; k < dims; ++k) {
    lo[k] = std::min(llo[k], rlo[k]);
    hi[k] = std::max(lhi[k], rhi[k]);
  }
}

namespace {

// Per-coordinate gap and span of two intervals, accumulated as squares.
inline void
accumulate_range(double alo, double ahi, double blo, double bhi, Range& r)
{
  const double gap = std::max({ 0.0, blo - ahi, alo - bhi });
  const double span = std::max(bhi - alo, ahi - blo);
  r.lo += gap * gap;
  r.hi += span * span;
}

} // namespace

Range
JointKdTree::node_dist_sq_x(std::int32_t a, std::int32_t b) const
{
  const double* alo = lo_.data() + a * joint_dim();
  const double* ahi = hi_.data() + a * joint_dim();
  const double* blo = lo_.data() + b * joint_dim();
  const double* bhi = hi_.data() + b * joint_dim();
  Range r{ 0.0, 0.0 };
  for (std::size_t k = 0; k < x_dim_; ++k) {
    accumulate_range(alo[k], ahi[k], blo[k], bhi[k], r);
  }
  return r;
}

Range
JointKdTree::node_dist_sq_y(std::int32_t a, std::int32_t b) const
{
  const std::size_t k = x_dim_;
  Range r{ 0.0, 0.0 };
  accumulate_range(lo_[a * joint_dim() + k],
                   hi_[a * joint_dim() + k],
                   lo_[b * joint_dim() + k],
                   hi_[b * joint_dim() + k],
                   r);
  return r;
}

Range
JointKdTree::node_dist_x(std::int32_t a, std::int32_t b) const
{
  const Range sq = node_dist_sq_x(a, b);
  return { std::sqrt(sq.lo), std::sqrt(sq.hi) };
}

Range
JointKdTree::node_dist_y(std::int32_t a, std::int32_t b) const
{
  const Range sq = node_dist_sq_y(a, b);
  return { std::sqrt(sq.lo), std::sqrt(sq.hi) };
}

void
JointKdTree::nn_search(std::int32_t id,
                       std::span<const double> q,
                       std::size_t self_slot,
                       double& best) const
{
  const KdNode& nd = nodes_[id];
  const double* lo = lo_.data() + id * joint_dim();
  const double* hi = hi_.data() + id * joint_dim();
  double gap_sq = 0.0;
  for (std::size_t k = 0; k < x_dim_; ++k) {
    const double g = std::max({ 0.0, lo[k] - q[k], q[k] - hi[k] });
    gap_sq += g * g;
  }
  if (gap_sq >= best) {
    return;
  }
  if (nd.is_leaf()) {
    for (std::size_t s = nd.begin; s < nd.end; ++s) {
      if (s == self_slot) {
        continue;
      }
      const double dsq = squared_distance(q.data(), point(s).data(), x_dim_);
      best = std::min(best, dsq);
    }
    return;
  }
  // Visit the nearer child first.
  auto child_gap = [&](std::int32_t c) {
    const double* clo = lo_.data() + c * joint_dim();
    const double* chi = hi_.data() + c * joint_dim();
    double s = 0.0;
    for (std::size_t k = 0; k < x_dim_; ++k) {
      const double g = std::max({ 0.0, clo[k] - q[k], q[k] - chi[k] });
      s += g * g;
    }
    return s;
  };
  std::int32_t first = nd.left;
  std::int32_t second = nd.right;
  if (child_gap(second) < child_gap(first)) {
    std::swap(first, second);
  }
  nn_search(first, q, self_slot, best);
  nn_search(second, q, self_slot, best);
}

std::vector<double>
JointKdTree::nearest_neighbor_sq_x() const
{
  const std::size_t n = size();
  std::vector<double> out(n, std::numeric_limits<double>::infinity());
  for (std::size_t slot = 0; slot < n; ++slot) {
    double best = std::numeric_limits<double>::infinity();
    nn_search(root, point(slot), slot, best);
    out[index_[slot]] = best;
  }
  return out;
}

bool
JointKdTree::has_neighbor(std::size_t slot, double h1_sq, double h2_sq) const
{
  const auto q = point(slot);
  // Squared box gaps in the x-subspace and along y.
  auto gaps = [&](std::int32_t id) {
    const double* lo = lo_.data() + id * joint_dim();
    const double* hi = hi_.data() + id * joint_dim();
    double gx = 0.0;
    for (std::size_t k = 0; k < x_dim_; ++k) {
      const double g = std::max({ 0.0, lo[k] - q[k], q[k] - hi[k] });
      gx += g * g;
    }
    const double gy = std::max({ 0.0, lo[x_dim_] - q[x_dim_], q[x_dim_] - hi[x_dim_] });
    return std::pair{ gx, gy * gy };
  };
  std::vector<std::int32_t> stack{ root };
  while (!stack.empty()) {
    const std::int32_t id = stack.back();
    stack.pop_back();
    const auto [gx, gy] = gaps(id);
    if (gx >= h2_sq || gy >= h1_sq) {
      continue;
    }
    const KdNode& nd = nodes_[id];
    if (nd.is_leaf()) {
      for (std::size_t s = nd.begin; s < nd.end; ++s) {
        if (s == slot) {
          continue;
        }
        const double dy = q[x_dim_] - point_y(s);
        if (dy * dy < h1_sq && squared_distance(q.data(), point(s).data(), x_dim_) < h2_sq) {
          return true;
        }
      }
      continue;
    }
    // Nearer child on top of the stack.
    if (gaps(nd.left).first <= gaps(nd.right).first) {
      stack.push_back(nd.right);
      stack.push_back(nd.left);
    } else {
      stack.push_back(nd.left);
      stack.push_back(nd.right);
    }
  }
  return false;
}

bool
JointKdTree::all_points_have_neighbor(double h1_sq, double h2_sq) const
{
  for (std::size_t slot = 0; slot < size(); ++slot) {
    if (!has_neighbor(slot, h1_sq, h2_sq)) {
      return false;
    }
  }
  return true;
}

} // namespace kcde
