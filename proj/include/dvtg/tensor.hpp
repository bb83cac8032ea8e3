#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dvtg/rng.hpp"

namespace dvtg {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {

// One vertex of the computation graph. Edges point from result to operands,
// so dropping the result releases the graph while leaf parameters live on.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  std::size_t numel() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Dense 64-bit float tensor with reverse-mode autodiff. Value type over a
// shared node; copies alias the same storage. Rank 1-3 is what the model
// uses: vectors, weight matrices, and 1 x length x channels activation maps.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int dim(int axis) const;
  std::size_t numel() const;

  std::vector<double>& data();
  const std::vector<double>& data() const;
  double& at(std::size_t flat);
  double at(std::size_t flat) const;

  // Scalar (numel == 1) value.
  double value() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  // Reverse-mode sweep from a scalar. Every tensor reachable from this one
  // with requires_grad ends up with a populated grad buffer.
  void backward();

  // Deep copy of values; the copy is a fresh leaf.
  Tensor clone() const;

  // Graph plumbing for the op implementations.
  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

}  // namespace dvtg
