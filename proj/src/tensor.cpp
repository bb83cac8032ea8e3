#include "dvtg/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "dvtg/errors.hpp"

namespace dvtg {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = std::make_shared<detail::TensorNode>();
  node->data.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(lo, hi);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::wrap(std::shared_ptr<detail::TensorNode> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }

int Tensor::rank() const { return static_cast<int>(node_->shape.size()); }

int Tensor::dim(int axis) const { return node_->shape.at(static_cast<std::size_t>(axis)); }

std::size_t Tensor::numel() const { return node_->data.size(); }

std::vector<double>& Tensor::data() { return node_->data; }

const std::vector<double>& Tensor::data() const { return node_->data; }

double& Tensor::at(std::size_t flat) { return node_->data.at(flat); }

double Tensor::at(std::size_t flat) const { return node_->data.at(flat); }

double Tensor::value() const {
  if (numel() != 1) {
    throw ShapeError("value() requires a scalar, got shape " + shape_str(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }

bool Tensor::has_grad() const {
  return node_ && node_->grad.size() == node_->data.size();
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    throw NumericError("gradient not populated; run backward() first");
  }
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::clone() const {
  return from_data(node_->shape, node_->data, node_->requires_grad);
}

namespace {

// Iterative post-order DFS; recursion would be fine at these graph sizes but
// costs nothing to avoid.
void topo_order(const std::shared_ptr<detail::TensorNode>& root,
                std::vector<detail::TensorNode*>& order) {
  std::unordered_set<detail::TensorNode*> visited;
  struct Frame {
    detail::TensorNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  if (visited.insert(root.get()).second) stack.push_back({root.get(), 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::TensorNode* p = f.node->parents[f.next_parent++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
}

}  // namespace

void Tensor::backward() {
  if (!node_) throw NumericError("backward() on an undefined tensor");
  if (numel() != 1) {
    throw ShapeError("backward() requires a scalar loss, got shape " +
                     shape_str(shape()));
  }
  std::vector<detail::TensorNode*> order;
  topo_order(node_, order);

  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorNode* n = *it;
    if (n->backward_fn && n->grad.size() == n->data.size()) {
      n->backward_fn(*n);
    }
  }
}

}  // namespace dvtg
