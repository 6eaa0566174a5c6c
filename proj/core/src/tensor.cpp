#include "hsr/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

#include "hsr/errors.hpp"

namespace hsr {
namespace detail {

namespace {

std::atomic<std::uint64_t> g_next_seq{1};

thread_local bool g_grad_enabled = true;

std::int64_t shape_size(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

void validate_shape(const std::vector<int>& shape) {
  for (int d : shape) {
    if (d <= 0) {
      throw InvalidShapeError("tensor extents must be positive, got " +
                              shape_to_string(shape));
    }
  }
}

}  // namespace

std::int64_t Node::size() const { return shape_size(shape); }

void Node::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
}

bool grad_enabled() { return g_grad_enabled; }

std::shared_ptr<Node> make_leaf(std::vector<int> shape, std::vector<float> data,
                                bool requires_grad) {
  validate_shape(shape);
  if (static_cast<std::int64_t>(data.size()) != shape_size(shape)) {
    throw InvalidShapeError("value count does not match shape " +
                            shape_to_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return node;
}

Tensor make_op(const std::vector<Tensor>& inputs, std::vector<int> out_shape,
               std::vector<float> out_data, std::function<void(Node&)> backward_fn) {
  bool record = grad_enabled();
  if (record) {
    record = false;
    for (const Tensor& t : inputs) {
      if (t.requires_grad()) {
        record = true;
        break;
      }
    }
  }
  auto node = make_leaf(std::move(out_shape), std::move(out_data), record);
  if (record) {
    node->parents.reserve(inputs.size());
    for (const Tensor& t : inputs) node->parents.push_back(t.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(detail::grad_enabled()) {
  detail::g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = previous_; }

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  detail::validate_shape(shape);  // before sizing the buffer: extents may be negative
  auto n = detail::shape_size(shape);
  return Tensor(detail::make_leaf(std::move(shape),
                                  std::vector<float>(static_cast<size_t>(n), 0.0f),
                                  requires_grad));
}

Tensor Tensor::full(std::vector<int> shape, float value, bool requires_grad) {
  detail::validate_shape(shape);
  auto n = detail::shape_size(shape);
  return Tensor(detail::make_leaf(std::move(shape),
                                  std::vector<float>(static_cast<size_t>(n), value),
                                  requires_grad));
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<float> values,
                           bool requires_grad) {
  return Tensor(detail::make_leaf(std::move(shape), std::move(values), requires_grad));
}

const std::vector<int>& Tensor::shape() const {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return node_->shape;
}

int Tensor::dim(int i) const {
  const auto& s = shape();
  if (i < 0 || i >= static_cast<int>(s.size())) {
    throw InvalidShapeError("dimension index out of range");
  }
  return s[static_cast<size_t>(i)];
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

std::int64_t Tensor::size() const {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return node_->size();
}

float* Tensor::data() {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return node_->data.data();
}

const float* Tensor::data() const {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return node_->data.data();
}

std::span<const float> Tensor::values() const {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return {node_->data.data(), node_->data.size()};
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const float> Tensor::grad() const {
  if (!has_grad()) {
    throw ContractError("gradient requested but none has been computed");
  }
  return {node_->grad.data(), node_->grad.size()};
}

void Tensor::zero_grad() {
  if (!node_) throw ContractError("operation on an undefined tensor");
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

float Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() requires a single-element tensor, got shape " +
                        shape_to_string(shape()));
  }
  return node_->data[0];
}

void Tensor::backward() const {
  if (!node_) throw ContractError("backward on an undefined tensor");
  if (node_->size() != 1) {
    throw ContractError("backward requires a single-element tensor, got shape " +
                        shape_to_string(node_->shape));
  }
  if (node_->consumed) {
    throw ContractError("backward called twice on the same graph");
  }

  // Collect every node reachable through parents, then replay in descending
  // sequence order (reverse forward order). The top bit of seq marks visited
  // nodes during the walk and is cleared before sorting.
  constexpr std::uint64_t kMark = 1ull << 63;
  std::vector<detail::Node*> order;
  std::vector<detail::Node*> stack{node_.get()};
  node_->seq |= kMark;
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad && !(p->seq & kMark)) {
        p->seq |= kMark;
        stack.push_back(p.get());
      }
    }
  }
  for (detail::Node* n : order) n->seq &= ~kMark;
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

  node_->ensure_grad();
  node_->grad[0] += 1.0f;
  for (detail::Node* n : order) {
    if (!n->backward_fn) continue;
    if (n->consumed) {
      throw ContractError("graph already consumed by a previous backward");
    }
    n->ensure_grad();
    for (auto& p : n->parents) {
      if (p->requires_grad) p->ensure_grad();
    }
    n->backward_fn(*n);
    n->consumed = true;
  }
  // Marking the root covers the degenerate graph with no recorded ops.
  node_->consumed = true;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace hsr
