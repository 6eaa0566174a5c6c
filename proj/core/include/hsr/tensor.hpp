#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hsr {

class Tensor;

namespace detail {

// One node of the recorded computation graph. Nodes are created in forward
// order and stamped with a global sequence number; walking reachable nodes in
// descending sequence order is exactly the reverse of forward execution, so a
// node's backward runs only after every consumer has deposited its gradient.
struct Node {
  std::vector<int> shape;
  std::vector<float> data;
  std::vector<float> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
  bool consumed = false;  // backward already ran through this op
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into the parents' grad buffers.
  std::function<void(Node&)> backward_fn;

  std::int64_t size() const;
  void ensure_grad();
};

bool grad_enabled();

std::shared_ptr<Node> make_leaf(std::vector<int> shape, std::vector<float> data,
                                bool requires_grad);

// Wraps a forward result. Parents and the backward callback are recorded only
// when gradients are enabled and at least one input requires them; otherwise
// the result is a plain constant leaf.
Tensor make_op(const std::vector<Tensor>& inputs, std::vector<int> out_shape,
               std::vector<float> out_data, std::function<void(Node&)> backward_fn);

}  // namespace detail

// Disables graph recording for its lifetime (inference, finite differencing).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Shared handle to a float32 array with shape metadata and reverse-mode
// autodiff. Copying a Tensor aliases the underlying storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, float value, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<float> values,
                            bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int dim(int i) const;
  int rank() const;
  std::int64_t size() const;

  float* data();
  const float* data() const;
  std::span<const float> values() const;

  bool requires_grad() const;
  bool has_grad() const;
  // Gradient accumulated by backward(). Throws ContractError when absent.
  std::span<const float> grad() const;
  void zero_grad();

  // Value of a single-element tensor.
  float item() const;

  // Reverse-mode sweep from a single-element result. Gradients accumulate
  // into every reachable tensor that requires them; leaves the result does
  // not depend on keep a zero gradient. A second sweep through the same
  // recorded ops is rejected.
  void backward() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Human-readable "[2, 4, 4]" form for error messages.
std::string shape_to_string(const std::vector<int>& shape);

}  // namespace hsr
