#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sedformer/tensor.hpp"

namespace sed {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One value on the gradient tape. `backward` reads `grad` and accumulates
// into the parents' grads; it is only set when some parent requires grad.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward;
    std::string op;

    // Lazily allocates a zero gradient matching `value`.
    Tensor& grad_buffer();
};

// Handle to a tape node. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t size() const { return node_->value.size(); }
    double item() const { return node_->value.item(); }
    bool defined() const { return static_cast<bool>(node_); }

    void zero_grad();

    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

// Trainable leaf.
Var parameter(Tensor value);
// Leaf that never receives a gradient.
Var constant(Tensor value);

// Records a new node. `backward` is dropped when no parent requires grad,
// which keeps inference free of closures. Throws NumericError when `value`
// holds NaN/Inf.
Var make_op(std::string op, Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward);

// Reverse-mode sweep from a scalar. Parameter grads accumulate across calls.
void backward(const Var& loss);

// Multiply-accumulate counter bumped by matmul and the conv; used for the
// complexity checks and energy accounting.
std::uint64_t mac_count();
void reset_mac_count();
void add_macs(std::uint64_t n);

// Row offsets of independent sequences stacked along the leading axis:
// {0, K1, K1+K2, ..., total}. An empty Segments means one sequence.
struct Segments {
    std::vector<std::size_t> offsets;

    static Segments single(std::size_t length) { return Segments{{0, length}}; }
    static Segments from_lengths(std::span<const std::size_t> lengths);
    std::size_t count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::size_t total() const { return offsets.empty() ? 0 : offsets.back(); }
    std::size_t begin(std::size_t i) const { return offsets[i]; }
    std::size_t end(std::size_t i) const { return offsets[i + 1]; }
    std::size_t length(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
};

namespace ops {

// Elementwise; `b` must have the same shape as `a` or hold a single value.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var add_scalar(const Var& a, double c);
Var scale(const Var& a, double c);
Var neg(const Var& a);

// b broadcast along the trailing axis: b.size() == a.cols() of the last dim.
Var add_bias(const Var& a, const Var& b);
Var sub_bias(const Var& a, const Var& b);
// Each leading-axis slice of `a` multiplied / divided by one entry of g.
Var mul_rows(const Var& a, const Var& g);
Var div_rows(const Var& a, const Var& g);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);

Var sum(const Var& a);
Var mean(const Var& a);
// Column sums of a rank-2 tensor -> [1 x cols].
Var sum_rows(const Var& a);
Var square(const Var& a);

Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var relu(const Var& a);
Var sin(const Var& a);

// Rank-2 slicing and concatenation.
Var slice_rows(const Var& a, std::size_t start, std::size_t count);
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var gather_rows(const Var& a, std::vector<std::size_t> index);

// out[g] = sum over rows r with group[r] == g of weight[r] * a[r]; rank-2 a.
Var weighted_row_sum(const Var& a, std::vector<double> weight,
                     std::vector<std::size_t> group, std::size_t groups);

// x: [K x D] (rows stacked per `segments`), kernels: [D x C x k] with k odd.
// Returns [K x D x C]; zero padding at every segment boundary, no mixing
// between variates.
Var depthwise_conv1d(const Var& x, const Var& kernels, const Segments& segments = {});

// Max over non-overlapping windows of `stride` consecutive leading-axis
// slices inside each segment; trailing remainders are dropped. Gradient goes
// to the first maximal element of each window.
Var window_max(const Var& a, std::size_t stride, const Segments& segments = {});

} // namespace ops

// Numerically stable scalar helpers shared by ops and reference code.
double sigmoid(double x);
double softplus(double x);
double inverse_softplus(double y);

} // namespace sed
