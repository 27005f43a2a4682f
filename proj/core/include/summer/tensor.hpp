#pragma once

// Reverse-mode automatic differentiation over dense row-major double arrays.
//
// A Tensor is a cheap handle onto a shared node. Operations on tensors that
// require gradients record their inputs and an adjoint closure on the output
// node; backward() linearises the resulting graph into a Tape and replays the
// adjoints in reverse. Every tape may be replayed once.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace summer {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad = false);
    static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    // Rank-1 tensors are viewed as a single row.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const;
    // Only leaves may be written in place (parameters, inputs).
    std::span<double> mutable_values();
    double item() const;
    double at(std::size_t r, std::size_t c) const;
    double operator[](std::size_t i) const { return values()[i]; }

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool is_leaf() const;

    bool has_grad() const;
    std::span<const double> grad() const;
    void zero_grad();

    // Same values, no graph history.
    Tensor detach() const;

    detail::Node* node() const noexcept { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const noexcept { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;

    friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                              std::function<void(detail::Node&)>);
};

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    bool consumed = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    // Lazily allocates the gradient buffer.
    std::vector<double>& grad_buffer();
};

} // namespace detail

// Creates an op result. `backward_fn` is only kept when some input requires
// gradients; it receives the output node with its grad populated.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn);

/// Linear order of the operations a scalar loss depends on.
class Tape {
public:
    explicit Tape(const Tensor& loss);

    std::size_t size() const noexcept { return order_.size(); }
    std::size_t operation_count() const noexcept;

    /// Populates grad on every requires_grad ancestor. A tape replays once.
    void backward();

private:
    Tensor loss_;
    std::vector<detail::Node*> order_;
};

void backward(const Tensor& loss);

// ---- operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// a (m x n) plus a row vector (n or 1 x n) broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
// alpha * a + beta
Tensor affine(const Tensor& a, double alpha, double beta = 0.0);
// a scaled by a single-element tensor.
Tensor scale_by(const Tensor& a, const Tensor& s);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor clamp_min(const Tensor& a, double floor);

// exp(x / temperature) normalised along `axis` (0 = down columns, 1 = along rows).
Tensor softmax(const Tensor& a, int axis = 1, double temperature = 1.0);
// Softmax over the entries of a single row restricted to `mask`; masked-out
// entries are exactly zero.
Tensor masked_softmax(const Tensor& a, const std::vector<bool>& mask, double temperature = 1.0);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Column means: (m x n) -> (1 x n).
Tensor mean_rows(const Tensor& a);

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor reverse_rows(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices);

// Per-row normalisation with learned gain and bias rows.
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// sum_i weights[i] * items[i]; weights is a single row with one entry per item.
Tensor weighted_sum(const Tensor& weights, const std::vector<Tensor>& items);

} // namespace summer
