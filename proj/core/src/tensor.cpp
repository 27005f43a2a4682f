#include "summer/tensor.hpp"

#include "summer/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_set>

namespace summer {

std::string shape_string(const Shape& shape)
{
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != 0)
            out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

namespace detail {

std::vector<double>& Node::grad_buffer()
{
    if (grad.empty())
        grad.assign(values.size(), 0.0);
    return grad;
}

} // namespace detail

namespace {

using detail::Node;

std::size_t element_count(const Shape& shape)
{
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

void check_shape(const Shape& shape)
{
    if (shape.empty() || shape.size() > 2)
        throw DimensionError("tensor rank must be 1 or 2, got shape " + shape_string(shape));
    for (auto d : shape)
        if (d == 0)
            throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
}

std::size_t rows_of(const Shape& s) { return s.size() == 1 ? 1 : s[0]; }
std::size_t cols_of(const Shape& s) { return s.size() == 1 ? s[0] : s[1]; }

// Gradient sink for a parent, or nullptr when it does not take part.
double* sink(const std::shared_ptr<Node>& p)
{
    return p->requires_grad ? p->grad_buffer().data() : nullptr;
}

} // namespace

// ---------------------------------------------------------------------------

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::function<void(detail::Node&)> backward_fn)
{
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    bool any = false;
    for (const auto& in : inputs)
        any = any || in.requires_grad();
    if (any) {
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (const auto& in : inputs)
            node->parents.push_back(in.node_ptr());
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad)
{
    check_shape(shape);
    if (element_count(shape) != values.size())
        throw DimensionError("shape " + shape_string(shape) + " needs " +
                             std::to_string(element_count(shape)) + " values, got " +
                             std::to_string(values.size()));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
    check_shape(shape);
    const auto n = element_count(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad)
{
    std::vector<double> values;
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    for (const auto& row : rows) {
        if (row.size() != c)
            throw DimensionError("ragged matrix literal");
        values.insert(values.end(), row.begin(), row.end());
    }
    return from({r, c}, std::move(values), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad)
{
    return from({values.size()}, std::vector<double>(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad)
{
    return from({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->values.size(); }
std::size_t Tensor::rows() const { return rows_of(node_->shape); }
std::size_t Tensor::cols() const { return cols_of(node_->shape); }
std::span<const double> Tensor::values() const { return node_->values; }

std::span<double> Tensor::mutable_values()
{
    if (!is_leaf())
        throw ContractError("only leaf tensors can be modified in place");
    return node_->values;
}

double Tensor::item() const
{
    if (size() != 1)
        throw DimensionError("item() needs a single-element tensor, got " + shape_string(shape()));
    return node_->values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const
{
    if (r >= rows() || c >= cols())
        throw BoundsError("index (" + std::to_string(r) + ", " + std::to_string(c) +
                          ") out of range for " + shape_string(shape()));
    return node_->values[r * cols() + c];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag)
{
    if (!is_leaf())
        throw ContractError("requires_grad can only be changed on leaf tensors");
    node_->requires_grad = flag;
    if (!flag)
        node_->grad.clear();
}

bool Tensor::is_leaf() const
{
    return node_->parents.empty() && !node_->backward && !node_->consumed;
}
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const
{
    return from(shape(), node_->values, false);
}

// ---------------------------------------------------------------------------

Tape::Tape(const Tensor& loss) : loss_(loss)
{
    if (!loss.defined())
        throw ContractError("backward on an undefined tensor");
    if (loss.size() != 1)
        throw ContractError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
    if (!loss.requires_grad())
        throw ContractError("loss does not depend on any tensor that requires gradients");

    // Iterative post-order DFS yields parents before children.
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second)
                stack.emplace_back(parent, 0);
        } else {
            order_.push_back(node);
            stack.pop_back();
        }
    }
}

std::size_t Tape::operation_count() const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(order_.begin(), order_.end(), [](const Node* n) { return bool(n->backward); }));
}

void Tape::backward()
{
    for (const Node* n : order_)
        if (n->consumed)
            throw ContractError("backward was already run on this tape; record a new forward pass");

    loss_.node()->grad_buffer()[0] += 1.0;
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty())
            n->backward(*n);
    }
    for (Node* n : order_) {
        if (n->backward) {
            n->consumed = true;
            n->backward = nullptr;
            n->parents.clear();
        }
    }
}

void backward(const Tensor& loss)
{
    Tape(loss).backward();
}

// ---------------------------------------------------------------------------

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()) + " differ");
}

// Elementwise map whose derivative is a function of (input, output).
template <typename Fwd, typename Deriv>
Tensor elementwise(const Tensor& a, Fwd fwd, Deriv deriv)
{
    const auto in = a.values();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i)
        out[i] = fwd(in[i]);
    auto pa = a.node_ptr();
    return make_result(a.shape(), std::move(out), {a}, [pa, deriv](Node& self) {
        double* ga = sink(pa);
        if (!ga)
            return;
        const auto& x = pa->values;
        for (std::size_t i = 0; i < x.size(); ++i)
            ga[i] += self.grad[i] * deriv(x[i], self.values[i]);
    });
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b)
{
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw DimensionError("matmul: shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()) + " are incompatible");
    std::vector<double> out(m * n, 0.0);
    const double* A = a.values().data();
    const double* B = b.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0)
                continue;
            const double* brow = B + p * n;
            for (std::size_t j = 0; j < n; ++j)
                row[j] += av * brow[j];
        }
    }
    auto pa = a.node_ptr(), pb = b.node_ptr();
    return make_result({m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](Node& self) {
        const double* G = self.grad.data();
        if (double* ga = sink(pa)) {
            const double* B = pb->values.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* grow = G + i * n;
                    const double* brow = B + p * n;
                    for (std::size_t j = 0; j < n; ++j)
                        acc += grow[j] * brow[j];
                    ga[i * k + p] += acc;
                }
        }
        if (double* gb = sink(pb)) {
            const double* A = pa->values.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = A[i * k + p];
                    if (av == 0.0)
                        continue;
                    const double* grow = G + i * n;
                    double* gbrow = gb + p * n;
                    for (std::size_t j = 0; j < n; ++j)
                        gbrow[j] += av * grow[j];
                }
        }
    });
}

Tensor transpose(const Tensor& a)
{
    const std::size_t m = a.rows(), n = a.cols();
    const auto in = a.values();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[j * m + i] = in[i * n + j];
    auto pa = a.node_ptr();
    return make_result({n, m}, std::move(out), {a}, [pa, m, n](Node& self) {
        if (double* ga = sink(pa))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    ga[i * n + j] += self.grad[j * m + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b)
{
    require_same_shape("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a[i] + b[i];
    auto pa = a.node_ptr(), pb = b.node_ptr();
    return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Node& self) {
        for (const auto& p : {pa, pb})
            if (double* g = sink(p))
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    g[i] += self.grad[i];
    });
}

Tensor sub(const Tensor& a, const Tensor& b)
{
    require_same_shape("sub", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a[i] - b[i];
    auto pa = a.node_ptr(), pb = b.node_ptr();
    return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Node& self) {
        if (double* g = sink(pa))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += self.grad[i];
        if (double* g = sink(pb))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    require_same_shape("mul", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = a[i] * b[i];
    auto pa = a.node_ptr(), pb = b.node_ptr();
    return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Node& self) {
        if (double* g = sink(pa))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += self.grad[i] * pb->values[i];
        if (double* g = sink(pb))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += self.grad[i] * pa->values[i];
    });
}

Tensor add_row(const Tensor& a, const Tensor& row)
{
    const std::size_t m = a.rows(), n = a.cols();
    if (row.size() != n)
        throw DimensionError("add_row: row of shape " + shape_string(row.shape()) +
                             " does not match " + shape_string(a.shape()));
    std::vector<double> out(a.values().begin(), a.values().end());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] += row[j];
    auto pa = a.node_ptr(), pr = row.node_ptr();
    return make_result(a.shape(), std::move(out), {a, row}, [pa, pr, m, n](Node& self) {
        if (double* g = sink(pa))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += self.grad[i];
        if (double* g = sink(pr))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    g[j] += self.grad[i * n + j];
    });
}

Tensor affine(const Tensor& a, double alpha, double beta)
{
    return elementwise(
        a, [alpha, beta](double x) { return alpha * x + beta; },
        [alpha](double, double) { return alpha; });
}

Tensor scale_by(const Tensor& a, const Tensor& s)
{
    if (s.size() != 1)
        throw DimensionError("scale_by: scale must have one element, got " + shape_string(s.shape()));
    const double k = s.item();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = k * a[i];
    auto pa = a.node_ptr(), ps = s.node_ptr();
    return make_result(a.shape(), std::move(out), {a, s}, [pa, ps](Node& self) {
        if (double* g = sink(pa)) {
            const double k = ps->values[0];
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[i] += k * self.grad[i];
        }
        if (double* g = sink(ps)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                acc += self.grad[i] * pa->values[i];
            g[0] += acc;
        }
    });
}

Tensor sigmoid(const Tensor& a)
{
    return elementwise(
        a,
        [](double x) {
            if (x >= 0.0)
                return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a)
{
    return elementwise(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& a)
{
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return elementwise(
        a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [inv_sqrt_2pi](double x, double) {
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            return cdf + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
        });
}

Tensor exp(const Tensor& a)
{
    return elementwise(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a)
{
    for (double v : a.values())
        if (!(v > 0.0))
            throw DomainError("log of a non-positive value");
    return elementwise(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp_min(const Tensor& a, double floor)
{
    return elementwise(
        a, [floor](double x) { return x < floor ? floor : x; },
        [floor](double x, double) { return x < floor ? 0.0 : 1.0; });
}

Tensor softmax(const Tensor& a, int axis, double temperature)
{
    if (!(temperature > 0.0))
        throw ParameterError("softmax temperature must be > 0");
    if (axis != 0 && axis != 1)
        throw ParameterError("softmax axis must be 0 or 1");
    const std::size_t m = a.rows(), n = a.cols();
    // Slices are rows (axis 1) or columns (axis 0).
    const std::size_t slices = axis == 1 ? m : n;
    const std::size_t len = axis == 1 ? n : m;
    const std::size_t stride = axis == 1 ? 1 : n;
    auto base = [=](std::size_t s) { return axis == 1 ? s * n : s; };

    const auto in = a.values();
    std::vector<double> out(in.size());
    for (std::size_t s = 0; s < slices; ++s) {
        const std::size_t b = base(s);
        double hi = in[b];
        for (std::size_t t = 1; t < len; ++t)
            hi = std::max(hi, in[b + t * stride]);
        double z = 0.0;
        for (std::size_t t = 0; t < len; ++t) {
            const double e = std::exp((in[b + t * stride] - hi) / temperature);
            out[b + t * stride] = e;
            z += e;
        }
        for (std::size_t t = 0; t < len; ++t)
            out[b + t * stride] /= z;
    }
    auto pa = a.node_ptr();
    return make_result(a.shape(), std::move(out), {a},
                       [pa, slices, len, stride, base, temperature](Node& self) {
                           double* g = sink(pa);
                           if (!g)
                               return;
                           const auto& y = self.values;
                           const auto& dy = self.grad;
                           for (std::size_t s = 0; s < slices; ++s) {
                               const std::size_t b = base(s);
                               double dot = 0.0;
                               for (std::size_t t = 0; t < len; ++t)
                                   dot += dy[b + t * stride] * y[b + t * stride];
                               for (std::size_t t = 0; t < len; ++t) {
                                   const std::size_t i = b + t * stride;
                                   g[i] += y[i] * (dy[i] - dot) / temperature;
                               }
                           }
                       });
}

Tensor masked_softmax(const Tensor& a, const std::vector<bool>& mask, double temperature)
{
    if (!(temperature > 0.0))
        throw ParameterError("softmax temperature must be > 0");
    if (a.rows() != 1 || mask.size() != a.size())
        throw DimensionError("masked_softmax: expected a single row matching the mask, got " +
                             shape_string(a.shape()) + " with mask of " + std::to_string(mask.size()));
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
        throw ContractError("masked_softmax: mask selects no entries");

    const auto in = a.values();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < in.size(); ++i)
        if (mask[i])
            hi = std::max(hi, in[i]);
    std::vector<double> out(in.size(), 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i)
        if (mask[i]) {
            out[i] = std::exp((in[i] - hi) / temperature);
            z += out[i];
        }
    for (auto& v : out)
        v /= z;
    auto pa = a.node_ptr();
    return make_result(a.shape(), std::move(out), {a}, [pa, temperature](Node& self) {
        double* g = sink(pa);
        if (!g)
            return;
        double dot = 0.0;
        for (std::size_t i = 0; i < self.values.size(); ++i)
            dot += self.grad[i] * self.values[i];
        for (std::size_t i = 0; i < self.values.size(); ++i)
            g[i] += self.values[i] * (self.grad[i] - dot) / temperature;
    });
}

Tensor sum(const Tensor& a)
{
    const auto in = a.values();
    const double total = std::accumulate(in.begin(), in.end(), 0.0);
    auto pa = a.node_ptr();
    return make_result({1}, {total}, {a}, [pa](Node& self) {
        if (double* g = sink(pa))
            for (std::size_t i = 0; i < pa->values.size(); ++i)
                g[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& a)
{
    return affine(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor mean_rows(const Tensor& a)
{
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[j] += a[i * n + j];
    for (auto& v : out)
        v /= static_cast<double>(m);
    auto pa = a.node_ptr();
    return make_result({1, n}, std::move(out), {a}, [pa, m, n](Node& self) {
        if (double* g = sink(pa))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    g[i * n + j] += self.grad[j] / static_cast<double>(m);
    });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count)
{
    const std::size_t n = a.cols();
    if (count == 0 || begin + count > a.rows())
        throw BoundsError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                          ") out of range for " + shape_string(a.shape()));
    const auto in = a.values();
    std::vector<double> out(in.begin() + static_cast<std::ptrdiff_t>(begin * n),
                            in.begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
    auto pa = a.node_ptr();
    return make_result({count, n}, std::move(out), {a}, [pa, begin, n](Node& self) {
        if (double* g = sink(pa))
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[begin * n + i] += self.grad[i];
    });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count)
{
    const std::size_t m = a.rows(), n = a.cols();
    if (count == 0 || begin + count > n)
        throw BoundsError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                          ") out of range for " + shape_string(a.shape()));
    std::vector<double> out(m * count);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j)
            out[i * count + j] = a[i * n + begin + j];
    auto pa = a.node_ptr();
    return make_result({m, count}, std::move(out), {a}, [pa, m, n, begin, count](Node& self) {
        if (double* g = sink(pa))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < count; ++j)
                    g[i * n + begin + j] += self.grad[i * count + j];
    });
}

Tensor reverse_rows(const Tensor& a)
{
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[(m - 1 - i) * n + j] = a[i * n + j];
    auto pa = a.node_ptr();
    return make_result({m, n}, std::move(out), {a}, [pa, m, n](Node& self) {
        if (double* g = sink(pa))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    g[i * n + j] += self.grad[(m - 1 - i) * n + j];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts)
{
    if (parts.empty())
        throw DimensionError("concat_rows of nothing");
    const std::size_t n = parts.front().cols();
    std::size_t m = 0;
    std::vector<double> out;
    for (const auto& p : parts) {
        if (p.cols() != n)
            throw DimensionError("concat_rows: column counts differ (" + shape_string(parts.front().shape()) +
                                 " vs " + shape_string(p.shape()) + ")");
        m += p.rows();
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
    std::vector<std::shared_ptr<Node>> nodes;
    for (const auto& p : parts)
        nodes.push_back(p.node_ptr());
    return make_result({m, n}, std::move(out), parts, [nodes](Node& self) {
        std::size_t offset = 0;
        for (const auto& p : nodes) {
            if (double* g = sink(p))
                for (std::size_t i = 0; i < p->values.size(); ++i)
                    g[i] += self.grad[offset + i];
            offset += p->values.size();
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts)
{
    if (parts.empty())
        throw DimensionError("concat_cols of nothing");
    const std::size_t m = parts.front().rows();
    std::size_t n = 0;
    for (const auto& p : parts) {
        if (p.rows() != m)
            throw DimensionError("concat_cols: row counts differ (" + shape_string(parts.front().shape()) +
                                 " vs " + shape_string(p.shape()) + ")");
        n += p.cols();
    }
    std::vector<double> out(m * n);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j)
                out[i * n + offset + j] = p[i * w + j];
        offset += w;
    }
    std::vector<std::shared_ptr<Node>> nodes;
    for (const auto& p : parts)
        nodes.push_back(p.node_ptr());
    return make_result({m, n}, std::move(out), parts, [nodes, m, n](Node& self) {
        std::size_t offset = 0;
        for (const auto& p : nodes) {
            const std::size_t w = cols_of(p->shape);
            if (double* g = sink(p))
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        g[i * w + j] += self.grad[i * n + offset + j];
            offset += w;
        }
    });
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices)
{
    const std::size_t n = table.cols();
    if (indices.empty())
        throw DimensionError("gather_rows with no indices");
    std::vector<double> out(indices.size() * n);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= table.rows())
            throw BoundsError("row index " + std::to_string(indices[i]) + " out of range for table " +
                              shape_string(table.shape()));
        std::copy_n(table.values().begin() + static_cast<std::ptrdiff_t>(indices[i] * n), n,
                    out.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
    auto pt = table.node_ptr();
    return make_result({indices.size(), n}, std::move(out), {table}, [pt, indices, n](Node& self) {
        if (double* g = sink(pt))
            for (std::size_t i = 0; i < indices.size(); ++i)
                for (std::size_t j = 0; j < n; ++j)
                    g[indices[i] * n + j] += self.grad[i * n + j];
    });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps)
{
    const std::size_t m = a.rows(), n = a.cols();
    if (gain.size() != n || bias.size() != n)
        throw DimensionError("layer_norm: gain/bias of shape " + shape_string(gain.shape()) + "/" +
                             shape_string(bias.shape()) + " do not match " + shape_string(a.shape()));
    std::vector<double> xhat(m * n), inv_std(m), out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            mu += a[i * n + j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = a[i * n + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (a[i * n + j] - mu) * inv_std[i];
            out[i * n + j] = xhat[i * n + j] * gain[j] + bias[j];
        }
    }
    auto pa = a.node_ptr(), pg = gain.node_ptr(), pb = bias.node_ptr();
    return make_result(a.shape(), std::move(out), {a, gain, bias},
                       [pa, pg, pb, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                           const auto& dy = self.grad;
                           if (double* g = sink(pg))
                               for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t j = 0; j < n; ++j)
                                       g[j] += dy[i * n + j] * xhat[i * n + j];
                           if (double* g = sink(pb))
                               for (std::size_t i = 0; i < m; ++i)
                                   for (std::size_t j = 0; j < n; ++j)
                                       g[j] += dy[i * n + j];
                           if (double* g = sink(pa)) {
                               const auto& gv = pg->values;
                               const double nn = static_cast<double>(n);
                               for (std::size_t i = 0; i < m; ++i) {
                                   double s1 = 0.0, s2 = 0.0;
                                   for (std::size_t j = 0; j < n; ++j) {
                                       const double dx = dy[i * n + j] * gv[j];
                                       s1 += dx;
                                       s2 += dx * xhat[i * n + j];
                                   }
                                   for (std::size_t j = 0; j < n; ++j) {
                                       const double dx = dy[i * n + j] * gv[j];
                                       g[i * n + j] += inv_std[i] / nn * (nn * dx - s1 - xhat[i * n + j] * s2);
                                   }
                               }
                           }
                       });
}

Tensor weighted_sum(const Tensor& weights, const std::vector<Tensor>& items)
{
    if (items.empty() || weights.size() != items.size())
        throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for " +
                             std::to_string(items.size()) + " items");
    const Shape shape = items.front().shape();
    std::vector<double> out(items.front().size(), 0.0);
    for (std::size_t k = 0; k < items.size(); ++k) {
        if (items[k].shape() != shape)
            throw DimensionError("weighted_sum: item shapes differ (" + shape_string(shape) + " vs " +
                                 shape_string(items[k].shape()) + ")");
        const double w = weights[k];
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += w * items[k][i];
    }
    std::vector<Tensor> inputs{weights};
    inputs.insert(inputs.end(), items.begin(), items.end());
    std::vector<std::shared_ptr<Node>> nodes;
    for (const auto& it : items)
        nodes.push_back(it.node_ptr());
    auto pw = weights.node_ptr();
    return make_result(shape, std::move(out), std::move(inputs), [pw, nodes](Node& self) {
        double* gw = sink(pw);
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto& item = nodes[k];
            if (gw) {
                double acc = 0.0;
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    acc += self.grad[i] * item->values[i];
                gw[k] += acc;
            }
            if (double* g = sink(item)) {
                const double w = pw->values[k];
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    g[i] += w * self.grad[i];
            }
        }
    });
}

} // namespace summer
