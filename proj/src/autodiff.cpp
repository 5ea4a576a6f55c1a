#include "sedformer/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "sedformer/error.hpp"

namespace sed {
namespace {

thread_local std::uint64_t g_macs = 0;

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                             shape_string(t.shape()));
}

std::size_t last_dim(const Tensor& t) { return t.rank() == 0 ? 1 : t.shape().back(); }

// Shared driver for elementwise binary ops with optional scalar broadcast.
// df_da / df_db return the local partials given (a, b, out).
template <class F, class DA, class DB>
Var binary(const char* name, const Var& a, const Var& b, F f, DA df_da, DB df_db) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const bool bscalar = bv.size() == 1;
    if (!bscalar && av.shape() != bv.shape())
        throw DimensionError(std::string(name) + ": shape mismatch " + shape_string(av.shape()) +
                             " vs " + shape_string(bv.shape()));
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bscalar ? bv[0] : bv[i]);
    return make_op(name, std::move(out), {a, b}, [bscalar, df_da, df_db](Node& self) {
        Node& na = *self.parents[0];
        Node& nb = *self.parents[1];
        const Tensor& g = self.grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = na.value[i];
            const double y = bscalar ? nb.value[0] : nb.value[i];
            if (na.requires_grad) na.grad_buffer()[i] += g[i] * df_da(x, y, self.value[i]);
            if (nb.requires_grad) nb.grad_buffer()[bscalar ? 0 : i] += g[i] * df_db(x, y, self.value[i]);
        }
    });
}

template <class F, class DF>
Var unary(const char* name, const Var& a, F f, DF df) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
    return make_op(name, std::move(out), {a}, [df](Node& self) {
        Node& na = *self.parents[0];
        Tensor& ga = na.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            ga[i] += self.grad[i] * df(na.value[i], self.value[i]);
    });
}

} // namespace

Tensor& Node::grad_buffer() {
    if (grad.empty() || grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
    return grad;
}

void Var::zero_grad() {
    if (node_) node_->grad = Tensor();
}

Var parameter(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->op = "parameter";
    return Var(std::move(node));
}

Var constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = "constant";
    return Var(std::move(node));
}

Var make_op(std::string op, Tensor value, std::vector<Var> parents,
            std::function<void(Node&)> backward_fn) {
    if (!value.all_finite()) throw NumericError("non-finite value produced by " + op);
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = std::move(op);
    for (const auto& p : parents) {
        if (p.requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
        node->parents.reserve(parents.size());
        for (auto& p : parents) node->parents.push_back(p.node());
        node->backward = std::move(backward_fn);
    }
    return Var(std::move(node));
}

void backward(const Var& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw UsageError("backward() requires a scalar loss");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS -> topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // Interior grads are per-sweep; leaves accumulate.
    for (Node* n : order)
        if (n->backward) n->grad = Tensor();
    loss.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

std::uint64_t mac_count() { return g_macs; }
void reset_mac_count() { g_macs = 0; }
void add_macs(std::uint64_t n) { g_macs += n; }

Segments Segments::from_lengths(std::span<const std::size_t> lengths) {
    Segments s;
    s.offsets.reserve(lengths.size() + 1);
    s.offsets.push_back(0);
    for (auto len : lengths) s.offsets.push_back(s.offsets.back() + len);
    return s;
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double inverse_softplus(double y) {
    if (y <= 0) throw ConfigError("inverse_softplus requires a positive argument");
    return y > 30 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

namespace ops {

Var add(const Var& a, const Var& b) {
    return binary("add", a, b, [](double x, double y) { return x + y; },
                  [](double, double, double) { return 1.0; },
                  [](double, double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
    return binary("sub", a, b, [](double x, double y) { return x - y; },
                  [](double, double, double) { return 1.0; },
                  [](double, double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
    return binary("mul", a, b, [](double x, double y) { return x * y; },
                  [](double, double y, double) { return y; },
                  [](double x, double, double) { return x; });
}

Var div(const Var& a, const Var& b) {
    return binary("div", a, b, [](double x, double y) { return x / y; },
                  [](double, double y, double) { return 1.0 / y; },
                  [](double, double y, double o) { return -o / y; });
}

Var add_scalar(const Var& a, double c) {
    return unary("add_scalar", a, [c](double x) { return x + c; },
                 [](double, double) { return 1.0; });
}

Var scale(const Var& a, double c) {
    return unary("scale", a, [c](double x) { return c * x; },
                 [c](double, double) { return c; });
}

Var neg(const Var& a) { return scale(a, -1.0); }

namespace {

Var bias_op(const char* name, const Var& a, const Var& b, double sign) {
    const Tensor& av = a.value();
    const std::size_t n = last_dim(av);
    if (b.size() != n)
        throw DimensionError(std::string(name) + ": bias of size " + std::to_string(b.size()) +
                             " does not match trailing dim " + std::to_string(n));
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + sign * b.value()[i % n];
    return make_op(name, std::move(out), {a, b}, [n, sign](Node& self) {
        Node& na = *self.parents[0];
        Node& nb = *self.parents[1];
        if (na.requires_grad) {
            Tensor& ga = na.grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
        }
        if (nb.requires_grad) {
            Tensor& gb = nb.grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i % n] += sign * self.grad[i];
        }
    });
}

Var rows_op(const char* name, const Var& a, const Var& g, bool divide) {
    const Tensor& av = a.value();
    const std::size_t rows = av.rows();
    if (g.size() != rows)
        throw DimensionError(std::string(name) + ": expected " + std::to_string(rows) +
                             " row factors, got " + std::to_string(g.size()));
    const std::size_t inner = av.cols();
    Tensor out(av.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double f = g.value()[r];
        for (std::size_t c = 0; c < inner; ++c)
            out[r * inner + c] = divide ? av[r * inner + c] / f : av[r * inner + c] * f;
    }
    return make_op(name, std::move(out), {a, g}, [rows, inner, divide](Node& self) {
        Node& na = *self.parents[0];
        Node& ng = *self.parents[1];
        for (std::size_t r = 0; r < rows; ++r) {
            const double f = ng.value[r];
            double acc = 0.0;
            for (std::size_t c = 0; c < inner; ++c) {
                const std::size_t i = r * inner + c;
                acc += self.grad[i] * (divide ? -self.value[i] / f : na.value[i]);
            }
            if (na.requires_grad) {
                Tensor& ga = na.grad_buffer();
                const double w = divide ? 1.0 / f : f;
                for (std::size_t c = 0; c < inner; ++c) ga[r * inner + c] += self.grad[r * inner + c] * w;
            }
            if (ng.requires_grad) ng.grad_buffer()[r] += acc;
        }
    });
}

} // namespace

Var add_bias(const Var& a, const Var& b) { return bias_op("add_bias", a, b, 1.0); }
Var sub_bias(const Var& a, const Var& b) { return bias_op("sub_bias", a, b, -1.0); }
Var mul_rows(const Var& a, const Var& g) { return rows_op("mul_rows", a, g, false); }
Var div_rows(const Var& a, const Var& g) { return rows_op("div_rows", a, g, true); }

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_rank2(av, "matmul");
    require_rank2(bv, "matmul");
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    if (bv.dim(0) != k)
        throw DimensionError("matmul: inner dimensions disagree " + shape_string(av.shape()) +
                             " x " + shape_string(bv.shape()));
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = &out[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double x = av[i * k + p];
            if (x == 0.0) continue;
            const double* brow = bv.data().data() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
        }
    }
    add_macs(static_cast<std::uint64_t>(m) * k * n);
    return make_op("matmul", std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& na = *self.parents[0];
        Node& nb = *self.parents[1];
        const Tensor& g = self.grad;
        if (na.requires_grad) {
            Tensor& ga = na.grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * nb.value[p * n + j];
                    ga[i * k + p] += acc;
                }
        }
        if (nb.requires_grad) {
            Tensor& gb = nb.grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double x = na.value[i * k + p];
                    if (x == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += x * g[i * n + j];
                }
        }
    });
}

Var transpose(const Var& a) {
    const Tensor& av = a.value();
    require_rank2(av, "transpose");
    const std::size_t r = av.dim(0), c = av.dim(1);
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
    return make_op("transpose", std::move(out), {a}, [r, c](Node& self) {
        Tensor& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
    });
}

Var reshape(const Var& a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return make_op("reshape", std::move(out), {a}, [](Node& self) {
        Tensor& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    });
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double x : a.value().data()) s += x;
    return make_op("sum", Tensor::scalar(s), {a}, [](Node& self) {
        Tensor& ga = self.parents[0]->grad_buffer();
        const double g = self.grad[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

Var mean(const Var& a) {
    if (a.size() == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Var sum_rows(const Var& a) {
    const Tensor& av = a.value();
    require_rank2(av, "sum_rows");
    const std::size_t r = av.dim(0), c = av.dim(1);
    Tensor out({1, c});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
    return make_op("sum_rows", std::move(out), {a}, [r, c](Node& self) {
        Tensor& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j];
    });
}

Var square(const Var& a) {
    return unary("square", a, [](double x) { return x * x; },
                 [](double x, double) { return 2.0 * x; });
}

Var sigmoid(const Var& a) {
    return unary("sigmoid", a, [](double x) { return sed::sigmoid(x); },
                 [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
    return unary("softplus", a, [](double x) { return sed::softplus(x); },
                 [](double x, double) { return sed::sigmoid(x); });
}

Var exp(const Var& a) {
    return unary("exp", a, [](double x) { return std::exp(x); },
                 [](double, double y) { return y; });
}

Var log(const Var& a) {
    return unary("log", a, [](double x) { return std::log(x); },
                 [](double x, double) { return 1.0 / x; });
}

Var relu(const Var& a) {
    return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; },
                 [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var sin(const Var& a) {
    return unary("sin", a, [](double x) { return std::sin(x); },
                 [](double x, double) { return std::cos(x); });
}

Var slice_rows(const Var& a, std::size_t start, std::size_t count) {
    const Tensor& av = a.value();
    require_rank2(av, "slice_rows");
    const std::size_t c = av.dim(1);
    if (start + count > av.dim(0)) throw DimensionError("slice_rows out of range");
    Tensor out({count, c});
    std::copy_n(av.data().begin() + static_cast<std::ptrdiff_t>(start * c), count * c,
                out.data().begin());
    return make_op("slice_rows", std::move(out), {a}, [start, c](Node& self) {
        Tensor& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) ga[start * c + i] += self.grad[i];
    });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
    const Tensor& av = a.value();
    require_rank2(av, "slice_cols");
    const std::size_t r = av.dim(0), c = av.dim(1);
    if (start + count > c) throw DimensionError("slice_cols out of range");
    Tensor out({r, count});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < count; ++j) out[i * count + j] = av[i * c + start + j];
    return make_op("slice_cols", std::move(out), {a}, [r, c, start, count](Node& self) {
        Tensor& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < count; ++j) ga[i * c + start + j] += self.grad[i * count + j];
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows of nothing");
    if (parts.size() == 1) return parts.front();
    const std::size_t c = parts.front().value().dim(1);
    std::size_t r = 0;
    for (const auto& p : parts) {
        require_rank2(p.value(), "concat_rows");
        if (p.value().dim(1) != c) throw DimensionError("concat_rows: column mismatch");
        r += p.value().dim(0);
    }
    Tensor out({r, c});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.value().data().begin(), p.value().data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
        off += p.size();
    }
    return make_op("concat_rows", std::move(out), parts, [](Node& self) {
        std::size_t off = 0;
        for (auto& p : self.parents) {
            const std::size_t n = p->value.size();
            if (p->requires_grad) {
                Tensor& gp = p->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) gp[i] += self.grad[off + i];
            }
            off += n;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols of nothing");
    if (parts.size() == 1) return parts.front();
    const std::size_t r = parts.front().value().dim(0);
    std::size_t c = 0;
    for (const auto& p : parts) {
        require_rank2(p.value(), "concat_cols");
        if (p.value().dim(0) != r) throw DimensionError("concat_cols: row mismatch");
        c += p.value().dim(1);
    }
    Tensor out({r, c});
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t pc = p.value().dim(1);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < pc; ++j) out[i * c + off + j] = p.value()[i * pc + j];
        off += pc;
    }
    return make_op("concat_cols", std::move(out), parts, [r, c](Node& self) {
        std::size_t off = 0;
        for (auto& p : self.parents) {
            const std::size_t pc = p->value.dim(1);
            if (p->requires_grad) {
                Tensor& gp = p->grad_buffer();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < pc; ++j) gp[i * pc + j] += self.grad[i * c + off + j];
            }
            off += pc;
        }
    });
}

Var gather_rows(const Var& a, std::vector<std::size_t> index) {
    const Tensor& av = a.value();
    require_rank2(av, "gather_rows");
    const std::size_t c = av.dim(1);
    Tensor out({index.size(), c});
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= av.dim(0)) throw DimensionError("gather_rows index out of range");
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[index[i] * c + j];
    }
    return make_op("gather_rows", std::move(out), {a}, [index = std::move(index), c](Node& self) {
        Tensor& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < index.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) ga[index[i] * c + j] += self.grad[i * c + j];
    });
}

Var weighted_row_sum(const Var& a, std::vector<double> weight, std::vector<std::size_t> group,
                     std::size_t groups) {
    const Tensor& av = a.value();
    const std::size_t r = av.rows(), c = av.cols();
    if (weight.size() != r || group.size() != r)
        throw DimensionError("weighted_row_sum: weight/group length must equal row count");
    Tensor out({groups, c});
    for (std::size_t i = 0; i < r; ++i) {
        if (group[i] >= groups) throw DimensionError("weighted_row_sum: group out of range");
        if (weight[i] == 0.0) continue;
        for (std::size_t j = 0; j < c; ++j) out[group[i] * c + j] += weight[i] * av[i * c + j];
    }
    return make_op("weighted_row_sum", std::move(out), {a},
                   [weight = std::move(weight), group = std::move(group), c](Node& self) {
                       Tensor& ga = self.parents[0]->grad_buffer();
                       for (std::size_t i = 0; i < weight.size(); ++i) {
                           if (weight[i] == 0.0) continue;
                           for (std::size_t j = 0; j < c; ++j)
                               ga[i * c + j] += weight[i] * self.grad[group[i] * c + j];
                       }
                   });
}

namespace {

Segments resolve(const Segments& s, std::size_t rows) {
    if (s.offsets.empty()) return Segments::single(rows);
    if (s.total() != rows)
        throw DimensionError("segments cover " + std::to_string(s.total()) + " rows, tensor has " +
                             std::to_string(rows));
    return s;
}

} // namespace

Var depthwise_conv1d(const Var& x, const Var& kernels, const Segments& segments) {
    const Tensor& xv = x.value();
    const Tensor& kv = kernels.value();
    require_rank2(xv, "depthwise_conv1d");
    if (kv.rank() != 3) throw DimensionError("depthwise_conv1d: kernels must be [D x C x k]");
    const std::size_t K = xv.dim(0), D = xv.dim(1);
    const std::size_t C = kv.dim(1), k = kv.dim(2);
    if (kv.dim(0) != D)
        throw DimensionError("depthwise_conv1d: kernel bank has " + std::to_string(kv.dim(0)) +
                             " variates, input has " + std::to_string(D));
    if (k % 2 == 0) throw ConfigError("depthwise_conv1d: kernel size must be odd");
    const auto seg = resolve(segments, K);
    const long r = static_cast<long>(k / 2);

    Tensor out({K, D, C});
    for (std::size_t s = 0; s < seg.count(); ++s) {
        const long lo = static_cast<long>(seg.begin(s)), hi = static_cast<long>(seg.end(s));
        for (long t = lo; t < hi; ++t)
            for (std::size_t d = 0; d < D; ++d)
                for (std::size_t c = 0; c < C; ++c) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < k; ++j) {
                        const long src = t + static_cast<long>(j) - r;
                        if (src < lo || src >= hi) continue;
                        acc += kv[(d * C + c) * k + j] * xv[static_cast<std::size_t>(src) * D + d];
                    }
                    out[(static_cast<std::size_t>(t) * D + d) * C + c] = acc;
                }
    }
    add_macs(static_cast<std::uint64_t>(K) * D * C * k);
    return make_op("depthwise_conv1d", std::move(out), {x, kernels}, [seg, D, C, k, r](Node& self) {
        Node& nx = *self.parents[0];
        Node& nk = *self.parents[1];
        Tensor* gx = nx.requires_grad ? &nx.grad_buffer() : nullptr;
        Tensor* gk = nk.requires_grad ? &nk.grad_buffer() : nullptr;
        for (std::size_t s = 0; s < seg.count(); ++s) {
            const long lo = static_cast<long>(seg.begin(s)), hi = static_cast<long>(seg.end(s));
            for (long t = lo; t < hi; ++t)
                for (std::size_t d = 0; d < D; ++d)
                    for (std::size_t c = 0; c < C; ++c) {
                        const double g = self.grad[(static_cast<std::size_t>(t) * D + d) * C + c];
                        if (g == 0.0) continue;
                        for (std::size_t j = 0; j < k; ++j) {
                            const long src = t + static_cast<long>(j) - r;
                            if (src < lo || src >= hi) continue;
                            const std::size_t xi = static_cast<std::size_t>(src) * D + d;
                            const std::size_t ki = (d * C + c) * k + j;
                            if (gx) (*gx)[xi] += g * nk.value[ki];
                            if (gk) (*gk)[ki] += g * nx.value[xi];
                        }
                    }
        }
    });
}

Var window_max(const Var& a, std::size_t stride, const Segments& segments) {
    const Tensor& av = a.value();
    if (stride == 0) throw ConfigError("pooling stride must be positive");
    const std::size_t rows = av.rows();
    const std::size_t inner = av.cols();
    const auto seg = resolve(segments, rows);
    std::size_t out_rows = 0;
    for (std::size_t s = 0; s < seg.count(); ++s) {
        if (stride > seg.length(s))
            throw ConfigError("pooling stride " + std::to_string(stride) +
                              " exceeds sequence length " + std::to_string(seg.length(s)));
        out_rows += seg.length(s) / stride;
    }
    Shape shape = av.shape();
    if (shape.empty()) shape = {1};
    shape[0] = out_rows;
    Tensor out(shape);
    std::vector<std::size_t> argmax(out_rows * inner);
    std::size_t u = 0;
    for (std::size_t s = 0; s < seg.count(); ++s) {
        const std::size_t windows = seg.length(s) / stride;
        for (std::size_t w = 0; w < windows; ++w, ++u) {
            const std::size_t first = seg.begin(s) + w * stride;
            for (std::size_t j = 0; j < inner; ++j) {
                std::size_t best = first * inner + j;
                for (std::size_t q = 1; q < stride; ++q) {
                    const std::size_t idx = (first + q) * inner + j;
                    if (av[idx] > av[best]) best = idx;
                }
                out[u * inner + j] = av[best];
                argmax[u * inner + j] = best;
            }
        }
    }
    return make_op("window_max", std::move(out), {a}, [argmax = std::move(argmax)](Node& self) {
        Tensor& ga = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < argmax.size(); ++i) ga[argmax[i]] += self.grad[i];
    });
}

} // namespace ops
} // namespace sed
