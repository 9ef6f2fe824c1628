// Copyright 2026 The MTTA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mtta/numerics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "mtta/error.hpp"

namespace mtta {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::contract: return "contract";
        case ErrorKind::config: return "config";
        case ErrorKind::format_magic: return "format_magic";
        case ErrorKind::format_truncated: return "format_truncated";
        case ErrorKind::format_inconsistent: return "format_inconsistent";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

// ---------------------------------------------------------------------------
// Array

namespace {

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        if (d == 0) fail(ErrorKind::dimension, "array dimensions must be positive, got " + shape_string(shape));
        n *= d;
    }
    return n;
}

}  // namespace

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_)) {
        fail(ErrorKind::dimension, "data length " + std::to_string(data_.size()) + " does not match shape " +
                                       shape_string(shape_));
    }
}

Array::Array(Shape shape) : shape_(std::move(shape)), data_(element_count(shape_), 0.0) {}

Array Array::zeros(std::size_t rows, std::size_t cols) { return Array({rows, cols}); }

Array Array::filled(std::size_t rows, std::size_t cols, double value) {
    return Array({rows, cols}, std::vector<double>(rows * cols, value));
}

Array Array::filled(const Shape& shape, double value) {
    Array a(shape);
    std::fill(a.data_.begin(), a.data_.end(), value);
    return a;
}

Array Array::scalar(double value) { return Array({1, 1}, {value}); }

Array Array::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(m * n);
    for (const auto& row : rows) {
        if (row.size() != n) fail(ErrorKind::dimension, "ragged row list");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Array({m, n}, std::move(data));
}

Array Array::column(std::span<const double> values) {
    return Array({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Array::rows() const {
    if (rank() != 2) fail(ErrorKind::dimension, "expected a rank-2 array, got " + shape_string(shape_));
    return shape_[0];
}

std::size_t Array::cols() const {
    if (rank() != 2) fail(ErrorKind::dimension, "expected a rank-2 array, got " + shape_string(shape_));
    return shape_[1];
}

double Array::item() const {
    if (data_.size() != 1) fail(ErrorKind::dimension, "item() on array of shape " + shape_string(shape_));
    return data_[0];
}

bool Array::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

bool bit_equal(const Array& a, const Array& b) noexcept {
    if (a.shape() != b.shape()) return false;
    auto x = a.values();
    auto y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(x[i]) != std::bit_cast<std::uint64_t>(y[i])) return false;
    }
    return true;
}

std::uint64_t hash_array(const Array& a, std::uint64_t h) noexcept {
    auto mix = [&h](std::uint64_t word) {
        for (int i = 0; i < 8; ++i) {
            h ^= (word >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    mix(a.rank());
    for (auto d : a.shape()) mix(d);
    for (double x : a.values()) mix(std::bit_cast<std::uint64_t>(x));
    return h;
}

// ---------------------------------------------------------------------------
// Plain kernels

Array matmul(const Array& a, const Array& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
        fail(ErrorKind::dimension,
             "matmul shape mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Array c = Array::zeros(m, n);
    auto av = a.values();
    auto bv = b.values();
    auto cv = c.values();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            const double* brow = &bv[p * n];
            double* crow = &cv[i * n];
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    return c;
}

Array transpose(const Array& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Array t = Array::zeros(n, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

double stable_sigmoid(double x) noexcept {
    // exp() is only ever taken of a non-positive argument.
    const double e = std::exp(-std::abs(x));
    return x >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Tape

const Array& Var::value() const {
    if (!tape_) fail(ErrorKind::contract, "use of an unbound Var");
    return tape_->value_of(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad_of(id_); }

Var Tape::leaf(Array value, bool requires_grad) {
    if (value.rank() != 2) fail(ErrorKind::dimension, "tape values must be rank 2, got " + shape_string(value.shape()));
    nodes_.push_back(Node{std::move(value), requires_grad, {}});
    return Var(this, nodes_.size() - 1);
}

Var Tape::push(Array value, std::initializer_list<Var> parents, BackwardFn backward) {
    bool needs = false;
    for (const Var& p : parents) {
        if (p.tape_ != this) fail(ErrorKind::contract, "operands live on different tapes");
        needs = needs || nodes_[p.id_].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), needs, needs ? std::move(backward) : BackwardFn{}});
    return Var(this, nodes_.size() - 1);
}

Array& Tape::grad_slot(std::size_t id) {
    Array& slot = grads_[id];
    if (slot.empty()) slot = Array(nodes_[id].value.shape());
    return slot;
}

void Tape::accumulate(Var target, const Array& contribution) {
    if (!nodes_[target.id_].requires_grad) return;
    Array& slot = grad_slot(target.id_);
    auto s = slot.values();
    auto c = contribution.values();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] += c[i];
}

void Tape::accumulate(Var target, std::size_t index, double contribution) {
    if (!nodes_[target.id_].requires_grad) return;
    grad_slot(target.id_)[index] += contribution;
}

void Tape::backward(Var loss) {
    if (loss.tape_ != this) fail(ErrorKind::contract, "loss does not belong to this tape");
    const Array& value = nodes_[loss.id_].value;
    if (value.size() != 1) fail(ErrorKind::contract, "backward() needs a scalar loss, got " + shape_string(value.shape()));
    grads_.assign(nodes_.size(), Array{});
    if (!nodes_[loss.id_].requires_grad) return;
    grads_[loss.id_] = Array::scalar(1.0);
    for (std::size_t id = loss.id_ + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (node.backward && !grads_[id].empty()) node.backward(grads_[id], node.value, *this);
    }
}

Array Tape::grad(Var v) const {
    if (v.tape_ != this) fail(ErrorKind::contract, "Var does not belong to this tape");
    if (v.id_ < grads_.size() && !grads_[v.id_].empty()) return grads_[v.id_];
    return Array(nodes_[v.id_].value.shape());
}

// ---------------------------------------------------------------------------
// Ops

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.value().shape() != b.value().shape()) {
        fail(ErrorKind::dimension, std::string(op) + " shape mismatch: " + shape_string(a.value().shape()) + " vs " +
                                       shape_string(b.value().shape()));
    }
}

void reject_nan(const Array& a, const char* op) {
    for (double x : a.values()) {
        if (std::isnan(x)) fail(ErrorKind::numeric, std::string(op) + ": NaN input");
    }
}

template <typename F>
Array map_values(const Array& a, F f) {
    Array out = a;
    for (double& x : out.values()) x = f(x);
    return out;
}

}  // namespace

Var matmul(Var a, Var b) {
    Array c = matmul(a.value(), b.value());
    return a.tape().push(std::move(c), {a, b}, [a, b](const Array& g, const Array&, Tape& t) {
        if (a.requires_grad()) t.accumulate(a, matmul(g, transpose(b.value())));
        if (b.requires_grad()) t.accumulate(b, matmul(transpose(a.value()), g));
    });
}

Var transpose(Var a) {
    return a.tape().push(transpose(a.value()), {a},
                         [a](const Array& g, const Array&, Tape& t) { t.accumulate(a, transpose(g)); });
}

Var add(Var a, Var b) {
    require_same_shape(a, b, "add");
    Array out = a.value();
    auto bv = b.value().values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
    return a.tape().push(std::move(out), {a, b}, [a, b](const Array& g, const Array&, Tape& t) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var sub(Var a, Var b) {
    require_same_shape(a, b, "sub");
    Array out = a.value();
    auto bv = b.value().values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
    return a.tape().push(std::move(out), {a, b}, [a, b](const Array& g, const Array&, Tape& t) {
        t.accumulate(a, g);
        if (b.requires_grad()) t.accumulate(b, map_values(g, [](double x) { return -x; }));
    });
}

Var mul(Var a, Var b) {
    require_same_shape(a, b, "mul");
    Array out = a.value();
    auto bv = b.value().values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
    return a.tape().push(std::move(out), {a, b}, [a, b](const Array& g, const Array&, Tape& t) {
        auto gv = g.values();
        if (a.requires_grad()) {
            Array da = g;
            auto bv = b.value().values();
            for (std::size_t i = 0; i < gv.size(); ++i) da[i] = gv[i] * bv[i];
            t.accumulate(a, da);
        }
        if (b.requires_grad()) {
            Array db = g;
            auto av = a.value().values();
            for (std::size_t i = 0; i < gv.size(); ++i) db[i] = gv[i] * av[i];
            t.accumulate(b, db);
        }
    });
}

Var scale(Var a, double factor) {
    return a.tape().push(map_values(a.value(), [factor](double x) { return x * factor; }), {a},
                         [a, factor](const Array& g, const Array&, Tape& t) {
                             t.accumulate(a, map_values(g, [factor](double x) { return x * factor; }));
                         });
}

Var add_scalar(Var a, double offset) {
    return a.tape().push(map_values(a.value(), [offset](double x) { return x + offset; }), {a},
                         [a](const Array& g, const Array&, Tape& t) { t.accumulate(a, g); });
}

Var add_row(Var a, Var row) {
    const Array& av = a.value();
    const Array& rv = row.value();
    if (rv.rows() != 1 || rv.cols() != av.cols()) {
        fail(ErrorKind::dimension, "add_row shape mismatch: " + shape_string(av.shape()) + " + " +
                                       shape_string(rv.shape()));
    }
    Array out = av;
    const std::size_t m = av.rows(), n = av.cols();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) += rv[j];
    return a.tape().push(std::move(out), {a, row}, [a, row, m, n](const Array& g, const Array&, Tape& t) {
        t.accumulate(a, g);
        if (row.requires_grad()) {
            Array dr = Array::zeros(1, n);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) dr[j] += g.at(i, j);
            t.accumulate(row, dr);
        }
    });
}

Var scale_by(Var a, Var factor) {
    if (factor.value().size() != 1) {
        fail(ErrorKind::dimension, "scale_by needs a 1x1 factor, got " + shape_string(factor.value().shape()));
    }
    const double s = factor.value()[0];
    return a.tape().push(map_values(a.value(), [s](double x) { return x * s; }), {a, factor},
                         [a, factor, s](const Array& g, const Array&, Tape& t) {
                             if (a.requires_grad()) t.accumulate(a, map_values(g, [s](double x) { return x * s; }));
                             if (factor.requires_grad()) {
                                 double acc = 0.0;
                                 auto gv = g.values();
                                 auto av = a.value().values();
                                 for (std::size_t i = 0; i < gv.size(); ++i) acc += gv[i] * av[i];
                                 t.accumulate(factor, 0, acc);
                             }
                         });
}

Var pick(Var a, std::size_t row, std::size_t col) {
    const Array& av = a.value();
    if (row >= av.rows() || col >= av.cols()) {
        fail(ErrorKind::dimension, "pick index out of range for " + shape_string(av.shape()));
    }
    const std::size_t index = row * av.cols() + col;
    return a.tape().push(Array::scalar(av[index]), {a},
                         [a, index](const Array& g, const Array&, Tape& t) { t.accumulate(a, index, g[0]); });
}

Var softmax_rows(Var a) {
    const Array& x = a.value();
    if (!x.all_finite()) fail(ErrorKind::numeric, "softmax_rows: non-finite input");
    const std::size_t m = x.rows(), n = x.cols();
    Array y = x;
    for (std::size_t i = 0; i < m; ++i) {
        double mx = x.at(i, 0);
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x.at(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            y.at(i, j) = std::exp(x.at(i, j) - mx);
            z += y.at(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) y.at(i, j) /= z;
    }
    return a.tape().push(std::move(y), {a}, [a, m, n](const Array& g, const Array& y, Tape& t) {
        Array dx = Array::zeros(m, n);
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g.at(i, j) * y.at(i, j);
            for (std::size_t j = 0; j < n; ++j) dx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
        }
        t.accumulate(a, dx);
    });
}

Var sigmoid(Var a) {
    reject_nan(a.value(), "sigmoid");
    return a.tape().push(map_values(a.value(), stable_sigmoid), {a}, [a](const Array& g, const Array& y, Tape& t) {
        Array dx = g;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= y[i] * (1.0 - y[i]);
        t.accumulate(a, dx);
    });
}

Var relu(Var a) {
    reject_nan(a.value(), "relu");
    return a.tape().push(map_values(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a},
                         [a](const Array& g, const Array&, Tape& t) {
                             Array dx = g;
                             auto xv = a.value().values();
                             for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = xv[i] > 0.0 ? g[i] : 0.0;
                             t.accumulate(a, dx);
                         });
}

Var log(Var a) {
    for (double x : a.value().values()) {
        if (!(x > 0.0)) fail(ErrorKind::numeric, "log: non-positive or NaN input");
    }
    return a.tape().push(map_values(a.value(), [](double x) { return std::log(x); }), {a},
                         [a](const Array& g, const Array&, Tape& t) {
                             Array dx = g;
                             auto xv = a.value().values();
                             for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = g[i] / xv[i];
                             t.accumulate(a, dx);
                         });
}

Var square(Var a) {
    return a.tape().push(map_values(a.value(), [](double x) { return x * x; }), {a},
                         [a](const Array& g, const Array&, Tape& t) {
                             Array dx = g;
                             auto xv = a.value().values();
                             for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = 2.0 * xv[i] * g[i];
                             t.accumulate(a, dx);
                         });
}

Var sum(Var a) {
    auto v = a.value().values();
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    return a.tape().push(Array::scalar(total), {a}, [a](const Array& g, const Array&, Tape& t) {
        const Array& x = a.value();
        t.accumulate(a, Array(x.shape(), std::vector<double>(x.size(), g[0])));
    });
}

Var mean(Var a) {
    auto v = a.value().values();
    const double count = static_cast<double>(v.size());
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    return a.tape().push(Array::scalar(total / count), {a}, [a, count](const Array& g, const Array&, Tape& t) {
        const Array& x = a.value();
        t.accumulate(a, Array(x.shape(), std::vector<double>(x.size(), g[0] / count)));
    });
}

Var detach(Var a) { return a.tape().constant(a.value()); }

}  // namespace mtta
