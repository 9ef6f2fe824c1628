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

#pragma once

// Dense row-major arrays and a define-by-run reverse-mode autodiff tape.
//
// Every array taking part in a computation is two dimensional (m x n);
// scalars are 1 x 1 and per-clip score vectors are n x 1. Arrays of other
// ranks can be stored (e.g. in checkpoints) but the tape ops reject them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mtta {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

class Array {
public:
    Array() = default;
    Array(Shape shape, std::vector<double> data);
    explicit Array(Shape shape);  // zero filled

    static Array zeros(std::size_t rows, std::size_t cols);
    static Array filled(std::size_t rows, std::size_t cols, double value);
    static Array filled(const Shape& shape, double value);
    static Array scalar(double value);
    static Array from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Array column(std::span<const double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // Only valid for rank-2 arrays.
    std::size_t rows() const;
    std::size_t cols() const;

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

    std::span<const double> values() const noexcept { return data_; }
    std::span<double> values() noexcept { return data_; }

    double item() const;  // the single value of a 1 x 1 array
    bool all_finite() const noexcept;

    friend bool operator==(const Array&, const Array&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

// Bitwise equality, distinguishing -0.0 from 0.0 and comparing NaN payloads.
bool bit_equal(const Array& a, const Array& b) noexcept;

// FNV-1a over shape and raw value bits.
std::uint64_t hash_array(const Array& a, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    const Array& value() const;
    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }
    bool requires_grad() const;

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    // Receives the upstream gradient and the node's own value; accumulates
    // into the parents.
    using BackwardFn = std::function<void(const Array& grad_out, const Array& out, Tape& tape)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Array value, bool requires_grad);
    Var constant(Array value) { return leaf(std::move(value), false); }

    // Reverse sweep from a 1 x 1 loss. Gradients of earlier sweeps are
    // discarded.
    void backward(Var loss);

    // Gradient of the last backward sweep with respect to `v`. Nodes that
    // received no flow report an all-zero array of the node's shape.
    Array grad(Var v) const;

    std::size_t size() const noexcept { return nodes_.size(); }

    // Op construction helpers.
    Var push(Array value, std::initializer_list<Var> parents, BackwardFn backward);
    void accumulate(Var target, const Array& contribution);
    void accumulate(Var target, std::size_t index, double contribution);
    const Array& value_of(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad_of(std::size_t id) const { return nodes_[id].requires_grad; }

private:
    struct Node {
        Array value;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Array& grad_slot(std::size_t id);

    std::vector<Node> nodes_;
    std::vector<Array> grads_;
};

// Differentiable ops. Shapes are checked; NaN inputs to the nonlinear ops
// raise ErrorKind::numeric.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                // elementwise
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var add_row(Var a, Var row);          // a (m x n) + row (1 x n) broadcast over rows
Var scale_by(Var a, Var factor);      // a * factor, factor is 1 x 1
Var pick(Var a, std::size_t row, std::size_t col);  // 1 x 1 view of one entry
Var softmax_rows(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var log(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
Var detach(Var a);

// Plain (non-recorded) kernels shared by the ops and the numeric code.
Array matmul(const Array& a, const Array& b);
Array transpose(const Array& a);
double stable_sigmoid(double x) noexcept;

}  // namespace mtta
