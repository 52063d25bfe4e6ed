// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "hfdiff/image.hpp"
#include "hfdiff/tensor.hpp"

namespace hfdiff {

enum class Activation { identity, relu, silu, tanh };

double activate(Activation f, double x);
double activate_derivative(Activation f, double x);

/// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = 0;
};

/// Reverse-mode differentiation over a fixed primitive set:
/// matmul, conv2d, add, scale, softmax, pointwise activation, and the
/// reshape family (reshape, nearest 2x upsample, pixel shuffle), which
/// only move values around.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and backward() is a single reverse sweep.
class Tape {
public:
    /// Leaf whose gradient is accumulated.
    Var input(Tensor value);
    /// Leaf treated as a constant; no gradient flows into it.
    Var constant(Tensor value);

    /// 2-D product op(a) * op(b) where op optionally transposes.
    Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
    /// x: [C, H, W], weight: [O, C, kh, kw] with odd kh, kw. Correlation; output is
    /// [O, ceil(H/stride), ceil(W/stride)] sampled at the stride grid.
    Var conv2d(Var x, Var weight, std::size_t stride = 1, Padding padding = Padding::zero);
    /// a + b, where every dim of b equals a's or is 1 (broadcast). Ranks must agree.
    Var add(Var a, Var b);
    Var scale(Var a, double s);
    /// Softmax over the last dimension.
    Var softmax(Var a);
    Var activate(Var a, Activation f);
    Var reshape(Var a, Shape shape);
    /// [C, H, W] -> [C, 2H, 2W], nearest neighbour.
    Var upsample2x(Var a);
    /// [4C, H, W] -> [C, 2H, 2W]; channel 4c + 2dy + dx lands at (2y + dy, 2x + dx).
    Var pixel_shuffle(Var a);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    /// Gradient after backward(); a zero tensor when the node was not reached.
    const Tensor& grad(Var v) const;
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(output)/d(output) = 1; output must hold exactly one element.
    void backward(Var output);
    /// Seeds with an arbitrary upstream gradient of the output's shape.
    void backward(Var output, const Tensor& seed);

private:
    enum class Op { leaf, matmul, conv2d, add, scale, softmax, activate, reshape, upsample2x, pixel_shuffle };

    struct Node {
        Op op = Op::leaf;
        std::size_t a = 0;
        std::size_t b = 0;
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        // Op parameters.
        bool flag_a = false;
        bool flag_b = false;
        std::size_t stride = 1;
        Padding padding = Padding::zero;
        double factor = 1.0;
        Activation activation = Activation::identity;
    };

    Var push(Node node);
    Tensor& grad_buffer(std::size_t id);
    void propagate(const Node& node);

    std::vector<Node> nodes_;
};

/// Sum of squares of v, built from reshape + matmul.
Var sum_squares(Tape& tape, Var v);

/// Dense 2-D matrix product helper used by the tape and by plain code.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);
Tensor transpose(const Tensor& m);

/// Plain (untaped) forward versions of the tape primitives, shared by the tape.
Tensor conv2d_forward(const Tensor& x, const Tensor& weight, std::size_t stride, Padding padding);
Tensor softmax_rows(const Tensor& x);
Tensor upsample2x(const Tensor& x);
Tensor pixel_shuffle(const Tensor& x);

}  // namespace hfdiff
