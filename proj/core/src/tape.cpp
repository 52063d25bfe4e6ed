// Copyright 2026 The hfdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfdiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hfdiff {

double activate(Activation f, double x) {
    switch (f) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::silu: return x / (1.0 + std::exp(-x));
        case Activation::tanh: return std::tanh(x);
    }
    return x;
}

double activate_derivative(Activation f, double x) {
    switch (f) {
        case Activation::identity: return 1.0;
        case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::silu: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 + x * (1.0 - s));
        }
        case Activation::tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
    }
    return 1.0;
}

Tensor transpose(const Tensor& m) {
    if (m.rank() != 2) throw std::invalid_argument("transpose: expected a matrix");
    const std::size_t r = m.dim(0), c = m.dim(1);
    Tensor out(Shape{c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = m.at(i, j);
    return out;
}

Tensor matmul(const Tensor& a_in, const Tensor& b_in, bool transpose_a, bool transpose_b) {
    if (a_in.rank() != 2 || b_in.rank() != 2) {
        throw std::invalid_argument("matmul: operands must be matrices, got " + shape_string(a_in.shape()) +
                                    " and " + shape_string(b_in.shape()));
    }
    const Tensor a = transpose_a ? transpose(a_in) : a_in;
    const Tensor b = transpose_b ? transpose(b_in) : b_in;
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw std::invalid_argument("matmul: inner dimensions differ: " + shape_string(a.shape()) + " * " +
                                    shape_string(b.shape()));
    }
    Tensor out(Shape{m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.raw() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.at(i, p);
            if (av == 0.0) continue;
            const double* brow = b.raw() + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

namespace {

struct ConvGeometry {
    std::size_t c, h, w, o, kh, kw, rh, rw, ho, wo, ph, pw;
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& weight, std::size_t stride) {
    if (x.rank() != 3) throw std::invalid_argument("conv2d: input must be [C,H,W], got " + shape_string(x.shape()));
    if (weight.rank() != 4) {
        throw std::invalid_argument("conv2d: weight must be [O,C,kh,kw], got " + shape_string(weight.shape()));
    }
    if (weight.dim(1) != x.dim(0)) {
        throw std::invalid_argument("conv2d: channel mismatch, input " + shape_string(x.shape()) + " weight " +
                                    shape_string(weight.shape()));
    }
    if (weight.dim(2) % 2 == 0 || weight.dim(3) % 2 == 0) {
        throw std::invalid_argument("conv2d: kernel side lengths must be odd");
    }
    if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
    ConvGeometry g{};
    g.c = x.dim(0);
    g.h = x.dim(1);
    g.w = x.dim(2);
    g.o = weight.dim(0);
    g.kh = weight.dim(2);
    g.kw = weight.dim(3);
    g.rh = g.kh / 2;
    g.rw = g.kw / 2;
    g.ho = (g.h + stride - 1) / stride;
    g.wo = (g.w + stride - 1) / stride;
    g.ph = g.h + 2 * g.rh;
    g.pw = g.w + 2 * g.rw;
    return g;
}

std::vector<double> pad_input(const Tensor& x, const ConvGeometry& g, Padding padding) {
    std::vector<double> pad(g.c * g.ph * g.pw, 0.0);
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t py = 0; py < g.ph; ++py) {
            const long sy = static_cast<long>(py) - static_cast<long>(g.rh);
            if (padding == Padding::zero && (sy < 0 || sy >= static_cast<long>(g.h))) continue;
            const std::size_t y = clamp_index(sy, g.h);
            for (std::size_t px = 0; px < g.pw; ++px) {
                const long sx = static_cast<long>(px) - static_cast<long>(g.rw);
                if (padding == Padding::zero && (sx < 0 || sx >= static_cast<long>(g.w))) continue;
                pad[(c * g.ph + py) * g.pw + px] = x.at(c, y, clamp_index(sx, g.w));
            }
        }
    }
    return pad;
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, std::size_t stride, Padding padding) {
    const ConvGeometry g = conv_geometry(x, weight, stride);
    const std::vector<double> pad = pad_input(x, g, padding);
    Tensor out(Shape{g.o, g.ho, g.wo});
    for (std::size_t o = 0; o < g.o; ++o) {
        double* dst = out.raw() + o * g.ho * g.wo;
        for (std::size_t c = 0; c < g.c; ++c) {
            const double* src = pad.data() + c * g.ph * g.pw;
            for (std::size_t i = 0; i < g.kh; ++i) {
                for (std::size_t j = 0; j < g.kw; ++j) {
                    const double k = weight[((o * g.c + c) * g.kh + i) * g.kw + j];
                    if (k == 0.0) continue;
                    for (std::size_t yo = 0; yo < g.ho; ++yo) {
                        const double* row = src + (yo * stride + i) * g.pw + j;
                        double* orow = dst + yo * g.wo;
                        if (stride == 1) {
                            for (std::size_t xo = 0; xo < g.wo; ++xo) orow[xo] += k * row[xo];
                        } else {
                            for (std::size_t xo = 0; xo < g.wo; ++xo) orow[xo] += k * row[xo * stride];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() == 0 || x.empty()) throw std::invalid_argument("softmax: empty input");
    const std::size_t n = x.shape().back();
    const std::size_t rows = x.size() / n;
    Tensor out(x.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = x.raw() + r * n;
        double* o = out.raw() + r * n;
        const double mx = *std::max_element(in, in + n);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            o[j] = std::exp(in[j] - mx);
            total += o[j];
        }
        for (std::size_t j = 0; j < n; ++j) o[j] /= total;
    }
    return out;
}

Tensor upsample2x(const Tensor& x) {
    if (x.rank() != 3) throw std::invalid_argument("upsample2x: expected [C,H,W]");
    const std::size_t c_n = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out(Shape{c_n, 2 * h, 2 * w});
    for (std::size_t c = 0; c < c_n; ++c)
        for (std::size_t y = 0; y < 2 * h; ++y)
            for (std::size_t xx = 0; xx < 2 * w; ++xx) out.at(c, y, xx) = x.at(c, y / 2, xx / 2);
    return out;
}

Tensor pixel_shuffle(const Tensor& x) {
    if (x.rank() != 3 || x.dim(0) % 4 != 0) throw std::invalid_argument("pixel_shuffle: expected [4C,H,W]");
    const std::size_t c_n = x.dim(0) / 4, h = x.dim(1), w = x.dim(2);
    Tensor out(Shape{c_n, 2 * h, 2 * w});
    for (std::size_t c = 0; c < c_n; ++c)
        for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        out.at(c, 2 * y + dy, 2 * xx + dx) = x.at(4 * c + 2 * dy + dx, y, xx);
    return out;
}

namespace {

// Index into a broadcast operand for flat index `i` of the full-shaped operand.
struct Broadcast {
    std::vector<std::size_t> full_strides;
    std::vector<std::size_t> small_strides;
    std::vector<std::size_t> small_dims;
    bool trivial = false;

    Broadcast(const Shape& full, const Shape& small) {
        if (full.size() != small.size()) {
            throw std::invalid_argument("add: rank mismatch " + shape_string(full) + " vs " + shape_string(small));
        }
        trivial = full == small;
        const std::size_t r = full.size();
        full_strides.assign(r, 1);
        small_strides.assign(r, 1);
        small_dims = small;
        for (std::size_t d = 0; d < r; ++d) {
            if (small[d] != full[d] && small[d] != 1) {
                throw std::invalid_argument("add: cannot broadcast " + shape_string(small) + " to " +
                                            shape_string(full));
            }
        }
        for (std::size_t d = r; d-- > 1;) {
            full_strides[d - 1] = full_strides[d] * full[d];
            small_strides[d - 1] = small_strides[d] * small[d];
        }
    }

    std::size_t map(std::size_t i) const {
        if (trivial) return i;
        std::size_t j = 0;
        for (std::size_t d = 0; d < full_strides.size(); ++d) {
            const std::size_t idx = i / full_strides[d];
            i -= idx * full_strides[d];
            if (small_dims[d] != 1) j += idx * small_strides[d];
        }
        return j;
    }
};

}  // namespace

Var Tape::push(Node node) {
    if (!node.value.all_finite()) {
        throw std::domain_error("tape: non-finite value produced by a recorded operation");
    }
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

Var Tape::input(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = false;
    return push(std::move(n));
}

Var Tape::matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
    Node n;
    n.op = Op::matmul;
    n.a = a.id;
    n.b = b.id;
    n.flag_a = transpose_a;
    n.flag_b = transpose_b;
    n.value = hfdiff::matmul(value(a), value(b), transpose_a, transpose_b);
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Var Tape::conv2d(Var x, Var weight, std::size_t stride, Padding padding) {
    Node n;
    n.op = Op::conv2d;
    n.a = x.id;
    n.b = weight.id;
    n.stride = stride;
    n.padding = padding;
    n.value = conv2d_forward(value(x), value(weight), stride, padding);
    n.requires_grad = requires_grad(x) || requires_grad(weight);
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    const Broadcast bc(av.shape(), bv.shape());
    Node n;
    n.op = Op::add;
    n.a = a.id;
    n.b = b.id;
    n.value = av;
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] += bv[bc.map(i)];
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
    Node n;
    n.op = Op::scale;
    n.a = a.id;
    n.factor = s;
    n.value = value(a) * s;
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Var Tape::softmax(Var a) {
    Node n;
    n.op = Op::softmax;
    n.a = a.id;
    n.value = softmax_rows(value(a));
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Var Tape::activate(Var a, Activation f) {
    Node n;
    n.op = Op::activate;
    n.a = a.id;
    n.activation = f;
    n.value = value(a);
    for (double& v : n.value.data()) v = hfdiff::activate(f, v);
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Var Tape::reshape(Var a, Shape shape) {
    Node n;
    n.op = Op::reshape;
    n.a = a.id;
    n.value = value(a).reshaped(std::move(shape));
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Var Tape::upsample2x(Var a) {
    Node n;
    n.op = Op::upsample2x;
    n.a = a.id;
    n.value = hfdiff::upsample2x(value(a));
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

Var Tape::pixel_shuffle(Var a) {
    Node n;
    n.op = Op::pixel_shuffle;
    n.a = a.id;
    n.value = hfdiff::pixel_shuffle(value(a));
    n.requires_grad = requires_grad(a);
    return push(std::move(n));
}

const Tensor& Tape::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty() && !n.value.empty()) {
        // Lazily materialise zeros so callers always get a correctly shaped tensor.
        auto& self = const_cast<Node&>(n);
        self.grad = Tensor(n.value.shape());
    }
    return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Tape::backward(Var output) {
    if (value(output).size() != 1) {
        throw std::invalid_argument("tape: backward() without a seed needs a scalar output");
    }
    backward(output, Tensor(value(output).shape(), 1.0));
}

void Tape::backward(Var output, const Tensor& seed) {
    if (output.id >= nodes_.size()) throw std::out_of_range("tape: unknown variable");
    if (seed.shape() != value(output).shape()) {
        throw std::invalid_argument("tape: seed shape " + shape_string(seed.shape()) + " does not match output " +
                                    shape_string(value(output).shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    grad_buffer(output.id) = seed;
    for (std::size_t id = output.id + 1; id-- > 0;) {
        const Node& n = nodes_[id];
        if (n.op == Op::leaf || !n.requires_grad || n.grad.empty()) continue;
        propagate(n);
    }
}

void Tape::propagate(const Node& n) {
    const Tensor& g = n.grad;
    const bool need_a = nodes_[n.a].requires_grad;
    const bool need_b = nodes_[n.b].requires_grad;
    switch (n.op) {
        case Op::leaf: return;
        case Op::matmul: {
            // C = op(A) op(B); dop(A) = dC op(B)^T, dop(B) = op(A)^T dC.
            const Tensor& a = nodes_[n.a].value;
            const Tensor& b = nodes_[n.b].value;
            if (need_a) {
                // d op(A) = g * op(B)^T. If A was transposed, dA = (d op(A))^T = op(B) * g^T.
                Tensor da = n.flag_a ? hfdiff::matmul(b, g, n.flag_b, true) : hfdiff::matmul(g, b, false, !n.flag_b);
                grad_buffer(n.a) += da;
            }
            if (need_b) {
                Tensor db = n.flag_b ? hfdiff::matmul(g, a, true, n.flag_a) : hfdiff::matmul(a, g, !n.flag_a, false);
                grad_buffer(n.b) += db;
            }
            return;
        }
        case Op::conv2d: {
            const Tensor& x = nodes_[n.a].value;
            const Tensor& wt = nodes_[n.b].value;
            const ConvGeometry geo = conv_geometry(x, wt, n.stride);
            const std::vector<double> pad = pad_input(x, geo, n.padding);
            std::vector<double> gpad(need_a ? pad.size() : 0, 0.0);
            Tensor* gw = need_b ? &grad_buffer(n.b) : nullptr;
            const std::size_t s = n.stride;
            for (std::size_t o = 0; o < geo.o; ++o) {
                const double* go = g.raw() + o * geo.ho * geo.wo;
                for (std::size_t c = 0; c < geo.c; ++c) {
                    const double* src = pad.data() + c * geo.ph * geo.pw;
                    double* gsrc = need_a ? gpad.data() + c * geo.ph * geo.pw : nullptr;
                    for (std::size_t i = 0; i < geo.kh; ++i) {
                        for (std::size_t j = 0; j < geo.kw; ++j) {
                            const std::size_t widx = ((o * geo.c + c) * geo.kh + i) * geo.kw + j;
                            const double k = wt[widx];
                            double acc = 0.0;
                            for (std::size_t yo = 0; yo < geo.ho; ++yo) {
                                const std::size_t base = (yo * s + i) * geo.pw + j;
                                const double* grow = go + yo * geo.wo;
                                if (gw) {
                                    const double* row = src + base;
                                    for (std::size_t xo = 0; xo < geo.wo; ++xo) acc += grow[xo] * row[xo * s];
                                }
                                if (gsrc && k != 0.0) {
                                    double* grow_in = gsrc + base;
                                    for (std::size_t xo = 0; xo < geo.wo; ++xo) grow_in[xo * s] += k * grow[xo];
                                }
                            }
                            if (gw) (*gw)[widx] += acc;
                        }
                    }
                }
            }
            if (need_a) {
                Tensor& gx = grad_buffer(n.a);
                for (std::size_t c = 0; c < geo.c; ++c) {
                    for (std::size_t py = 0; py < geo.ph; ++py) {
                        const long sy = static_cast<long>(py) - static_cast<long>(geo.rh);
                        if (n.padding == Padding::zero && (sy < 0 || sy >= static_cast<long>(geo.h))) continue;
                        const std::size_t y = clamp_index(sy, geo.h);
                        for (std::size_t px = 0; px < geo.pw; ++px) {
                            const long sx = static_cast<long>(px) - static_cast<long>(geo.rw);
                            if (n.padding == Padding::zero && (sx < 0 || sx >= static_cast<long>(geo.w))) continue;
                            gx.at(c, y, clamp_index(sx, geo.w)) += gpad[(c * geo.ph + py) * geo.pw + px];
                        }
                    }
                }
            }
            return;
        }
        case Op::add: {
            if (need_a) grad_buffer(n.a) += g;
            if (need_b) {
                Tensor& gb = grad_buffer(n.b);
                const Broadcast bc(g.shape(), gb.shape());
                for (std::size_t i = 0; i < g.size(); ++i) gb[bc.map(i)] += g[i];
            }
            return;
        }
        case Op::scale: {
            Tensor& ga = grad_buffer(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.factor * g[i];
            return;
        }
        case Op::softmax: {
            const Tensor& y = n.value;
            const std::size_t len = y.shape().back();
            Tensor& ga = grad_buffer(n.a);
            for (std::size_t r = 0; r < y.size() / len; ++r) {
                const double* yr = y.raw() + r * len;
                const double* gr = g.raw() + r * len;
                double inner = 0.0;
                for (std::size_t j = 0; j < len; ++j) inner += gr[j] * yr[j];
                double* out = ga.raw() + r * len;
                for (std::size_t j = 0; j < len; ++j) out[j] += yr[j] * (gr[j] - inner);
            }
            return;
        }
        case Op::activate: {
            const Tensor& x = nodes_[n.a].value;
            Tensor& ga = grad_buffer(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += activate_derivative(n.activation, x[i]) * g[i];
            return;
        }
        case Op::reshape: {
            Tensor& ga = grad_buffer(n.a);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            return;
        }
        case Op::upsample2x: {
            Tensor& ga = grad_buffer(n.a);
            const std::size_t c_n = ga.dim(0), h = ga.dim(1), w = ga.dim(2);
            for (std::size_t c = 0; c < c_n; ++c)
                for (std::size_t y = 0; y < 2 * h; ++y)
                    for (std::size_t x = 0; x < 2 * w; ++x) ga.at(c, y / 2, x / 2) += g.at(c, y, x);
            return;
        }
        case Op::pixel_shuffle: {
            Tensor& ga = grad_buffer(n.a);
            const std::size_t c_n = g.dim(0), h = ga.dim(1), w = ga.dim(2);
            for (std::size_t c = 0; c < c_n; ++c)
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx)
                        for (std::size_t y = 0; y < h; ++y)
                            for (std::size_t x = 0; x < w; ++x)
                                ga.at(4 * c + 2 * dy + dx, y, x) += g.at(c, 2 * y + dy, 2 * x + dx);
            return;
        }
    }
}

Var sum_squares(Tape& tape, Var v) {
    const std::size_t n = tape.value(v).size();
    const Var row = tape.reshape(v, Shape{1, n});
    const Var col = tape.reshape(v, Shape{n, 1});
    return tape.matmul(row, col);
}

}  // namespace hfdiff
