/******************************************************************************
 * Copyright 2026 The diffreg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 * @file ops.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_OPS_HPP
#define DIFFREG_OPS_HPP

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

#include "diffreg/errors.hpp"
#include "diffreg/tape.hpp"
#include "diffreg/tensor.hpp"

namespace diffreg {

/// Half-sample symmetric reflection (-1 -> 0, n -> n-1), valid for any offset.
inline int reflect_index(int i, int n)
{
    if (n == 1) {
        return 0;
    }
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) {
        m += period;
    }
    return m < n ? m : period - 1 - m;
}

/// Normalized 1-D Gaussian taps for offsets -radius..radius.
inline std::vector<double> gaussian_kernel(double sigma, int radius)
{
    std::vector<double> k(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = sigma > 0 ? std::exp(-0.5 * i * i / (sigma * sigma)) : (i == 0 ? 1.0 : 0.0);
        k[i + radius] = v;
        total += v;
    }
    for (double& v : k) {
        v /= total;
    }
    return k;
}

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op)
{
    if (!(a == b)) {
        throw ContractViolation(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
    }
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;

template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

// Correlates every line of a plane with `taps` along one axis, reflect borders.
// With `transpose`, scatters instead (adjoint of the forward pass).
template <typename T>
void filter_axis(const T* src, T* dst, int h, int w, bool along_x, const std::vector<double>& taps,
                 bool transpose)
{
    const int r = static_cast<int>(taps.size() / 2);
    const int n = along_x ? w : h;
    const int lines = along_x ? h : w;
    const std::ptrdiff_t step = along_x ? 1 : w;
    const std::ptrdiff_t line_step = along_x ? w : 1;
    const int taps_n = 2 * r + 1;
    std::vector<int> index(static_cast<std::size_t>(n) * taps_n);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < taps_n; ++k) {
            index[static_cast<std::size_t>(j) * taps_n + k] = reflect_index(j + k - r, n);
        }
    }
    std::vector<double> line(n), acc(n);
    for (int l = 0; l < lines; ++l) {
        const T* s = src + l * line_step;
        T* d = dst + l * line_step;
        for (int j = 0; j < n; ++j) {
            line[j] = s[j * step];
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int j = 0; j < n; ++j) {
            const int* idx = index.data() + static_cast<std::size_t>(j) * taps_n;
            if (transpose) {
                for (int k = 0; k < taps_n; ++k) {
                    acc[idx[k]] += taps[k] * line[j];
                }
            } else {
                double a = 0.0;
                for (int k = 0; k < taps_n; ++k) {
                    a += taps[k] * line[idx[k]];
                }
                acc[j] = a;
            }
        }
        for (int j = 0; j < n; ++j) {
            d[j * step] = static_cast<T>(acc[j]);
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var<T> add(Var<T> a, Var<T> b)
{
    detail::require_same_shape(a.shape(), b.shape(), "add");
    Tensor<T> out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] += bv[i];
    }
    return a.tape->record("add", std::move(out), {a, b}, [a, b](Tape<T>& t, const std::vector<T>& g) {
        for (Var<T> v : {a, b}) {
            if (v.requires_grad()) {
                auto& gv = t.grad(v);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    gv[i] += g[i];
                }
            }
        }
    });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b)
{
    detail::require_same_shape(a.shape(), b.shape(), "sub");
    Tensor<T> out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] -= bv[i];
    }
    return a.tape->record("sub", std::move(out), {a, b}, [a, b](Tape<T>& t, const std::vector<T>& g) {
        if (a.requires_grad()) {
            auto& ga = t.grad(a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i];
            }
        }
        if (b.requires_grad()) {
            auto& gb = t.grad(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] -= g[i];
            }
        }
    });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b)
{
    detail::require_same_shape(a.shape(), b.shape(), "mul");
    Tensor<T> out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] *= bv[i];
    }
    return a.tape->record("mul", std::move(out), {a, b}, [a, b](Tape<T>& t, const std::vector<T>& g) {
        const auto& av = a.value().data;
        const auto& bv = b.value().data;
        if (a.requires_grad()) {
            auto& ga = t.grad(a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] * bv[i];
            }
        }
        if (b.requires_grad()) {
            auto& gb = t.grad(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] += g[i] * av[i];
            }
        }
    });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b)
{
    detail::require_same_shape(a.shape(), b.shape(), "div");
    Tensor<T> out = a.value();
    const auto& bv = b.value().data;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] /= bv[i];
    }
    return a.tape->record("div", std::move(out), {a, b}, [a, b](Tape<T>& t, const std::vector<T>& g) {
        const auto& av = a.value().data;
        const auto& bv = b.value().data;
        if (a.requires_grad()) {
            auto& ga = t.grad(a);
            for (std::size_t i = 0; i < g.size(); ++i) {
                ga[i] += g[i] / bv[i];
            }
        }
        if (b.requires_grad()) {
            auto& gb = t.grad(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
            }
        }
    });
}

template <typename T>
Var<T> scale(Var<T> a, double s)
{
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v = static_cast<T>(v * s);
    }
    return a.tape->record("scale", std::move(out), {a}, [a, s](Tape<T>& t, const std::vector<T>& g) {
        auto& ga = t.grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += static_cast<T>(g[i] * s);
        }
    });
}

template <typename T>
Var<T> add_scalar(Var<T> a, double s)
{
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v = static_cast<T>(v + s);
    }
    return a.tape->record("add_scalar", std::move(out), {a}, [a](Tape<T>& t, const std::vector<T>& g) {
        auto& ga = t.grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
        }
    });
}

template <typename T>
Var<T> square(Var<T> a)
{
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v = v * v;
    }
    return a.tape->record("square", std::move(out), {a}, [a](Tape<T>& t, const std::vector<T>& g) {
        const auto& av = a.value().data;
        auto& ga = t.grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += 2 * av[i] * g[i];
        }
    });
}

/// max(0, x); the subgradient at 0 is 0.
template <typename T>
Var<T> relu(Var<T> a)
{
    Tensor<T> out = a.value();
    for (T& v : out.data) {
        v = v > T(0) ? v : T(0);
    }
    return a.tape->record("relu", std::move(out), {a}, [a](Tape<T>& t, const std::vector<T>& g) {
        const auto& av = a.value().data;
        auto& ga = t.grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (av[i] > T(0)) {
                ga[i] += g[i];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Reductions (64-bit accumulation)

template <typename T>
Var<T> sum(Var<T> a)
{
    double acc = 0.0;
    for (T v : a.value().data) {
        acc += v;
    }
    Tensor<T> out(Shape{}, static_cast<T>(acc));
    return a.tape->record("sum", std::move(out), {a}, [a](Tape<T>& t, const std::vector<T>& g) {
        for (T& v : t.grad(a)) {
            v += g[0];
        }
    });
}

template <typename T>
Var<T> mean(Var<T> a)
{
    double acc = 0.0;
    for (T v : a.value().data) {
        acc += v;
    }
    const double n = static_cast<double>(a.value().size());
    Tensor<T> out(Shape{}, static_cast<T>(acc / n));
    return a.tape->record("mean", std::move(out), {a}, [a, n](Tape<T>& t, const std::vector<T>& g) {
        const T share = static_cast<T>(g[0] / n);
        for (T& v : t.grad(a)) {
            v += share;
        }
    });
}

// ---------------------------------------------------------------------------
// Layout

/// Stacks [1,Ca,H,W] and [1,Cb,H,W] into [1,Ca+Cb,H,W].
template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b)
{
    const Shape sa = a.shape();
    const Shape sb = b.shape();
    require(sa.n == 1 && sb.n == 1 && sa.h == sb.h && sa.w == sb.w,
            "concat_channels: incompatible shapes " + sa.str() + " and " + sb.str());
    Tensor<T> out(Shape{1, sa.c + sb.c, sa.h, sa.w});
    std::copy(a.value().data.begin(), a.value().data.end(), out.data.begin());
    std::copy(b.value().data.begin(), b.value().data.end(), out.data.begin() + sa.numel());
    const std::size_t split = sa.numel();
    return a.tape->record("concat_channels", std::move(out), {a, b},
                          [a, b, split](Tape<T>& t, const std::vector<T>& g) {
                              if (a.requires_grad()) {
                                  auto& ga = t.grad(a);
                                  for (std::size_t i = 0; i < split; ++i) {
                                      ga[i] += g[i];
                                  }
                              }
                              if (b.requires_grad()) {
                                  auto& gb = t.grad(b);
                                  for (std::size_t i = 0; i < gb.size(); ++i) {
                                      gb[i] += g[split + i];
                                  }
                              }
                          });
}

// ---------------------------------------------------------------------------
// Convolution

namespace detail {

// Output rows per im2col block; keeps a block's column matrix cache-resident.
inline int conv_block_rows(int w) { return std::max(1, 1024 / w); }

// im2col for output rows [y0, y1): col[(ci*k + ky)*k + kx][(y - y0)*w + x]
// = in[ci][y + ky - p][x + kx - p], zero outside the input.
template <typename T>
void im2col_rows(const T* in, int cin, int h, int w, int k, int pad, int y0, int y1, T* col)
{
    const std::size_t n = static_cast<std::size_t>(y1 - y0) * w;
    for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = col + static_cast<std::size_t>((ci * k + ky) * k + kx) * n;
                const int dy = ky - pad, dx = kx - pad;
                const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
                for (int y = y0; y < y1; ++y) {
                    T* row = dst + static_cast<std::size_t>(y - y0) * w;
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) {
                        std::fill(row, row + w, T(0));
                        continue;
                    }
                    const T* src = in + (static_cast<std::size_t>(ci) * h + sy) * w;
                    std::fill(row, row + x_lo, T(0));
                    std::copy(src + x_lo + dx, src + x_hi + dx, row + x_lo);
                    std::fill(row + x_hi, row + w, T(0));
                }
            }
        }
    }
}

// Adjoint of im2col_rows: scatters a column block back onto the input gradient.
template <typename T>
void col2im_rows_add(const T* col, int cin, int h, int w, int k, int pad, int y0, int y1, T* gin)
{
    const std::size_t n = static_cast<std::size_t>(y1 - y0) * w;
    for (int ci = 0; ci < cin; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* src = col + static_cast<std::size_t>((ci * k + ky) * k + kx) * n;
                const int dy = ky - pad, dx = kx - pad;
                const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
                for (int y = y0; y < y1; ++y) {
                    const int sy = y + dy;
                    if (sy < 0 || sy >= h) {
                        continue;
                    }
                    const T* row = src + static_cast<std::size_t>(y - y0) * w;
                    T* dst = gin + (static_cast<std::size_t>(ci) * h + sy) * w + dx;
                    for (int x = x_lo; x < x_hi; ++x) {
                        dst[x] += row[x];
                    }
                }
            }
        }
    }
}

template <typename T>
using StridedMap = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;

template <typename T>
using ConstStridedMap = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;

}  // namespace detail

/// Stride-1 cross-correlation with zero padding. Only "same" padding is supported:
/// input [1,Cin,H,W], weight [Cout,Cin,k,k] (k odd), bias [Cout], padding (k-1)/2.
///
/// Lowered to GEMM over blocks of output rows; the backward pass rebuilds each
/// block's column matrix from the input instead of keeping it alive.
template <typename T>
Var<T> conv2d(Var<T> input, Var<T> weight, Var<T> bias, int padding)
{
    const Shape si = input.shape();
    const Shape sw = weight.shape();
    require(si.n == 1, "conv2d: batch size must be 1, got " + si.str());
    require(sw.c == si.c, "conv2d: input has " + std::to_string(si.c) + " channels but weight expects " +
                              std::to_string(sw.c));
    require(sw.h == sw.w && sw.h % 2 == 1, "conv2d: kernel must be square and odd, got " + sw.str());
    require(padding == sw.h / 2, "conv2d: padding must be " + std::to_string(sw.h / 2) + " for same-size output");
    require(bias.value().size() == static_cast<std::size_t>(sw.n), "conv2d: bias length must equal Cout");

    const int cin = si.c, cout = sw.n, k = sw.h, h = si.h, w = si.w;
    const int rows = cin * k * k;
    const Eigen::Index hw = static_cast<Eigen::Index>(si.plane());
    const int block = detail::conv_block_rows(w);

    Tensor<T> out(Shape{1, cout, h, w});
    {
        std::vector<T> col(static_cast<std::size_t>(rows) * block * w);
        detail::ConstMatMap<T> wm(weight.value().data.data(), cout, rows);
        const auto& b = bias.value().data;
        for (int y0 = 0; y0 < h; y0 += block) {
            const int y1 = std::min(h, y0 + block);
            const Eigen::Index n = static_cast<Eigen::Index>(y1 - y0) * w;
            detail::im2col_rows(input.value().data.data(), cin, h, w, k, padding, y0, y1, col.data());
            detail::ConstMatMap<T> cm(col.data(), rows, n);
            detail::StridedMap<T> om(out.data.data() + static_cast<std::size_t>(y0) * w, cout, n,
                                     Eigen::OuterStride<>(hw));
            om.noalias() = wm * cm;
            for (int co = 0; co < cout; ++co) {
                om.row(co).array() += b[co];
            }
        }
    }

    return input.tape->record(
        "conv2d", std::move(out), {input, weight, bias},
        [input, weight, bias, cin, cout, k, h, w, rows, hw, padding, block](Tape<T>& t, const std::vector<T>& g) {
            if (bias.requires_grad()) {
                auto& gb = t.grad(bias);
                for (int co = 0; co < cout; ++co) {
                    double acc = 0.0;
                    const T* row = g.data() + static_cast<std::size_t>(co) * hw;
                    for (Eigen::Index i = 0; i < hw; ++i) {
                        acc += row[i];
                    }
                    gb[co] += static_cast<T>(acc);
                }
            }
            const bool need_w = weight.requires_grad();
            const bool need_in = input.requires_grad();
            if (!need_w && !need_in) {
                return;
            }
            detail::ConstMatMap<T> wm(weight.value().data.data(), cout, rows);
            std::vector<T> col(static_cast<std::size_t>(rows) * block * w);
            T* gw_data = need_w ? t.grad(weight).data() : nullptr;
            T* gin = need_in ? t.grad(input).data() : nullptr;
            for (int y0 = 0; y0 < h; y0 += block) {
                const int y1 = std::min(h, y0 + block);
                const Eigen::Index n = static_cast<Eigen::Index>(y1 - y0) * w;
                detail::ConstStridedMap<T> gm(g.data() + static_cast<std::size_t>(y0) * w, cout, n,
                                              Eigen::OuterStride<>(hw));
                if (need_w) {
                    detail::im2col_rows(input.value().data.data(), cin, h, w, k, padding, y0, y1, col.data());
                    detail::ConstMatMap<T> cm(col.data(), rows, n);
                    detail::MatMap<T> gw(gw_data, cout, rows);
                    gw.noalias() += gm * cm.transpose();
                }
                if (need_in) {
                    detail::MatMap<T> dcol(col.data(), rows, n);
                    dcol.noalias() = wm.transpose() * gm;
                    detail::col2im_rows_add(col.data(), cin, h, w, k, padding, y0, y1, gin);
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Sampling

namespace detail {

// Bilinear footprint of one normalized coordinate along an axis of length n
// (align-corners). Out-of-range positions clamp to the border and carry no
// derivative. Positions within rounding noise of a pixel center snap onto it,
// so identity grids reproduce samples exactly.
struct AxisSample {
    int i0 = 0;
    int i1 = 0;
    double frac = 0.0;
    double dpos = 0.0;  // d(pixel position)/d(normalized coordinate)
};

template <typename T>
AxisSample axis_sample(double coord, int n)
{
    AxisSample s;
    if (n == 1) {
        return s;
    }
    const double half = 0.5 * (n - 1);
    double pos = (coord + 1.0) * half;
    s.dpos = half;
    if (pos <= 0.0) {
        pos = 0.0;
        s.dpos = coord < -1.0 ? 0.0 : half;
    } else if (pos >= n - 1) {
        pos = n - 1;
        s.dpos = coord > 1.0 ? 0.0 : half;
    }
    const double snap = 8.0 * std::numeric_limits<T>::epsilon() * n;
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) < snap) {
        pos = nearest;
    }
    s.i0 = std::min(static_cast<int>(std::floor(pos)), n - 2);
    s.i1 = s.i0 + 1;
    s.frac = pos - s.i0;
    return s;
}

}  // namespace detail

/// Samples image [1,C,H,W] at coords [1,2,H',W'] (channel 0 = x, channel 1 = y,
/// both in [-1,1], align-corners). Coordinates outside the range clamp to the border.
template <typename T>
Var<T> bilinear_sample(Var<T> image, Var<T> coords)
{
    const Shape si = image.shape();
    const Shape sc = coords.shape();
    require(si.n == 1 && sc.n == 1 && sc.c == 2,
            "bilinear_sample: expected image [1,C,H,W] and coords [1,2,H,W], got " + si.str() + " and " +
                sc.str());
    const std::size_t out_plane = sc.plane();
    const std::size_t in_plane = si.plane();
    Tensor<T> out(Shape{1, si.c, sc.h, sc.w});
    const T* cx = coords.value().channel(0);
    const T* cy = coords.value().channel(1);
    const T* img = image.value().data.data();
    for (std::size_t p = 0; p < out_plane; ++p) {
        const auto sx = detail::axis_sample<T>(cx[p], si.w);
        const auto sy = detail::axis_sample<T>(cy[p], si.h);
        const std::size_t o00 = static_cast<std::size_t>(sy.i0) * si.w + sx.i0;
        const std::size_t o01 = static_cast<std::size_t>(sy.i0) * si.w + sx.i1;
        const std::size_t o10 = static_cast<std::size_t>(sy.i1) * si.w + sx.i0;
        const std::size_t o11 = static_cast<std::size_t>(sy.i1) * si.w + sx.i1;
        const double w00 = (1 - sx.frac) * (1 - sy.frac), w01 = sx.frac * (1 - sy.frac);
        const double w10 = (1 - sx.frac) * sy.frac, w11 = sx.frac * sy.frac;
        for (int c = 0; c < si.c; ++c) {
            const T* ch = img + c * in_plane;
            out.data[c * out_plane + p] =
                static_cast<T>(w00 * ch[o00] + w01 * ch[o01] + w10 * ch[o10] + w11 * ch[o11]);
        }
    }
    return image.tape->record(
        "bilinear_sample", std::move(out), {image, coords}, [image, coords](Tape<T>& t, const std::vector<T>& g) {
            const Shape si = image.shape();
            const Shape sc = coords.shape();
            const std::size_t out_plane = sc.plane();
            const std::size_t in_plane = si.plane();
            const T* cx = coords.value().channel(0);
            const T* cy = coords.value().channel(1);
            const T* img = image.value().data.data();
            T* gi = image.requires_grad() ? t.grad(image).data() : nullptr;
            T* gc = coords.requires_grad() ? t.grad(coords).data() : nullptr;
            for (std::size_t p = 0; p < out_plane; ++p) {
                const auto sx = detail::axis_sample<T>(cx[p], si.w);
                const auto sy = detail::axis_sample<T>(cy[p], si.h);
                const int x0 = sx.i0, x1 = sx.i1, y0 = sy.i0, y1 = sy.i1;
                const double fx = sx.frac, fy = sy.frac;
                double dgx = 0.0, dgy = 0.0;
                for (int c = 0; c < si.c; ++c) {
                    const double go = g[c * out_plane + p];
                    if (go == 0.0) {
                        continue;
                    }
                    const T* ch = img + c * in_plane;
                    const double v00 = ch[y0 * si.w + x0], v01 = ch[y0 * si.w + x1];
                    const double v10 = ch[y1 * si.w + x0], v11 = ch[y1 * si.w + x1];
                    if (gi) {
                        T* gch = gi + c * in_plane;
                        gch[y0 * si.w + x0] += static_cast<T>(go * (1 - fx) * (1 - fy));
                        gch[y0 * si.w + x1] += static_cast<T>(go * fx * (1 - fy));
                        gch[y1 * si.w + x0] += static_cast<T>(go * (1 - fx) * fy);
                        gch[y1 * si.w + x1] += static_cast<T>(go * fx * fy);
                    }
                    dgx += go * ((1 - fy) * (v01 - v00) + fy * (v11 - v10));
                    dgy += go * ((1 - fx) * (v10 - v00) + fx * (v11 - v01));
                }
                if (gc) {
                    gc[p] += static_cast<T>(dgx * sx.dpos);
                    gc[out_plane + p] += static_cast<T>(dgy * sy.dpos);
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Filtering

/// Separable Gaussian blur of every channel; taps -radius..radius, reflect borders.
/// sigma == 0 returns the input node unchanged.
template <typename T>
Var<T> gaussian_blur(Var<T> a, double sigma, int radius)
{
    require(sigma >= 0.0, "gaussian_blur: sigma must be non-negative");
    require(radius >= 0, "gaussian_blur: radius must be non-negative");
    if (sigma == 0.0 || radius == 0) {
        return a;
    }
    const Shape s = a.shape();
    auto taps = gaussian_kernel(sigma, radius);
    Tensor<T> out(s);
    std::vector<T> tmp(s.plane());
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = a.value().data.data() + p * s.plane();
        detail::filter_axis(src, tmp.data(), s.h, s.w, true, taps, false);
        detail::filter_axis(tmp.data(), out.data.data() + p * s.plane(), s.h, s.w, false, taps, false);
    }
    return a.tape->record("gaussian_blur", std::move(out), {a},
                          [a, taps = std::move(taps)](Tape<T>& t, const std::vector<T>& g) {
                              const Shape s = a.shape();
                              auto& ga = t.grad(a);
                              std::vector<T> tmp(s.plane()), res(s.plane());
                              const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
                              for (std::size_t p = 0; p < planes; ++p) {
                                  detail::filter_axis(g.data() + p * s.plane(), tmp.data(), s.h, s.w, false, taps,
                                                      true);
                                  detail::filter_axis(tmp.data(), res.data(), s.h, s.w, true, taps, true);
                                  T* dst = ga.data() + p * s.plane();
                                  for (std::size_t i = 0; i < s.plane(); ++i) {
                                      dst[i] += res[i];
                                  }
                              }
                          });
}

// ---------------------------------------------------------------------------
// Composite

/// Mean of squared elementwise differences.
template <typename T>
Var<T> mse(Var<T> a, Var<T> b)
{
    detail::require_same_shape(a.shape(), b.shape(), "mse");
    return mean(square(sub(a, b)));
}

}  // namespace diffreg

#endif  // DIFFREG_OPS_HPP
