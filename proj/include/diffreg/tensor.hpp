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
 * @file tensor.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_TENSOR_HPP
#define DIFFREG_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "diffreg/errors.hpp"

namespace diffreg {

/// Extents of a 4-D (batch, channel, height, width) array.
struct Shape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    std::size_t numel() const
    {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }

    bool operator==(const Shape&) const = default;

    std::string str() const
    {
        std::ostringstream os;
        os << '[' << n << ',' << c << ',' << h << ',' << w << ']';
        return os.str();
    }
};

/// Dense row-major array. Plain value type; differentiation lives in Tape.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.numel(), fill)
    {
        require(s.n > 0 && s.c > 0 && s.h > 0 && s.w > 0,
                "tensor extents must be positive, got " + s.str());
    }
    Tensor(Shape s, std::vector<T> values) : shape(s), data(std::move(values))
    {
        require(data.size() == s.numel(),
                "tensor data length does not match shape " + s.str());
    }

    std::size_t size() const { return data.size(); }

    T& operator()(int c, int y, int x)
    {
        return data[(static_cast<std::size_t>(c) * shape.h + y) * shape.w + x];
    }
    const T& operator()(int c, int y, int x) const
    {
        return data[(static_cast<std::size_t>(c) * shape.h + y) * shape.w + x];
    }

    T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * shape.plane(); }
    const T* channel(int c) const
    {
        return data.data() + static_cast<std::size_t>(c) * shape.plane();
    }

    bool all_finite() const
    {
        return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
    }

    template <typename U>
    Tensor<U> cast() const
    {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }
};

}  // namespace diffreg

#endif  // DIFFREG_TENSOR_HPP
