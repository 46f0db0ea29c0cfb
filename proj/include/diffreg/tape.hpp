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
 * @file tape.hpp
 *
 *****************************************************************************/

#ifndef DIFFREG_TAPE_HPP
#define DIFFREG_TAPE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "diffreg/errors.hpp"
#include "diffreg/tensor.hpp"

namespace diffreg {

template <typename T>
class Tape;

/// Handle to a node recorded on a Tape.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    std::size_t id = 0;

    const Tensor<T>& value() const { return tape->value(*this); }
    const Shape& shape() const { return tape->value(*this).shape; }
    bool requires_grad() const { return tape->requires_grad(*this); }
};

/// Define-by-run reverse-mode tape.
///
/// Nodes are appended in evaluation order, so the node list is always a
/// topological order of the graph and backward is a single reverse sweep.
/// A tape belongs to one registration session and is rebuilt every iteration.
template <typename T>
class Tape {
public:
    /// Receives the gradient of the node's output and accumulates into its
    /// inputs through Tape::grad().
    using Backward = std::function<void(Tape&, const std::vector<T>& out_grad)>;

    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }

    Var<T> leaf(Tensor<T> value, bool requires_grad = true)
    {
        check_finite(value, "leaf");
        nodes_.push_back(Node{std::move(value), {}, requires_grad && recording_, "leaf", {}, {}});
        return {this, nodes_.size() - 1};
    }

    Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

    /// Appends an op output. `backward` is dropped when no input needs a gradient.
    Var<T> record(const char* op, Tensor<T> out, std::initializer_list<Var<T>> inputs,
                  Backward backward)
    {
        check_finite(out, op);
        bool needs = false;
        for (const auto& in : inputs) {
            needs = needs || nodes_[in.id].requires_grad;
        }
        needs = needs && recording_;
        std::vector<std::size_t> ids;
        if (needs) {
            for (const auto& in : inputs) {
                ids.push_back(in.id);
            }
        }
        nodes_.push_back(Node{std::move(out), {}, needs, op, needs ? std::move(backward) : Backward{},
                              std::move(ids)});
        return {this, nodes_.size() - 1};
    }

    const Tensor<T>& value(Var<T> v) const { return nodes_[v.id].value; }
    bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }

    /// Gradient buffer of a node, allocated (zeroed) on first access.
    std::vector<T>& grad(Var<T> v)
    {
        auto& node = nodes_[v.id];
        if (node.grad.size() != node.value.size()) {
            node.grad.assign(node.value.size(), T(0));
        }
        return node.grad;
    }

    /// Gradient of the last backward pass; zeros for unreachable nodes.
    Tensor<T> gradient(Var<T> v)
    {
        return Tensor<T>(nodes_[v.id].value.shape, grad(v));
    }

    /// Populates d(loss)/d(node) for every node reachable from `loss`.
    /// Gradients are re-zeroed first, so repeating a pass gives identical results.
    void backward(Var<T> loss)
    {
        require(loss.tape == this, "backward: loss belongs to another tape");
        require(nodes_[loss.id].value.size() == 1, "backward: loss must be a scalar");
        for (auto& node : nodes_) {
            std::fill(node.grad.begin(), node.grad.end(), T(0));
        }
        grad(loss)[0] = T(1);
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            auto& node = nodes_[i];
            if (!node.backward || node.grad.empty()) {
                continue;
            }
            // Copy: the rule may allocate gradient buffers of other nodes.
            const std::vector<T> out_grad = node.grad;
            node.backward(*this, out_grad);
            for (std::size_t in : node.inputs) {
                for (T g : nodes_[in].grad) {
                    if (!std::isfinite(g)) {
                        throw NumericalError(std::string("non-finite gradient produced by backward of op '") +
                                             node.op + "' (node " + std::to_string(i) + ")");
                    }
                }
            }
        }
    }

    std::size_t size() const { return nodes_.size(); }
    const char* op_name(Var<T> v) const { return nodes_[v.id].op; }

    void clear() { nodes_.clear(); }

private:
    struct Node {
        Tensor<T> value;
        std::vector<T> grad;
        bool requires_grad = false;
        const char* op = "";
        Backward backward;
        std::vector<std::size_t> inputs;
    };

    static void check_finite(const Tensor<T>& t, const char* op)
    {
        if (!t.all_finite()) {
            throw NumericalError(std::string("non-finite value produced by op '") + op + "'");
        }
    }

    bool recording_;
    std::vector<Node> nodes_;
};

}  // namespace diffreg

#endif  // DIFFREG_TAPE_HPP
