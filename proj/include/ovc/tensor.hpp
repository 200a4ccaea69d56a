#ifndef OVC_TENSOR_HPP
#define OVC_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "ovc/common.hpp"

namespace ovc {

// Logical layout is channels × height × width, stored row-major and
// contiguous. Flat vectors use (1, 1, n).
struct Shape {
    int c = 1, h = 1, w = 1;
    int64_t numel() const { return static_cast<int64_t>(c) * h * w; }
    bool operator==(const Shape& o) const { return c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }
};

inline Shape flat(int64_t n) { return Shape{1, 1, static_cast<int>(n)}; }
inline Shape mat(int rows, int cols) { return Shape{1, rows, cols}; }

// One value in the reverse-mode graph. Nodes live on a Tape and are valid
// until Tape::clear(). `back` propagates this node's grad into its parents.
struct Node {
    Shape shape;
    std::vector<float> val;
    std::vector<float> grad;
    bool needs_grad = false;
    std::function<void()> back;
};

using Var = Node*;

class Tape {
public:
    Var alloc(Shape s, bool needs_grad) {
        nodes_.emplace_back();
        Node& n = nodes_.back();
        n.shape = s;
        n.val.resize(static_cast<size_t>(s.numel()));
        n.needs_grad = needs_grad;
        if (needs_grad) n.grad.assign(static_cast<size_t>(s.numel()), 0.f);
        return &n;
    }

    Var leaf(const std::vector<float>& v, Shape s, bool needs_grad) {
        if (static_cast<int64_t>(v.size()) != s.numel())
            throw dimension_error("leaf size does not match shape");
        Var n = alloc(s, needs_grad);
        n->val = v;
        return n;
    }

    Var constant(std::vector<float> v, Shape s) {
        if (static_cast<int64_t>(v.size()) != s.numel())
            throw dimension_error("constant size does not match shape");
        Var n = alloc(s, false);
        n->val = std::move(v);
        return n;
    }

    Var scalar(float v) {
        Var n = alloc(Shape{1, 1, 1}, false);
        n->val[0] = v;
        return n;
    }

    // Reverse sweep from a scalar root. Creation order is a topological
    // order, so walking the tape backwards visits consumers first.
    void backward(Var root) {
        if (root->shape.numel() != 1) throw dimension_error("backward root must be scalar");
        if (!root->needs_grad) return;
        root->grad[0] = 1.f;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (it->needs_grad && it->back) it->back();
        }
    }

    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }

private:
    std::deque<Node> nodes_;
};

inline void check_finite(const std::vector<float>& v, const char* what) {
    for (float x : v)
        if (!std::isfinite(x)) throw training_error(std::string(what) + " contains a non-finite value");
}

}  // namespace ovc

#endif
