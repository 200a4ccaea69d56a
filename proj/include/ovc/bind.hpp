#ifndef OVC_BIND_HPP
#define OVC_BIND_HPP

#include <utility>
#include <vector>

#include "ovc/adam.hpp"
#include "ovc/tensor.hpp"

namespace ovc {

// Places persistent Params onto a tape. When trainable, remembers the
// (param, leaf) pairs so the optimizer can read gradients back; training a
// subset of the system is just a matter of which params go through a
// trainable binder.
struct Binder {
    Tape& tape;
    bool trainable = false;
    std::vector<std::pair<Param*, Var>> bound;

    Var operator()(Param& p, Shape s) {
        Var v = tape.leaf(p.v, s, trainable);
        if (trainable) bound.push_back({&p, v});
        return v;
    }
};

inline void apply_adam(Binder& b, float lr) {
    for (auto& [p, v] : b.bound) {
        p->opt.lr = lr;
        adam_step(p->v, v->grad, p->opt);
    }
}

}  // namespace ovc

#endif
