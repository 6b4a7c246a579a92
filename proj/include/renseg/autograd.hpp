// Reverse-mode differentiation over a static graph of tensor ops.
//
// A Graph owns leaves (inputs, parameters) and op nodes in construction
// order, which is also a topological order. forward_to evaluates the
// ancestors of a target; backward seeds the target gradient and walks the
// node list in reverse, with each op accumulating into its inputs' grads.
// Ops cache whatever the forward pass must hand to the backward pass
// (pool argmaxes, gate activations, batch statistics) as node-local state.

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "renseg/layers.hpp"
#include "renseg/renet.hpp"
#include "renseg/tensor.hpp"

namespace renseg {

template <typename T>
struct OpNode {
    virtual ~OpNode() = default;
    virtual const char* tag() const = 0;
    virtual Tensor<T> forward(const std::vector<const Tensor<T>*>& in) = 0;
    /// Accumulates into in_grads; entries are null when that input needs no
    /// gradient (e.g. frozen parameters).
    virtual void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>& out,
                          const Tensor<T>& dout, const std::vector<Tensor<T>*>& in_grads) = 0;
    virtual void set_training(bool) {}
    /// Non-trainable tensors that belong in checkpoints (running statistics).
    virtual void visit_state(const std::function<void(const std::string&, Tensor<T>*)>&) {}
};

template <typename T>
class Graph {
public:
    struct Node {
        std::string name;
        std::unique_ptr<OpNode<T>> op;  // null for leaves
        std::vector<int> inputs;
        Tensor<T> value;
        Tensor<T> grad;
        bool is_param = false;
        bool is_input = false;
        bool frozen = false;
        bool requires_grad = false;
        bool has_value = false;
    };

    int add_input(std::string name, bool requires_grad = false) {
        Node n;
        n.name = std::move(name);
        n.is_input = true;
        n.requires_grad = requires_grad;
        return push(std::move(n));
    }

    int add_param(std::string name, Tensor<T> init, bool frozen = false) {
        Node n;
        n.name = std::move(name);
        n.is_param = true;
        n.frozen = frozen;
        n.requires_grad = !frozen;
        n.value = std::move(init);
        n.has_value = true;
        return push(std::move(n));
    }

    int add_op(std::string name, std::unique_ptr<OpNode<T>> op, std::vector<int> inputs) {
        Node n;
        n.name = std::move(name);
        n.op = std::move(op);
        for (int i : inputs) {
            if (i < 0 || i >= static_cast<int>(nodes_.size()))
                throw ArgumentError("add_op: input id out of range");
            n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
        }
        n.inputs = std::move(inputs);
        return push(std::move(n));
    }

    std::size_t size() const { return nodes_.size(); }
    Node& node(int id) { return nodes_.at(id); }
    const Node& node(int id) const { return nodes_.at(id); }

    int find(const std::string& name) const {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? -1 : it->second;
    }

    void bind(int id, Tensor<T> v) {
        Node& n = nodes_.at(id);
        if (!n.is_input) throw ArgumentError("bind: node " + n.name + " is not an input");
        n.value = std::move(v);
        n.has_value = true;
    }
    void bind(const std::string& name, Tensor<T> v) {
        const int id = find(name);
        if (id < 0) throw ArgumentError("bind: unknown input " + name);
        bind(id, std::move(v));
    }

    void set_training(bool training) {
        training_ = training;
        for (auto& n : nodes_)
            if (n.op) n.op->set_training(training);
    }
    bool training() const { return training_; }

    std::vector<int> param_ids() const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
            if (nodes_[i].is_param) out.push_back(i);
        return out;
    }

    /// Evaluates the ancestors of target in id order.
    void forward_to(int target) {
        const std::vector<char> need = ancestors(target);
        for (int i = 0; i <= target; ++i) {
            if (!need[i]) continue;
            Node& n = nodes_[i];
            if (!n.op) {
                if (!n.has_value)
                    throw StateError("forward: input '" + n.name + "' is unbound");
                continue;
            }
            std::vector<const Tensor<T>*> in;
            in.reserve(n.inputs.size());
            for (int j : n.inputs) in.push_back(&nodes_[j].value);
            n.value = n.op->forward(in);
            n.has_value = true;
        }
    }

    void forward() {
        if (nodes_.empty()) return;
        // evaluate everything reachable from the last nodes
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
            Node& n = nodes_[i];
            if (!n.op) {
                if (n.is_input && !n.has_value)
                    throw StateError("forward: input '" + n.name + "' is unbound");
                continue;
            }
            std::vector<const Tensor<T>*> in;
            in.reserve(n.inputs.size());
            for (int j : n.inputs) in.push_back(&nodes_[j].value);
            n.value = n.op->forward(in);
            n.has_value = true;
        }
    }

    /// Backpropagates from `target`. A null seed requires a scalar target and
    /// seeds with 1; otherwise the seed must match the target's shape.
    void backward(int target, const Tensor<T>* seed = nullptr) {
        Node& tn = nodes_.at(target);
        if (!tn.has_value) throw StateError("backward called before forward");
        if (!seed && tn.value.size() != 1)
            throw StateError("backward: target '" + tn.name + "' is not scalar");
        const std::vector<char> need = ancestors(target);
        for (int i = 0; i <= target; ++i) {
            if (!need[i]) continue;
            Node& n = nodes_[i];
            if (n.requires_grad || n.is_param) {
                n.grad = Tensor<T>(n.value.shape(), T(0));
            }
        }
        if (seed) {
            if (seed->shape() != tn.value.shape())
                throw ShapeError("backward: seed shape mismatch");
            tn.grad = *seed;
        } else {
            tn.grad = Tensor<T>(tn.value.shape(), T(1));
        }
        for (int i = target; i >= 0; --i) {
            if (!need[i]) continue;
            Node& n = nodes_[i];
            if (!n.op || !n.requires_grad) continue;
            std::vector<const Tensor<T>*> in;
            std::vector<Tensor<T>*> in_grads;
            in.reserve(n.inputs.size());
            in_grads.reserve(n.inputs.size());
            for (int j : n.inputs) {
                Node& src = nodes_[j];
                in.push_back(&src.value);
                const bool wants = (src.is_param && !src.frozen) ||
                                   (!src.is_param && src.requires_grad);
                in_grads.push_back(wants ? &src.grad : nullptr);
            }
            n.op->backward(in, n.value, n.grad, in_grads);
        }
    }

    /// Central-difference check of every (or a sampled subset of) parameter
    /// element against the analytic gradient. Double precision only: the
    /// finite-difference quotient is meaningless at float resolution.
    std::map<std::string, double> grad_check(int loss, double epsilon,
                                             std::size_t max_per_param = 0,
                                             std::uint64_t sample_seed = 17) {
        if constexpr (!std::is_same_v<T, double>)
            throw PrecisionError("grad_check requires a double-precision graph");
        forward_to(loss);
        backward(loss);
        std::map<std::string, double> report;
        for (int pid : param_ids()) {
            Node& pn = nodes_[pid];
            if (pn.frozen) continue;  // frozen layers report no gradient entries
            const Tensor<T> analytic = pn.grad;
            std::vector<std::size_t> elems;
            if (max_per_param == 0 || pn.value.size() <= max_per_param) {
                elems.resize(pn.value.size());
                for (std::size_t k = 0; k < elems.size(); ++k) elems[k] = k;
            } else {
                auto rng = rng_stream(sample_seed, static_cast<std::uint64_t>(pid));
                std::uniform_int_distribution<std::size_t> pick(0, pn.value.size() - 1);
                for (std::size_t k = 0; k < max_per_param; ++k) elems.push_back(pick(rng));
            }
            double worst = 0;
            for (std::size_t k : elems) {
                const T keep = pn.value[k];
                pn.value[k] = keep + static_cast<T>(epsilon);
                forward_to(loss);
                const double lp = static_cast<double>(nodes_[loss].value[0]);
                pn.value[k] = keep - static_cast<T>(epsilon);
                forward_to(loss);
                const double lm = static_cast<double>(nodes_[loss].value[0]);
                pn.value[k] = keep;
                const double numeric = (lp - lm) / (2.0 * epsilon);
                const double a = static_cast<double>(analytic[k]);
                const double rel =
                    std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
                worst = std::max(worst, rel);
            }
            report[pn.name] = worst;
        }
        forward_to(loss);  // restore intact values everywhere
        return report;
    }

    /// name -> tensor view of parameters plus op state (running stats).
    void visit_tensors(const std::function<void(const std::string&, Tensor<T>*)>& fn) {
        for (auto& n : nodes_) {
            if (n.is_param) fn(n.name, &n.value);
            if (n.op) {
                auto& node_ref = n;
                n.op->visit_state([&](const std::string& suffix, Tensor<T>* t) {
                    fn(node_ref.name + "." + suffix, t);
                });
            }
        }
    }

private:
    int push(Node n) {
        const int id = static_cast<int>(nodes_.size());
        if (!n.name.empty()) {
            if (by_name_.count(n.name))
                throw ArgumentError("duplicate node name '" + n.name + "'");
            by_name_[n.name] = id;
        }
        nodes_.push_back(std::move(n));
        return id;
    }

    std::vector<char> ancestors(int target) const {
        std::vector<char> need(nodes_.size(), 0);
        std::vector<int> stack{target};
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            if (need[i]) continue;
            need[i] = 1;
            for (int j : nodes_[i].inputs) stack.push_back(j);
        }
        return need;
    }

    std::vector<Node> nodes_;
    std::map<std::string, int> by_name_;
    bool training_ = true;
};

// ---------------------------------------------------------------------------
// op node implementations

template <typename T>
struct IdentityOp final : OpNode<T> {
    const char* tag() const override { return "identity"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override { return *in[0]; }
    void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>& dout,
                  const std::vector<Tensor<T>*>& g) override {
        if (!g[0]) return;
        for (std::size_t i = 0; i < dout.size(); ++i) (*g[0])[i] += dout[i];
    }
};

template <typename T>
struct AddOp final : OpNode<T> {
    const char* tag() const override { return "add"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        if (!in[0]->same_shape(*in[1])) throw ShapeError("add: shape mismatch");
        Tensor<T> out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*in[1])[i];
        return out;
    }
    void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>& dout,
                  const std::vector<Tensor<T>*>& g) override {
        for (int s = 0; s < 2; ++s)
            if (g[s])
                for (std::size_t i = 0; i < dout.size(); ++i) (*g[s])[i] += dout[i];
    }
};

template <typename T>
struct SumOp final : OpNode<T> {
    const char* tag() const override { return "sum"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        T acc = T(0);
        for (std::size_t i = 0; i < in[0]->size(); ++i) acc += (*in[0])[i];
        return Tensor<T>({1}, acc);
    }
    void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&,
                  const Tensor<T>& dout, const std::vector<Tensor<T>*>& g) override {
        if (!g[0]) return;
        for (std::size_t i = 0; i < in[0]->size(); ++i) (*g[0])[i] += dout[0];
    }
};

template <typename T>
struct SquareOp final : OpNode<T> {
    const char* tag() const override { return "square"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        Tensor<T> out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= out[i];
        return out;
    }
    void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&,
                  const Tensor<T>& dout, const std::vector<Tensor<T>*>& g) override {
        if (!g[0]) return;
        for (std::size_t i = 0; i < dout.size(); ++i) (*g[0])[i] += T(2) * (*in[0])[i] * dout[i];
    }
};

template <typename T>
struct ReluOp final : OpNode<T> {
    const char* tag() const override { return "relu"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        return relu_forward(*in[0]);
    }
    void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&,
                  const Tensor<T>& dout, const std::vector<Tensor<T>*>& g) override {
        if (g[0]) relu_backward(*in[0], dout, g[0]);
    }
};

template <typename T>
struct Conv2dOp final : OpNode<T> {
    ConvConfig cfg;
    explicit Conv2dOp(ConvConfig c) : cfg(c) {}
    const char* tag() const override { return "conv2d"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        return conv2d_forward(*in[0], cfg, *in[1], *in[2]);
    }
    void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&,
                  const Tensor<T>& dout, const std::vector<Tensor<T>*>& g) override {
        conv2d_backward(*in[0], cfg, *in[1], dout, g[0], g[1], g[2]);
    }
};

template <typename T>
struct MaxPoolOp final : OpNode<T> {
    std::size_t k, stride;
    std::vector<std::size_t> argmax;
    Shape in_shape;
    MaxPoolOp(std::size_t k_, std::size_t s_) : k(k_), stride(s_) {}
    const char* tag() const override { return "maxpool"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        in_shape = in[0]->shape();
        return maxpool_forward(*in[0], k, stride, &argmax);
    }
    void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>& dout,
                  const std::vector<Tensor<T>*>& g) override {
        if (g[0]) maxpool_backward(in_shape, argmax, dout, g[0]);
    }
};

template <typename T>
struct BilinearUpsampleOp final : OpNode<T> {
    std::size_t factor;
    Shape in_shape;
    explicit BilinearUpsampleOp(std::size_t f) : factor(f) {}
    const char* tag() const override { return "upsample"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        in_shape = in[0]->shape();
        return bilinear_upsample_forward(*in[0], factor);
    }
    void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>& dout,
                  const std::vector<Tensor<T>*>& g) override {
        if (g[0]) bilinear_upsample_backward(in_shape, factor, dout, g[0]);
    }
};

template <typename T>
struct SoftmaxOp final : OpNode<T> {
    const char* tag() const override { return "softmax"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        return softmax_pixelwise(*in[0]);
    }
    void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>& out,
                  const Tensor<T>& dout, const std::vector<Tensor<T>*>& g) override {
        if (g[0]) softmax_pixelwise_backward(out, dout, g[0]);
    }
};

template <typename T>
struct CrossEntropyOp final : OpNode<T> {
    Tensor<int> labels;
    int ignore = kIgnoreLabel;
    const char* tag() const override { return "cross_entropy"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        return Tensor<T>({1}, cross_entropy_loss(*in[0], labels, ignore));
    }
    void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&,
                  const Tensor<T>& dout, const std::vector<Tensor<T>*>& g) override {
        if (g[0]) cross_entropy_backward(*in[0], labels, ignore, dout[0], g[0]);
    }
};

template <typename T>
struct SoftmaxXentOp final : OpNode<T> {
    Tensor<int> labels;
    int ignore = kIgnoreLabel;
    Tensor<T> probs;
    const char* tag() const override { return "softmax_xent"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        return Tensor<T>({1}, softmax_xent_forward(*in[0], labels, ignore, &probs));
    }
    void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>& dout,
                  const std::vector<Tensor<T>*>& g) override {
        if (g[0]) softmax_xent_backward(probs, labels, ignore, dout[0], g[0]);
    }
};

/// Wraps a [C,H,W] map as [1,C,H,W], applies batch normalization, unwraps.
/// Running statistics live on the op; `auto_update_running` is cleared by the
/// data-parallel trainer, which averages per-sample batch statistics in slot
/// order instead so traces stay worker-count independent.
template <typename T>
struct BatchNormOp final : OpNode<T> {
    NormConfig cfg;
    Tensor<T> running_mean, running_var;
    BatchNormCache<T> cache;
    bool training = true;
    bool auto_update_running = true;
    explicit BatchNormOp(NormConfig c, std::size_t channels)
        : cfg(c), running_mean({channels}, T(0)), running_var({channels}, T(1)) {}
    const char* tag() const override { return "batch_norm"; }
    void set_training(bool t) override { training = t; }
    void visit_state(const std::function<void(const std::string&, Tensor<T>*)>& fn) override {
        fn("running_mean", &running_mean);
        fn("running_var", &running_var);
    }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        const Tensor<T>& x = *in[0];
        if (x.rank() != 3) throw ShapeError("batch_norm node expects [C,H,W]");
        Tensor<T> x4 = x.reshaped({1, x.extent(0), x.extent(1), x.extent(2)});
        Tensor<T> mean_keep = running_mean, var_keep = running_var;
        Tensor<T> y = batch_norm_forward(x4, cfg, *in[1], *in[2], &running_mean, &running_var,
                                         training, &cache);
        if (training && !auto_update_running) {
            running_mean = std::move(mean_keep);
            running_var = std::move(var_keep);
        }
        return y.reshaped(x.shape());
    }
    void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&,
                  const Tensor<T>& dout, const std::vector<Tensor<T>*>& g) override {
        const Tensor<T>& x = *in[0];
        Tensor<T> x4 = x.reshaped({1, x.extent(0), x.extent(1), x.extent(2)});
        Tensor<T> dy4 = dout.reshaped(x4.shape());
        Tensor<T> dx4(x4.shape(), T(0));
        batch_norm_backward(x4, *in[1], cache, dy4, training, g[0] ? &dx4 : nullptr, g[1], g[2]);
        if (g[0]) {
            for (std::size_t i = 0; i < dx4.size(); ++i) (*g[0])[i] += dx4[i];
        }
    }
};

template <typename T>
struct L2NormScaleOp final : OpNode<T> {
    T lambda;
    T norm = T(0);
    std::size_t degenerate_count = 0;
    explicit L2NormScaleOp(T l) : lambda(l) {}
    const char* tag() const override { return "l2_normalize_scale"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        bool degenerate = false;
        Tensor<T> y = l2_normalize_scale_forward(*in[0], lambda, &norm, &degenerate);
        if (degenerate) ++degenerate_count;
        return y;
    }
    void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&,
                  const Tensor<T>& dout, const std::vector<Tensor<T>*>& g) override {
        if (g[0]) l2_normalize_scale_backward(*in[0], lambda, norm, dout, g[0]);
    }
};

template <typename T>
struct ConcatChannelsOp final : OpNode<T> {
    std::vector<std::size_t> widths;
    const char* tag() const override { return "concat_channels"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        widths.clear();
        for (const auto* t : in) widths.push_back(t->extent(0));
        return concat_channels(in);
    }
    void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>& dout,
                  const std::vector<Tensor<T>*>& g) override {
        const std::size_t hw = dout.extent(1) * dout.extent(2);
        std::size_t coff = 0;
        for (std::size_t s = 0; s < g.size(); ++s) {
            if (g[s]) {
                const T* src = dout.data() + coff * hw;
                T* dst = g[s]->data();
                for (std::size_t i = 0; i < widths[s] * hw; ++i) dst[i] += src[i];
            }
            coff += widths[s];
        }
    }
};

template <typename T>
struct PermuteOp final : OpNode<T> {
    std::vector<std::size_t> order;
    explicit PermuteOp(std::vector<std::size_t> o) : order(std::move(o)) {}
    const char* tag() const override { return "permute"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        return permute(*in[0], order);
    }
    void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>& dout,
                  const std::vector<Tensor<T>*>& g) override {
        if (!g[0]) return;
        Tensor<T> dx = permute(dout, inverse_permutation(order));
        for (std::size_t i = 0; i < dx.size(); ++i) (*g[0])[i] += dx[i];
    }
};

template <typename T>
struct PatchGridOp final : OpNode<T> {
    std::size_t s, t;
    Shape in_shape;
    PatchGridOp(std::size_t s_, std::size_t t_) : s(s_), t(t_) {}
    const char* tag() const override { return "patch_grid"; }
    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        in_shape = in[0]->shape();
        return patch_grid_forward(*in[0], s, t);
    }
    void backward(const std::vector<const Tensor<T>*>&, const Tensor<T>&, const Tensor<T>& dout,
                  const std::vector<Tensor<T>*>& g) override {
        if (g[0]) patch_grid_backward(in_shape, s, t, dout, g[0]);
    }
};

/// Bidirectional sweep node. Inputs: grid, then forward-direction gate
/// tensors (all W, then all U, then all b), then the backward direction in
/// the same order.
template <typename T>
struct RenetSweepOp final : OpNode<T> {
    SweepDirection dir;
    CellKind cell;
    SweepExec exec;
    SweepCache<T> cache;
    DirParams<T> fwd, bwd;

    RenetSweepOp(SweepDirection d, CellKind c) : dir(d), cell(c) {}
    const char* tag() const override { return "renet_sweep"; }

    static std::size_t gate_count(CellKind c) { return c == CellKind::kLstm ? 4 : 1; }
    std::size_t params_per_dir() const { return 3 * gate_count(cell); }

    Tensor<T> forward(const std::vector<const Tensor<T>*>& in) override {
        const std::size_t g = gate_count(cell);
        if (in.size() != 1 + 2 * params_per_dir())
            throw ShapeError("renet_sweep: wrong number of parameter inputs");
        auto collect = [&](std::size_t base) {
            DirParams<T> p;
            for (std::size_t i = 0; i < g; ++i) p.w.push_back(*in[base + i]);
            for (std::size_t i = 0; i < g; ++i) p.u.push_back(*in[base + g + i]);
            for (std::size_t i = 0; i < g; ++i) p.b.push_back(*in[base + 2 * g + i]);
            return p;
        };
        fwd = collect(1);
        bwd = collect(1 + params_per_dir());
        return renet_sweep_forward(*in[0], dir, fwd, bwd, cell, exec, &cache);
    }

    void backward(const std::vector<const Tensor<T>*>& in, const Tensor<T>&,
                  const Tensor<T>& dout, const std::vector<Tensor<T>*>& g_in) override {
        const std::size_t g = gate_count(cell);
        DirParams<T> dfwd = DirParams<T>::zeros(cell, fwd.hidden(), fwd.input());
        DirParams<T> dbwd = DirParams<T>::zeros(cell, bwd.hidden(), bwd.input());
        Tensor<T> dgrid(in[0]->shape(), T(0));
        renet_sweep_backward(cache, dir, fwd, bwd, cell, dout, g_in[0] ? &dgrid : nullptr, &dfwd,
                             &dbwd);
        if (g_in[0])
            for (std::size_t i = 0; i < dgrid.size(); ++i) (*g_in[0])[i] += dgrid[i];
        auto scatter = [&](const DirParams<T>& dp, std::size_t base) {
            for (std::size_t i = 0; i < g; ++i) {
                if (g_in[base + i])
                    for (std::size_t k = 0; k < dp.w[i].size(); ++k)
                        (*g_in[base + i])[k] += dp.w[i][k];
                if (g_in[base + g + i])
                    for (std::size_t k = 0; k < dp.u[i].size(); ++k)
                        (*g_in[base + g + i])[k] += dp.u[i][k];
                if (g_in[base + 2 * g + i])
                    for (std::size_t k = 0; k < dp.b[i].size(); ++k)
                        (*g_in[base + 2 * g + i])[k] += dp.b[i][k];
            }
        };
        scatter(dfwd, 1);
        scatter(dbwd, 1 + params_per_dir());
    }
};

}  // namespace renseg
