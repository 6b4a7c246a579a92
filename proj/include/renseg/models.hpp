// Declarative network descriptions and their graph compiler.
//
// A NetworkSpec is an ordered list of layer descriptors (conv / pool / renet
// group / concat / norm / upsample / softmax) with explicit input wiring.
// Builders produce the three architectures: the stacked-group net, the
// dilated baseline FCN, and the hybrid net that inserts one recurrent group
// before the classifier. compile() lowers a spec onto an autograd Graph.

#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "renseg/autograd.hpp"

namespace renseg {

enum class LayerType { kConv, kPool, kRenetGroup, kUpsample, kConcat, kNorm, kSoftmax };

struct LayerDesc {
    std::string name;
    LayerType type = LayerType::kConv;
    std::vector<std::string> inputs;  // empty: previous layer

    // conv
    std::size_t kernel = 3, stride = 1, dilation = 1, channels = 0;
    bool relu = false;
    // renet group
    std::size_t patch_s = 1, patch_t = 1, hidden1 = 0, hidden2 = 0;
    CellKind cell = CellKind::kLstm;
    // upsample
    std::size_t factor = 1;
    // norm
    NormMode norm_mode = NormMode::kNone;
    double lambda = 1000.0;
};

struct NetworkSpec {
    std::string arch;  // nrenet | fcn | hrenet | custom
    std::vector<LayerDesc> layers;
    std::size_t num_labels = 0;
    std::size_t input_channels = 3;
    std::size_t h_min = 48, w_min = 48;
    bool mlfb = false;
    NormMode norm = NormMode::kNone;
    std::vector<std::string> frozen;  // layer-name prefixes skipped in backprop
};

// ---------------------------------------------------------------------------
// builders

namespace detail {
inline std::size_t scaled(std::size_t base, double scale) {
    const auto s = static_cast<std::size_t>(std::llround(static_cast<double>(base) * scale));
    return s < 1 ? 1 : s;
}
}  // namespace detail

/// Stacked recurrent groups with increasing widths: the first group sweeps
/// 2x2 patches, later groups scan single pixels; a 1x1 conv aligns channels
/// with the label count and bilinear upsampling restores the resolution.
inline NetworkSpec build_nrenet(double scale, std::size_t num_labels) {
    if (scale <= 0) throw ConfigError("build_nrenet: scale must be positive");
    NetworkSpec spec;
    spec.arch = "nrenet";
    spec.num_labels = num_labels;
    spec.h_min = spec.w_min = 48;
    const std::size_t widths[3] = {detail::scaled(16, scale), detail::scaled(32, scale),
                                   detail::scaled(64, scale)};
    if (!(widths[0] < widths[1] && widths[1] < widths[2]))
        throw ConfigError("build_nrenet: scale too small for strictly increasing widths");
    for (int g = 0; g < 3; ++g) {
        LayerDesc d;
        d.name = "renet" + std::to_string(g + 1);
        d.type = LayerType::kRenetGroup;
        d.patch_s = d.patch_t = (g == 0) ? 2 : 1;
        d.hidden1 = d.hidden2 = widths[g];
        spec.layers.push_back(d);
    }
    LayerDesc cls;
    cls.name = "conv_cls";
    cls.type = LayerType::kConv;
    cls.kernel = 1;
    cls.channels = num_labels;
    spec.layers.push_back(cls);
    LayerDesc up;
    up.name = "upsample";
    up.type = LayerType::kUpsample;
    up.factor = 2;
    spec.layers.push_back(up);
    LayerDesc sm;
    sm.name = "softmax";
    sm.type = LayerType::kSoftmax;
    spec.layers.push_back(sm);
    return spec;
}

/// Dilated baseline FCN. Pool4/pool5 run at stride 1 with 3x3 windows so the
/// overall downsampling factor is 8 instead of 32; conv5 dilates by 2 and
/// conv6 by 12 to keep growing the receptive field at constant resolution.
inline NetworkSpec build_baseline_fcn(double scale, std::size_t num_labels) {
    if (scale <= 0) throw ConfigError("build_baseline_fcn: scale must be positive");
    NetworkSpec spec;
    spec.arch = "fcn";
    spec.num_labels = num_labels;
    spec.h_min = spec.w_min = 48;
    struct Block {
        const char* name;
        int convs;
        std::size_t channels, dilation;
        std::size_t pool_k, pool_stride;  // 0 = no pool
    };
    const Block blocks[] = {
        {"conv1", 2, 64, 1, 2, 2},  {"conv2", 2, 128, 1, 2, 2}, {"conv3", 3, 256, 1, 2, 2},
        {"conv4", 3, 512, 1, 3, 1}, {"conv5", 3, 512, 2, 3, 1},
    };
    for (int b = 0; b < 5; ++b) {
        const Block& blk = blocks[b];
        for (int c = 1; c <= blk.convs; ++c) {
            LayerDesc d;
            d.name = std::string(blk.name) + "_" + std::to_string(c);
            d.type = LayerType::kConv;
            d.kernel = 3;
            d.dilation = blk.dilation;
            d.channels = detail::scaled(blk.channels, scale);
            d.relu = true;
            spec.layers.push_back(d);
        }
        LayerDesc p;
        p.name = "pool" + std::to_string(b + 1);
        p.type = LayerType::kPool;
        p.kernel = blk.pool_k;
        p.stride = blk.pool_stride;
        spec.layers.push_back(p);
    }
    LayerDesc c6;
    c6.name = "conv6";
    c6.type = LayerType::kConv;
    c6.kernel = 3;
    c6.dilation = 12;
    c6.channels = detail::scaled(1024, scale);
    c6.relu = true;
    spec.layers.push_back(c6);
    LayerDesc c7;
    c7.name = "conv7";
    c7.type = LayerType::kConv;
    c7.kernel = 3;
    c7.channels = detail::scaled(1024, scale);
    c7.relu = true;
    spec.layers.push_back(c7);
    LayerDesc c8;
    c8.name = "conv8";
    c8.type = LayerType::kConv;
    c8.kernel = 1;
    c8.channels = num_labels;
    spec.layers.push_back(c8);
    LayerDesc up;
    up.name = "upsample";
    up.type = LayerType::kUpsample;
    up.factor = 8;
    spec.layers.push_back(up);
    LayerDesc sm;
    sm.name = "softmax";
    sm.type = LayerType::kSoftmax;
    spec.layers.push_back(sm);
    return spec;
}

/// Hybrid net: the baseline FCN with one recurrent layer group between conv7
/// and conv8. With mlfb the group reads the normalized concatenation of
/// pool4, pool5 and conv7 (all at the same resolution in the stride-reduced
/// FCN).
inline NetworkSpec build_hrenet(double scale, std::size_t num_labels, bool mlfb, NormMode norm,
                                std::optional<double> lambda = std::nullopt,
                                CellKind cell = CellKind::kLstm) {
    if (norm == NormMode::kL2 && !lambda.has_value())
        throw ConfigError("build_hrenet: l2 normalization requires lambda");
    NetworkSpec spec = build_baseline_fcn(scale, num_labels);
    spec.arch = "hrenet";
    spec.mlfb = mlfb;
    spec.norm = norm;
    // drop conv8 / upsample / softmax, insert the group, re-append the tail
    spec.layers.resize(spec.layers.size() - 3);

    std::vector<std::string> sources =
        mlfb ? std::vector<std::string>{"pool4", "pool5", "conv7"}
             : std::vector<std::string>{"conv7"};
    std::vector<std::string> renet_inputs;
    if (norm != NormMode::kNone) {
        for (const auto& src : sources) {
            LayerDesc n;
            n.name = "norm_" + src;
            n.type = LayerType::kNorm;
            n.norm_mode = norm;
            if (lambda) n.lambda = *lambda;
            n.inputs = {src};
            spec.layers.push_back(n);
            renet_inputs.push_back(n.name);
        }
    } else {
        renet_inputs = sources;
    }
    if (renet_inputs.size() > 1) {
        LayerDesc cat;
        cat.name = "concat";
        cat.type = LayerType::kConcat;
        cat.inputs = renet_inputs;
        spec.layers.push_back(cat);
        renet_inputs = {"concat"};
    }
    LayerDesc g;
    g.name = "renet1";
    g.type = LayerType::kRenetGroup;
    g.patch_s = g.patch_t = 1;
    g.hidden1 = g.hidden2 = detail::scaled(120, scale);
    g.cell = cell;
    g.inputs = renet_inputs;
    spec.layers.push_back(g);
    LayerDesc c8;
    c8.name = "conv8";
    c8.type = LayerType::kConv;
    c8.kernel = 1;
    c8.channels = num_labels;
    spec.layers.push_back(c8);
    LayerDesc up;
    up.name = "upsample";
    up.type = LayerType::kUpsample;
    up.factor = 8;
    spec.layers.push_back(up);
    LayerDesc sm;
    sm.name = "softmax";
    sm.type = LayerType::kSoftmax;
    spec.layers.push_back(sm);
    return spec;
}

// ---------------------------------------------------------------------------
// symbolic shape / receptive-field propagation

struct LayerShape {
    std::size_t channels, h, w;
};

/// Propagates (C,H,W) through the spec with the same arithmetic the ops use.
inline std::map<std::string, LayerShape> propagate_shapes(const NetworkSpec& spec, std::size_t h,
                                                          std::size_t w) {
    std::map<std::string, LayerShape> out;
    LayerShape prev{spec.input_channels, h, w};
    out["image"] = prev;
    std::string prev_name = "image";
    auto get = [&](const LayerDesc& d) -> std::vector<LayerShape> {
        std::vector<LayerShape> in;
        if (d.inputs.empty()) {
            in.push_back(out.at(prev_name));
        } else {
            for (const auto& n : d.inputs) in.push_back(out.at(n));
        }
        return in;
    };
    for (const auto& d : spec.layers) {
        const auto in = get(d);
        LayerShape s = in[0];
        switch (d.type) {
            case LayerType::kConv: {
                ConvConfig cfg{d.kernel, d.stride, d.dilation, in[0].channels, d.channels};
                const std::size_t pad = cfg.pad_amount();
                s.channels = d.channels;
                s.h = detail::conv_out_extent(in[0].h, d.kernel, d.stride, d.dilation, pad);
                s.w = detail::conv_out_extent(in[0].w, d.kernel, d.stride, d.dilation, pad);
                break;
            }
            case LayerType::kPool:
                s.h = (in[0].h + d.stride - 1) / d.stride;
                s.w = (in[0].w + d.stride - 1) / d.stride;
                break;
            case LayerType::kRenetGroup:
                s.channels = 2 * d.hidden2;
                s.h = (in[0].h + d.patch_s - 1) / d.patch_s;
                s.w = (in[0].w + d.patch_t - 1) / d.patch_t;
                break;
            case LayerType::kUpsample:
                s.h = in[0].h * d.factor;
                s.w = in[0].w * d.factor;
                break;
            case LayerType::kConcat: {
                std::size_t c = 0;
                for (const auto& i : in) {
                    if (i.h != in[0].h || i.w != in[0].w)
                        throw ShapeError("concat: spatial mismatch in spec");
                    c += i.channels;
                }
                s.channels = c;
                break;
            }
            case LayerType::kNorm:
            case LayerType::kSoftmax:
                break;
        }
        out[d.name] = s;
        prev_name = d.name;
    }
    return out;
}

struct ReceptiveField {
    std::size_t extent = 1;  // window size in input pixels (per axis)
    std::size_t jump = 1;    // input stride of adjacent outputs
    bool full_image = false;
};

/// Analytic receptive field at each layer output. A recurrent group makes it
/// full-image from that point on.
inline std::map<std::string, ReceptiveField> receptive_fields(const NetworkSpec& spec) {
    std::map<std::string, ReceptiveField> out;
    out["image"] = {};
    std::string prev_name = "image";
    for (const auto& d : spec.layers) {
        std::vector<ReceptiveField> in;
        if (d.inputs.empty()) {
            in.push_back(out.at(prev_name));
        } else {
            for (const auto& n : d.inputs) in.push_back(out.at(n));
        }
        ReceptiveField rf = in[0];
        for (const auto& i : in) {
            rf.extent = std::max(rf.extent, i.extent);
            rf.full_image = rf.full_image || i.full_image;
        }
        switch (d.type) {
            case LayerType::kConv:
                rf.extent += (d.kernel - 1) * d.dilation * rf.jump;
                rf.jump *= d.stride;
                break;
            case LayerType::kPool:
                rf.extent += (d.kernel - 1) * rf.jump;
                rf.jump *= d.stride;
                break;
            case LayerType::kRenetGroup:
                rf.full_image = true;
                rf.jump *= d.patch_s;
                break;
            case LayerType::kUpsample:
                // one output pixel interpolates 2 input samples
                rf.extent += rf.jump;
                rf.jump = std::max<std::size_t>(1, rf.jump / d.factor);
                break;
            case LayerType::kConcat:
            case LayerType::kNorm:
            case LayerType::kSoftmax:
                break;
        }
        out[d.name] = rf;
        prev_name = d.name;
    }
    return out;
}

/// Overall spatial reduction between the input and the logits.
inline std::size_t downsampling_factor(const NetworkSpec& spec) {
    std::size_t f = 1;
    for (const auto& d : spec.layers) {
        if (d.type == LayerType::kPool || d.type == LayerType::kConv) f *= d.stride;
        if (d.type == LayerType::kRenetGroup) f *= d.patch_s;
    }
    return f;
}

// ---------------------------------------------------------------------------
// compilation onto a Graph

enum class ParamKind {
    kConvWeight,
    kConvBias,
    kRenetLstm,
    kIrnnInput,
    kIrnnRecurrent,
    kIrnnBias,
    kNormGamma,
    kNormBeta
};

enum class MapLayout { kChw, kHwf };

template <typename T>
struct Model {
    NetworkSpec spec;
    Graph<T> graph;
    int input = -1;
    int logits = -1;  // conv output feeding the softmax
    int probs = -1;
    int loss = -1;  // fused softmax + cross entropy over the logits
    std::map<std::string, std::pair<int, MapLayout>> layer_out;
    std::map<int, ParamKind> param_kind;

    SoftmaxXentOp<T>* loss_op = nullptr;

    void set_labels(Tensor<int> labels, int ignore = kIgnoreLabel) {
        loss_op->labels = std::move(labels);
        loss_op->ignore = ignore;
    }
};

namespace detail {

inline bool name_frozen(const std::string& layer, const std::vector<std::string>& frozen) {
    for (const auto& f : frozen)
        if (layer.rfind(f, 0) == 0) return true;
    return false;
}

template <typename T>
int add_sweep(Model<T>& m, const std::string& name, int grid_node, std::size_t in_width,
              std::size_t hidden, SweepDirection dir, CellKind cell, bool frozen) {
    auto op = std::make_unique<RenetSweepOp<T>>(dir, cell);
    std::vector<int> inputs{grid_node};
    const std::size_t gates = RenetSweepOp<T>::gate_count(cell);
    for (const char* dtag : {"F", "B"}) {
        for (const char* ptag : {"W", "U", "b"}) {
            for (std::size_t g = 0; g < gates; ++g) {
                const std::string gate = cell == CellKind::kLstm ? kLstmGateNames[g] : "r";
                const std::string pname =
                    name + "." + dtag + "." + gate + "." + ptag;
                Shape shape;
                ParamKind kind;
                if (ptag[0] == 'W') {
                    shape = {hidden, in_width};
                    kind = cell == CellKind::kLstm ? ParamKind::kRenetLstm : ParamKind::kIrnnInput;
                } else if (ptag[0] == 'U') {
                    shape = {hidden, hidden};
                    kind = cell == CellKind::kLstm ? ParamKind::kRenetLstm
                                                   : ParamKind::kIrnnRecurrent;
                } else {
                    shape = {hidden};
                    kind = cell == CellKind::kLstm ? ParamKind::kRenetLstm : ParamKind::kIrnnBias;
                }
                const int pid = m.graph.add_param(pname, Tensor<T>(shape, T(0)), frozen);
                m.param_kind[pid] = kind;
                inputs.push_back(pid);
            }
        }
    }
    return m.graph.add_op(name, std::move(op), std::move(inputs));
}

}  // namespace detail

template <typename T>
Model<T> compile(const NetworkSpec& spec) {
    Model<T> m;
    m.spec = spec;
    m.input = m.graph.add_input("image", /*requires_grad=*/false);
    std::map<std::string, std::pair<int, std::size_t>> feed;  // name -> (node, channels)
    feed["image"] = {m.input, spec.input_channels};
    std::string prev = "image";
    for (const auto& d : spec.layers) {
        std::vector<std::string> srcs = d.inputs.empty() ? std::vector<std::string>{prev}
                                                         : d.inputs;
        std::vector<int> in_nodes;
        std::vector<std::size_t> in_ch;
        for (const auto& s : srcs) {
            auto it = feed.find(s);
            if (it == feed.end()) throw ConfigError("compile: unknown layer input '" + s + "'");
            in_nodes.push_back(it->second.first);
            in_ch.push_back(it->second.second);
        }
        const bool frozen = detail::name_frozen(d.name, spec.frozen);
        int out_node = -1;
        std::size_t out_ch = in_ch[0];
        switch (d.type) {
            case LayerType::kConv: {
                ConvConfig cfg{d.kernel, d.stride, d.dilation, in_ch[0], d.channels};
                const int wid = m.graph.add_param(
                    d.name + ".W", Tensor<T>({d.channels, in_ch[0], d.kernel, d.kernel}, T(0)),
                    frozen);
                const int bid =
                    m.graph.add_param(d.name + ".b", Tensor<T>({d.channels}, T(0)), frozen);
                m.param_kind[wid] = ParamKind::kConvWeight;
                m.param_kind[bid] = ParamKind::kConvBias;
                const std::string conv_name = d.relu ? d.name + ".pre" : d.name;
                int cid = m.graph.add_op(conv_name, std::make_unique<Conv2dOp<T>>(cfg),
                                         {in_nodes[0], wid, bid});
                if (d.relu)
                    cid = m.graph.add_op(d.name, std::make_unique<ReluOp<T>>(),
                                         std::vector<int>{cid});
                out_node = cid;
                out_ch = d.channels;
                break;
            }
            case LayerType::kPool:
                out_node = m.graph.add_op(
                    d.name, std::make_unique<MaxPoolOp<T>>(d.kernel, d.stride), {in_nodes[0]});
                break;
            case LayerType::kRenetGroup: {
                const int grid = m.graph.add_op(
                    d.name + ".grid", std::make_unique<PatchGridOp<T>>(d.patch_s, d.patch_t),
                    {in_nodes[0]});
                const std::size_t p1 = in_ch[0] * d.patch_s * d.patch_t;
                const int v = detail::add_sweep(m, d.name + ".v", grid, p1, d.hidden1,
                                                SweepDirection::kVertical, d.cell, frozen);
                const int h = detail::add_sweep(m, d.name + ".h", v, 2 * d.hidden1, d.hidden2,
                                                SweepDirection::kHorizontal, d.cell, frozen);
                out_node = m.graph.add_op(
                    d.name, std::make_unique<PermuteOp<T>>(std::vector<std::size_t>{2, 0, 1}),
                    {h});
                out_ch = 2 * d.hidden2;
                m.layer_out[d.name + ".v"] = {v, MapLayout::kHwf};
                m.layer_out[d.name + ".h"] = {h, MapLayout::kHwf};
                break;
            }
            case LayerType::kUpsample:
                out_node = m.graph.add_op(
                    d.name, std::make_unique<BilinearUpsampleOp<T>>(d.factor), {in_nodes[0]});
                break;
            case LayerType::kConcat:
                out_node = m.graph.add_op(d.name, std::make_unique<ConcatChannelsOp<T>>(),
                                          in_nodes);
                out_ch = 0;
                for (std::size_t c : in_ch) out_ch += c;
                break;
            case LayerType::kNorm: {
                if (d.norm_mode == NormMode::kBatch) {
                    NormConfig cfg;
                    cfg.mode = NormMode::kBatch;
                    const int gid = m.graph.add_param(d.name + ".gamma",
                                                      Tensor<T>({in_ch[0]}, T(1)), frozen);
                    const int bid = m.graph.add_param(d.name + ".beta",
                                                      Tensor<T>({in_ch[0]}, T(0)), frozen);
                    m.param_kind[gid] = ParamKind::kNormGamma;
                    m.param_kind[bid] = ParamKind::kNormBeta;
                    out_node = m.graph.add_op(d.name,
                                              std::make_unique<BatchNormOp<T>>(cfg, in_ch[0]),
                                              {in_nodes[0], gid, bid});
                } else if (d.norm_mode == NormMode::kL2) {
                    out_node = m.graph.add_op(
                        d.name, std::make_unique<L2NormScaleOp<T>>(static_cast<T>(d.lambda)),
                        {in_nodes[0]});
                } else {
                    out_node = m.graph.add_op(d.name, std::make_unique<IdentityOp<T>>(),
                                              {in_nodes[0]});
                }
                break;
            }
            case LayerType::kSoftmax:
                m.logits = in_nodes[0];
                out_node = m.graph.add_op(d.name, std::make_unique<SoftmaxOp<T>>(),
                                          {in_nodes[0]});
                m.probs = out_node;
                break;
        }
        feed[d.name] = {out_node, out_ch};
        m.layer_out[d.name] = {out_node, MapLayout::kChw};
        prev = d.name;
    }
    if (m.probs < 0) throw ConfigError("compile: spec has no softmax layer");
    auto loss_op = std::make_unique<SoftmaxXentOp<T>>();
    m.loss_op = loss_op.get();
    m.loss = m.graph.add_op("loss", std::move(loss_op), {m.logits});
    return m;
}

// ---------------------------------------------------------------------------
// reflection padding + variable-size inference

/// Folds an out-of-range index back into [0, n) by mirroring without
/// repeating the border sample.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * static_cast<std::ptrdiff_t>(n) - 2;
    std::ptrdiff_t j = i % period;
    if (j < 0) j += period;
    if (j >= static_cast<std::ptrdiff_t>(n)) j = period - j;
    return static_cast<std::size_t>(j);
}

template <typename T>
Tensor<T> reflect_pad(const Tensor<T>& map, std::size_t top, std::size_t bottom,
                      std::size_t left, std::size_t right) {
    const std::size_t c_n = map.extent(0), h = map.extent(1), w = map.extent(2);
    Tensor<T> out({c_n, h + top + bottom, w + left + right}, T(0));
    for (std::size_t c = 0; c < c_n; ++c)
        for (std::size_t i = 0; i < h + top + bottom; ++i) {
            const std::size_t si = reflect_index(
                static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(top), h);
            for (std::size_t j = 0; j < w + left + right; ++j) {
                const std::size_t sj = reflect_index(
                    static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(left), w);
                out(c, i, j) = map(c, si, sj);
            }
        }
    return out;
}

template <typename T>
Tensor<T> crop_spatial(const Tensor<T>& map, std::size_t top, std::size_t left, std::size_t h,
                       std::size_t w) {
    Tensor<T> out({map.extent(0), h, w}, T(0));
    for (std::size_t c = 0; c < map.extent(0); ++c)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) out(c, i, j) = map(c, top + i, left + j);
    return out;
}

/// Runs the network on an image of any size: inputs smaller than the spec
/// minimum are reflection-padded, sizes are rounded up to the net's
/// downsampling factor, and the per-pixel distributions are cropped back to
/// the original extent.
template <typename T>
Tensor<T> forward_variable_size(Model<T>& m, const Tensor<T>& image) {
    if (image.rank() != 3 || image.extent(0) != m.spec.input_channels)
        throw ShapeError("forward_variable_size: expected [" +
                         std::to_string(m.spec.input_channels) + ",H,W] image");
    const std::size_t h = image.extent(1), w = image.extent(2);
    const std::size_t f = downsampling_factor(m.spec);
    auto round_up = [&](std::size_t v, std::size_t lo) {
        v = std::max(v, lo);
        return (v + f - 1) / f * f;
    };
    const std::size_t ph = round_up(h, m.spec.h_min), pw = round_up(w, m.spec.w_min);
    const std::size_t top = (ph - h) / 2, left = (pw - w) / 2;
    Tensor<T> padded = (ph == h && pw == w)
                           ? image
                           : reflect_pad(image, top, ph - h - top, left, pw - w - left);
    m.graph.set_training(false);
    m.graph.bind(m.input, std::move(padded));
    m.graph.forward_to(m.probs);
    const Tensor<T>& probs = m.graph.node(m.probs).value;
    if (probs.extent(1) == h && probs.extent(2) == w) return probs;
    return crop_spatial(probs, top, left, h, w);
}

// ---------------------------------------------------------------------------
// feature-map dumps (min-max normalized grayscale)

template <typename T>
std::vector<Tensor<unsigned char>> feature_map_images(Model<T>& m, const Tensor<T>& image,
                                                      const std::string& layer,
                                                      std::size_t count) {
    auto it = m.layer_out.find(layer);
    if (it == m.layer_out.end())
        throw ArgumentError("feature maps: unknown layer '" + layer + "'");
    forward_variable_size(m, image);  // populates every layer on the way
    m.graph.forward_to(it->second.first);
    const Tensor<T>& v = m.graph.node(it->second.first).value;
    const MapLayout layout = it->second.second;
    const std::size_t channels = layout == MapLayout::kChw ? v.extent(0) : v.extent(2);
    const std::size_t hh = layout == MapLayout::kChw ? v.extent(1) : v.extent(0);
    const std::size_t ww = layout == MapLayout::kChw ? v.extent(2) : v.extent(1);
    std::vector<Tensor<unsigned char>> out;
    for (std::size_t c = 0; c < std::min(count, channels); ++c) {
        T lo = std::numeric_limits<T>::max(), hi = std::numeric_limits<T>::lowest();
        auto at = [&](std::size_t i, std::size_t j) {
            return layout == MapLayout::kChw ? v(c, i, j) : v(i, j, c);
        };
        for (std::size_t i = 0; i < hh; ++i)
            for (std::size_t j = 0; j < ww; ++j) {
                lo = std::min(lo, at(i, j));
                hi = std::max(hi, at(i, j));
            }
        Tensor<unsigned char> img({hh, ww}, static_cast<unsigned char>(0));
        // degenerate (constant) channels render as uniform gray 0
        if (hi > lo) {
            for (std::size_t i = 0; i < hh; ++i)
                for (std::size_t j = 0; j < ww; ++j)
                    img(i, j) = static_cast<unsigned char>(
                        std::lround(255.0 * static_cast<double>(at(i, j) - lo) /
                                    static_cast<double>(hi - lo)));
        }
        out.push_back(std::move(img));
    }
    return out;
}

// ---------------------------------------------------------------------------
// network manifest (text, one row per layer)

inline const char* layer_type_name(LayerType t) {
    switch (t) {
        case LayerType::kConv: return "conv";
        case LayerType::kPool: return "pool";
        case LayerType::kRenetGroup: return "renet_group";
        case LayerType::kUpsample: return "upsample";
        case LayerType::kConcat: return "concat";
        case LayerType::kNorm: return "norm";
        case LayerType::kSoftmax: return "softmax";
    }
    return "?";
}

inline const char* norm_mode_name(NormMode m) {
    switch (m) {
        case NormMode::kNone: return "none";
        case NormMode::kBatch: return "batch";
        case NormMode::kL2: return "l2";
    }
    return "?";
}

inline NormMode parse_norm_mode(const std::string& s) {
    if (s == "none") return NormMode::kNone;
    if (s == "batch") return NormMode::kBatch;
    if (s == "l2") return NormMode::kL2;
    throw ConfigError("unknown norm mode '" + s + "'");
}

inline void save_network_manifest(std::ostream& os, const NetworkSpec& spec) {
    os << "renseg-net 1\n";
    os << "arch " << spec.arch << "\n";
    os << "labels " << spec.num_labels << "\n";
    os << "input_channels " << spec.input_channels << "\n";
    os << "min_input " << spec.h_min << " " << spec.w_min << "\n";
    os << "mlfb " << (spec.mlfb ? 1 : 0) << "\n";
    os << "norm " << norm_mode_name(spec.norm) << "\n";
    for (const auto& f : spec.frozen) os << "frozen " << f << "\n";
    for (const auto& d : spec.layers) {
        os << "layer " << d.name << " " << layer_type_name(d.type);
        switch (d.type) {
            case LayerType::kConv:
                os << " k=" << d.kernel << " s=" << d.stride << " d=" << d.dilation
                   << " channels=" << d.channels << " relu=" << (d.relu ? 1 : 0);
                break;
            case LayerType::kPool:
                os << " k=" << d.kernel << " s=" << d.stride;
                break;
            case LayerType::kRenetGroup:
                os << " patch=" << d.patch_s << "x" << d.patch_t << " d1=" << d.hidden1
                   << " d2=" << d.hidden2
                   << " cell=" << (d.cell == CellKind::kLstm ? "lstm" : "irnn");
                break;
            case LayerType::kUpsample:
                os << " factor=" << d.factor;
                break;
            case LayerType::kNorm:
                os << " mode=" << norm_mode_name(d.norm_mode) << " lambda=" << d.lambda;
                break;
            case LayerType::kConcat:
            case LayerType::kSoftmax:
                break;
        }
        if (!d.inputs.empty()) {
            os << " inputs=";
            for (std::size_t i = 0; i < d.inputs.size(); ++i)
                os << (i ? "," : "") << d.inputs[i];
        }
        os << "\n";
    }
}

inline NetworkSpec load_network_manifest(std::istream& is) {
    NetworkSpec spec;
    std::string line;
    if (!std::getline(is, line) || line.rfind("renseg-net", 0) != 0)
        throw IoError("bad network manifest header");
    auto kv = [](const std::string& tok) -> std::pair<std::string, std::string> {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw IoError("bad manifest token '" + tok + "'");
        return {tok.substr(0, eq), tok.substr(eq + 1)};
    };
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "arch") ls >> spec.arch;
        else if (key == "labels") ls >> spec.num_labels;
        else if (key == "input_channels") ls >> spec.input_channels;
        else if (key == "min_input") ls >> spec.h_min >> spec.w_min;
        else if (key == "mlfb") { int v; ls >> v; spec.mlfb = v != 0; }
        else if (key == "norm") { std::string v; ls >> v; spec.norm = parse_norm_mode(v); }
        else if (key == "frozen") { std::string v; ls >> v; spec.frozen.push_back(v); }
        else if (key == "layer") {
            LayerDesc d;
            std::string type;
            ls >> d.name >> type;
            std::string tok;
            while (ls >> tok) {
                auto [k, v] = kv(tok);
                if (k == "k") d.kernel = std::stoul(v);
                else if (k == "s") d.stride = std::stoul(v);
                else if (k == "d") d.dilation = std::stoul(v);
                else if (k == "channels") d.channels = std::stoul(v);
                else if (k == "relu") d.relu = v == "1";
                else if (k == "factor") d.factor = std::stoul(v);
                else if (k == "patch") {
                    const auto x = v.find('x');
                    d.patch_s = std::stoul(v.substr(0, x));
                    d.patch_t = std::stoul(v.substr(x + 1));
                } else if (k == "d1") d.hidden1 = std::stoul(v);
                else if (k == "d2") d.hidden2 = std::stoul(v);
                else if (k == "cell") d.cell = v == "irnn" ? CellKind::kIrnn : CellKind::kLstm;
                else if (k == "mode") d.norm_mode = parse_norm_mode(v);
                else if (k == "lambda") d.lambda = std::stod(v);
                else if (k == "inputs") {
                    std::stringstream vs(v);
                    std::string item;
                    while (std::getline(vs, item, ',')) d.inputs.push_back(item);
                } else throw IoError("unknown manifest key '" + k + "'");
            }
            if (type == "conv") d.type = LayerType::kConv;
            else if (type == "pool") d.type = LayerType::kPool;
            else if (type == "renet_group") d.type = LayerType::kRenetGroup;
            else if (type == "upsample") d.type = LayerType::kUpsample;
            else if (type == "concat") d.type = LayerType::kConcat;
            else if (type == "norm") d.type = LayerType::kNorm;
            else if (type == "softmax") d.type = LayerType::kSoftmax;
            else throw IoError("unknown layer type '" + type + "'");
            spec.layers.push_back(std::move(d));
        } else {
            throw IoError("unknown manifest key '" + key + "'");
        }
    }
    return spec;
}

// ---------------------------------------------------------------------------
// weight checkpoints

template <typename T>
NamedTensors<T> collect_weights(Model<T>& m) {
    NamedTensors<T> out;
    m.graph.visit_tensors(
        [&](const std::string& name, Tensor<T>* t) { out.add(name, *t); });
    return out;
}

template <typename T>
void load_weights(Model<T>& m, const NamedTensors<T>& ckpt) {
    m.graph.visit_tensors([&](const std::string& name, Tensor<T>* t) {
        const Tensor<T>* src = ckpt.find(name);
        if (!src) throw IoError("checkpoint is missing tensor '" + name + "'");
        if (src->shape() != t->shape())
            throw IoError("checkpoint tensor '" + name + "' has shape " +
                          shape_str(src->shape()) + ", wanted " + shape_str(t->shape()));
        *t = *src;
    });
}

}  // namespace renseg
