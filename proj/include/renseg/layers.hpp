// Convolutional-network building blocks on [C,H,W] maps: dilated convolution,
// max pooling, bilinear upsampling, activations, normalizations and the
// pixelwise loss. Each op comes as a forward plus an explicit backward; the
// autograd nodes wrap these.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "renseg/tensor.hpp"

namespace renseg {

enum class PadMode { kSame, kValid };

struct ConvConfig {
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t dilation = 1;
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    PadMode pad = PadMode::kSame;

    std::size_t pad_amount() const {
        if (pad == PadMode::kValid) return 0;
        if (kernel % 2 == 0)
            throw ShapeError("same-size padding requires an odd kernel, got k=" +
                             std::to_string(kernel));
        return dilation * (kernel - 1) / 2;
    }
    // Effective extent of the dilated kernel: (k-1)*dilation + 1.
    std::size_t effective_kernel() const { return (kernel - 1) * dilation + 1; }
};

enum class NormMode { kNone, kBatch, kL2 };

struct NormConfig {
    NormMode mode = NormMode::kNone;
    double lambda = 1000.0;   // L2 mode: uniform scale after unit-norm
    double momentum = 0.9;    // batch mode: running-stat momentum
    double epsilon = 1e-5;    // batch mode: variance guard
};

namespace detail {
inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                   std::size_t dilation, std::size_t pad) {
    const std::size_t eff = (k - 1) * dilation + 1;
    if (in + 2 * pad < eff)
        throw ShapeError("conv window larger than padded input");
    return (in + 2 * pad - eff) / stride + 1;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const ConvConfig& cfg, const Tensor<T>& w,
                         const Tensor<T>& b) {
    if (x.rank() != 3) throw ShapeError("conv2d expects [C,H,W] input");
    const std::size_t c_in = x.extent(0), h = x.extent(1), wd = x.extent(2);
    if (w.rank() != 4 || w.extent(1) != c_in || w.extent(2) != cfg.kernel ||
        w.extent(3) != cfg.kernel)
        throw ShapeError("conv2d weight shape " + shape_str(w.shape()) +
                         " does not match input channels " + std::to_string(c_in) + ", k=" +
                         std::to_string(cfg.kernel));
    const std::size_t c_out = w.extent(0);
    if (b.size() != c_out) throw ShapeError("conv2d bias length != output channels");
    const std::size_t pad = cfg.pad_amount();
    const std::size_t ho = detail::conv_out_extent(h, cfg.kernel, cfg.stride, cfg.dilation, pad);
    const std::size_t wo = detail::conv_out_extent(wd, cfg.kernel, cfg.stride, cfg.dilation, pad);

    Tensor<T> y({c_out, ho, wo}, T(0));
    const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(pad);
    for (std::size_t o = 0; o < c_out; ++o) {
        T* yplane = y.data() + o * ho * wo;
        for (std::size_t i = 0; i < ho * wo; ++i) yplane[i] = b[o];
        for (std::size_t c = 0; c < c_in; ++c) {
            const T* xplane = x.data() + c * h * wd;
            const T* wk = w.data() + (o * c_in + c) * cfg.kernel * cfg.kernel;
            for (std::size_t u = 0; u < cfg.kernel; ++u) {
                for (std::size_t v = 0; v < cfg.kernel; ++v) {
                    const T wv = wk[u * cfg.kernel + v];
                    if (wv == T(0)) continue;
                    for (std::size_t i = 0; i < ho; ++i) {
                        const std::ptrdiff_t xi =
                            static_cast<std::ptrdiff_t>(i * cfg.stride + u * cfg.dilation) - p;
                        if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(h)) continue;
                        const T* xrow = xplane + xi * wd;
                        T* yrow = yplane + i * wo;
                        for (std::size_t j = 0; j < wo; ++j) {
                            const std::ptrdiff_t xj =
                                static_cast<std::ptrdiff_t>(j * cfg.stride + v * cfg.dilation) - p;
                            if (xj < 0 || xj >= static_cast<std::ptrdiff_t>(wd)) continue;
                            yrow[j] += wv * xrow[xj];
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const ConvConfig& cfg, const Tensor<T>& w,
                     const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
    const std::size_t c_in = x.extent(0), h = x.extent(1), wd = x.extent(2);
    const std::size_t c_out = w.extent(0);
    const std::size_t ho = dy.extent(1), wo = dy.extent(2);
    const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(cfg.pad_amount());
    if (db) {
        for (std::size_t o = 0; o < c_out; ++o) {
            const T* dyp = dy.data() + o * ho * wo;
            T acc = T(0);
            for (std::size_t i = 0; i < ho * wo; ++i) acc += dyp[i];
            (*db)[o] += acc;
        }
    }
    for (std::size_t o = 0; o < c_out; ++o) {
        const T* dyplane = dy.data() + o * ho * wo;
        for (std::size_t c = 0; c < c_in; ++c) {
            const T* xplane = x.data() + c * h * wd;
            T* dxplane = dx ? dx->data() + c * h * wd : nullptr;
            const T* wk = w.data() + (o * c_in + c) * cfg.kernel * cfg.kernel;
            T* dwk = dw ? dw->data() + (o * c_in + c) * cfg.kernel * cfg.kernel : nullptr;
            for (std::size_t u = 0; u < cfg.kernel; ++u) {
                for (std::size_t v = 0; v < cfg.kernel; ++v) {
                    const T wv = wk[u * cfg.kernel + v];
                    T wgrad = T(0);
                    for (std::size_t i = 0; i < ho; ++i) {
                        const std::ptrdiff_t xi =
                            static_cast<std::ptrdiff_t>(i * cfg.stride + u * cfg.dilation) - p;
                        if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(h)) continue;
                        const T* xrow = xplane + xi * wd;
                        T* dxrow = dxplane ? dxplane + xi * wd : nullptr;
                        const T* dyrow = dyplane + i * wo;
                        for (std::size_t j = 0; j < wo; ++j) {
                            const std::ptrdiff_t xj =
                                static_cast<std::ptrdiff_t>(j * cfg.stride + v * cfg.dilation) - p;
                            if (xj < 0 || xj >= static_cast<std::ptrdiff_t>(wd)) continue;
                            const T g = dyrow[j];
                            wgrad += g * xrow[xj];
                            if (dxrow) dxrow[xj] += g * wv;
                        }
                    }
                    if (dwk) dwk[u * cfg.kernel + v] += wgrad;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// max pooling
//
// Window geometry follows the conv padding convention (centered for odd k,
// end-aligned for even k) but padded positions never enter the max, so a
// constant map stays constant. Output extent is ceil(in/stride).

template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& x, std::size_t k, std::size_t stride,
                          std::vector<std::size_t>* argmax = nullptr) {
    if (x.rank() != 3) throw ShapeError("maxpool expects [C,H,W] input");
    if (k < 1 || stride < 1) throw ArgumentError("maxpool: k and stride must be >= 1");
    const std::size_t c_n = x.extent(0), h = x.extent(1), wd = x.extent(2);
    const std::size_t ho = (h + stride - 1) / stride;
    const std::size_t wo = (wd + stride - 1) / stride;
    const std::ptrdiff_t pad = (k % 2 == 1) ? static_cast<std::ptrdiff_t>((k - 1) / 2) : 0;
    Tensor<T> y({c_n, ho, wo}, T(0));
    if (argmax) argmax->assign(c_n * ho * wo, 0);
    for (std::size_t c = 0; c < c_n; ++c) {
        const T* xplane = x.data() + c * h * wd;
        for (std::size_t i = 0; i < ho; ++i) {
            for (std::size_t j = 0; j < wo; ++j) {
                T best = -std::numeric_limits<T>::infinity();
                std::size_t best_at = 0;
                for (std::size_t u = 0; u < k; ++u) {
                    const std::ptrdiff_t xi = static_cast<std::ptrdiff_t>(i * stride + u) - pad;
                    if (xi < 0 || xi >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t v = 0; v < k; ++v) {
                        const std::ptrdiff_t xj =
                            static_cast<std::ptrdiff_t>(j * stride + v) - pad;
                        if (xj < 0 || xj >= static_cast<std::ptrdiff_t>(wd)) continue;
                        const T val = xplane[xi * wd + xj];
                        // first maximal index wins ties
                        if (val > best) {
                            best = val;
                            best_at = static_cast<std::size_t>(xi) * wd +
                                      static_cast<std::size_t>(xj);
                        }
                    }
                }
                y(c, i, j) = best;
                if (argmax) (*argmax)[(c * ho + i) * wo + j] = best_at;
            }
        }
    }
    return y;
}

template <typename T>
void maxpool_backward(const Shape& xshape, const std::vector<std::size_t>& argmax,
                      const Tensor<T>& dy, Tensor<T>* dx) {
    const std::size_t c_n = xshape[0], h = xshape[1], wd = xshape[2];
    for (std::size_t c = 0; c < c_n; ++c) {
        T* dxplane = dx->data() + c * h * wd;
        const T* dyplane = dy.data() + c * dy.extent(1) * dy.extent(2);
        const std::size_t* amp = argmax.data() + c * dy.extent(1) * dy.extent(2);
        for (std::size_t i = 0; i < dy.extent(1) * dy.extent(2); ++i)
            dxplane[amp[i]] += dyplane[i];
    }
}

// ---------------------------------------------------------------------------
// bilinear upsampling
//
// Output sample i reads input coordinate (i + 0.5) / factor - 0.5, clamped to
// the valid range.

namespace detail {
struct LerpTap {
    std::size_t lo, hi;
    double w_hi;  // weight of the hi tap; lo gets 1 - w_hi
};

inline std::vector<LerpTap> lerp_taps(std::size_t out_n, std::size_t in_n, std::size_t factor) {
    std::vector<LerpTap> taps(out_n);
    for (std::size_t i = 0; i < out_n; ++i) {
        double src = (static_cast<double>(i) + 0.5) / static_cast<double>(factor) - 0.5;
        if (src < 0) src = 0;
        const double hi_lim = static_cast<double>(in_n - 1);
        if (src > hi_lim) src = hi_lim;
        const std::size_t lo = static_cast<std::size_t>(src);
        const std::size_t hi = std::min(lo + 1, in_n - 1);
        taps[i] = {lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
}
}  // namespace detail

template <typename T>
Tensor<T> bilinear_upsample_forward(const Tensor<T>& x, std::size_t factor) {
    if (x.rank() != 3) throw ShapeError("bilinear_upsample expects [C,h,w] input");
    if (factor < 1) throw ArgumentError("bilinear_upsample: factor must be >= 1");
    const std::size_t c_n = x.extent(0), h = x.extent(1), w = x.extent(2);
    const std::size_t ho = h * factor, wo = w * factor;
    const auto rows = detail::lerp_taps(ho, h, factor);
    const auto cols = detail::lerp_taps(wo, w, factor);
    Tensor<T> y({c_n, ho, wo}, T(0));
    for (std::size_t c = 0; c < c_n; ++c) {
        const T* xp = x.data() + c * h * w;
        T* yp = y.data() + c * ho * wo;
        for (std::size_t i = 0; i < ho; ++i) {
            const auto& r = rows[i];
            const T* x_lo = xp + r.lo * w;
            const T* x_hi = xp + r.hi * w;
            const T rw = static_cast<T>(r.w_hi);
            for (std::size_t j = 0; j < wo; ++j) {
                const auto& cta = cols[j];
                const T cw = static_cast<T>(cta.w_hi);
                const T top = x_lo[cta.lo] * (T(1) - cw) + x_lo[cta.hi] * cw;
                const T bot = x_hi[cta.lo] * (T(1) - cw) + x_hi[cta.hi] * cw;
                yp[i * wo + j] = top * (T(1) - rw) + bot * rw;
            }
        }
    }
    return y;
}

template <typename T>
void bilinear_upsample_backward(const Shape& xshape, std::size_t factor, const Tensor<T>& dy,
                                Tensor<T>* dx) {
    const std::size_t c_n = xshape[0], h = xshape[1], w = xshape[2];
    const std::size_t ho = dy.extent(1), wo = dy.extent(2);
    const auto rows = detail::lerp_taps(ho, h, factor);
    const auto cols = detail::lerp_taps(wo, w, factor);
    for (std::size_t c = 0; c < c_n; ++c) {
        T* dxp = dx->data() + c * h * w;
        const T* dyp = dy.data() + c * ho * wo;
        for (std::size_t i = 0; i < ho; ++i) {
            const auto& r = rows[i];
            const T rw = static_cast<T>(r.w_hi);
            for (std::size_t j = 0; j < wo; ++j) {
                const auto& cta = cols[j];
                const T cw = static_cast<T>(cta.w_hi);
                const T g = dyp[i * wo + j];
                dxp[r.lo * w + cta.lo] += g * (T(1) - rw) * (T(1) - cw);
                dxp[r.lo * w + cta.hi] += g * (T(1) - rw) * cw;
                dxp[r.hi * w + cta.lo] += g * rw * (T(1) - cw);
                dxp[r.hi * w + cta.hi] += g * rw * cw;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// relu

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] < T(0)) y[i] = T(0);
    return y;
}

template <typename T>
void relu_backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>* dx) {
    // subgradient 0 at the kink
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > T(0)) (*dx)[i] += dy[i];
}

// ---------------------------------------------------------------------------
// pixelwise softmax over the channel axis of [L,H,W]

template <typename T>
Tensor<T> softmax_pixelwise(const Tensor<T>& logits) {
    if (logits.rank() != 3) throw ShapeError("softmax_pixelwise expects [L,H,W]");
    const std::size_t l_n = logits.extent(0);
    if (l_n < 2) throw ShapeError("softmax_pixelwise requires L >= 2");
    const std::size_t hw = logits.extent(1) * logits.extent(2);
    Tensor<T> p(logits.shape(), T(0));
    const T* z = logits.data();
    T* q = p.data();
    for (std::size_t i = 0; i < hw; ++i) {
        T zmax = z[i];
        for (std::size_t l = 1; l < l_n; ++l) zmax = std::max(zmax, z[l * hw + i]);
        T sum = T(0);
        for (std::size_t l = 0; l < l_n; ++l) {
            const T e = std::exp(z[l * hw + i] - zmax);
            q[l * hw + i] = e;
            sum += e;
        }
        for (std::size_t l = 0; l < l_n; ++l) q[l * hw + i] /= sum;
    }
    return p;
}

template <typename T>
void softmax_pixelwise_backward(const Tensor<T>& probs, const Tensor<T>& dp, Tensor<T>* dz) {
    const std::size_t l_n = probs.extent(0);
    const std::size_t hw = probs.extent(1) * probs.extent(2);
    for (std::size_t i = 0; i < hw; ++i) {
        T dot = T(0);
        for (std::size_t l = 0; l < l_n; ++l) dot += dp[l * hw + i] * probs[l * hw + i];
        for (std::size_t l = 0; l < l_n; ++l)
            (*dz)[l * hw + i] += probs[l * hw + i] * (dp[l * hw + i] - dot);
    }
}

// ---------------------------------------------------------------------------
// pixelwise multinomial cross entropy, mean over non-ignored pixels

inline constexpr int kIgnoreLabel = 255;

template <typename T>
T cross_entropy_loss(const Tensor<T>& probs, const Tensor<int>& labels, int ignore,
                     std::size_t* n_valid_out = nullptr) {
    if (probs.rank() != 3 || labels.rank() != 2) throw ShapeError("cross_entropy: bad ranks");
    const std::size_t l_n = probs.extent(0);
    const std::size_t hw = probs.extent(1) * probs.extent(2);
    if (labels.size() != hw) throw ShapeError("cross_entropy: label map size mismatch");
    T loss = T(0);
    std::size_t n_valid = 0;
    for (std::size_t i = 0; i < hw; ++i) {
        const int lab = labels[i];
        if (lab == ignore) continue;
        if (lab < 0 || static_cast<std::size_t>(lab) >= l_n)
            throw ArgumentError("cross_entropy: label " + std::to_string(lab) + " out of range");
        const T p = std::max(probs[static_cast<std::size_t>(lab) * hw + i],
                             std::numeric_limits<T>::min());
        loss -= std::log(p);
        ++n_valid;
    }
    if (n_valid == 0) throw ArgumentError("cross_entropy: every pixel carries the ignore label");
    if (n_valid_out) *n_valid_out = n_valid;
    return loss / static_cast<T>(n_valid);
}

template <typename T>
void cross_entropy_backward(const Tensor<T>& probs, const Tensor<int>& labels, int ignore,
                            T dloss, Tensor<T>* dprobs) {
    const std::size_t hw = probs.extent(1) * probs.extent(2);
    std::size_t n_valid = 0;
    for (std::size_t i = 0; i < hw; ++i)
        if (labels[i] != ignore) ++n_valid;
    for (std::size_t i = 0; i < hw; ++i) {
        const int lab = labels[i];
        if (lab == ignore) continue;
        const std::size_t at = static_cast<std::size_t>(lab) * hw + i;
        const T p = std::max(probs[at], std::numeric_limits<T>::min());
        (*dprobs)[at] += dloss * (-T(1) / (p * static_cast<T>(n_valid)));
    }
}

/// Fused softmax + cross entropy. The training graphs use this node: its
/// gradient (p - onehot)/n_valid stays finite even when a probability
/// underflows.
template <typename T>
T softmax_xent_forward(const Tensor<T>& logits, const Tensor<int>& labels, int ignore,
                       Tensor<T>* probs_out) {
    Tensor<T> probs = softmax_pixelwise(logits);
    const T loss = cross_entropy_loss(probs, labels, ignore);
    if (probs_out) *probs_out = std::move(probs);
    return loss;
}

template <typename T>
void softmax_xent_backward(const Tensor<T>& probs, const Tensor<int>& labels, int ignore,
                           T dloss, Tensor<T>* dlogits) {
    const std::size_t l_n = probs.extent(0);
    const std::size_t hw = probs.extent(1) * probs.extent(2);
    std::size_t n_valid = 0;
    for (std::size_t i = 0; i < hw; ++i)
        if (labels[i] != ignore) ++n_valid;
    const T scale = dloss / static_cast<T>(n_valid);
    for (std::size_t i = 0; i < hw; ++i) {
        const int lab = labels[i];
        if (lab == ignore) continue;
        for (std::size_t l = 0; l < l_n; ++l) {
            T g = probs[l * hw + i];
            if (static_cast<std::size_t>(lab) == l) g -= T(1);
            (*dlogits)[l * hw + i] += scale * g;
        }
    }
}

// ---------------------------------------------------------------------------
// batch normalization over [N,C,H,W], statistics per channel across N*H*W

template <typename T>
struct BatchNormCache {
    Tensor<T> mean;     // [C]
    Tensor<T> var;      // [C] biased
    Tensor<T> inv_std;  // [C]
};

template <typename T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, const NormConfig& cfg, const Tensor<T>& gamma,
                             const Tensor<T>& beta, Tensor<T>* running_mean,
                             Tensor<T>* running_var, bool training,
                             BatchNormCache<T>* cache = nullptr) {
    if (x.rank() != 4) throw ShapeError("batch_norm expects [N,C,H,W]");
    const std::size_t n = x.extent(0), c_n = x.extent(1), hw = x.extent(2) * x.extent(3);
    const std::size_t m = n * hw;
    if (training && m < 2) throw ShapeError("batch_norm: need at least 2 samples per channel");
    if (gamma.size() != c_n || beta.size() != c_n) throw ShapeError("batch_norm: bad gamma/beta");
    Tensor<T> y(x.shape(), T(0));
    Tensor<T> mean({c_n}, T(0)), var({c_n}, T(0)), inv_std({c_n}, T(0));
    for (std::size_t c = 0; c < c_n; ++c) {
        T mu, v;
        if (training) {
            T sum = T(0);
            for (std::size_t b = 0; b < n; ++b) {
                const T* xp = x.data() + (b * c_n + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) sum += xp[i];
            }
            mu = sum / static_cast<T>(m);
            T sq = T(0);
            for (std::size_t b = 0; b < n; ++b) {
                const T* xp = x.data() + (b * c_n + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const T d = xp[i] - mu;
                    sq += d * d;
                }
            }
            v = sq / static_cast<T>(m);
        } else {
            mu = (*running_mean)[c];
            v = (*running_var)[c];
        }
        const T istd = T(1) / std::sqrt(v + static_cast<T>(cfg.epsilon));
        mean[c] = mu;
        var[c] = v;
        inv_std[c] = istd;
        for (std::size_t b = 0; b < n; ++b) {
            const T* xp = x.data() + (b * c_n + c) * hw;
            T* yp = y.data() + (b * c_n + c) * hw;
            for (std::size_t i = 0; i < hw; ++i)
                yp[i] = gamma[c] * (xp[i] - mu) * istd + beta[c];
        }
    }
    if (training && running_mean && running_var) {
        const T mom = static_cast<T>(cfg.momentum);
        for (std::size_t c = 0; c < c_n; ++c) {
            (*running_mean)[c] = mom * (*running_mean)[c] + (T(1) - mom) * mean[c];
            (*running_var)[c] = mom * (*running_var)[c] + (T(1) - mom) * var[c];
        }
    }
    if (cache) *cache = {std::move(mean), std::move(var), std::move(inv_std)};
    return y;
}

template <typename T>
void batch_norm_backward(const Tensor<T>& x, const Tensor<T>& gamma,
                         const BatchNormCache<T>& cache, const Tensor<T>& dy, bool training,
                         Tensor<T>* dx, Tensor<T>* dgamma, Tensor<T>* dbeta) {
    const std::size_t n = x.extent(0), c_n = x.extent(1), hw = x.extent(2) * x.extent(3);
    const T m = static_cast<T>(n * hw);
    for (std::size_t c = 0; c < c_n; ++c) {
        const T mu = cache.mean[c];
        const T istd = cache.inv_std[c];
        T sum_dy = T(0), sum_dy_xhat = T(0);
        for (std::size_t b = 0; b < n; ++b) {
            const T* xp = x.data() + (b * c_n + c) * hw;
            const T* dyp = dy.data() + (b * c_n + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                sum_dy += dyp[i];
                sum_dy_xhat += dyp[i] * (xp[i] - mu) * istd;
            }
        }
        if (dgamma) (*dgamma)[c] += sum_dy_xhat;
        if (dbeta) (*dbeta)[c] += sum_dy;
        if (!dx) continue;
        for (std::size_t b = 0; b < n; ++b) {
            const T* xp = x.data() + (b * c_n + c) * hw;
            const T* dyp = dy.data() + (b * c_n + c) * hw;
            T* dxp = dx->data() + (b * c_n + c) * hw;
            if (training) {
                for (std::size_t i = 0; i < hw; ++i) {
                    const T xhat = (xp[i] - mu) * istd;
                    dxp[i] += gamma[c] * istd *
                              (dyp[i] - sum_dy / m - xhat * sum_dy_xhat / m);
                }
            } else {
                for (std::size_t i = 0; i < hw; ++i) dxp[i] += dyp[i] * gamma[c] * istd;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// whole-map L2 normalization followed by a uniform scale

template <typename T>
Tensor<T> l2_normalize_scale_forward(const Tensor<T>& x, T lambda, T* norm_out = nullptr,
                                     bool* degenerate_out = nullptr) {
    T sq = T(0);
    for (std::size_t i = 0; i < x.size(); ++i) sq += x[i] * x[i];
    const T norm = std::sqrt(sq);
    if (norm_out) *norm_out = norm;
    if (norm <= T(1e-12)) {
        // near-zero map: emit zeros and flag a diagnostic instead of aborting
        if (degenerate_out) *degenerate_out = true;
        return Tensor<T>(x.shape(), T(0));
    }
    if (degenerate_out) *degenerate_out = false;
    Tensor<T> y = x;
    const T s = lambda / norm;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= s;
    return y;
}

template <typename T>
void l2_normalize_scale_backward(const Tensor<T>& x, T lambda, T norm, const Tensor<T>& dy,
                                 Tensor<T>* dx) {
    if (norm <= T(1e-12)) return;  // degenerate forward emitted a constant zero map
    T dot = T(0);
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * dy[i];
    const T s = lambda / norm;
    const T proj = dot / (norm * norm);
    for (std::size_t i = 0; i < x.size(); ++i) (*dx)[i] += s * (dy[i] - x[i] * proj);
}

}  // namespace renseg
