// Spatially recurrent layers: 1D LSTM / IRNN cells, bidirectional sweeps over
// a patch grid, and the orthogonal layer group.
//
// Grids are [h,w,p] with the feature axis last, so one grid cell is a
// contiguous vector. The sweep kernel always walks columns top-down/bottom-up
// (a vertical sweep); horizontal sweeps transpose the grid, run the same
// kernel and transpose back, which makes the two directions exact mirrors.
// Lanes (columns) are independent: they share no state and are safe to
// compute on any worker partition with bit-identical results.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "renseg/common.hpp"
#include "renseg/tensor.hpp"

namespace renseg {

enum class SweepDirection { kVertical, kHorizontal };
enum class CellKind { kLstm, kIrnn };

// LSTM gate order used everywhere, including checkpoints.
inline constexpr std::array<const char*, 4> kLstmGateNames = {"i", "f", "c", "o"};

/// Weights of one directional RNN: per gate, input weights W [d,p], recurrent
/// weights U [d,d] and bias b [d]. LSTM uses 4 gates (i, f, c, o), IRNN one.
template <typename T>
struct DirParams {
    std::vector<Tensor<T>> w, u, b;

    std::size_t hidden() const { return b.empty() ? 0 : b[0].size(); }
    std::size_t input() const { return w.empty() ? 0 : w[0].extent(1); }
    std::size_t gates() const { return w.size(); }

    static DirParams zeros(CellKind cell, std::size_t d, std::size_t p) {
        DirParams out;
        const std::size_t g = cell == CellKind::kLstm ? 4 : 1;
        for (std::size_t i = 0; i < g; ++i) {
            out.w.push_back(Tensor<T>({d, p}, T(0)));
            out.u.push_back(Tensor<T>({d, d}, T(0)));
            out.b.push_back(Tensor<T>({d}, T(0)));
        }
        return out;
    }

    void check(CellKind cell) const {
        const std::size_t g = cell == CellKind::kLstm ? 4 : 1;
        if (w.size() != g || u.size() != g || b.size() != g)
            throw ShapeError("direction params: expected " + std::to_string(g) + " gates");
        const std::size_t d = b[0].size(), p = w[0].extent(1);
        for (std::size_t i = 0; i < g; ++i) {
            if (w[i].rank() != 2 || w[i].extent(0) != d || w[i].extent(1) != p ||
                u[i].rank() != 2 || u[i].extent(0) != d || u[i].extent(1) != d ||
                b[i].rank() != 1 || b[i].size() != d)
                throw ShapeError("direction params: inconsistent gate shapes");
        }
    }
};

template <typename T>
struct LstmState {
    Tensor<T> h;  // [d], bounded: |h| < 1 since h = o * tanh(C), o in (0,1)
    Tensor<T> c;  // [d], grows at most linearly in the step count

    static LstmState zero(std::size_t d) {
        return {Tensor<T>({d}, T(0)), Tensor<T>({d}, T(0))};
    }
};

template <typename T>
T sigmoid(T z) {
    return T(1) / (T(1) + std::exp(-z));
}

/// One LSTM update: i = s(Wi x + Ui h + bi), f, o likewise, c~ = tanh(...),
/// C = f.C_prev + i.c~, h = o.tanh(C).
template <typename T>
LstmState<T> lstm_step(const Tensor<T>& x, const LstmState<T>& prev, const DirParams<T>& params) {
    params.check(CellKind::kLstm);
    const std::size_t d = params.hidden(), p = params.input();
    if (x.size() != p) throw ShapeError("lstm_step: input width mismatch");
    if (prev.h.size() != d || prev.c.size() != d) throw ShapeError("lstm_step: state mismatch");
    std::array<std::vector<T>, 4> z;
    for (std::size_t g = 0; g < 4; ++g) {
        z[g].assign(d, T(0));
        const T* wp = params.w[g].data();
        const T* up = params.u[g].data();
        for (std::size_t j = 0; j < d; ++j) {
            T acc = params.b[g][j];
            const T* wrow = wp + j * p;
            for (std::size_t k = 0; k < p; ++k) acc += wrow[k] * x[k];
            const T* urow = up + j * d;
            for (std::size_t k = 0; k < d; ++k) acc += urow[k] * prev.h[k];
            z[g][j] = acc;
        }
    }
    LstmState<T> next = LstmState<T>::zero(d);
    for (std::size_t j = 0; j < d; ++j) {
        const T gi = sigmoid(z[0][j]);
        const T gf = sigmoid(z[1][j]);
        const T gc = std::tanh(z[2][j]);
        const T go = sigmoid(z[3][j]);
        next.c[j] = gf * prev.c[j] + gi * gc;
        next.h[j] = go * std::tanh(next.c[j]);
    }
    return next;
}

/// One IRNN update: h = relu(W x + U h_prev + b).
template <typename T>
Tensor<T> irnn_step(const Tensor<T>& x, const Tensor<T>& h_prev, const DirParams<T>& params) {
    params.check(CellKind::kIrnn);
    const std::size_t d = params.hidden(), p = params.input();
    Tensor<T> h({d}, T(0));
    for (std::size_t j = 0; j < d; ++j) {
        T acc = params.b[0][j];
        const T* wrow = params.w[0].data() + j * p;
        for (std::size_t k = 0; k < p; ++k) acc += wrow[k] * x[k];
        const T* urow = params.u[0].data() + j * d;
        for (std::size_t k = 0; k < d; ++k) acc += urow[k] * h_prev[k];
        h[j] = acc > T(0) ? acc : T(0);
    }
    return h;
}

// ---------------------------------------------------------------------------
// patch grid

/// Divides [C,H,W] into a grid of ceil(H/s) x ceil(W/t) patches and flattens
/// each patch channel-major (then row, then column). Partial border patches
/// read as zero.
template <typename T>
Tensor<T> patch_grid_forward(const Tensor<T>& map, std::size_t s, std::size_t t) {
    if (map.rank() != 3) throw ShapeError("patch_grid expects [C,H,W]");
    if (s < 1 || t < 1) throw ArgumentError("patch_grid: patch extents must be >= 1");
    const std::size_t c_n = map.extent(0), hh = map.extent(1), ww = map.extent(2);
    const std::size_t gh = (hh + s - 1) / s, gw = (ww + t - 1) / t;
    const std::size_t p = c_n * s * t;
    Tensor<T> grid({gh, gw, p}, T(0));
    for (std::size_t gy = 0; gy < gh; ++gy) {
        for (std::size_t gx = 0; gx < gw; ++gx) {
            T* cell = grid.data() + (gy * gw + gx) * p;
            for (std::size_t c = 0; c < c_n; ++c) {
                for (std::size_t dy = 0; dy < s; ++dy) {
                    const std::size_t y = gy * s + dy;
                    if (y >= hh) continue;
                    for (std::size_t dx = 0; dx < t; ++dx) {
                        const std::size_t x = gx * t + dx;
                        if (x >= ww) continue;
                        cell[(c * s + dy) * t + dx] = map(c, y, x);
                    }
                }
            }
        }
    }
    return grid;
}

template <typename T>
void patch_grid_backward(const Shape& map_shape, std::size_t s, std::size_t t,
                         const Tensor<T>& dgrid, Tensor<T>* dmap) {
    const std::size_t c_n = map_shape[0], hh = map_shape[1], ww = map_shape[2];
    const std::size_t gw = dgrid.extent(1), p = dgrid.extent(2);
    for (std::size_t gy = 0; gy < dgrid.extent(0); ++gy) {
        for (std::size_t gx = 0; gx < gw; ++gx) {
            const T* cell = dgrid.data() + (gy * gw + gx) * p;
            for (std::size_t c = 0; c < c_n; ++c) {
                for (std::size_t dy = 0; dy < s; ++dy) {
                    const std::size_t y = gy * s + dy;
                    if (y >= hh) continue;
                    for (std::size_t dx = 0; dx < t; ++dx) {
                        const std::size_t x = gx * t + dx;
                        if (x >= ww) continue;
                        (*dmap)(c, y, x) += cell[(c * s + dy) * t + dx];
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// bidirectional sweep

struct SweepExec {
    unsigned lane_workers = 1;
    bool parallel_directions = false;
};

/// Per-position activations saved by the forward pass for BPTT. Layout is
/// [rows * cols * d] per array, indexed like the (possibly transposed) grid.
template <typename T>
struct SweepDirCache {
    std::vector<T> gate_i, gate_f, gate_c, gate_o;  // post-nonlinearity (LSTM)
    std::vector<T> cell;                            // C (LSTM)
    std::vector<T> pre;                             // pre-activation (IRNN)
    std::vector<T> hidden;                          // h
};

template <typename T>
struct SweepCache {
    Tensor<T> grid;  // kernel-orientation copy of the input grid
    SweepDirCache<T> fwd, bwd;
};

namespace detail {

// Forward over one lane range of a vertical sweep. `reverse` selects the
// bottom-up direction. Output h goes to out[(y*w + x)*2d + off], cache
// entries to [(y*w + x)*d].
template <typename T>
void sweep_lanes_lstm(const Tensor<T>& grid, const DirParams<T>& pr, bool reverse,
                      std::size_t lane_begin, std::size_t lane_end, T* out, std::size_t out_off,
                      std::size_t out_width, SweepDirCache<T>* cache) {
    const std::size_t h = grid.extent(0), w = grid.extent(1), p = grid.extent(2);
    const std::size_t d = pr.hidden();
    std::vector<T> h_prev(d), c_prev(d), z(4);
    for (std::size_t x = lane_begin; x < lane_end; ++x) {
        std::fill(h_prev.begin(), h_prev.end(), T(0));
        std::fill(c_prev.begin(), c_prev.end(), T(0));
        for (std::size_t step = 0; step < h; ++step) {
            const std::size_t y = reverse ? h - 1 - step : step;
            const T* xv = grid.data() + (y * w + x) * p;
            const std::size_t at = (y * w + x) * d;
            for (std::size_t j = 0; j < d; ++j) {
                for (std::size_t g = 0; g < 4; ++g) {
                    T acc = pr.b[g][j];
                    const T* wrow = pr.w[g].data() + j * p;
                    for (std::size_t k = 0; k < p; ++k) acc += wrow[k] * xv[k];
                    const T* urow = pr.u[g].data() + j * d;
                    for (std::size_t k = 0; k < d; ++k) acc += urow[k] * h_prev[k];
                    z[g] = acc;
                }
                const T gi = sigmoid(z[0]);
                const T gf = sigmoid(z[1]);
                const T gc = std::tanh(z[2]);
                const T go = sigmoid(z[3]);
                const T c_new = gf * c_prev[j] + gi * gc;
                const T h_new = go * std::tanh(c_new);
                if (cache) {
                    cache->gate_i[at + j] = gi;
                    cache->gate_f[at + j] = gf;
                    cache->gate_c[at + j] = gc;
                    cache->gate_o[at + j] = go;
                    cache->cell[at + j] = c_new;
                    cache->hidden[at + j] = h_new;
                }
                c_prev[j] = c_new;
                out[(y * w + x) * out_width + out_off + j] = h_new;
            }
            // h_prev update must happen after all j used the old value
            for (std::size_t j = 0; j < d; ++j)
                h_prev[j] = out[(y * w + x) * out_width + out_off + j];
        }
    }
}

template <typename T>
void sweep_lanes_irnn(const Tensor<T>& grid, const DirParams<T>& pr, bool reverse,
                      std::size_t lane_begin, std::size_t lane_end, T* out, std::size_t out_off,
                      std::size_t out_width, SweepDirCache<T>* cache) {
    const std::size_t h = grid.extent(0), w = grid.extent(1), p = grid.extent(2);
    const std::size_t d = pr.hidden();
    std::vector<T> h_prev(d), h_new(d);
    for (std::size_t x = lane_begin; x < lane_end; ++x) {
        std::fill(h_prev.begin(), h_prev.end(), T(0));
        for (std::size_t step = 0; step < h; ++step) {
            const std::size_t y = reverse ? h - 1 - step : step;
            const T* xv = grid.data() + (y * w + x) * p;
            const std::size_t at = (y * w + x) * d;
            for (std::size_t j = 0; j < d; ++j) {
                T acc = pr.b[0][j];
                const T* wrow = pr.w[0].data() + j * p;
                for (std::size_t k = 0; k < p; ++k) acc += wrow[k] * xv[k];
                const T* urow = pr.u[0].data() + j * d;
                for (std::size_t k = 0; k < d; ++k) acc += urow[k] * h_prev[k];
                if (cache) cache->pre[at + j] = acc;
                h_new[j] = acc > T(0) ? acc : T(0);
                if (cache) cache->hidden[at + j] = h_new[j];
            }
            for (std::size_t j = 0; j < d; ++j) {
                h_prev[j] = h_new[j];
                out[(y * w + x) * out_width + out_off + j] = h_new[j];
            }
        }
    }
}

template <typename T>
void sweep_one_direction(const Tensor<T>& grid, const DirParams<T>& pr, CellKind cell,
                         bool reverse, unsigned lane_workers, T* out, std::size_t out_off,
                         std::size_t out_width, SweepDirCache<T>* cache) {
    const std::size_t w = grid.extent(1);
    if (cache) {
        const std::size_t n = grid.extent(0) * w * pr.hidden();
        cache->hidden.assign(n, T(0));
        if (cell == CellKind::kLstm) {
            cache->gate_i.assign(n, T(0));
            cache->gate_f.assign(n, T(0));
            cache->gate_c.assign(n, T(0));
            cache->gate_o.assign(n, T(0));
            cache->cell.assign(n, T(0));
        } else {
            cache->pre.assign(n, T(0));
        }
    }
    auto run = [&](std::size_t b, std::size_t e) {
        if (cell == CellKind::kLstm)
            sweep_lanes_lstm(grid, pr, reverse, b, e, out, out_off, out_width, cache);
        else
            sweep_lanes_irnn(grid, pr, reverse, b, e, out, out_off, out_width, cache);
    };
    parallel_for(w, lane_workers, run);
}

}  // namespace detail

/// Bidirectional vertical sweep over grid [h,w,p]: columns are processed
/// top-down by the forward RNN and bottom-up by the backward RNN from zero
/// initial state; the output at (y,x) is concat(h_fwd, h_bwd) of width 2d.
template <typename T>
Tensor<T> sweep_vertical_forward(const Tensor<T>& grid, const DirParams<T>& fwd,
                                 const DirParams<T>& bwd, CellKind cell,
                                 const SweepExec& exec = {}, SweepCache<T>* cache = nullptr) {
    if (grid.rank() != 3) throw ShapeError("sweep expects [h,w,p] grid");
    fwd.check(cell);
    bwd.check(cell);
    if (fwd.input() != grid.extent(2) || bwd.input() != grid.extent(2))
        throw ShapeError("sweep: params input width " + std::to_string(fwd.input()) +
                         " != grid feature width " + std::to_string(grid.extent(2)));
    if (fwd.hidden() != bwd.hidden())
        throw ShapeError("sweep: forward/backward hidden widths differ");
    const std::size_t d = fwd.hidden();
    Tensor<T> out({grid.extent(0), grid.extent(1), 2 * d}, T(0));
    if (cache) cache->grid = grid;
    SweepDirCache<T>* cf = cache ? &cache->fwd : nullptr;
    SweepDirCache<T>* cb = cache ? &cache->bwd : nullptr;
    if (exec.parallel_directions) {
        std::thread tf([&] {
            detail::sweep_one_direction(grid, fwd, cell, false, exec.lane_workers, out.data(), 0,
                                        2 * d, cf);
        });
        detail::sweep_one_direction(grid, bwd, cell, true, exec.lane_workers, out.data(), d,
                                    2 * d, cb);
        tf.join();
    } else {
        detail::sweep_one_direction(grid, fwd, cell, false, exec.lane_workers, out.data(), 0,
                                    2 * d, cf);
        detail::sweep_one_direction(grid, bwd, cell, true, exec.lane_workers, out.data(), d,
                                    2 * d, cb);
    }
    return out;
}

namespace detail {

// BPTT over all lanes of one direction; sequential so that parameter-gradient
// accumulation has one fixed order.
template <typename T>
void sweep_backward_one_direction(const Tensor<T>& grid, const DirParams<T>& pr, CellKind cell,
                                  bool reverse, const SweepDirCache<T>& cache, const Tensor<T>& dout,
                                  std::size_t out_off, Tensor<T>* dgrid, DirParams<T>* dparams) {
    const std::size_t h = grid.extent(0), w = grid.extent(1), p = grid.extent(2);
    const std::size_t d = pr.hidden();
    const std::size_t out_width = dout.extent(2);
    const std::size_t gates = cell == CellKind::kLstm ? 4 : 1;
    std::vector<T> dh(d), dc(d), dz(gates * d);
    for (std::size_t x = 0; x < w; ++x) {
        std::fill(dh.begin(), dh.end(), T(0));
        std::fill(dc.begin(), dc.end(), T(0));
        for (std::size_t step = h; step-- > 0;) {
            // walk steps in reverse temporal order for this direction
            const std::size_t y = reverse ? h - 1 - step : step;
            const std::size_t at = (y * w + x) * d;
            const std::size_t prev_y = reverse ? y + 1 : y - 1;
            const bool has_prev = step > 0;
            const T* xv = grid.data() + (y * w + x) * p;
            if (cell == CellKind::kLstm) {
                for (std::size_t j = 0; j < d; ++j) {
                    const T gi = cache.gate_i[at + j];
                    const T gf = cache.gate_f[at + j];
                    const T gc = cache.gate_c[at + j];
                    const T go = cache.gate_o[at + j];
                    const T cv = cache.cell[at + j];
                    const T tc = std::tanh(cv);
                    const T dh_total = dh[j] + dout[(y * w + x) * out_width + out_off + j];
                    const T dgo = dh_total * tc;
                    const T dcv = dh_total * go * (T(1) - tc * tc) + dc[j];
                    const T c_prev =
                        has_prev ? cache.cell[(prev_y * w + x) * d + j] : T(0);
                    const T dgi = dcv * gc;
                    const T dgc = dcv * gi;
                    const T dgf = dcv * c_prev;
                    dc[j] = dcv * gf;
                    dz[0 * d + j] = dgi * gi * (T(1) - gi);
                    dz[1 * d + j] = dgf * gf * (T(1) - gf);
                    dz[2 * d + j] = dgc * (T(1) - gc * gc);
                    dz[3 * d + j] = dgo * go * (T(1) - go);
                }
            } else {
                for (std::size_t j = 0; j < d; ++j) {
                    const T dh_total = dh[j] + dout[(y * w + x) * out_width + out_off + j];
                    dz[j] = cache.pre[at + j] > T(0) ? dh_total : T(0);
                }
            }
            const T* h_prev =
                has_prev ? cache.hidden.data() + (prev_y * w + x) * d : nullptr;
            std::fill(dh.begin(), dh.end(), T(0));
            for (std::size_t g = 0; g < gates; ++g) {
                const T* wg = pr.w[g].data();
                const T* ug = pr.u[g].data();
                T* dwg = dparams ? dparams->w[g].data() : nullptr;
                T* dug = dparams ? dparams->u[g].data() : nullptr;
                T* dbg = dparams ? dparams->b[g].data() : nullptr;
                T* dxv = dgrid ? dgrid->data() + (y * w + x) * p : nullptr;
                for (std::size_t j = 0; j < d; ++j) {
                    const T g_in = dz[g * d + j];
                    if (dbg) dbg[j] += g_in;
                    if (dwg) {
                        T* dwrow = dwg + j * p;
                        for (std::size_t k = 0; k < p; ++k) dwrow[k] += g_in * xv[k];
                    }
                    if (dxv) {
                        const T* wrow = wg + j * p;
                        for (std::size_t k = 0; k < p; ++k) dxv[k] += g_in * wrow[k];
                    }
                    if (h_prev) {
                        if (dug) {
                            T* durow = dug + j * d;
                            for (std::size_t k = 0; k < d; ++k) durow[k] += g_in * h_prev[k];
                        }
                        const T* urow = ug + j * d;
                        for (std::size_t k = 0; k < d; ++k) dh[k] += g_in * urow[k];
                    }
                }
            }
        }
    }
}

}  // namespace detail

template <typename T>
void sweep_vertical_backward(const SweepCache<T>& cache, const DirParams<T>& fwd,
                             const DirParams<T>& bwd, CellKind cell, const Tensor<T>& dout,
                             Tensor<T>* dgrid, DirParams<T>* dfwd, DirParams<T>* dbwd) {
    const std::size_t d = fwd.hidden();
    detail::sweep_backward_one_direction(cache.grid, fwd, cell, false, cache.fwd, dout, 0, dgrid,
                                         dfwd);
    detail::sweep_backward_one_direction(cache.grid, bwd, cell, true, cache.bwd, dout, d, dgrid,
                                         dbwd);
}

/// Direction-dispatching sweep: horizontal sweeps transpose the grid, run the
/// vertical kernel and transpose the output back.
template <typename T>
Tensor<T> renet_sweep_forward(const Tensor<T>& grid, SweepDirection dir, const DirParams<T>& fwd,
                              const DirParams<T>& bwd, CellKind cell, const SweepExec& exec = {},
                              SweepCache<T>* cache = nullptr) {
    if (dir == SweepDirection::kVertical)
        return sweep_vertical_forward(grid, fwd, bwd, cell, exec, cache);
    Tensor<T> tgrid = permute(grid, {1, 0, 2});
    Tensor<T> tout = sweep_vertical_forward(tgrid, fwd, bwd, cell, exec, cache);
    return permute(tout, {1, 0, 2});
}

template <typename T>
void renet_sweep_backward(const SweepCache<T>& cache, SweepDirection dir, const DirParams<T>& fwd,
                          const DirParams<T>& bwd, CellKind cell, const Tensor<T>& dout,
                          Tensor<T>* dgrid, DirParams<T>* dfwd, DirParams<T>* dbwd) {
    if (dir == SweepDirection::kVertical) {
        sweep_vertical_backward(cache, fwd, bwd, cell, dout, dgrid, dfwd, dbwd);
        return;
    }
    Tensor<T> tdout = permute(dout, {1, 0, 2});
    Tensor<T> tdgrid(cache.grid.shape(), T(0));
    sweep_vertical_backward(cache, fwd, bwd, cell, tdout, dgrid ? &tdgrid : nullptr, dfwd, dbwd);
    if (dgrid) {
        Tensor<T> back = permute(tdgrid, {1, 0, 2});
        for (std::size_t i = 0; i < back.size(); ++i) (*dgrid)[i] += back[i];
    }
}

// ---------------------------------------------------------------------------
// layer + group configuration

template <typename T>
struct ReNetLayerConfig {
    SweepDirection direction = SweepDirection::kVertical;
    std::size_t patch_s = 1, patch_t = 1;
    std::size_t hidden = 0;
    CellKind cell = CellKind::kLstm;
    DirParams<T> fwd, bwd;  // independent weights per direction
};

/// Two stacked sweeps with orthogonal directions (vertical first, matching
/// the group's layer naming), the second always over 1x1 patches of the
/// first's output grid.
template <typename T>
struct ReNetGroupConfig {
    ReNetLayerConfig<T> vertical;    // consumes the s x t patch grid
    ReNetLayerConfig<T> horizontal;  // consumes the vertical output, patch 1x1

    static ReNetGroupConfig zeros(std::size_t in_channels, std::size_t s, std::size_t t,
                                  std::size_t d1, std::size_t d2, CellKind cell) {
        ReNetGroupConfig cfg;
        cfg.vertical = {SweepDirection::kVertical, s, t, d1, cell,
                        DirParams<T>::zeros(cell, d1, in_channels * s * t),
                        DirParams<T>::zeros(cell, d1, in_channels * s * t)};
        cfg.horizontal = {SweepDirection::kHorizontal, 1, 1, d2, cell,
                          DirParams<T>::zeros(cell, d2, 2 * d1),
                          DirParams<T>::zeros(cell, d2, 2 * d1)};
        return cfg;
    }
};

/// Whole-group forward on a [C,H,W] map: patch grid, vertical sweep,
/// horizontal sweep, output as a [2*d2, ceil(H/s), ceil(W/t)] map.
template <typename T>
Tensor<T> renet_group_forward(const Tensor<T>& map, const ReNetGroupConfig<T>& cfg,
                              const SweepExec& exec = {}) {
    Tensor<T> grid = patch_grid_forward(map, cfg.vertical.patch_s, cfg.vertical.patch_t);
    Tensor<T> v = renet_sweep_forward(grid, SweepDirection::kVertical, cfg.vertical.fwd,
                                      cfg.vertical.bwd, cfg.vertical.cell, exec);
    Tensor<T> h = renet_sweep_forward(v, SweepDirection::kHorizontal, cfg.horizontal.fwd,
                                      cfg.horizontal.bwd, cfg.horizontal.cell, exec);
    return permute(h, {2, 0, 1});
}

}  // namespace renseg
