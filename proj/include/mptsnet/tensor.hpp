#pragma once

// Minimal dense-tensor engine with reverse-mode automatic differentiation.
// Scalar type is a template parameter: float for training, double for
// finite-difference gradient checks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mptsnet/errors.hpp"

namespace mptsnet {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

/// Dense row-major tensor handle with shared storage. Copying a TensorT
/// copies the handle, not the data; gradients accumulate in place.
template <typename S>
class TensorT {
    struct Storage {
        Shape shape;
        std::vector<S> value;
        std::vector<S> grad;  // allocated lazily, same length as value
        bool requires_grad = false;
    };
    std::shared_ptr<Storage> d_;

public:
    TensorT() = default;

    explicit TensorT(Shape shape, S fill = S(0), bool requires_grad = false)
        : d_(std::make_shared<Storage>()) {
        d_->shape = std::move(shape);
        d_->value.assign(numel(d_->shape), fill);
        d_->requires_grad = requires_grad;
    }

    TensorT(Shape shape, std::vector<S> values, bool requires_grad = false)
        : d_(std::make_shared<Storage>()) {
        if (numel(shape) != values.size())
            throw ShapeError("tensor init: " + shape_str(shape) + " does not hold " +
                             std::to_string(values.size()) + " values");
        d_->shape = std::move(shape);
        d_->value = std::move(values);
        d_->requires_grad = requires_grad;
    }

    static TensorT scalar(S v) { return TensorT({1}, std::vector<S>{v}); }

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    std::size_t rank() const { return d_->shape.size(); }
    std::size_t size() const { return d_->value.size(); }

    std::vector<S>& value() { return d_->value; }
    const std::vector<S>& value() const { return d_->value; }
    S* data() { return d_->value.data(); }
    const S* data() const { return d_->value.data(); }

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool rg) { d_->requires_grad = rg; }

    bool has_grad() const { return !d_->grad.empty(); }
    std::vector<S>& grad() {
        ensure_grad();
        return d_->grad;
    }
    const std::vector<S>& grad() const { return d_->grad; }
    void ensure_grad() {
        if (d_->grad.size() != d_->value.size()) d_->grad.assign(d_->value.size(), S(0));
    }
    void zero_grad() {
        if (!d_->grad.empty()) d_->grad.assign(d_->value.size(), S(0));
    }

    S item() const {
        if (size() != 1) throw UsageError("item() on non-scalar tensor " + shape_str(shape()));
        return d_->value[0];
    }

    // flat offset of a multi-index, row-major
    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        std::size_t off = 0, i = 0;
        for (std::size_t v : idx) off = off * d_->shape[i++] + v;
        return off;
    }
    S at(std::initializer_list<std::size_t> idx) const { return d_->value[offset(idx)]; }

    bool same_storage(const TensorT& other) const { return d_ == other.d_; }
};

/// Records backward rules in execution order; execution order is a
/// topological order of the graph, so backward just replays in reverse.
/// One tape per loss; backward() consumes the recorded steps.
template <typename S>
class TapeT {
    std::vector<std::function<void()>> steps_;
    inline static thread_local TapeT* active_ = nullptr;

public:
    class Scope {
        TapeT* prev_;

    public:
        explicit Scope(TapeT& tape) : prev_(active_) { active_ = &tape; }
        ~Scope() { active_ = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;
    };

    static TapeT* active() { return active_; }

    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }
    std::size_t size() const { return steps_.size(); }

    void backward(TensorT<S> loss) {
        if (loss.size() != 1)
            throw UsageError("backward requires a scalar loss, got " + shape_str(loss.shape()));
        loss.ensure_grad();
        loss.grad()[0] += S(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
        steps_.clear();
    }
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

namespace detail {

// Strides of `shape` inside the index space of `out_shape` under the
// trailing-dimension broadcast rule; 0 stride on broadcast axes.
inline std::vector<std::size_t> broadcast_strides(const Shape& out_shape, const Shape& shape,
                                                  const char* op) {
    if (shape.size() > out_shape.size())
        throw ShapeError(std::string(op) + ": operand " + shape_str(shape) +
                         " has higher rank than " + shape_str(out_shape));
    std::vector<std::size_t> natural(shape.size());
    std::size_t acc = 1;
    for (std::size_t d = shape.size(); d-- > 0;) {
        natural[d] = acc;
        acc *= shape[d];
    }
    std::vector<std::size_t> strides(out_shape.size(), 0);
    std::size_t off = out_shape.size() - shape.size();
    for (std::size_t d = 0; d < shape.size(); ++d) {
        if (shape[d] == out_shape[off + d]) {
            strides[off + d] = natural[d];
        } else if (shape[d] == 1) {
            strides[off + d] = 0;
        } else {
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(shape) +
                             " onto " + shape_str(out_shape));
        }
    }
    return strides;
}

// Visit every flat position of `shape`, carrying a second offset driven by
// (possibly zero) strides. f(flat_index, strided_offset).
template <typename F>
void for_each_strided(const Shape& shape, const std::vector<std::size_t>& strides, F&& f) {
    const std::size_t n = numel(shape);
    if (n == 0) return;
    std::vector<std::size_t> idx(shape.size(), 0);
    std::size_t off = 0;
    for (std::size_t i = 0; i < n; ++i) {
        f(i, off);
        for (std::size_t d = shape.size(); d-- > 0;) {
            ++idx[d];
            off += strides[d];
            if (idx[d] < shape[d]) break;
            off -= strides[d] * shape[d];
            idx[d] = 0;
        }
    }
}

template <typename S>
bool tracing(const TensorT<S>& t) {
    return TapeT<S>::active() != nullptr && t.requires_grad();
}

template <typename S, typename... Ts>
bool any_tracing(const TensorT<S>& t, const Ts&... rest) {
    if constexpr (sizeof...(rest) == 0) return tracing(t);
    else return tracing(t) || any_tracing(rest...);
}

// outer/inner decomposition around one axis
struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};
inline AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
    if (axis >= shape.size())
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(shape));
    AxisSplit s;
    for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
    s.n = shape[axis];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops (b broadcastable onto a by the trailing-dimension rule)
// ---------------------------------------------------------------------------

template <typename S, typename Fwd, typename Bwd>
TensorT<S> elementwise_binary(const TensorT<S>& a, const TensorT<S>& b, const char* name, Fwd fwd,
                              Bwd bwd) {
    auto bstride = detail::broadcast_strides(a.shape(), b.shape(), name);
    TensorT<S> out(a.shape());
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    detail::for_each_strided(a.shape(), bstride, [&](std::size_t i, std::size_t j) {
        po[i] = fwd(pa[i], pb[j]);
    });
    if (detail::any_tracing(a, b)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable { bwd(a, b, out, bstride); });
    }
    return out;
}

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    return elementwise_binary<S>(
        a, b, "add", [](S x, S y) { return x + y; },
        [](TensorT<S> a, TensorT<S> b, TensorT<S> out, const std::vector<std::size_t>& bstride) {
            const S* g = out.grad().data();
            if (a.requires_grad()) {
                S* ga = a.grad().data();
                for (std::size_t i = 0; i < out.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                S* gb = b.grad().data();
                detail::for_each_strided(out.shape(), bstride,
                                         [&](std::size_t i, std::size_t j) { gb[j] += g[i]; });
            }
        });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
    return elementwise_binary<S>(
        a, b, "sub", [](S x, S y) { return x - y; },
        [](TensorT<S> a, TensorT<S> b, TensorT<S> out, const std::vector<std::size_t>& bstride) {
            const S* g = out.grad().data();
            if (a.requires_grad()) {
                S* ga = a.grad().data();
                for (std::size_t i = 0; i < out.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                S* gb = b.grad().data();
                detail::for_each_strided(out.shape(), bstride,
                                         [&](std::size_t i, std::size_t j) { gb[j] -= g[i]; });
            }
        });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    return elementwise_binary<S>(
        a, b, "mul", [](S x, S y) { return x * y; },
        [](TensorT<S> a, TensorT<S> b, TensorT<S> out, const std::vector<std::size_t>& bstride) {
            const S* g = out.grad().data();
            const S* pa = a.value().data();
            const S* pb = b.value().data();
            if (a.requires_grad()) {
                S* ga = a.grad().data();
                detail::for_each_strided(out.shape(), bstride, [&](std::size_t i, std::size_t j) {
                    ga[i] += g[i] * pb[j];
                });
            }
            if (b.requires_grad()) {
                S* gb = b.grad().data();
                detail::for_each_strided(out.shape(), bstride, [&](std::size_t i, std::size_t j) {
                    gb[j] += g[i] * pa[i];
                });
            }
        });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, S c) {
    TensorT<S> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * c;
    if (detail::tracing(a)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            S* ga = a.grad().data();
            const S* g = out.grad().data();
            for (std::size_t i = 0; i < out.size(); ++i) ga[i] += g[i] * c;
        });
    }
    return out;
}

template <typename S>
TensorT<S> operator+(const TensorT<S>& a, const TensorT<S>& b) { return add(a, b); }
template <typename S>
TensorT<S> operator-(const TensorT<S>& a, const TensorT<S>& b) { return sub(a, b); }
template <typename S>
TensorT<S> operator*(const TensorT<S>& a, const TensorT<S>& b) { return mul(a, b); }
template <typename S>
TensorT<S> operator*(const TensorT<S>& a, S c) { return mul(a, c); }

// ---------------------------------------------------------------------------
// matmul: a[..,m,n] x b[..,n,p] with numpy-style broadcast on batch dims
// ---------------------------------------------------------------------------

namespace detail {

struct MatmulPlan {
    Shape out_shape;        // batch -..- m, p
    Shape batch;            // broadcast batch shape
    std::vector<std::size_t> astride, bstride;  // batch-cell strides (in matrices)
    std::size_t m = 0, n = 0, p = 0;
};

inline MatmulPlan plan_matmul(const Shape& ashape, const Shape& bshape) {
    if (ashape.size() < 2 || bshape.size() < 2)
        throw ShapeError("matmul: operands must have rank >= 2, got " + shape_str(ashape) +
                         " and " + shape_str(bshape));
    MatmulPlan pl;
    pl.m = ashape[ashape.size() - 2];
    pl.n = ashape[ashape.size() - 1];
    pl.p = bshape[bshape.size() - 1];
    if (bshape[bshape.size() - 2] != pl.n)
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(ashape) + " x " +
                         shape_str(bshape));
    Shape abatch(ashape.begin(), ashape.end() - 2);
    Shape bbatch(bshape.begin(), bshape.end() - 2);
    const std::size_t brank = std::max(abatch.size(), bbatch.size());
    Shape batch(brank, 1);
    for (std::size_t d = 0; d < brank; ++d) {
        std::size_t ae = d < brank - abatch.size() ? 1 : abatch[d - (brank - abatch.size())];
        std::size_t be = d < brank - bbatch.size() ? 1 : bbatch[d - (brank - bbatch.size())];
        if (ae != be && ae != 1 && be != 1)
            throw ShapeError("matmul: batch dimensions disagree: " + shape_str(ashape) + " x " +
                             shape_str(bshape));
        batch[d] = std::max(ae, be);
    }
    pl.batch = batch;
    pl.astride = broadcast_strides(batch, abatch, "matmul");
    pl.bstride = broadcast_strides(batch, bbatch, "matmul");
    pl.out_shape = batch;
    pl.out_shape.push_back(pl.m);
    pl.out_shape.push_back(pl.p);
    return pl;
}

}  // namespace detail

template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    auto pl = detail::plan_matmul(a.shape(), b.shape());
    TensorT<S> out(pl.out_shape);
    const std::size_t m = pl.m, n = pl.n, p = pl.p;
    const std::size_t asz = m * n, bsz = n * p, osz = m * p;
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    // two strided offsets are needed, so run the odometer manually
    {
        const std::size_t cells = numel(pl.batch);
        std::vector<std::size_t> idx(pl.batch.size(), 0);
        std::size_t aoff = 0, boff = 0;
        for (std::size_t cell = 0; cell < cells; ++cell) {
            const S* A = pa + aoff * asz;
            const S* B = pb + boff * bsz;
            S* O = po + cell * osz;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t k = 0; k < n; ++k) {
                    const S aik = A[i * n + k];
                    const S* Bk = B + k * p;
                    S* Oi = O + i * p;
                    for (std::size_t j = 0; j < p; ++j) Oi[j] += aik * Bk[j];
                }
            }
            for (std::size_t d = pl.batch.size(); d-- > 0;) {
                ++idx[d];
                aoff += pl.astride[d];
                boff += pl.bstride[d];
                if (idx[d] < pl.batch[d]) break;
                aoff -= pl.astride[d] * pl.batch[d];
                boff -= pl.bstride[d] * pl.batch[d];
                idx[d] = 0;
            }
        }
    }
    if (detail::any_tracing(a, b)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            const std::size_t cells = numel(pl.batch);
            const S* G = out.grad().data();
            std::vector<std::size_t> idx(pl.batch.size(), 0);
            std::size_t aoff = 0, boff = 0;
            S* ga = a.requires_grad() ? a.grad().data() : nullptr;
            S* gb = b.requires_grad() ? b.grad().data() : nullptr;
            const S* pa2 = a.value().data();
            const S* pb2 = b.value().data();
            for (std::size_t c = 0; c < cells; ++c) {
                const S* Gc = G + c * osz;
                if (ga) {
                    // dA += dC . B^T
                    const S* B = pb2 + boff * bsz;
                    S* Ac = ga + aoff * asz;
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t k = 0; k < n; ++k) {
                            S acc = 0;
                            const S* Gi = Gc + i * p;
                            const S* Bk = B + k * p;
                            for (std::size_t j = 0; j < p; ++j) acc += Gi[j] * Bk[j];
                            Ac[i * n + k] += acc;
                        }
                }
                if (gb) {
                    // dB += A^T . dC
                    const S* A = pa2 + aoff * asz;
                    S* Bc = gb + boff * bsz;
                    for (std::size_t k = 0; k < n; ++k)
                        for (std::size_t i = 0; i < m; ++i) {
                            const S aik = A[i * n + k];
                            const S* Gi = Gc + i * p;
                            S* Bk = Bc + k * p;
                            for (std::size_t j = 0; j < p; ++j) Bk[j] += aik * Gi[j];
                        }
                }
                for (std::size_t d = pl.batch.size(); d-- > 0;) {
                    ++idx[d];
                    aoff += pl.astride[d];
                    boff += pl.bstride[d];
                    if (idx[d] < pl.batch[d]) break;
                    aoff -= pl.astride[d] * pl.batch[d];
                    boff -= pl.bstride[d] * pl.batch[d];
                    idx[d] = 0;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// conv1d: same-padded cross-correlation over the last axis
// x [cin,L] or [N,cin,L], w [cout,cin,ker] with ker odd, bias [cout] optional
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> conv1d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& bias) {
    if (w.rank() != 3) throw ShapeError("conv1d: weight must be [cout,cin,ker], got " + shape_str(w.shape()));
    const std::size_t cout = w.shape()[0], cin = w.shape()[1], ker = w.shape()[2];
    if (ker % 2 == 0) throw ConfigError("conv1d: kernel size must be odd, got " + std::to_string(ker));
    const bool batched = x.rank() == 3;
    if (!batched && x.rank() != 2)
        throw ShapeError("conv1d: input must be [cin,L] or [N,cin,L], got " + shape_str(x.shape()));
    const std::size_t N = batched ? x.shape()[0] : 1;
    const std::size_t xc = batched ? x.shape()[1] : x.shape()[0];
    const std::size_t L = batched ? x.shape()[2] : x.shape()[1];
    if (xc != cin)
        throw ShapeError("conv1d: input channels " + std::to_string(xc) + " != weight cin " +
                         std::to_string(cin));
    if (bias.defined() && (bias.rank() != 1 || bias.shape()[0] != cout))
        throw ShapeError("conv1d: bias must be [cout]");
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(ker / 2);

    Shape out_shape = batched ? Shape{N, cout, L} : Shape{cout, L};
    TensorT<S> out(out_shape);
    const S* px = x.data();
    const S* pw = w.data();
    S* po = out.data();
    for (std::size_t nidx = 0; nidx < N; ++nidx) {
        const S* xn = px + nidx * cin * L;
        S* on = po + nidx * cout * L;
        for (std::size_t co = 0; co < cout; ++co) {
            S* orow = on + co * L;
            if (bias.defined()) {
                const S b = bias.data()[co];
                for (std::size_t t = 0; t < L; ++t) orow[t] = b;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const S* xrow = xn + ci * L;
                const S* wrow = pw + (co * cin + ci) * ker;
                for (std::size_t dk = 0; dk < ker; ++dk) {
                    const S wv = wrow[dk];
                    if (wv == S(0)) continue;
                    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(dk) - pad;
                    const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                    const std::size_t t1 =
                        shift > 0 ? L - static_cast<std::size_t>(shift) : L;
                    for (std::size_t t = t0; t < t1; ++t)
                        orow[t] += wv * xrow[static_cast<std::size_t>(
                                       static_cast<std::ptrdiff_t>(t) + shift)];
                }
            }
        }
    }
    if (detail::any_tracing(x, w) || (bias.defined() && detail::tracing(bias))) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            const S* G = out.grad().data();
            const S* px2 = x.value().data();
            const S* pw2 = w.value().data();
            S* gx = x.requires_grad() ? x.grad().data() : nullptr;
            S* gw = w.requires_grad() ? w.grad().data() : nullptr;
            S* gb = bias.defined() && bias.requires_grad() ? bias.grad().data() : nullptr;
            for (std::size_t nidx = 0; nidx < N; ++nidx) {
                const S* Gn = G + nidx * cout * L;
                const S* xn = px2 + nidx * cin * L;
                for (std::size_t co = 0; co < cout; ++co) {
                    const S* grow = Gn + co * L;
                    if (gb) {
                        S acc = 0;
                        for (std::size_t t = 0; t < L; ++t) acc += grow[t];
                        gb[co] += acc;
                    }
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const S* xrow = xn + ci * L;
                        S* gxrow = gx ? gx + (nidx * cin + ci) * L : nullptr;
                        const S* wrow = pw2 + (co * cin + ci) * ker;
                        S* gwrow = gw ? gw + (co * cin + ci) * ker : nullptr;
                        for (std::size_t dk = 0; dk < ker; ++dk) {
                            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(dk) - pad;
                            const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                            const std::size_t t1 =
                                shift > 0 ? L - static_cast<std::size_t>(shift) : L;
                            if (gw) {
                                S acc = 0;
                                for (std::size_t t = t0; t < t1; ++t)
                                    acc += grow[t] * xrow[static_cast<std::size_t>(
                                               static_cast<std::ptrdiff_t>(t) + shift)];
                                gwrow[dk] += acc;
                            }
                            if (gx) {
                                const S wv = wrow[dk];
                                if (wv == S(0)) continue;
                                for (std::size_t t = t0; t < t1; ++t)
                                    gxrow[static_cast<std::size_t>(
                                        static_cast<std::ptrdiff_t>(t) + shift)] += wv * grow[t];
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// softmax along one axis, max-subtracted for stability
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> softmax(const TensorT<S>& x, std::size_t axis) {
    auto sp = detail::split_axis(x.shape(), axis, "softmax");
    TensorT<S> out(x.shape());
    const S* px = x.data();
    S* po = out.data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t in = 0; in < sp.inner; ++in) {
            const std::size_t base = o * sp.n * sp.inner + in;
            S mx = px[base];
            for (std::size_t i = 1; i < sp.n; ++i)
                mx = std::max(mx, px[base + i * sp.inner]);
            S denom = 0;
            for (std::size_t i = 0; i < sp.n; ++i) {
                const S e = std::exp(px[base + i * sp.inner] - mx);
                po[base + i * sp.inner] = e;
                denom += e;
            }
            for (std::size_t i = 0; i < sp.n; ++i) po[base + i * sp.inner] /= denom;
        }
    }
    if (detail::tracing(x)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            const S* y = out.value().data();
            const S* g = out.grad().data();
            S* gx = x.grad().data();
            for (std::size_t o = 0; o < sp.outer; ++o) {
                for (std::size_t in = 0; in < sp.inner; ++in) {
                    const std::size_t base = o * sp.n * sp.inner + in;
                    S dot = 0;
                    for (std::size_t i = 0; i < sp.n; ++i)
                        dot += g[base + i * sp.inner] * y[base + i * sp.inner];
                    for (std::size_t i = 0; i < sp.n; ++i) {
                        const std::size_t k = base + i * sp.inner;
                        gx[k] += y[k] * (g[k] - dot);
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// mean along one axis (axis removed from the shape)
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> mean(const TensorT<S>& x, std::size_t axis) {
    auto sp = detail::split_axis(x.shape(), axis, "mean");
    Shape out_shape;
    for (std::size_t d = 0; d < x.rank(); ++d)
        if (d != axis) out_shape.push_back(x.shape()[d]);
    if (out_shape.empty()) out_shape.push_back(1);
    TensorT<S> out(out_shape);
    const S* px = x.data();
    S* po = out.data();
    const S inv = S(1) / static_cast<S>(sp.n);
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
            S acc = 0;
            const std::size_t base = o * sp.n * sp.inner + in;
            for (std::size_t i = 0; i < sp.n; ++i) acc += px[base + i * sp.inner];
            po[o * sp.inner + in] = acc * inv;
        }
    if (detail::tracing(x)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            const S* g = out.grad().data();
            S* gx = x.grad().data();
            for (std::size_t o = 0; o < sp.outer; ++o)
                for (std::size_t in = 0; in < sp.inner; ++in) {
                    const S gv = g[o * sp.inner + in] * inv;
                    const std::size_t base = o * sp.n * sp.inner + in;
                    for (std::size_t i = 0; i < sp.n; ++i) gx[base + i * sp.inner] += gv;
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> reshape(const TensorT<S>& x, Shape new_shape) {
    if (numel(new_shape) != x.size())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(new_shape) +
                         " changes element count");
    TensorT<S> out(std::move(new_shape), x.value());
    if (detail::tracing(x)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            const S* g = out.grad().data();
            S* gx = x.grad().data();
            for (std::size_t i = 0; i < out.size(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

template <typename S>
TensorT<S> permute(const TensorT<S>& x, const std::vector<std::size_t>& axes) {
    if (axes.size() != x.rank())
        throw ShapeError("permute: axes size " + std::to_string(axes.size()) +
                         " != rank of " + shape_str(x.shape()));
    std::vector<bool> seen(x.rank(), false);
    Shape out_shape(x.rank());
    for (std::size_t d = 0; d < x.rank(); ++d) {
        if (axes[d] >= x.rank() || seen[axes[d]])
            throw ShapeError("permute: invalid axes for " + shape_str(x.shape()));
        seen[axes[d]] = true;
        out_shape[d] = x.shape()[axes[d]];
    }
    // out multi-index i -> x offset via permuted strides
    std::vector<std::size_t> xstride(x.rank());
    std::size_t acc = 1;
    for (std::size_t d = x.rank(); d-- > 0;) {
        xstride[d] = acc;
        acc *= x.shape()[d];
    }
    std::vector<std::size_t> ostride(x.rank());
    for (std::size_t d = 0; d < x.rank(); ++d) ostride[d] = xstride[axes[d]];
    TensorT<S> out(out_shape);
    const S* px = x.data();
    S* po = out.data();
    detail::for_each_strided(out_shape, ostride,
                             [&](std::size_t i, std::size_t j) { po[i] = px[j]; });
    if (detail::tracing(x)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            const S* g = out.grad().data();
            S* gx = x.grad().data();
            detail::for_each_strided(out.shape(), ostride,
                                     [&](std::size_t i, std::size_t j) { gx[j] += g[i]; });
        });
    }
    return out;
}

template <typename S>
TensorT<S> concat(const std::vector<TensorT<S>>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& ref = parts[0].shape();
    if (axis >= ref.size()) throw ShapeError("concat: axis out of range");
    std::size_t total = 0;
    for (const auto& t : parts) {
        if (t.rank() != ref.size()) throw ShapeError("concat: rank mismatch");
        for (std::size_t d = 0; d < ref.size(); ++d)
            if (d != axis && t.shape()[d] != ref[d])
                throw ShapeError("concat: shapes disagree off the concat axis");
        total += t.shape()[axis];
    }
    Shape out_shape = ref;
    out_shape[axis] = total;
    TensorT<S> out(out_shape);
    auto sp = detail::split_axis(out_shape, axis, "concat");
    S* po = out.data();
    std::size_t at = 0;
    bool track = false;
    for (const auto& t : parts) track = track || detail::tracing(t);
    std::vector<std::size_t> offsets;
    for (const auto& t : parts) {
        offsets.push_back(at);
        const std::size_t n_t = t.shape()[axis];
        const S* pt = t.data();
        for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t i = 0; i < n_t; ++i)
                for (std::size_t in = 0; in < sp.inner; ++in)
                    po[(o * sp.n + at + i) * sp.inner + in] =
                        pt[(o * n_t + i) * sp.inner + in];
        at += n_t;
    }
    if (track) {
        out.set_requires_grad(true);
        auto parts_copy = parts;
        TapeT<S>::active()->record([=]() mutable {
            const S* g = out.grad().data();
            for (std::size_t pi = 0; pi < parts_copy.size(); ++pi) {
                auto& t = parts_copy[pi];
                if (!t.requires_grad()) continue;
                const std::size_t n_t = t.shape()[axis];
                const std::size_t base = offsets[pi];
                S* gt = t.grad().data();
                for (std::size_t o = 0; o < sp.outer; ++o)
                    for (std::size_t i = 0; i < n_t; ++i)
                        for (std::size_t in = 0; in < sp.inner; ++in)
                            gt[(o * n_t + i) * sp.inner + in] +=
                                g[(o * sp.n + base + i) * sp.inner + in];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// gelu (exact erf form)
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> gelu(const TensorT<S>& x) {
    static const S inv_sqrt2 = static_cast<S>(0.70710678118654752440);
    static const S inv_sqrt2pi = static_cast<S>(0.39894228040143267794);
    TensorT<S> out(x.shape());
    const S* px = x.data();
    S* po = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const S v = px[i];
        po[i] = S(0.5) * v * (S(1) + std::erf(v * inv_sqrt2));
    }
    if (detail::tracing(x)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            const S* px2 = x.value().data();
            const S* g = out.grad().data();
            S* gx = x.grad().data();
            for (std::size_t i = 0; i < x.size(); ++i) {
                const S v = px2[i];
                const S cdf = S(0.5) * (S(1) + std::erf(v * inv_sqrt2));
                const S pdf = inv_sqrt2pi * std::exp(S(-0.5) * v * v);
                gx[i] += g[i] * (cdf + v * pdf);
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// gather: out.flat[i] = map[i] >= 0 ? x.flat[map[i]] : 0
// One data-movement primitive backs segment reshape, timeline broadcast and
// column slicing; backward is scatter-add through the same map.
// ---------------------------------------------------------------------------

using IndexMap = std::shared_ptr<const std::vector<std::int64_t>>;

template <typename S>
TensorT<S> gather(const TensorT<S>& x, const IndexMap& map, Shape out_shape) {
    if (!map || map->size() != numel(out_shape))
        throw ShapeError("gather: index map does not match output shape " + shape_str(out_shape));
    TensorT<S> out(std::move(out_shape));
    const S* px = x.data();
    S* po = out.data();
    const auto& m = *map;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const std::int64_t src = m[i];
        po[i] = src >= 0 ? px[static_cast<std::size_t>(src)] : S(0);
    }
    if (detail::tracing(x)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            const S* g = out.grad().data();
            S* gx = x.grad().data();
            const auto& m2 = *map;
            for (std::size_t i = 0; i < m2.size(); ++i)
                if (m2[i] >= 0) gx[static_cast<std::size_t>(m2[i])] += g[i];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// cross-entropy with logits, mean over the batch, stable via log-sum-exp
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> cross_entropy_with_logits(const TensorT<S>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw ShapeError("cross_entropy: logits must be [B,C], got " + shape_str(logits.shape()));
    const std::size_t B = logits.shape()[0], C = logits.shape()[1];
    if (labels.size() != B)
        throw DataError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                        std::to_string(B));
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= C)
            throw DataError("cross_entropy: label " + std::to_string(y) + " outside [0," +
                            std::to_string(C) + ")");
    const S* pz = logits.data();
    S loss = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const S* row = pz + b * C;
        S mx = row[0];
        for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
        S denom = 0;
        for (std::size_t c = 0; c < C; ++c) denom += std::exp(row[c] - mx);
        loss += mx + std::log(denom) - row[static_cast<std::size_t>(labels[b])];
    }
    TensorT<S> out = TensorT<S>::scalar(loss / static_cast<S>(B));
    if (detail::tracing(logits)) {
        out.set_requires_grad(true);
        TapeT<S>::active()->record([=]() mutable {
            const S g = out.grad()[0] / static_cast<S>(B);
            const S* pz2 = logits.value().data();
            S* gz = logits.grad().data();
            for (std::size_t b = 0; b < B; ++b) {
                const S* row = pz2 + b * C;
                S mx = row[0];
                for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
                S denom = 0;
                for (std::size_t c = 0; c < C; ++c) denom += std::exp(row[c] - mx);
                for (std::size_t c = 0; c < C; ++c) {
                    S grad = std::exp(row[c] - mx) / denom;
                    if (c == static_cast<std::size_t>(labels[b])) grad -= S(1);
                    gz[b * C + c] += g * grad;
                }
            }
        });
    }
    return out;
}

}  // namespace mptsnet
