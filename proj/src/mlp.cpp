#include "gsflow/mlp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#if defined(__AVX512F__)
#include <immintrin.h>
#define GSFLOW_HAVE_AVX512 1
#else
#define GSFLOW_HAVE_AVX512 0
#endif

namespace gsflow {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

Eigen::MatrixXd apply_activation(Activation act, const Eigen::MatrixXd& z) {
    if (act == Activation::relu) return z.cwiseMax(0.0);
    return z.unaryExpr([](double v) { return gelu(v); });
}

Eigen::MatrixXd activation_grad(Activation act, const Eigen::MatrixXd& z) {
    if (act == Activation::relu)
        return (z.array() > 0.0).cast<double>().matrix();
    return z.unaryExpr([](double v) { return gelu_grad(v); });
}

}  // namespace

Mlp Mlp::make(const std::vector<int>& dims, Activation act, RandomStream& rng) {
    if (dims.size() < 2) throw std::invalid_argument("Mlp::make: need at least in and out dims");
    Mlp net;
    net.hidden_activation = act;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l];
        const int out = dims[l + 1];
        if (in <= 0 || out <= 0) throw std::invalid_argument("Mlp::make: non-positive layer dim");
        ParamTensor w = ParamTensor::zeros({out, in});
        ParamTensor b = ParamTensor::zeros({out});
        const double lim = std::sqrt(1.0 / in);
        for (int i = 0; i < w.size(); ++i) w.values[i] = rng.uniform(-lim, lim);
        for (int i = 0; i < b.size(); ++i) b.values[i] = rng.uniform(-lim, lim);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

std::vector<ParamTensor*> Mlp::params() {
    std::vector<ParamTensor*> out;
    for (int l = 0; l < num_layers(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

std::vector<const ParamTensor*> Mlp::params() const {
    std::vector<const ParamTensor*> out;
    for (int l = 0; l < num_layers(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

void Mlp::zero_grad() {
    for (auto* p : params()) p->zero_grad();
}

namespace {

/// Grow-only scratch matrices; repeated same-shape calls never reallocate.
template <class M>
Eigen::Block<M> grab(M& pool, long rows, long cols) {
    if (pool.rows() < rows || pool.cols() < cols)
        pool.resize(std::max(pool.rows(), rows), std::max(pool.cols(), cols));
    return pool.topLeftCorner(rows, cols);
}

thread_local Eigen::MatrixXd tl_fwd_a, tl_fwd_b;

}  // namespace

namespace {
thread_local Eigen::MatrixXf tl_ffwd_a, tl_ffwd_b;

#if GSFLOW_HAVE_AVX512

// Fused forward for 3-layer relu nets with small fan-in/out and a hidden
// width of 16..64 lanes. Columns are independent and each column accumulates
// in a fixed ascending-k order, so results do not depend on the tile width.
struct FusedDims {
    int d_in, H, d_out;
};

template <int COLS, int HB>
inline void fused3_tile_f(const FusedDims& d, const float* W1, const float* b1, const float* W2,
                          const float* b2, const float* w3t, const float* b3,
                          const float* const* u, float* const* out) {
    constexpr int H = HB * 16;
    alignas(64) float h1[COLS][H];
    alignas(64) float h2[COLS][H];
    const __m512 zero = _mm512_setzero_ps();
    __m512 acc[COLS][HB];

    for (int rb = 0; rb < HB; ++rb) {
        const __m512 bv = _mm512_loadu_ps(b1 + rb * 16);
        for (int j = 0; j < COLS; ++j) acc[j][rb] = bv;
    }
    for (int k = 0; k < d.d_in; ++k) {
        __m512 xv[COLS];
        for (int j = 0; j < COLS; ++j) xv[j] = _mm512_set1_ps(u[j][k]);
        const float* wcol = W1 + static_cast<long>(k) * H;
        for (int rb = 0; rb < HB; ++rb) {
            const __m512 wv = _mm512_loadu_ps(wcol + rb * 16);
            for (int j = 0; j < COLS; ++j) acc[j][rb] = _mm512_fmadd_ps(wv, xv[j], acc[j][rb]);
        }
    }
    for (int rb = 0; rb < HB; ++rb)
        for (int j = 0; j < COLS; ++j)
            _mm512_store_ps(h1[j] + rb * 16, _mm512_max_ps(acc[j][rb], zero));

    for (int rb = 0; rb < HB; ++rb) {
        const __m512 bv = _mm512_loadu_ps(b2 + rb * 16);
        for (int j = 0; j < COLS; ++j) acc[j][rb] = bv;
    }
    for (int k = 0; k < H; ++k) {
        __m512 xv[COLS];
        for (int j = 0; j < COLS; ++j) xv[j] = _mm512_set1_ps(h1[j][k]);
        const float* wcol = W2 + static_cast<long>(k) * H;
        for (int rb = 0; rb < HB; ++rb) {
            const __m512 wv = _mm512_loadu_ps(wcol + rb * 16);
            for (int j = 0; j < COLS; ++j) acc[j][rb] = _mm512_fmadd_ps(wv, xv[j], acc[j][rb]);
        }
    }
    for (int rb = 0; rb < HB; ++rb)
        for (int j = 0; j < COLS; ++j)
            _mm512_store_ps(h2[j] + rb * 16, _mm512_max_ps(acc[j][rb], zero));

    for (int j = 0; j < COLS; ++j) {
        for (int r = 0; r < d.d_out; ++r) {
            __m512 dot = _mm512_setzero_ps();
            const float* wrow = w3t + static_cast<long>(r) * H;
            for (int rb = 0; rb < HB; ++rb)
                dot = _mm512_fmadd_ps(_mm512_loadu_ps(wrow + rb * 16),
                                      _mm512_load_ps(h2[j] + rb * 16), dot);
            out[j][r] = b3[r] + _mm512_reduce_add_ps(dot);
        }
    }
}

template <int HB>
Eigen::MatrixXf fused3_forward_f_h(const FloatNet& net, const FusedDims& d,
                                   const Eigen::MatrixXf& input) {
    const long n = input.cols();
    Eigen::MatrixXf out(d.d_out, n);
    alignas(64) float w3t[8 * 64];
    for (int r = 0; r < d.d_out; ++r)
        for (int k = 0; k < d.H; ++k) w3t[r * d.H + k] = net.w[2](r, k);
    const float* W1 = net.w[0].data();
    const float* W2 = net.w[1].data();
    const float* b1 = net.b[0].data();
    const float* b2 = net.b[1].data();
    const float* b3 = net.b[2].data();
    const long stride = input.outerStride();
    long col = 0;
    for (; col + 4 <= n; col += 4) {
        const float* u[4] = {input.data() + col * stride, input.data() + (col + 1) * stride,
                             input.data() + (col + 2) * stride, input.data() + (col + 3) * stride};
        float* o[4] = {out.data() + col * d.d_out, out.data() + (col + 1) * d.d_out,
                       out.data() + (col + 2) * d.d_out, out.data() + (col + 3) * d.d_out};
        fused3_tile_f<4, HB>(d, W1, b1, W2, b2, w3t, b3, u, o);
    }
    for (; col < n; ++col) {
        const float* u[1] = {input.data() + col * stride};
        float* o[1] = {out.data() + col * d.d_out};
        fused3_tile_f<1, HB>(d, W1, b1, W2, b2, w3t, b3, u, o);
    }
    return out;
}

inline bool fused3_supported_f(const FloatNet& net, FusedDims& d) {
    if (net.act != Activation::relu || net.w.size() != 3) return false;
    d.d_in = static_cast<int>(net.w[0].cols());
    d.H = static_cast<int>(net.w[0].rows());
    d.d_out = static_cast<int>(net.w[2].rows());
    return net.w[1].rows() == d.H && net.w[1].cols() == d.H && net.w[2].cols() == d.H &&
           (d.H == 16 || d.H == 32 || d.H == 48 || d.H == 64) && d.d_in <= 32 && d.d_out <= 8;
}

Eigen::MatrixXf fused3_forward_f(const FloatNet& net, const FusedDims& d,
                                 const Eigen::MatrixXf& input) {
    switch (d.H / 16) {
        case 1: return fused3_forward_f_h<1>(net, d, input);
        case 2: return fused3_forward_f_h<2>(net, d, input);
        case 3: return fused3_forward_f_h<3>(net, d, input);
        default: return fused3_forward_f_h<4>(net, d, input);
    }
}

template <int COLS, int HB>
inline void fused3_tile_d(const FusedDims& d, const double* W1, const double* b1,
                          const double* W2, const double* b2, const double* w3t, const double* b3,
                          const double* const* u, double* const* out) {
    constexpr int H = HB * 8;
    alignas(64) double h1[COLS][H];
    alignas(64) double h2[COLS][H];
    const __m512d zero = _mm512_setzero_pd();
    __m512d acc[COLS][HB];

    for (int rb = 0; rb < HB; ++rb) {
        const __m512d bv = _mm512_loadu_pd(b1 + rb * 8);
        for (int j = 0; j < COLS; ++j) acc[j][rb] = bv;
    }
    for (int k = 0; k < d.d_in; ++k) {
        __m512d xv[COLS];
        for (int j = 0; j < COLS; ++j) xv[j] = _mm512_set1_pd(u[j][k]);
        const double* wcol = W1 + static_cast<long>(k) * H;
        for (int rb = 0; rb < HB; ++rb) {
            const __m512d wv = _mm512_loadu_pd(wcol + rb * 8);
            for (int j = 0; j < COLS; ++j) acc[j][rb] = _mm512_fmadd_pd(wv, xv[j], acc[j][rb]);
        }
    }
    for (int rb = 0; rb < HB; ++rb)
        for (int j = 0; j < COLS; ++j)
            _mm512_store_pd(h1[j] + rb * 8, _mm512_max_pd(acc[j][rb], zero));

    for (int rb = 0; rb < HB; ++rb) {
        const __m512d bv = _mm512_loadu_pd(b2 + rb * 8);
        for (int j = 0; j < COLS; ++j) acc[j][rb] = bv;
    }
    for (int k = 0; k < H; ++k) {
        __m512d xv[COLS];
        for (int j = 0; j < COLS; ++j) xv[j] = _mm512_set1_pd(h1[j][k]);
        const double* wcol = W2 + static_cast<long>(k) * H;
        for (int rb = 0; rb < HB; ++rb) {
            const __m512d wv = _mm512_loadu_pd(wcol + rb * 8);
            for (int j = 0; j < COLS; ++j) acc[j][rb] = _mm512_fmadd_pd(wv, xv[j], acc[j][rb]);
        }
    }
    for (int rb = 0; rb < HB; ++rb)
        for (int j = 0; j < COLS; ++j)
            _mm512_store_pd(h2[j] + rb * 8, _mm512_max_pd(acc[j][rb], zero));

    for (int j = 0; j < COLS; ++j) {
        for (int r = 0; r < d.d_out; ++r) {
            __m512d dot = _mm512_setzero_pd();
            const double* wrow = w3t + static_cast<long>(r) * H;
            for (int rb = 0; rb < HB; ++rb)
                dot = _mm512_fmadd_pd(_mm512_loadu_pd(wrow + rb * 8),
                                      _mm512_load_pd(h2[j] + rb * 8), dot);
            out[j][r] = b3[r] + _mm512_reduce_add_pd(dot);
        }
    }
}

template <int HB>
Eigen::MatrixXd fused3_forward_d_h(const Mlp& net, const FusedDims& d,
                                   const Eigen::MatrixXd& input) {
    const long n = input.cols();
    Eigen::MatrixXd out(d.d_out, n);
    alignas(64) double w3t[8 * 64];
    for (int r = 0; r < d.d_out; ++r)
        for (int k = 0; k < d.H; ++k) w3t[r * d.H + k] = net.weights[2].matrix()(r, k);
    const double* W1 = net.weights[0].values.data();
    const double* W2 = net.weights[1].values.data();
    const double* b1 = net.biases[0].values.data();
    const double* b2 = net.biases[1].values.data();
    const double* b3 = net.biases[2].values.data();
    const long stride = input.outerStride();
    long col = 0;
    for (; col + 2 <= n; col += 2) {
        const double* u[2] = {input.data() + col * stride, input.data() + (col + 1) * stride};
        double* o[2] = {out.data() + col * d.d_out, out.data() + (col + 1) * d.d_out};
        fused3_tile_d<2, HB>(d, W1, b1, W2, b2, w3t, b3, u, o);
    }
    for (; col < n; ++col) {
        const double* u[1] = {input.data() + col * stride};
        double* o[1] = {out.data() + col * d.d_out};
        fused3_tile_d<1, HB>(d, W1, b1, W2, b2, w3t, b3, u, o);
    }
    return out;
}

inline bool fused3_supported_d(const Mlp& net, FusedDims& d) {
    if (net.hidden_activation != Activation::relu || net.num_layers() != 3) return false;
    d.d_in = net.weights[0].cols();
    d.H = net.weights[0].rows();
    d.d_out = net.weights[2].rows();
    return net.weights[1].rows() == d.H && net.weights[1].cols() == d.H &&
           net.weights[2].cols() == d.H &&
           (d.H == 16 || d.H == 32 || d.H == 48 || d.H == 64) && d.d_in <= 32 && d.d_out <= 8;
}

Eigen::MatrixXd fused3_forward_d(const Mlp& net, const FusedDims& d,
                                 const Eigen::MatrixXd& input) {
    switch (d.H / 8) {
        case 2: return fused3_forward_d_h<2>(net, d, input);
        case 4: return fused3_forward_d_h<4>(net, d, input);
        case 6: return fused3_forward_d_h<6>(net, d, input);
        default: return fused3_forward_d_h<8>(net, d, input);
    }
}

#endif  // GSFLOW_HAVE_AVX512
}  // namespace

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& input, MlpCache* cache) {
    if (input.rows() != net.in_dim())
        throw std::invalid_argument("mlp_forward: input dim does not match first layer");
    const int L = net.num_layers();
    const long n = input.cols();
    if (cache) {
        // slots are assigned, not re-pushed, so matrices keep their storage
        // across repeated same-shape calls
        cache->inputs.resize(L);
        cache->preacts.resize(L - 1);
        cache->live = true;
        cache->inputs[0] = input;
        Eigen::MatrixXd out;
        for (int l = 0; l < L; ++l) {
            Eigen::MatrixXd& z = l + 1 < L ? cache->preacts[l] : out;
            z.resize(net.weights[l].rows(), n);
            z.noalias() = net.weights[l].matrix() * cache->inputs[l];
            z.colwise() += Eigen::Map<const Eigen::VectorXd>(net.biases[l].values.data(),
                                                             net.biases[l].size());
            if (l + 1 < L) {
                Eigen::MatrixXd& a = cache->inputs[l + 1];
                if (net.hidden_activation == Activation::relu)
                    a = z.cwiseMax(0.0);
                else
                    a = z.unaryExpr([](double v) { return gelu(v); });
            }
        }
        return out;
    }
    // cache-free inference path
#if GSFLOW_HAVE_AVX512
    if (FusedDims fd; fused3_supported_d(net, fd)) return fused3_forward_d(net, fd, input);
#endif
    // generic fallback: ping-pong through pooled scratch with the bias and
    // activation fused into one traversal
    auto cur = grab(tl_fwd_a, input.rows(), n);
    cur = input;
    bool in_a = true;
    for (int l = 0; l < L; ++l) {
        const long out_rows = net.weights[l].rows();
        auto src = in_a ? tl_fwd_a.topLeftCorner(net.weights[l].cols(), n)
                        : tl_fwd_b.topLeftCorner(net.weights[l].cols(), n);
        auto dst = in_a ? grab(tl_fwd_b, out_rows, n) : grab(tl_fwd_a, out_rows, n);
        dst.noalias() = net.weights[l].matrix() * src;
        const Eigen::Map<const Eigen::VectorXd> bias(net.biases[l].values.data(),
                                                     net.biases[l].size());
        if (l + 1 < L) {
            if (net.hidden_activation == Activation::relu)
                dst = (dst.colwise() + bias).cwiseMax(0.0);
            else
                dst = (dst.colwise() + bias).unaryExpr([](double v) { return gelu(v); });
        } else {
            dst.colwise() += bias;
        }
        in_a = !in_a;
    }
    return in_a ? tl_fwd_a.topLeftCorner(net.out_dim(), n)
                : tl_fwd_b.topLeftCorner(net.out_dim(), n);
}

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& input, MlpCache* cache) {
    return mlp_forward(net, Eigen::MatrixXd(input), cache).col(0);
}

namespace {

Eigen::MatrixXd backward_impl(const Mlp& cnet, Mlp* accum_net, const MlpCache& cache,
                              const Eigen::MatrixXd& upstream_grad) {
    if (!cache.live) throw std::logic_error("mlp_backward: no live forward cache");
    const int L = cnet.num_layers();
    if (upstream_grad.rows() != cnet.out_dim())
        throw std::invalid_argument("mlp_backward: upstream grad dim mismatch");

    Eigen::MatrixXd dz = upstream_grad;
    for (int l = L - 1; l >= 0; --l) {
        if (accum_net) {
            accum_net->weights[l].grad_matrix().noalias() += dz * cache.inputs[l].transpose();
            accum_net->biases[l].grad += dz.rowwise().sum();
        }
        Eigen::MatrixXd da = cnet.weights[l].matrix().transpose() * dz;
        if (l > 0) {
            dz = da.cwiseProduct(activation_grad(cnet.hidden_activation, cache.preacts[l - 1]));
        } else {
            return da;
        }
    }
    return {};
}

}  // namespace

Eigen::MatrixXd mlp_backward(Mlp& net, const MlpCache& cache, const Eigen::MatrixXd& upstream_grad,
                             bool accumulate_params) {
    return backward_impl(net, accumulate_params ? &net : nullptr, cache, upstream_grad);
}

Eigen::MatrixXd mlp_backward_input_only(const Mlp& net, const MlpCache& cache,
                                        const Eigen::MatrixXd& upstream_grad) {
    return backward_impl(net, nullptr, cache, upstream_grad);
}

FloatNet FloatNet::snapshot(const Mlp& net) {
    FloatNet f;
    f.act = net.hidden_activation;
    for (int l = 0; l < net.num_layers(); ++l) {
        f.w.push_back(net.weights[l].matrix().cast<float>());
        f.b.push_back(Eigen::VectorXd(net.biases[l].values).cast<float>());
    }
    return f;
}

Eigen::MatrixXf FloatNet::forward(const Eigen::MatrixXf& input) const {
#if GSFLOW_HAVE_AVX512
    if (FusedDims fd; fused3_supported_f(*this, fd)) return fused3_forward_f(*this, fd, input);
#endif
    const int L = static_cast<int>(w.size());
    const long n = input.cols();
    auto cur = grab(tl_ffwd_a, input.rows(), n);
    cur = input;
    bool in_a = true;
    for (int l = 0; l < L; ++l) {
        const long out_rows = w[l].rows();
        auto src = in_a ? tl_ffwd_a.topLeftCorner(w[l].cols(), n)
                        : tl_ffwd_b.topLeftCorner(w[l].cols(), n);
        auto dst = in_a ? grab(tl_ffwd_b, out_rows, n) : grab(tl_ffwd_a, out_rows, n);
        dst.noalias() = w[l] * src;
        if (l + 1 < L) {
            if (act == Activation::relu)
                dst = (dst.colwise() + b[l]).cwiseMax(0.0f);
            else
                dst = (dst.colwise() + b[l]).unaryExpr([](float v) {
                    return static_cast<float>(gelu(v));
                });
        } else {
            dst.colwise() += b[l];
        }
        in_a = !in_a;
    }
    return in_a ? tl_ffwd_a.topLeftCorner(w.back().rows(), n)
                : tl_ffwd_b.topLeftCorner(w.back().rows(), n);
}

}  // namespace gsflow
