#include <immintrin.h>

#include <algorithm>

#include "cplab/kernels/api.hpp"

// AVX-512 backend, same tiling contract as the AVX2 one: 4-vector output
// tiles (64 columns), full-width loads into buffer slack, masked stores.

namespace cplab::kernels {
namespace {

constexpr int64_t VL = 16;

inline __mmask16 tail_mask(int64_t live) {
    return static_cast<__mmask16>((1u << live) - 1u);
}

template <int NV>
inline void conv_row_tile(const float* xpad, const float* weight, float bias_v, float* yrow,
                          const Conv3dDims& d, int64_t t, int64_t h, int64_t w0, int64_t cols,
                          int64_t co) {
    __m512 acc[NV];
    for (int v = 0; v < NV; ++v) acc[v] = _mm512_set1_ps(bias_v);
    for (int64_t ci = 0; ci < d.ci; ++ci) {
        for (int64_t kt = 0; kt < d.kt; ++kt) {
            for (int64_t kh = 0; kh < d.kh; ++kh) {
                const float* xrow =
                    xpad + ((ci * d.tp + t + kt) * d.hp + h + kh) * d.wp + w0;
                const float* wtap =
                    weight + (((co * d.ci + ci) * d.kt + kt) * d.kh + kh) * d.kw;
                for (int64_t kw = 0; kw < d.kw; ++kw) {
                    const __m512 wv = _mm512_set1_ps(wtap[kw]);
                    for (int v = 0; v < NV; ++v)
                        acc[v] = _mm512_fmadd_ps(wv, _mm512_loadu_ps(xrow + kw + v * VL), acc[v]);
                }
            }
        }
    }
    int64_t left = cols;
    for (int v = 0; v < NV; ++v, left -= VL) {
        if (left >= VL) {
            _mm512_storeu_ps(yrow + w0 + v * VL, acc[v]);
        } else if (left > 0) {
            _mm512_mask_storeu_ps(yrow + w0 + v * VL, tail_mask(left), acc[v]);
        }
    }
}

void conv3d_forward_avx512(const float* xpad, const float* weight, const float* bias, float* y,
                           const Conv3dDims& d) {
    for (int64_t t = 0; t < d.t; ++t) {
        for (int64_t h = 0; h < d.h; ++h) {
            for (int64_t co = 0; co < d.co; ++co) {
                float* yrow = y + ((co * d.t + t) * d.h + h) * d.w;
                const float b = bias ? bias[co] : 0.0f;
                for (int64_t w0 = 0; w0 < d.w; w0 += 4 * VL) {
                    const int64_t cols = std::min<int64_t>(4 * VL, d.w - w0);
                    switch ((cols + VL - 1) / VL) {
                        case 1: conv_row_tile<1>(xpad, weight, b, yrow, d, t, h, w0, cols, co); break;
                        case 2: conv_row_tile<2>(xpad, weight, b, yrow, d, t, h, w0, cols, co); break;
                        case 3: conv_row_tile<3>(xpad, weight, b, yrow, d, t, h, w0, cols, co); break;
                        default: conv_row_tile<4>(xpad, weight, b, yrow, d, t, h, w0, cols, co); break;
                    }
                }
            }
        }
    }
}

void conv3d_backward_weights_avx512(const float* xpad, const float* dy, float* dweight,
                                    const Conv3dDims& d) {
    if (d.kw > 8) {
        ref::conv3d_backward_weights<float>(xpad, dy, dweight, d);
        return;
    }
    const int64_t full = d.w / VL;
    const int64_t live = d.w - full * VL;
    const __mmask16 tmask = tail_mask(live);
    for (int64_t co = 0; co < d.co; ++co) {
        for (int64_t ci = 0; ci < d.ci; ++ci) {
            for (int64_t kt = 0; kt < d.kt; ++kt) {
                for (int64_t kh = 0; kh < d.kh; ++kh) {
                    __m512 acc[8];
                    for (int64_t kw = 0; kw < d.kw; ++kw) acc[kw] = _mm512_setzero_ps();
                    for (int64_t t = 0; t < d.t; ++t) {
                        for (int64_t h = 0; h < d.h; ++h) {
                            const float* dyrow = dy + ((co * d.t + t) * d.h + h) * d.w;
                            const float* xrow =
                                xpad + ((ci * d.tp + t + kt) * d.hp + h + kh) * d.wp;
                            for (int64_t v = 0; v < full; ++v) {
                                const __m512 dyv = _mm512_loadu_ps(dyrow + v * VL);
                                for (int64_t kw = 0; kw < d.kw; ++kw)
                                    acc[kw] = _mm512_fmadd_ps(
                                        dyv, _mm512_loadu_ps(xrow + v * VL + kw), acc[kw]);
                            }
                            if (live) {
                                const __m512 dyv = _mm512_maskz_loadu_ps(tmask, dyrow + full * VL);
                                for (int64_t kw = 0; kw < d.kw; ++kw)
                                    acc[kw] = _mm512_fmadd_ps(
                                        dyv, _mm512_loadu_ps(xrow + full * VL + kw), acc[kw]);
                            }
                        }
                    }
                    float* dwtap = dweight + (((co * d.ci + ci) * d.kt + kt) * d.kh + kh) * d.kw;
                    for (int64_t kw = 0; kw < d.kw; ++kw)
                        dwtap[kw] += _mm512_reduce_add_ps(acc[kw]);
                }
            }
        }
    }
}

void rowfma_avx512(float* y, const float* x, float a, int64_t n) {
    const __m512 av = _mm512_set1_ps(a);
    int64_t i = 0;
    for (; i + VL <= n; i += VL)
        _mm512_storeu_ps(y + i, _mm512_fmadd_ps(av, _mm512_loadu_ps(x + i), _mm512_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx512(float* x, float a, int64_t n) {
    const __m512 av = _mm512_set1_ps(a);
    int64_t i = 0;
    for (; i + VL <= n; i += VL)
        _mm512_storeu_ps(x + i, _mm512_mul_ps(av, _mm512_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void axpb_avx512(float* y, const float* x, float a, float b, int64_t n) {
    const __m512 av = _mm512_set1_ps(a);
    const __m512 bv = _mm512_set1_ps(b);
    int64_t i = 0;
    for (; i + VL <= n; i += VL)
        _mm512_storeu_ps(y + i, _mm512_fmadd_ps(av, _mm512_loadu_ps(x + i), bv));
    for (; i < n; ++i) y[i] = a * x[i] + b;
}

float dot_avx512(const float* a, const float* b, int64_t n) {
    __m512 acc = _mm512_setzero_ps();
    int64_t i = 0;
    for (; i + VL <= n; i += VL)
        acc = _mm512_fmadd_ps(_mm512_loadu_ps(a + i), _mm512_loadu_ps(b + i), acc);
    float s = _mm512_reduce_add_ps(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

float sum_avx512(const float* x, int64_t n) {
    __m512 acc = _mm512_setzero_ps();
    int64_t i = 0;
    for (; i + VL <= n; i += VL) acc = _mm512_add_ps(acc, _mm512_loadu_ps(x + i));
    float s = _mm512_reduce_add_ps(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

float sumsq_avx512(const float* x, int64_t n) {
    __m512 acc = _mm512_setzero_ps();
    int64_t i = 0;
    for (; i + VL <= n; i += VL) {
        const __m512 v = _mm512_loadu_ps(x + i);
        acc = _mm512_fmadd_ps(v, v, acc);
    }
    float s = _mm512_reduce_add_ps(acc);
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

}  // namespace

const FloatOps& avx512_float_ops() {
    static const FloatOps ops = {
        "avx512",
        &conv3d_forward_avx512,
        &conv3d_backward_weights_avx512,
        &rowfma_avx512,
        &scale_avx512,
        &axpb_avx512,
        &dot_avx512,
        &sum_avx512,
        &sumsq_avx512,
        &ref::elu_forward<float>,
        &ref::elu_backward<float>,
    };
    return ops;
}

}  // namespace cplab::kernels
