#include <immintrin.h>

#include <algorithm>

#include "cplab/kernels/api.hpp"

// AVX2+FMA backend. Output rows are processed in tiles of 4 vectors (32
// columns). Loads may run past a row's end into the padded buffer slack
// (kLoadSlack); stores are masked, so nothing outside the row is written.

namespace cplab::kernels {
namespace {

constexpr int64_t VL = 8;

inline __m256i tail_mask(int64_t live) {
    alignas(32) static const int32_t bits[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                                 0,  0,  0,  0,  0,  0,  0,  0};
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bits + 8 - live));
}

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

// One output-row tile of NV vectors for a fixed (co, t, h). cols is the
// number of live columns in the tile, cols <= NV * VL.
template <int NV>
inline void conv_row_tile(const float* xpad, const float* weight, float bias_v, float* yrow,
                          const Conv3dDims& d, int64_t t, int64_t h, int64_t w0, int64_t cols,
                          int64_t co) {
    __m256 acc[NV];
    for (int v = 0; v < NV; ++v) acc[v] = _mm256_set1_ps(bias_v);
    for (int64_t ci = 0; ci < d.ci; ++ci) {
        for (int64_t kt = 0; kt < d.kt; ++kt) {
            for (int64_t kh = 0; kh < d.kh; ++kh) {
                const float* xrow =
                    xpad + ((ci * d.tp + t + kt) * d.hp + h + kh) * d.wp + w0;
                const float* wtap =
                    weight + (((co * d.ci + ci) * d.kt + kt) * d.kh + kh) * d.kw;
                for (int64_t kw = 0; kw < d.kw; ++kw) {
                    const __m256 wv = _mm256_set1_ps(wtap[kw]);
                    for (int v = 0; v < NV; ++v)
                        acc[v] = _mm256_fmadd_ps(wv, _mm256_loadu_ps(xrow + kw + v * VL), acc[v]);
                }
            }
        }
    }
    int64_t left = cols;
    for (int v = 0; v < NV; ++v, left -= VL) {
        if (left >= VL) {
            _mm256_storeu_ps(yrow + w0 + v * VL, acc[v]);
        } else if (left > 0) {
            _mm256_maskstore_ps(yrow + w0 + v * VL, tail_mask(left), acc[v]);
        }
    }
}

void conv3d_forward_avx2(const float* xpad, const float* weight, const float* bias, float* y,
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

void conv3d_backward_weights_avx2(const float* xpad, const float* dy, float* dweight,
                                  const Conv3dDims& d) {
    if (d.kw > 8) {  // register budget; nothing in this project gets close
        ref::conv3d_backward_weights<float>(xpad, dy, dweight, d);
        return;
    }
    const int64_t full = d.w / VL;
    const int64_t live = d.w - full * VL;
    const __m256i tmask = tail_mask(live);
    for (int64_t co = 0; co < d.co; ++co) {
        for (int64_t ci = 0; ci < d.ci; ++ci) {
            for (int64_t kt = 0; kt < d.kt; ++kt) {
                for (int64_t kh = 0; kh < d.kh; ++kh) {
                    __m256 acc[8];
                    for (int64_t kw = 0; kw < d.kw; ++kw) acc[kw] = _mm256_setzero_ps();
                    for (int64_t t = 0; t < d.t; ++t) {
                        for (int64_t h = 0; h < d.h; ++h) {
                            const float* dyrow = dy + ((co * d.t + t) * d.h + h) * d.w;
                            const float* xrow =
                                xpad + ((ci * d.tp + t + kt) * d.hp + h + kh) * d.wp;
                            for (int64_t v = 0; v < full; ++v) {
                                const __m256 dyv = _mm256_loadu_ps(dyrow + v * VL);
                                for (int64_t kw = 0; kw < d.kw; ++kw)
                                    acc[kw] = _mm256_fmadd_ps(
                                        dyv, _mm256_loadu_ps(xrow + v * VL + kw), acc[kw]);
                            }
                            if (live) {
                                // dy tail lanes zeroed so slack reads of xpad cannot leak in
                                const __m256 dyv = _mm256_maskload_ps(dyrow + full * VL, tmask);
                                for (int64_t kw = 0; kw < d.kw; ++kw)
                                    acc[kw] = _mm256_fmadd_ps(
                                        dyv, _mm256_loadu_ps(xrow + full * VL + kw), acc[kw]);
                            }
                        }
                    }
                    float* dwtap = dweight + (((co * d.ci + ci) * d.kt + kt) * d.kh + kh) * d.kw;
                    for (int64_t kw = 0; kw < d.kw; ++kw) dwtap[kw] += hsum(acc[kw]);
                }
            }
        }
    }
}

void rowfma_avx2(float* y, const float* x, float a, int64_t n) {
    const __m256 av = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + VL <= n; i += VL)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(float* x, float a, int64_t n) {
    const __m256 av = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + VL <= n; i += VL)
        _mm256_storeu_ps(x + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void axpb_avx2(float* y, const float* x, float a, float b, int64_t n) {
    const __m256 av = _mm256_set1_ps(a);
    const __m256 bv = _mm256_set1_ps(b);
    int64_t i = 0;
    for (; i + VL <= n; i += VL)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), bv));
    for (; i < n; ++i) y[i] = a * x[i] + b;
}

float dot_avx2(const float* a, const float* b, int64_t n) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + VL <= n; i += VL)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc);
    float s = hsum(acc);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

float sum_avx2(const float* x, int64_t n) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + VL <= n; i += VL) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

float sumsq_avx2(const float* x, int64_t n) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + VL <= n; i += VL) {
        const __m256 v = _mm256_loadu_ps(x + i);
        acc = _mm256_fmadd_ps(v, v, acc);
    }
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

}  // namespace

const FloatOps& avx2_float_ops() {
    static const FloatOps ops = {
        "avx2",
        &conv3d_forward_avx2,
        &conv3d_backward_weights_avx2,
        &rowfma_avx2,
        &scale_avx2,
        &axpb_avx2,
        &dot_avx2,
        &sum_avx2,
        &sumsq_avx2,
        &ref::elu_forward<float>,  // transcendental, stays scalar in every backend
        &ref::elu_backward<float>,
    };
    return ops;
}

}  // namespace cplab::kernels
