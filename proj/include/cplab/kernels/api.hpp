#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace cplab::kernels {

// Shapes for the dense 3D convolution y[co,t,h,w] = bias[co] +
// sum_{ci,kt,kh,kw} weight[co,ci,kt,kh,kw] * xpad[ci,t+kt,h+kh,w+kw].
// The caller supplies xpad already zero-padded, with tp >= t + kt - 1 etc.
// Stride is always 1; downsampling is pooling's job elsewhere.
struct Conv3dDims {
    int64_t co, ci;
    int64_t kt, kh, kw;
    int64_t t, h, w;     // output extent
    int64_t tp, hp, wp;  // padded input extent
};

// Vector backends may read (never write) up to this many elements past the
// end of padded input buffers. Allocate conv inputs with this much slack.
inline constexpr int64_t kLoadSlack = 32;

// One virtual-dispatch-free table per backend. Only float has vector
// variants; the double path always runs the scalar reference, which is what
// the finite-difference tests exercise.
struct FloatOps {
    const char* name;
    void (*conv3d_forward)(const float* xpad, const float* weight, const float* bias, float* y,
                           const Conv3dDims& d);
    void (*conv3d_backward_weights)(const float* xpad, const float* dy, float* dweight,
                                    const Conv3dDims& d);
    void (*rowfma)(float* y, const float* x, float a, int64_t n);  // y += a * x
    void (*scale)(float* x, float a, int64_t n);
    void (*axpb)(float* y, const float* x, float a, float b, int64_t n);  // y = a * x + b
    float (*dot)(const float* a, const float* b, int64_t n);
    float (*sum)(const float* x, int64_t n);
    float (*sumsq)(const float* x, int64_t n);
    void (*elu_forward)(const float* x, float* y, int64_t n);
    // Consumes the forward output: delu/dx = 1 for x > 0, else elu(x) + 1.
    void (*elu_backward)(const float* y, const float* dy, float* dx, int64_t n);
};

enum class Isa { scalar, avx2, avx512 };

const char* isa_name(Isa isa);
std::vector<Isa> supported_isas();  // always contains scalar, ordered slow to fast
Isa active_isa();
// Throws ConfigError if the CPU lacks the requested extension. Also settable
// up front via the CPLAB_KERNELS environment variable (scalar|avx2|avx512).
void select_isa(Isa isa);
const FloatOps& float_ops();          // table for the active ISA
const FloatOps& float_ops(Isa isa);   // table for a specific ISA (tests)

// Scalar reference, templated so the double instantiation is the ground
// truth for gradient checks and the float instantiation seeds the scalar
// backend table.
namespace ref {

template <typename T>
void conv3d_forward(const T* xpad, const T* weight, const T* bias, T* y, const Conv3dDims& d) {
    for (int64_t co = 0; co < d.co; ++co) {
        for (int64_t t = 0; t < d.t; ++t) {
            for (int64_t h = 0; h < d.h; ++h) {
                T* yrow = y + ((co * d.t + t) * d.h + h) * d.w;
                const T b = bias ? bias[co] : T(0);
                for (int64_t w = 0; w < d.w; ++w) yrow[w] = b;
                for (int64_t ci = 0; ci < d.ci; ++ci) {
                    for (int64_t kt = 0; kt < d.kt; ++kt) {
                        for (int64_t kh = 0; kh < d.kh; ++kh) {
                            const T* xrow = xpad + ((ci * d.tp + t + kt) * d.hp + h + kh) * d.wp;
                            const T* wtap =
                                weight + (((co * d.ci + ci) * d.kt + kt) * d.kh + kh) * d.kw;
                            for (int64_t kw = 0; kw < d.kw; ++kw) {
                                const T wv = wtap[kw];
                                for (int64_t w = 0; w < d.w; ++w) yrow[w] += wv * xrow[w + kw];
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv3d_backward_weights(const T* xpad, const T* dy, T* dweight, const Conv3dDims& d) {
    for (int64_t co = 0; co < d.co; ++co) {
        for (int64_t ci = 0; ci < d.ci; ++ci) {
            for (int64_t kt = 0; kt < d.kt; ++kt) {
                for (int64_t kh = 0; kh < d.kh; ++kh) {
                    T* dwtap = dweight + (((co * d.ci + ci) * d.kt + kt) * d.kh + kh) * d.kw;
                    for (int64_t t = 0; t < d.t; ++t) {
                        for (int64_t h = 0; h < d.h; ++h) {
                            const T* dyrow = dy + ((co * d.t + t) * d.h + h) * d.w;
                            const T* xrow =
                                xpad + ((ci * d.tp + t + kt) * d.hp + h + kh) * d.wp;
                            for (int64_t kw = 0; kw < d.kw; ++kw) {
                                T acc = T(0);
                                for (int64_t w = 0; w < d.w; ++w) acc += dyrow[w] * xrow[w + kw];
                                dwtap[kw] += acc;
                            }
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void rowfma(T* y, const T* x, T a, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void scale(T* x, T a, int64_t n) {
    for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

template <typename T>
void axpb(T* y, const T* x, T a, T b, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

template <typename T>
T dot(const T* a, const T* b, int64_t n) {
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
T sum(const T* x, int64_t n) {
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <typename T>
T sumsq(const T* x, int64_t n) {
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

template <typename T>
void elu_forward(const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : std::expm1(x[i]);
}

template <typename T>
void elu_backward(const T* y, const T* dy, T* dx, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * (y[i] > T(0) ? T(1) : y[i] + T(1));
}

}  // namespace ref

}  // namespace cplab::kernels
