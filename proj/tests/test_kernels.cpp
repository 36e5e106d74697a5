#include <doctest.h>

#include <cmath>
#include <vector>

#include "cplab/kernels/api.hpp"
#include "cplab/rng.hpp"

using namespace cplab;
using kernels::Conv3dDims;
using kernels::Isa;

namespace {

// Independent oracle with a deliberately different loop nest than the
// library reference: one scalar accumulation per output element.
void conv_oracle(const std::vector<double>& xpad, const std::vector<double>& w,
                 const std::vector<double>* bias, std::vector<double>& y, const Conv3dDims& d) {
    y.assign(d.co * d.t * d.h * d.w, 0.0);
    for (int64_t co = 0; co < d.co; ++co)
        for (int64_t t = 0; t < d.t; ++t)
            for (int64_t h = 0; h < d.h; ++h)
                for (int64_t ww = 0; ww < d.w; ++ww) {
                    double acc = bias ? (*bias)[co] : 0.0;
                    for (int64_t ci = 0; ci < d.ci; ++ci)
                        for (int64_t kt = 0; kt < d.kt; ++kt)
                            for (int64_t kh = 0; kh < d.kh; ++kh)
                                for (int64_t kw = 0; kw < d.kw; ++kw)
                                    acc += w[(((co * d.ci + ci) * d.kt + kt) * d.kh + kh) * d.kw +
                                             kw] *
                                           xpad[((ci * d.tp + t + kt) * d.hp + h + kh) * d.wp +
                                                ww + kw];
                    y[((co * d.t + t) * d.h + h) * d.w + ww] = acc;
                }
}

void dw_oracle(const std::vector<double>& xpad, const std::vector<double>& dy,
               std::vector<double>& dw, const Conv3dDims& d) {
    dw.assign(d.co * d.ci * d.kt * d.kh * d.kw, 0.0);
    for (int64_t co = 0; co < d.co; ++co)
        for (int64_t ci = 0; ci < d.ci; ++ci)
            for (int64_t kt = 0; kt < d.kt; ++kt)
                for (int64_t kh = 0; kh < d.kh; ++kh)
                    for (int64_t kw = 0; kw < d.kw; ++kw) {
                        double acc = 0.0;
                        for (int64_t t = 0; t < d.t; ++t)
                            for (int64_t h = 0; h < d.h; ++h)
                                for (int64_t ww = 0; ww < d.w; ++ww)
                                    acc += dy[((co * d.t + t) * d.h + h) * d.w + ww] *
                                           xpad[((ci * d.tp + t + kt) * d.hp + h + kh) * d.wp +
                                                ww + kw];
                        dw[(((co * d.ci + ci) * d.kt + kt) * d.kh + kh) * d.kw + kw] = acc;
                    }
}

Conv3dDims make_dims(int64_t co, int64_t ci, int64_t kt, int64_t kh, int64_t kw, int64_t t,
                     int64_t h, int64_t w) {
    return Conv3dDims{co, ci, kt, kh, kw, t, h, w, t + kt - 1, h + kh - 1, w + kw - 1};
}

struct ConvCase {
    std::vector<double> xpad, w, b;
    Conv3dDims d;
};

ConvCase random_case(Rng& rng, const Conv3dDims& d) {
    ConvCase c;
    c.d = d;
    c.xpad.resize(d.ci * d.tp * d.hp * d.wp + kernels::kLoadSlack);
    c.w.resize(d.co * d.ci * d.kt * d.kh * d.kw);
    c.b.resize(d.co);
    for (auto& v : c.xpad) v = rng.uniform(-1.0, 1.0);
    for (auto& v : c.w) v = rng.uniform(-0.5, 0.5);
    for (auto& v : c.b) v = rng.uniform(-0.2, 0.2);
    return c;
}

std::vector<float> to_float(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

// Shapes matching the real network plus awkward tails.
const std::vector<Conv3dDims> kConvShapes = {
    make_dims(4, 3, 1, 5, 5, 6, 32, 32),
    make_dims(5, 4, 3, 3, 3, 7, 16, 16),
    make_dims(3, 2, 3, 3, 3, 5, 9, 17),   // tail width not a multiple of any lane count
    make_dims(2, 3, 1, 1, 1, 4, 2, 2),    // pointwise head
    make_dims(1, 2, 3, 1, 1, 8, 2, 2),    // temporal-only stage shape
    make_dims(2, 2, 3, 3, 3, 3, 4, 70),   // row wider than one 4-vector tile
};

}  // namespace

TEST_CASE("kernels: double reference matches the independent conv oracle") {
    Rng rng(101);
    for (const auto& d : kConvShapes) {
        auto c = random_case(rng, d);
        std::vector<double> want, got(d.co * d.t * d.h * d.w);
        conv_oracle(c.xpad, c.w, &c.b, want, d);
        kernels::ref::conv3d_forward<double>(c.xpad.data(), c.w.data(), c.b.data(), got.data(), d);
        double worst = 0.0;
        for (size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(want[i] - got[i]));
        CHECK(worst < 1e-12);
    }
}

TEST_CASE("kernels: double reference matches the dweight oracle") {
    Rng rng(102);
    for (const auto& d : kConvShapes) {
        auto c = random_case(rng, d);
        std::vector<double> dy(d.co * d.t * d.h * d.w);
        for (auto& v : dy) v = rng.uniform(-1.0, 1.0);
        std::vector<double> want, got(c.w.size(), 0.0);
        dw_oracle(c.xpad, dy, want, d);
        kernels::ref::conv3d_backward_weights<double>(c.xpad.data(), dy.data(), got.data(), d);
        double worst = 0.0;
        for (size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(want[i] - got[i]));
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("kernels: every supported backend agrees with the double reference") {
    Rng rng(103);
    for (const auto& d : kConvShapes) {
        auto c = random_case(rng, d);
        std::vector<double> dref;
        conv_oracle(c.xpad, c.w, &c.b, dref, d);
        std::vector<double> dy(d.co * d.t * d.h * d.w);
        for (auto& v : dy) v = rng.uniform(-1.0, 1.0);
        std::vector<double> dwref;
        dw_oracle(c.xpad, dy, dwref, d);

        const auto xf = to_float(c.xpad);
        const auto wf = to_float(c.w);
        const auto bf = to_float(c.b);
        const auto dyf = to_float(dy);
        for (Isa isa : kernels::supported_isas()) {
            const auto& ops = kernels::float_ops(isa);
            INFO("backend ", ops.name);

            std::vector<float> y(dref.size());
            ops.conv3d_forward(xf.data(), wf.data(), bf.data(), y.data(), d);
            for (size_t i = 0; i < y.size(); ++i)
                CHECK(std::abs(y[i] - dref[i]) < 2e-4 * (1.0 + std::abs(dref[i])));

            std::vector<float> dw(wf.size(), 0.0f);
            ops.conv3d_backward_weights(xf.data(), dyf.data(), dw.data(), d);
            for (size_t i = 0; i < dw.size(); ++i)
                CHECK(std::abs(dw[i] - dwref[i]) < 5e-3 * (1.0 + std::abs(dwref[i])));
        }
    }
}

TEST_CASE("kernels: elementwise ops agree across backends") {
    Rng rng(104);
    for (const int64_t n : {1, 7, 8, 9, 16, 31, 64, 100, 1000, 4097}) {
        std::vector<float> x(n), y0(n), b0(n);
        for (auto& v : x) v = static_cast<float>(rng.uniform(-2.0, 2.0));
        for (auto& v : y0) v = static_cast<float>(rng.uniform(-2.0, 2.0));
        for (auto& v : b0) v = static_cast<float>(rng.uniform(-2.0, 2.0));

        const auto& sc = kernels::float_ops(Isa::scalar);
        for (Isa isa : kernels::supported_isas()) {
            if (isa == Isa::scalar) continue;
            const auto& ops = kernels::float_ops(isa);
            INFO("backend ", ops.name, " n=", n);

            auto ya = y0, yb = y0;
            sc.rowfma(ya.data(), x.data(), 1.7f, n);
            ops.rowfma(yb.data(), x.data(), 1.7f, n);
            for (int64_t i = 0; i < n; ++i) CHECK(ya[i] == doctest::Approx(yb[i]).epsilon(1e-6));

            ya = y0, yb = y0;
            sc.scale(ya.data(), 0.37f, n);
            ops.scale(yb.data(), 0.37f, n);
            for (int64_t i = 0; i < n; ++i) CHECK(ya[i] == yb[i]);

            ya = y0, yb = y0;
            sc.axpb(ya.data(), x.data(), 1.3f, -0.4f, n);
            ops.axpb(yb.data(), x.data(), 1.3f, -0.4f, n);
            for (int64_t i = 0; i < n; ++i) CHECK(ya[i] == doctest::Approx(yb[i]).epsilon(1e-6));

            CHECK(ops.dot(x.data(), b0.data(), n) ==
                  doctest::Approx(sc.dot(x.data(), b0.data(), n)).epsilon(1e-4));
            CHECK(ops.sum(x.data(), n) == doctest::Approx(sc.sum(x.data(), n)).epsilon(1e-4));
            CHECK(ops.sumsq(x.data(), n) == doctest::Approx(sc.sumsq(x.data(), n)).epsilon(1e-4));

            std::vector<float> ea(n), eb(n), da(n), db(n);
            sc.elu_forward(x.data(), ea.data(), n);
            ops.elu_forward(x.data(), eb.data(), n);
            sc.elu_backward(ea.data(), b0.data(), da.data(), n);
            ops.elu_backward(eb.data(), b0.data(), db.data(), n);
            for (int64_t i = 0; i < n; ++i) {
                CHECK(ea[i] == eb[i]);
                CHECK(da[i] == db[i]);
            }
        }
    }
}

TEST_CASE("kernels: backend selection is explicit and validated") {
    const auto isas = kernels::supported_isas();
    REQUIRE(!isas.empty());
    CHECK(isas.front() == Isa::scalar);
    const Isa before = kernels::active_isa();
    kernels::select_isa(Isa::scalar);
    CHECK(kernels::active_isa() == Isa::scalar);
    CHECK(std::string(kernels::float_ops().name) == "scalar");
    kernels::select_isa(before);
    CHECK(kernels::active_isa() == before);
}
