#include "cplab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cplab/errors.hpp"

using nlohmann::json;

namespace cplab {

namespace {

// Precision dispatch: float runs the active SIMD table, double runs the
// scalar reference, which is the ground truth for finite-difference tests.
void conv_fwd(const float* xpad, const float* w, const float* b, float* y,
              const kernels::Conv3dDims& d) {
    kernels::float_ops().conv3d_forward(xpad, w, b, y, d);
}
void conv_fwd(const double* xpad, const double* w, const double* b, double* y,
              const kernels::Conv3dDims& d) {
    kernels::ref::conv3d_forward<double>(xpad, w, b, y, d);
}
void conv_bww(const float* xpad, const float* dy, float* dw, const kernels::Conv3dDims& d) {
    kernels::float_ops().conv3d_backward_weights(xpad, dy, dw, d);
}
void conv_bww(const double* xpad, const double* dy, double* dw, const kernels::Conv3dDims& d) {
    kernels::ref::conv3d_backward_weights<double>(xpad, dy, dw, d);
}
float vsum(const float* x, int64_t n) { return kernels::float_ops().sum(x, n); }
double vsum(const double* x, int64_t n) { return kernels::ref::sum<double>(x, n); }
void elu_fwd(const float* x, float* y, int64_t n) { kernels::float_ops().elu_forward(x, y, n); }
void elu_fwd(const double* x, double* y, int64_t n) { kernels::ref::elu_forward<double>(x, y, n); }
void elu_bwd(const float* y, const float* dy, float* dx, int64_t n) {
    kernels::float_ops().elu_backward(y, dy, dx, n);
}
void elu_bwd(const double* y, const double* dy, double* dx, int64_t n) {
    kernels::ref::elu_backward<double>(y, dy, dx, n);
}

template <typename T>
void elu_inplace(Volume<T>& v) {
    elu_fwd(v.data.data(), v.data.data(), v.size());
}

// dv = d(post-activation); turns it into d(pre-activation) using the stored
// post-activation values.
template <typename T>
void elu_backward_inplace(const Volume<T>& y, Volume<T>& dv) {
    elu_bwd(y.data.data(), dv.data.data(), dv.data.data(), dv.size());
}

template <typename T>
Volume<T> avg_pool(const Volume<T>& x, int64_t pt, int64_t ph, int64_t pw) {
    Volume<T> y(x.c, x.t / pt, x.h / ph, x.w / pw);
    const T inv = T(1) / static_cast<T>(pt * ph * pw);
    for (int64_t c = 0; c < y.c; ++c)
        for (int64_t t = 0; t < y.t; ++t)
            for (int64_t r = 0; r < y.h; ++r)
                for (int64_t col = 0; col < y.w; ++col) {
                    T acc = T(0);
                    for (int64_t a = 0; a < pt; ++a)
                        for (int64_t b = 0; b < ph; ++b)
                            for (int64_t e = 0; e < pw; ++e)
                                acc += x.at(c, t * pt + a, r * ph + b, col * pw + e);
                    y.at(c, t, r, col) = acc * inv;
                }
    return y;
}

template <typename T>
Volume<T> avg_pool_backward(const Volume<T>& dy, int64_t pt, int64_t ph, int64_t pw) {
    Volume<T> dx(dy.c, dy.t * pt, dy.h * ph, dy.w * pw);
    const T inv = T(1) / static_cast<T>(pt * ph * pw);
    for (int64_t c = 0; c < dx.c; ++c)
        for (int64_t t = 0; t < dx.t; ++t)
            for (int64_t r = 0; r < dx.h; ++r)
                for (int64_t col = 0; col < dx.w; ++col)
                    dx.at(c, t, r, col) = dy.at(c, t / pt, r / ph, col / pw) * inv;
    return dx;
}

template <typename T>
Volume<T> upsample_t2(const Volume<T>& x) {
    Volume<T> y(x.c, 2 * x.t, x.h, x.w);
    const int64_t plane = x.h * x.w;
    for (int64_t c = 0; c < x.c; ++c)
        for (int64_t t = 0; t < x.t; ++t) {
            const T* src = x.data.data() + (c * x.t + t) * plane;
            std::copy(src, src + plane, y.data.data() + (c * y.t + 2 * t) * plane);
            std::copy(src, src + plane, y.data.data() + (c * y.t + 2 * t + 1) * plane);
        }
    return y;
}

template <typename T>
Volume<T> upsample_t2_backward(const Volume<T>& dy) {
    Volume<T> dx(dy.c, dy.t / 2, dy.h, dy.w);
    const int64_t plane = dy.h * dy.w;
    for (int64_t c = 0; c < dx.c; ++c)
        for (int64_t t = 0; t < dx.t; ++t) {
            const T* a = dy.data.data() + (c * dy.t + 2 * t) * plane;
            const T* b = dy.data.data() + (c * dy.t + 2 * t + 1) * plane;
            T* out = dx.data.data() + (c * dx.t + t) * plane;
            for (int64_t i = 0; i < plane; ++i) out[i] = a[i] + b[i];
        }
    return dx;
}

// Adaptive-pool cell bounds: contiguous, non-overlapping, covering [0, g).
int64_t cell_lo(int64_t i, int64_t g, int64_t s) { return i * g / s; }
int64_t cell_hi(int64_t i, int64_t g, int64_t s) { return (i + 1) * g / s; }

}  // namespace

Signal inference_rppg(const StRppgBlock& block) {
    if (block.t <= 0 || block.s <= 0 ||
        static_cast<int64_t>(block.values.size()) != block.t * block.s * block.s)
        throw ShapeError("inference_rppg: malformed block");
    Signal out;
    out.fps = block.fps;
    out.values.resize(block.t);
    const double inv = 1.0 / static_cast<double>(block.s * block.s);
    for (int64_t t = 0; t < block.t; ++t) {
        double acc = 0.0;
        for (int64_t i = 0; i < block.s * block.s; ++i)
            acc += block.values[t * block.s * block.s + i];
        out.values[t] = acc * inv;
    }
    return out;
}

ModelConfig model_config_from(const Config& cfg, const std::string& prefix) {
    ModelConfig out;
    out.s = cfg.get_int(prefix + "s", out.s);
    std::vector<double> def(out.channels.begin(), out.channels.end());
    const auto ch = cfg.get_double_list(prefix + "channels", def);
    out.channels.clear();
    for (double v : ch) {
        const auto i = static_cast<int64_t>(std::llround(v));
        if (std::abs(v - static_cast<double>(i)) > 1e-9)
            throw ConfigError("model: channel widths must be integers");
        out.channels.push_back(i);
    }
    out.seed = static_cast<uint64_t>(cfg.get_int(prefix + "seed", static_cast<int64_t>(out.seed)));
    return out;
}

template <typename T>
Volume<T> video_to_volume(const VideoClip& video) {
    validate_video(video);
    Volume<T> x(3, video.t, video.h, video.w);
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t t = 0; t < video.t; ++t)
            for (int64_t y = 0; y < video.h; ++y)
                for (int64_t col = 0; col < video.w; ++col)
                    x.at(c, t, y, col) = T(2) * static_cast<T>(video.at(t, y, col, c)) - T(1);
    return x;
}

template <typename T>
void Conv3dLayer<T>::init(int64_t ci_, int64_t co_, int64_t kt_, int64_t kh_, int64_t kw_,
                          Rng rng) {
    ci = ci_;
    co = co_;
    kt = kt_;
    kh = kh_;
    kw = kw_;
    const int64_t fan_in = ci * kt * kh * kw;
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    w.resize(co * fan_in);
    for (auto& v : w) v = static_cast<T>(rng.normal() * std_dev);
    b.assign(co, T(0));
    gw.assign(w.size(), T(0));
    gb.assign(co, T(0));
}

template <typename T>
Volume<T> Conv3dLayer<T>::forward(const Volume<T>& x, Cache& cache) const {
    if (x.c != ci) throw ShapeError("conv3d: input channel mismatch");
    kernels::Conv3dDims d;
    d.co = co;
    d.ci = ci;
    d.kt = kt;
    d.kh = kh;
    d.kw = kw;
    d.t = x.t;
    d.h = x.h;
    d.w = x.w;
    d.tp = x.t + kt - 1;
    d.hp = x.h + kh - 1;
    d.wp = x.w + kw - 1;
    cache.dims = d;
    cache.xpad.assign(ci * d.tp * d.hp * d.wp + kernels::kLoadSlack, T(0));
    const int64_t pt = (kt - 1) / 2, ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    for (int64_t c = 0; c < ci; ++c)
        for (int64_t t = 0; t < x.t; ++t)
            for (int64_t r = 0; r < x.h; ++r) {
                const T* src = &x.data[((c * x.t + t) * x.h + r) * x.w];
                T* dst = &cache.xpad[((c * d.tp + t + pt) * d.hp + r + ph) * d.wp + pw];
                std::copy(src, src + x.w, dst);
            }
    Volume<T> y(co, x.t, x.h, x.w);
    conv_fwd(cache.xpad.data(), w.data(), b.data(), y.data.data(), d);
    return y;
}

template <typename T>
Volume<T> Conv3dLayer<T>::backward(const Volume<T>& dy, const Cache& cache,
                                   bool with_param_grads) {
    const kernels::Conv3dDims& d = cache.dims;
    if (dy.c != co || dy.t != d.t || dy.h != d.h || dy.w != d.w)
        throw ShapeError("conv3d backward: dy shape mismatch");
    if (with_param_grads) {
        conv_bww(cache.xpad.data(), dy.data.data(), gw.data(), d);
        const int64_t per = d.t * d.h * d.w;
        for (int64_t o = 0; o < co; ++o) gb[o] += vsum(dy.data.data() + o * per, per);
    }

    // Input gradient: same convolution of the padded dy with the flipped,
    // channel-transposed weights.
    kernels::Conv3dDims g;
    g.co = ci;
    g.ci = co;
    g.kt = kt;
    g.kh = kh;
    g.kw = kw;
    g.t = d.t;
    g.h = d.h;
    g.w = d.w;
    g.tp = d.t + kt - 1;
    g.hp = d.h + kh - 1;
    g.wp = d.w + kw - 1;
    std::vector<T> dypad(co * g.tp * g.hp * g.wp + kernels::kLoadSlack, T(0));
    const int64_t pt = (kt - 1) / 2, ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    for (int64_t c = 0; c < co; ++c)
        for (int64_t t = 0; t < d.t; ++t)
            for (int64_t r = 0; r < d.h; ++r) {
                const T* src = &dy.data[((c * d.t + t) * d.h + r) * d.w];
                T* dst = &dypad[((c * g.tp + t + pt) * g.hp + r + ph) * g.wp + pw];
                std::copy(src, src + d.w, dst);
            }
    std::vector<T> wflip(w.size());
    for (int64_t o = 0; o < co; ++o)
        for (int64_t c = 0; c < ci; ++c)
            for (int64_t a = 0; a < kt; ++a)
                for (int64_t r = 0; r < kh; ++r)
                    for (int64_t q = 0; q < kw; ++q)
                        wflip[(((c * co + o) * kt + kt - 1 - a) * kh + kh - 1 - r) * kw + kw -
                              1 - q] = w[(((o * ci + c) * kt + a) * kh + r) * kw + q];
    Volume<T> dx(ci, d.t, d.h, d.w);
    conv_fwd(dypad.data(), wflip.data(), nullptr, dx.data.data(), g);
    return dx;
}

template <typename T>
RppgEncoderT<T>::RppgEncoderT(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.s != 1 && cfg.s != 2 && cfg.s != 4 && cfg.s != 8)
        throw ConfigError("model: S must be one of 1, 2, 4, 8");
    if (cfg.channels.size() != 4)
        throw ConfigError("model: need exactly 4 stage widths");
    for (int64_t c : cfg.channels)
        if (c < 1 || c > 512) throw ConfigError("model: stage widths must be in [1, 512]");
    const int64_t c1 = cfg.channels[0], c2 = cfg.channels[1], c3 = cfg.channels[2],
                  c4 = cfg.channels[3];
    const Rng root(cfg.seed);
    stem_.init(3, c1, 1, 3, 3, root.fork(0));
    conv_a_.init(c1, c2, 3, 3, 3, root.fork(1));
    conv_b_.init(c2, c3, 3, 3, 3, root.fork(2));
    conv_c_.init(c3, c4, 3, 3, 3, root.fork(3));
    conv_d_.init(c4, c4, 3, 3, 3, root.fork(4));
    conv_u1_.init(c4, c4, 3, 1, 1, root.fork(5));
    conv_u2_.init(c4, c3, 3, 1, 1, root.fork(6));
    head_.init(c3, 1, 1, 1, 1, root.fork(7));
}

template <typename T>
StRppgBlock RppgEncoderT<T>::forward(const Volume<T>& x, double fps, Cache& cache) const {
    if (x.c != 3) throw ShapeError("model: input must have 3 channels");
    if (!(fps > 0.0)) throw InvalidInputError("model: fps must be positive");
    if (x.t < static_cast<int64_t>(std::llround(2.0 * fps)))
        throw ShapeError("model: need at least 2 s of frames");
    if (x.t % 4 != 0 || x.h % 4 != 0 || x.w % 4 != 0)
        throw ShapeError("model: T, H and W must be divisible by 4");
    if (x.h / 4 < cfg_.s || x.w / 4 < cfg_.s)
        throw ShapeError("model: spatial grid smaller than S");
    cache.in_t = x.t;
    cache.in_h = x.h;
    cache.in_w = x.w;

    Volume<T> v = stem_.forward(x, cache.stem);
    elu_inplace(v);
    cache.y_stem = std::move(v);

    v = avg_pool(cache.y_stem, 1, 2, 2);
    v = conv_a_.forward(v, cache.a);
    elu_inplace(v);
    cache.y_a = std::move(v);

    v = avg_pool(cache.y_a, 1, 2, 2);
    v = conv_b_.forward(v, cache.b);
    elu_inplace(v);
    cache.y_b = std::move(v);

    v = avg_pool(cache.y_b, 2, 1, 1);
    v = conv_c_.forward(v, cache.c);
    elu_inplace(v);
    cache.y_c = std::move(v);

    v = avg_pool(cache.y_c, 2, 1, 1);
    v = conv_d_.forward(v, cache.d);
    elu_inplace(v);
    cache.y_d = std::move(v);

    v = upsample_t2(cache.y_d);
    v = conv_u1_.forward(v, cache.u1);
    elu_inplace(v);
    cache.y_u1 = std::move(v);

    v = upsample_t2(cache.y_u1);
    v = conv_u2_.forward(v, cache.u2);
    elu_inplace(v);
    cache.y_u2 = std::move(v);

    v = head_.forward(cache.y_u2, cache.head);  // linear 1-channel head
    cache.grid_h = v.h;
    cache.grid_w = v.w;

    StRppgBlock block;
    block.t = v.t;
    block.s = cfg_.s;
    block.fps = fps;
    block.values.resize(v.t * cfg_.s * cfg_.s);
    for (int64_t t = 0; t < v.t; ++t)
        for (int64_t i = 0; i < cfg_.s; ++i) {
            const int64_t r0 = cell_lo(i, v.h, cfg_.s), r1 = cell_hi(i, v.h, cfg_.s);
            for (int64_t j = 0; j < cfg_.s; ++j) {
                const int64_t q0 = cell_lo(j, v.w, cfg_.s), q1 = cell_hi(j, v.w, cfg_.s);
                double acc = 0.0;
                for (int64_t r = r0; r < r1; ++r)
                    for (int64_t q = q0; q < q1; ++q) acc += static_cast<double>(v.at(0, t, r, q));
                block.at(t, i, j) = acc / static_cast<double>((r1 - r0) * (q1 - q0));
            }
        }
    return block;
}

template <typename T>
StRppgBlock RppgEncoderT<T>::forward(const VideoClip& video) const {
    Cache scratch;
    return forward(video_to_volume<T>(video), video.fps, scratch);
}

template <typename T>
Volume<T> RppgEncoderT<T>::backward(const std::vector<double>& dblock, const Cache& cache,
                                    bool with_param_grads) {
    const int64_t s = cfg_.s, gh = cache.grid_h, gw2 = cache.grid_w;
    const int64_t t = cache.in_t;
    if (static_cast<int64_t>(dblock.size()) != t * s * s)
        throw ShapeError("model backward: dblock length mismatch");

    Volume<T> dv(1, t, gh, gw2);
    for (int64_t ti = 0; ti < t; ++ti)
        for (int64_t i = 0; i < s; ++i) {
            const int64_t r0 = cell_lo(i, gh, s), r1 = cell_hi(i, gh, s);
            for (int64_t j = 0; j < s; ++j) {
                const int64_t q0 = cell_lo(j, gw2, s), q1 = cell_hi(j, gw2, s);
                const T share = static_cast<T>(dblock[(ti * s + i) * s + j] /
                                               static_cast<double>((r1 - r0) * (q1 - q0)));
                for (int64_t r = r0; r < r1; ++r)
                    for (int64_t q = q0; q < q1; ++q) dv.at(0, ti, r, q) = share;
            }
        }

    dv = head_.backward(dv, cache.head, with_param_grads);
    elu_backward_inplace(cache.y_u2, dv);
    dv = conv_u2_.backward(dv, cache.u2, with_param_grads);
    dv = upsample_t2_backward(dv);
    elu_backward_inplace(cache.y_u1, dv);
    dv = conv_u1_.backward(dv, cache.u1, with_param_grads);
    dv = upsample_t2_backward(dv);
    elu_backward_inplace(cache.y_d, dv);
    dv = conv_d_.backward(dv, cache.d, with_param_grads);
    dv = avg_pool_backward(dv, 2, 1, 1);
    elu_backward_inplace(cache.y_c, dv);
    dv = conv_c_.backward(dv, cache.c, with_param_grads);
    dv = avg_pool_backward(dv, 2, 1, 1);
    elu_backward_inplace(cache.y_b, dv);
    dv = conv_b_.backward(dv, cache.b, with_param_grads);
    dv = avg_pool_backward(dv, 1, 2, 2);
    elu_backward_inplace(cache.y_a, dv);
    dv = conv_a_.backward(dv, cache.a, with_param_grads);
    dv = avg_pool_backward(dv, 1, 2, 2);
    elu_backward_inplace(cache.y_stem, dv);
    return stem_.backward(dv, cache.stem, with_param_grads);
}

template <typename T>
std::vector<typename RppgEncoderT<T>::ParamView> RppgEncoderT<T>::params() {
    std::vector<ParamView> out;
    auto add = [&](const char* name, Conv3dLayer<T>& layer) {
        out.push_back({std::string(name) + ".w", layer.w.data(), layer.gw.data(),
                       static_cast<int64_t>(layer.w.size())});
        out.push_back({std::string(name) + ".b", layer.b.data(), layer.gb.data(),
                       static_cast<int64_t>(layer.b.size())});
    };
    add("stem", stem_);
    add("enc_a", conv_a_);
    add("enc_b", conv_b_);
    add("enc_c", conv_c_);
    add("enc_d", conv_d_);
    add("up1", conv_u1_);
    add("up2", conv_u2_);
    add("head", head_);
    return out;
}

template <typename T>
void RppgEncoderT<T>::zero_grads() {
    for (auto& p : params()) std::fill(p.grads, p.grads + p.n, T(0));
}

template <typename T>
Volume<T> pearson_input_gradient(RppgEncoderT<T>& model, const Volume<T>& x, double fps,
                                 const Signal& reference) {
    typename RppgEncoderT<T>::Cache cache;
    const StRppgBlock block = model.forward(x, fps, cache);
    if (reference.size() != block.t)
        throw InvalidInputError("saliency: reference length must match the video");
    const Signal r = inference_rppg(block);
    const PearsonGrad pg = pearson_with_grad(r.values, reference.values);
    const double inv_cells = 1.0 / static_cast<double>(block.s * block.s);
    std::vector<double> dblock(block.values.size());
    for (int64_t t = 0; t < block.t; ++t)
        for (int64_t i = 0; i < block.s * block.s; ++i)
            dblock[t * block.s * block.s + i] = pg.da[t] * inv_cells;
    return model.backward(dblock, cache, /*with_param_grads=*/false);
}

std::vector<double> saliency_map(RppgEncoder& model, const VideoClip& video,
                                 const Signal& reference) {
    const auto x = video_to_volume<float>(video);
    const Volume<float> dx = pearson_input_gradient(model, x, video.fps, reference);
    std::vector<double> map(video.h * video.w, 0.0);
    for (int64_t c = 0; c < dx.c; ++c)
        for (int64_t t = 0; t < dx.t; ++t)
            for (int64_t y = 0; y < dx.h; ++y)
                for (int64_t col = 0; col < dx.w; ++col)
                    map[y * dx.w + col] += std::abs(static_cast<double>(dx.at(c, t, y, col)));
    return map;
}

void save_checkpoint(const std::string& path, RppgEncoder& model) {
    const auto views = model.params();
    json header;
    header["version"] = 1;
    header["model"] = {{"s", model.config().s},
                       {"channels", model.config().channels},
                       {"seed", model.config().seed}};
    json tensors = json::array();
    for (const auto& v : views) tensors.push_back({{"name", v.name}, {"count", v.n}});
    header["tensors"] = tensors;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << header.dump() << '\n';
    for (const auto& v : views)
        out.write(reinterpret_cast<const char*>(v.values),
                  static_cast<std::streamsize>(v.n * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

RppgEncoder load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("checkpoint: missing header line");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception&) {
        throw FormatError("checkpoint: header line is not valid JSON");
    }
    if (!header.contains("version")) throw FormatError("checkpoint: missing field 'version'");
    if (header.at("version").get<int64_t>() != 1)
        throw FormatError("checkpoint: unsupported version");
    for (const char* field : {"model", "tensors"})
        if (!header.contains(field))
            throw FormatError(std::string("checkpoint: missing field '") + field + "'");
    const auto& m = header.at("model");
    for (const char* field : {"s", "channels", "seed"})
        if (!m.contains(field))
            throw FormatError(std::string("checkpoint: model missing field '") + field + "'");
    ModelConfig cfg;
    cfg.s = m.at("s").get<int64_t>();
    cfg.channels = m.at("channels").get<std::vector<int64_t>>();
    cfg.seed = m.at("seed").get<uint64_t>();

    RppgEncoder model(cfg);
    auto views = model.params();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != views.size())
        throw FormatError("checkpoint: tensor count disagrees with the model config");
    for (size_t i = 0; i < views.size(); ++i) {
        const auto& t = tensors.at(i);
        if (t.at("name").get<std::string>() != views[i].name ||
            t.at("count").get<int64_t>() != views[i].n)
            throw FormatError("checkpoint: tensor directory mismatch at '" + views[i].name + "'");
        in.read(reinterpret_cast<char*>(views[i].values),
                static_cast<std::streamsize>(views[i].n * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(views[i].n * sizeof(float)))
            throw FormatError("checkpoint: payload shorter than the tensor directory");
    }
    char extra;
    if (in.read(&extra, 1)) throw FormatError("checkpoint: payload longer than the tensor directory");
    return model;
}

template struct Volume<float>;
template struct Volume<double>;
template struct Conv3dLayer<float>;
template struct Conv3dLayer<double>;
template class RppgEncoderT<float>;
template class RppgEncoderT<double>;
template Volume<float> video_to_volume<float>(const VideoClip&);
template Volume<double> video_to_volume<double>(const VideoClip&);
template Volume<float> pearson_input_gradient<float>(RppgEncoderT<float>&, const Volume<float>&,
                                                     double, const Signal&);
template Volume<double> pearson_input_gradient<double>(RppgEncoderT<double>&,
                                                       const Volume<double>&, double,
                                                       const Signal&);

}  // namespace cplab
