#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cplab/config.hpp"
#include "cplab/kernels/api.hpp"
#include "cplab/rng.hpp"
#include "cplab/signal.hpp"
#include "cplab/video.hpp"

namespace cplab {

// T x S x S block of rPPG traces, one per spatial cell. Stored as doubles
// because it feeds the double-precision PSD/loss path.
struct StRppgBlock {
    int64_t t = 0, s = 0;
    double fps = 0.0;
    std::vector<double> values;  // t-major, then cell row, cell column

    double& at(int64_t ti, int64_t ch, int64_t cw) { return values[(ti * s + ch) * s + cw]; }
    double at(int64_t ti, int64_t ch, int64_t cw) const { return values[(ti * s + ch) * s + cw]; }
};

// Spatial mean over the S x S cells at each time step.
Signal inference_rppg(const StRppgBlock& block);

struct ModelConfig {
    int64_t s = 2;                                 // ST block spatial size, in {1,2,4,8}
    std::vector<int64_t> channels = {8, 12, 16, 16};  // stem, spatial x2 / temporal stages
    uint64_t seed = 1;
};

ModelConfig model_config_from(const Config& cfg, const std::string& prefix = "model.");

// Rank-4 feature volume, channel-major then time, rows, columns.
template <typename T>
struct Volume {
    int64_t c = 0, t = 0, h = 0, w = 0;
    std::vector<T> data;

    Volume() = default;
    Volume(int64_t c_, int64_t t_, int64_t h_, int64_t w_)
        : c(c_), t(t_), h(h_), w(w_), data(static_cast<size_t>(c_ * t_ * h_ * w_), T(0)) {}

    int64_t size() const { return c * t * h * w; }
    T& at(int64_t ci, int64_t ti, int64_t y, int64_t x) {
        return data[((ci * t + ti) * h + y) * w + x];
    }
    T at(int64_t ci, int64_t ti, int64_t y, int64_t x) const {
        return data[((ci * t + ti) * h + y) * w + x];
    }
};

// Pixels mapped to [-1, 1]: v = 2 p - 1.
template <typename T>
Volume<T> video_to_volume(const VideoClip& video);

// One stride-1, same-padded 3D convolution with bias. forward() fills the
// cache with the padded input; backward() consumes it, accumulates dweight
// and dbias (unless told not to) and returns the input gradient.
template <typename T>
struct Conv3dLayer {
    int64_t ci = 0, co = 0, kt = 1, kh = 1, kw = 1;
    std::vector<T> w, b, gw, gb;

    struct Cache {
        std::vector<T> xpad;
        kernels::Conv3dDims dims{};
    };

    void init(int64_t ci_, int64_t co_, int64_t kt_, int64_t kh_, int64_t kw_, Rng rng);
    Volume<T> forward(const Volume<T>& x, Cache& cache) const;
    Volume<T> backward(const Volume<T>& dy, const Cache& cache, bool with_param_grads);
};

// The encoder: stem conv, two spatially downsampling stages, two temporally
// downsampling stages, two temporal upsampling stages restoring T, a linear
// 1-channel head, then adaptive spatial averaging to S x S. Inputs must have
// T and H, W divisible by 4 (two halvings each) and a final grid >= S.
template <typename T>
class RppgEncoderT {
  public:
    explicit RppgEncoderT(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }

    struct Cache {
        typename Conv3dLayer<T>::Cache stem, a, b, c, d, u1, u2, head;
        Volume<T> y_stem, y_a, y_b, y_c, y_d, y_u1, y_u2;  // post-activation
        int64_t in_t = 0, in_h = 0, in_w = 0;
        int64_t grid_h = 0, grid_w = 0;
    };

    StRppgBlock forward(const Volume<T>& x, double fps, Cache& cache) const;
    StRppgBlock forward(const VideoClip& video) const;  // scratch cache inside

    // dblock is dL/d(block values), length t * s * s. Returns dL/dx.
    Volume<T> backward(const std::vector<double>& dblock, const Cache& cache,
                       bool with_param_grads = true);

    struct ParamView {
        std::string name;
        T* values;
        T* grads;
        int64_t n;
    };
    std::vector<ParamView> params();
    void zero_grads();

  private:
    ModelConfig cfg_;
    Conv3dLayer<T> stem_, conv_a_, conv_b_, conv_c_, conv_d_, conv_u1_, conv_u2_, head_;
};

using RppgEncoder = RppgEncoderT<float>;

extern template struct Volume<float>;
extern template struct Volume<double>;
extern template class RppgEncoderT<float>;
extern template class RppgEncoderT<double>;
extern template Volume<float> video_to_volume<float>(const VideoClip&);
extern template Volume<double> video_to_volume<double>(const VideoClip&);

// Gradient of pearson_r(inference_rppg(forward(x)), reference) with respect
// to x, parameters fixed. Test hook for the finite-difference oracle and the
// backbone of saliency_map.
template <typename T>
Volume<T> pearson_input_gradient(RppgEncoderT<T>& model, const Volume<T>& x, double fps,
                                 const Signal& reference);

// H x W nonnegative map: |input gradient| summed over time and channels.
// Throws UndefinedCorrelationError when the reference is constant.
std::vector<double> saliency_map(RppgEncoder& model, const VideoClip& video,
                                 const Signal& reference);

// Self-describing checkpoint: JSON header line with a mandatory version
// field, the ModelConfig and the tensor directory, then raw float32 data.
void save_checkpoint(const std::string& path, RppgEncoder& model);
RppgEncoder load_checkpoint(const std::string& path);

}  // namespace cplab
