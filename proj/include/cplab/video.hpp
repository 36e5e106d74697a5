#pragma once

#include <cstdint>
#include <vector>

namespace cplab {

// T x H x W x 3 frames. Pixels live as uint8 so corpora are bit-exact on
// disk and in memory; the [0,1] float view is computed at access time.
struct VideoClip {
    int64_t t = 0, h = 0, w = 0;
    double fps = 0.0;
    std::vector<uint8_t> data;  // t-major, then rows, columns, RGB

    int64_t pixels_per_frame() const { return h * w * 3; }

    uint8_t& at8(int64_t ti, int64_t y, int64_t x, int64_t c) {
        return data[((ti * h + y) * w + x) * 3 + c];
    }
    uint8_t at8(int64_t ti, int64_t y, int64_t x, int64_t c) const {
        return data[((ti * h + y) * w + x) * 3 + c];
    }
    float at(int64_t ti, int64_t y, int64_t x, int64_t c) const {
        return static_cast<float>(at8(ti, y, x, c)) / 255.0f;
    }

    double duration_s() const { return fps > 0 ? static_cast<double>(t) / fps : 0.0; }
};

// Throws unless dims are sane: T >= 2 s worth of frames, H and W >= 16,
// fps > 0, payload size matching.
void validate_video(const VideoClip& v);

struct Landmark {
    double x = 0.0, y = 0.0;
};

// One landmark list per frame; equal counts, coordinates inside the frame.
struct LandmarkSequence {
    std::vector<std::vector<Landmark>> frames;
};

// Face crop: per-frame center is the midpoint of the landmark extremes, the
// square box side is 1.2 x the vertical landmark range of the FIRST frame
// and stays constant, boxes are clamped to the frame, output is resampled
// to out_size x out_size with bilinear interpolation.
VideoClip crop_face(const VideoClip& video, const LandmarkSequence& landmarks,
                    int64_t out_size = 128);

// The sampling box crop_face uses for the first frame. Crop pixel (r, c) of
// an out_size crop samples the source at x0 + (c + 0.5) * side / out_size -
// 0.5 (same for y), which is what maps frame-space geometry (skin masks,
// noise patches) into crop coordinates for static landmark sets.
struct CropBox {
    double x0 = 0.0, y0 = 0.0, side = 0.0;
};
CropBox face_crop_box(const VideoClip& video, const LandmarkSequence& landmarks);

// Frames [start, start + frames) as a standalone clip. Out-of-range windows
// throw InvalidInputError.
VideoClip clip_window(const VideoClip& video, int64_t start, int64_t frames);

}  // namespace cplab
