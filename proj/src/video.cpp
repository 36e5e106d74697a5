#include "cplab/video.hpp"

#include <algorithm>
#include <cmath>

#include "cplab/errors.hpp"

namespace cplab {

void validate_video(const VideoClip& v) {
    if (!(v.fps > 0.0) || !std::isfinite(v.fps))
        throw ShapeError("video: fps must be positive and finite");
    if (v.t < static_cast<int64_t>(std::ceil(2.0 * v.fps)))
        throw ShapeError("video: need at least 2 s of frames");
    if (v.h < 16 || v.w < 16) throw ShapeError("video: frames must be at least 16x16");
    if (static_cast<int64_t>(v.data.size()) != v.t * v.h * v.w * 3)
        throw ShapeError("video: payload size does not match T*H*W*3");
}

VideoClip crop_face(const VideoClip& video, const LandmarkSequence& landmarks,
                    int64_t out_size) {
    validate_video(video);
    if (out_size < 8) throw InvalidInputError("crop_face: out_size too small");
    if (static_cast<int64_t>(landmarks.frames.size()) != video.t)
        throw InvalidLandmarksError("crop_face: need one landmark list per frame");
    const size_t n_points = landmarks.frames.front().size();
    if (n_points == 0) throw InvalidLandmarksError("crop_face: empty landmark list");

    struct Box {
        double cx, cy;
    };
    std::vector<Box> centers(video.t);
    double side = 0.0;
    for (int64_t f = 0; f < video.t; ++f) {
        const auto& pts = landmarks.frames[f];
        if (pts.size() != n_points)
            throw InvalidLandmarksError("crop_face: landmark count changes across frames");
        double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
        for (const auto& p : pts) {
            if (p.x < 0 || p.x > static_cast<double>(video.w - 1) || p.y < 0 ||
                p.y > static_cast<double>(video.h - 1))
                throw InvalidLandmarksError("crop_face: landmark outside frame bounds");
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
        centers[f] = {(minx + maxx) / 2.0, (miny + maxy) / 2.0};
        if (f == 0) {
            side = 1.2 * (maxy - miny);  // fixed by the first frame from here on
            if (!(side > 0.0))
                throw InvalidLandmarksError("crop_face: zero vertical landmark range");
        }
    }
    side = std::min({side, static_cast<double>(video.h), static_cast<double>(video.w)});

    VideoClip out;
    out.t = video.t;
    out.h = out.w = out_size;
    out.fps = video.fps;
    out.data.resize(out.t * out_size * out_size * 3);

    const double step = side / static_cast<double>(out_size);
    for (int64_t f = 0; f < video.t; ++f) {
        const double x0 =
            std::clamp(centers[f].cx - side / 2.0, 0.0, static_cast<double>(video.w) - side);
        const double y0 =
            std::clamp(centers[f].cy - side / 2.0, 0.0, static_cast<double>(video.h) - side);
        for (int64_t r = 0; r < out_size; ++r) {
            const double sy = y0 + (static_cast<double>(r) + 0.5) * step - 0.5;
            const auto iy = static_cast<int64_t>(std::floor(sy));
            const double fy = sy - static_cast<double>(iy);
            const int64_t y1 = std::clamp<int64_t>(iy, 0, video.h - 1);
            const int64_t y2 = std::clamp<int64_t>(iy + 1, 0, video.h - 1);
            for (int64_t c = 0; c < out_size; ++c) {
                const double sx = x0 + (static_cast<double>(c) + 0.5) * step - 0.5;
                const auto ix = static_cast<int64_t>(std::floor(sx));
                const double fx = sx - static_cast<double>(ix);
                const int64_t x1 = std::clamp<int64_t>(ix, 0, video.w - 1);
                const int64_t x2 = std::clamp<int64_t>(ix + 1, 0, video.w - 1);
                for (int64_t ch = 0; ch < 3; ++ch) {
                    const double v =
                        (1.0 - fy) * ((1.0 - fx) * video.at8(f, y1, x1, ch) +
                                      fx * video.at8(f, y1, x2, ch)) +
                        fy * ((1.0 - fx) * video.at8(f, y2, x1, ch) +
                              fx * video.at8(f, y2, x2, ch));
                    out.at8(f, r, c, ch) =
                        static_cast<uint8_t>(std::clamp(std::llround(v), 0LL, 255LL));
                }
            }
        }
    }
    return out;
}

CropBox face_crop_box(const VideoClip& video, const LandmarkSequence& landmarks) {
    validate_video(video);
    if (landmarks.frames.empty())
        throw InvalidLandmarksError("face_crop_box: no landmark frames");
    const auto& pts = landmarks.frames.front();
    if (pts.empty()) throw InvalidLandmarksError("face_crop_box: empty landmark list");
    double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
    for (const auto& p : pts) {
        if (p.x < 0 || p.x > static_cast<double>(video.w - 1) || p.y < 0 ||
            p.y > static_cast<double>(video.h - 1))
            throw InvalidLandmarksError("face_crop_box: landmark outside frame bounds");
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    // Mirrors the box rules in crop_face: 1.2 x the vertical range, clamped.
    double side = 1.2 * (maxy - miny);
    if (!(side > 0.0)) throw InvalidLandmarksError("face_crop_box: zero vertical landmark range");
    side = std::min({side, static_cast<double>(video.h), static_cast<double>(video.w)});
    CropBox box;
    box.side = side;
    box.x0 = std::clamp((minx + maxx) / 2.0 - side / 2.0, 0.0, static_cast<double>(video.w) - side);
    box.y0 = std::clamp((miny + maxy) / 2.0 - side / 2.0, 0.0, static_cast<double>(video.h) - side);
    return box;
}

VideoClip clip_window(const VideoClip& video, int64_t start, int64_t frames) {
    if (start < 0 || frames < 1 || start + frames > video.t)
        throw InvalidInputError("clip window [" + std::to_string(start) + ", " +
                                std::to_string(start + frames) + ") out of range for " +
                                std::to_string(video.t) + " frames");
    VideoClip out;
    out.t = frames;
    out.h = video.h;
    out.w = video.w;
    out.fps = video.fps;
    const int64_t stride = video.pixels_per_frame();
    out.data.assign(video.data.begin() + start * stride,
                    video.data.begin() + (start + frames) * stride);
    return out;
}

}  // namespace cplab
