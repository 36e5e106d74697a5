#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <doctest.h>

#include "cplab/dataset.hpp"
#include "cplab/errors.hpp"
#include "cplab/rng.hpp"
#include "cplab/video.hpp"

using namespace cplab;
namespace fs = std::filesystem;

namespace {

VideoClip noise_video(int64_t t, int64_t h, int64_t w, double fps, uint64_t seed) {
    VideoClip v;
    v.t = t;
    v.h = h;
    v.w = w;
    v.fps = fps;
    v.data.resize(t * h * w * 3);
    Rng rng(seed);
    for (auto& b : v.data) b = static_cast<uint8_t>(rng.uniform_int(0, 255));
    return v;
}

// Reference cropper, written independently of the library: gather the boxes
// first, then sample. Center = midpoint of landmark extremes per frame, side
// = 1.2 x the first frame's vertical range (then clamped to the frame).
struct RefBox {
    double cx, cy;
};

double ref_side(const VideoClip& v, const LandmarkSequence& lm, std::vector<RefBox>& centers) {
    double side = 0.0;
    centers.clear();
    for (size_t f = 0; f < lm.frames.size(); ++f) {
        double minx = 1e300, maxx = -1e300, miny = 1e300, maxy = -1e300;
        for (const auto& p : lm.frames[f]) {
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
        centers.push_back({(minx + maxx) / 2.0, (miny + maxy) / 2.0});
        if (f == 0) side = 1.2 * (maxy - miny);
    }
    return std::min({side, double(v.h), double(v.w)});
}

VideoClip ref_crop(const VideoClip& v, const LandmarkSequence& lm, int64_t out_size) {
    std::vector<RefBox> centers;
    const double side = ref_side(v, lm, centers);
    VideoClip out;
    out.t = v.t;
    out.h = out.w = out_size;
    out.fps = v.fps;
    out.data.resize(out.t * out_size * out_size * 3);
    auto sample = [&](int64_t f, double sy, double sx, int64_t ch) {
        // corner indices clamp into the frame: edge replication
        const auto iy = static_cast<int64_t>(std::floor(sy));
        const auto ix = static_cast<int64_t>(std::floor(sx));
        const double fy = sy - double(iy), fx = sx - double(ix);
        auto gy = [&](int64_t y) { return std::clamp<int64_t>(y, 0, v.h - 1); };
        auto gx = [&](int64_t x) { return std::clamp<int64_t>(x, 0, v.w - 1); };
        const double top =
            (1.0 - fx) * v.at8(f, gy(iy), gx(ix), ch) + fx * v.at8(f, gy(iy), gx(ix + 1), ch);
        const double bot = (1.0 - fx) * v.at8(f, gy(iy + 1), gx(ix), ch) +
                           fx * v.at8(f, gy(iy + 1), gx(ix + 1), ch);
        return (1.0 - fy) * top + fy * bot;
    };
    for (int64_t f = 0; f < v.t; ++f) {
        const double x0 = std::clamp(centers[f].cx - side / 2.0, 0.0, double(v.w) - side);
        const double y0 = std::clamp(centers[f].cy - side / 2.0, 0.0, double(v.h) - side);
        for (int64_t r = 0; r < out_size; ++r)
            for (int64_t c = 0; c < out_size; ++c)
                for (int64_t ch = 0; ch < 3; ++ch) {
                    const double sy = y0 + (double(r) + 0.5) * side / double(out_size) - 0.5;
                    const double sx = x0 + (double(c) + 0.5) * side / double(out_size) - 0.5;
                    out.at8(f, r, c, ch) = static_cast<uint8_t>(
                        std::clamp(std::llround(sample(f, sy, sx, ch)), 0LL, 255LL));
                }
    }
    return out;
}

LandmarkSequence static_landmarks(int64_t frames, std::vector<Landmark> pts) {
    LandmarkSequence lm;
    lm.frames.assign(frames, std::move(pts));
    return lm;
}

LabeledRecord tiny_record(const std::string& id, double margin_s, uint64_t seed) {
    LabeledRecord rec;
    rec.id = id;
    rec.video = noise_video(50, 16, 16, 10.0, seed);
    Signal gt;
    gt.fps = 10.0;
    const auto n = rec.video.t + 2 * static_cast<int64_t>(std::llround(margin_s * gt.fps));
    gt.values.resize(n);
    for (int64_t i = 0; i < n; ++i) gt.values[i] = static_cast<double>(i);
    rec.gt = std::move(gt);
    rec.phi = true;
    return rec;
}

std::string err_what(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

fs::path temp_dir(const char* tag) {
    const auto p = fs::temp_directory_path() / (std::string("cplab_test_") + tag);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("crop_face: landmarks spanning rows 20-120 give a constant 120 px box") {
    const VideoClip v = noise_video(21, 140, 160, 10.0, 11);
    const auto lm = static_landmarks(
        v.t, {{40.0, 20.0}, {120.0, 20.0}, {40.0, 120.0}, {120.0, 120.0}});

    std::vector<RefBox> centers;
    CHECK(ref_side(v, lm, centers) == doctest::Approx(120.0).epsilon(1e-12));

    const VideoClip out = crop_face(v, lm);
    CHECK(out.t == v.t);
    CHECK(out.h == 128);
    CHECK(out.w == 128);
    CHECK(out.fps == v.fps);
    const VideoClip ref = ref_crop(v, lm, 128);
    CHECK(out.data == ref.data);
}

TEST_CASE("crop_face: box side is fixed by the first frame") {
    // Frames 0 and 1 carry identical pixels, but the frame-1 landmarks span a
    // smaller vertical range around the same center. If the side were
    // recomputed per frame the two crops would differ.
    VideoClip v = noise_video(21, 140, 160, 10.0, 12);
    for (int64_t y = 0; y < v.h; ++y)
        for (int64_t x = 0; x < v.w; ++x)
            for (int64_t c = 0; c < 3; ++c) v.at8(1, y, x, c) = v.at8(0, y, x, c);

    LandmarkSequence lm = static_landmarks(
        v.t, {{40.0, 20.0}, {120.0, 20.0}, {40.0, 120.0}, {120.0, 120.0}});
    lm.frames[1] = {{40.0, 40.0}, {120.0, 40.0}, {40.0, 100.0}, {120.0, 100.0}};

    const VideoClip out = crop_face(v, lm);
    const bool frames_equal =
        std::equal(out.data.begin(), out.data.begin() + out.pixels_per_frame(),
                   out.data.begin() + out.pixels_per_frame());
    CHECK(frames_equal);
    CHECK(out.data == ref_crop(v, lm, 128).data);
}

TEST_CASE("crop_face: center tracks landmarks translating 10 px per frame") {
    // Frame f holds the frame-0 texture shifted right by 10 f pixels and the
    // landmarks shift along with it, so every cropped frame must come out
    // bit-identical to the first.
    const int64_t T = 5, H = 100, W = 200;
    VideoClip base = noise_video(1, H, W, 10.0, 13);
    VideoClip v;
    v.t = T;
    v.h = H;
    v.w = W;
    v.fps = 2.0;
    v.data.resize(T * H * W * 3);
    LandmarkSequence lm;
    for (int64_t f = 0; f < T; ++f) {
        const int64_t s = 10 * f;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                for (int64_t c = 0; c < 3; ++c)
                    v.at8(f, y, x, c) = x >= s ? base.at8(0, y, x - s, c) : 0;
        lm.frames.push_back({{40.0 + double(s), 30.0},
                             {80.0 + double(s), 30.0},
                             {40.0 + double(s), 80.0},
                             {80.0 + double(s), 80.0}});
    }

    const VideoClip out = crop_face(v, lm);
    const int64_t fsz = out.pixels_per_frame();
    for (int64_t f = 1; f < T; ++f) {
        const bool same = std::equal(out.data.begin(), out.data.begin() + fsz,
                                     out.data.begin() + f * fsz);
        CHECK(same);
    }
    CHECK(out.data == ref_crop(v, lm, 128).data);
}

TEST_CASE("crop_face: boxes at the frame edge are clamped, output stays 128x128") {
    SUBCASE("side larger than the frame") {
        const VideoClip v = noise_video(21, 100, 100, 10.0, 14);
        // vertical range 90 -> side 108, clamped to 100
        const auto lm =
            static_landmarks(v.t, {{30.0, 5.0}, {70.0, 5.0}, {30.0, 95.0}, {70.0, 95.0}});
        const VideoClip out = crop_face(v, lm);
        CHECK(out.h == 128);
        CHECK(out.w == 128);
        CHECK(out.data == ref_crop(v, lm, 128).data);
    }
    SUBCASE("center close to the left edge") {
        const VideoClip v = noise_video(21, 100, 100, 10.0, 15);
        // side 60 but center x = 5, so the box origin clamps to 0
        const auto lm =
            static_landmarks(v.t, {{0.0, 10.0}, {10.0, 10.0}, {0.0, 70.0}, {10.0, 70.0}});
        const VideoClip out = crop_face(v, lm);
        CHECK(out.h == 128);
        CHECK(out.w == 128);
        CHECK(out.data == ref_crop(v, lm, 128).data);
    }
}

TEST_CASE("crop_face: malformed landmarks are rejected") {
    const VideoClip v = noise_video(21, 100, 100, 10.0, 16);
    CHECK_THROWS_AS(
        crop_face(v, static_landmarks(v.t, {{10.0, 50.0}, {90.0, 50.0}})),
        InvalidLandmarksError);  // zero vertical range
    CHECK_THROWS_AS(
        crop_face(v, static_landmarks(v.t, {{10.0, -1.0}, {90.0, 50.0}})),
        InvalidLandmarksError);  // outside the frame
    CHECK_THROWS_AS(crop_face(v, static_landmarks(v.t - 1, {{10.0, 10.0}, {90.0, 90.0}})),
                    InvalidLandmarksError);  // one list per frame
    auto lm = static_landmarks(v.t, {{10.0, 10.0}, {90.0, 90.0}});
    lm.frames[3].push_back({50.0, 50.0});
    CHECK_THROWS_AS(crop_face(v, lm), InvalidLandmarksError);  // count changes
}

TEST_CASE("crop_face: output depends only on video and landmarks") {
    const VideoClip v = noise_video(21, 120, 120, 10.0, 17);
    const auto lm =
        static_landmarks(v.t, {{20.0, 25.0}, {95.0, 25.0}, {20.0, 95.0}, {95.0, 95.0}});
    const VideoClip a = crop_face(v, lm);
    const VideoClip b = crop_face(v, lm);
    CHECK(a.data == b.data);
}

TEST_CASE("landmarks_from_ellipse spans the ellipse bounding box") {
    const Ellipse e{36.0, 36.0, 22.3, 25.9};
    const auto lm = landmarks_from_ellipse(e, 4);
    REQUIRE(lm.frames.size() == 4);
    for (const auto& pts : lm.frames) {
        REQUIRE(pts.size() == 8);
        double minx = 1e300, maxx = -1e300, miny = 1e300, maxy = -1e300;
        for (const auto& p : pts) {
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
        CHECK(minx == doctest::Approx(e.cx - e.rx));
        CHECK(maxx == doctest::Approx(e.cx + e.rx));
        CHECK(miny == doctest::Approx(e.cy - e.ry));
        CHECK(maxy == doctest::Approx(e.cy + e.ry));
        CHECK(lm.frames[0][0].x == pts[0].x);  // static across frames
    }
}

TEST_CASE("aligned_gt_window maps video time through the GT margin") {
    const LabeledRecord rec = tiny_record("r", 2.0, 21);  // margin 20 samples
    const Signal w0 = aligned_gt_window(rec, 0.0, rec.video.t);
    REQUIRE(w0.size() == rec.video.t);
    CHECK(w0.values.front() == 20.0);
    CHECK(w0.values.back() == 69.0);

    const Signal w1 = aligned_gt_window(rec, 1.5, 10);
    CHECK(w1.values.front() == 35.0);
    CHECK(w1.fps == rec.gt->fps);

    CHECK_THROWS_AS(aligned_gt_window(rec, 6.0, 20), InvalidInputError);
    LabeledRecord nolabel = rec;
    nolabel.gt.reset();
    CHECK_THROWS_AS(aligned_gt_window(nolabel, 0.0, 10), MissingLabelError);
    LabeledRecord badfps = rec;
    badfps.gt->fps = 11.0;
    CHECK_THROWS_AS(aligned_gt_window(badfps, 0.0, 10), ConsistencyError);
}

TEST_CASE("mask_labels keeps exactly round(ratio * n) labels") {
    auto make_corpus = [] {
        std::vector<LabeledRecord> recs;
        for (int i = 0; i < 10; ++i)
            recs.push_back(tiny_record("rec_" + std::to_string(i), 1.0, 100 + i));
        return recs;
    };
    auto labeled_count = [](const std::vector<LabeledRecord>& recs) {
        int64_t n = 0;
        for (const auto& r : recs) {
            CHECK(r.phi == r.gt.has_value());
            n += r.phi ? 1 : 0;
        }
        return n;
    };

    SUBCASE("ratio 0 strips everything") {
        auto recs = make_corpus();
        Rng rng(5);
        mask_labels(recs, 0.0, rng);
        CHECK(labeled_count(recs) == 0);
        for (const auto& r : recs) CHECK(r.desync_offset_s == 0.0);
    }
    SUBCASE("ratio 1 keeps everything") {
        auto recs = make_corpus();
        Rng rng(5);
        mask_labels(recs, 1.0, rng);
        CHECK(labeled_count(recs) == 10);
    }
    SUBCASE("ratio 0.2 of 10 keeps exactly 2") {
        auto recs = make_corpus();
        Rng rng(5);
        mask_labels(recs, 0.2, rng);
        CHECK(labeled_count(recs) == 2);
    }
    SUBCASE("same seed keeps the same subset") {
        auto a = make_corpus();
        auto b = make_corpus();
        Rng ra(9), rb(9);
        mask_labels(a, 0.5, ra);
        mask_labels(b, 0.5, rb);
        for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].phi == b[i].phi);
    }
    SUBCASE("bad inputs") {
        auto recs = make_corpus();
        Rng rng(5);
        CHECK_THROWS_AS(mask_labels(recs, -0.1, rng), InvalidInputError);
        CHECK_THROWS_AS(mask_labels(recs, 1.1, rng), InvalidInputError);
        mask_labels(recs, 0.0, rng);
        CHECK_THROWS_AS(mask_labels(recs, 0.5, rng), InvalidInputError);  // nothing left to keep
    }
}

TEST_CASE("apply_desync shifts the GT window inside the margin") {
    SUBCASE("d_max 0 is a no-op that leaves the rng untouched") {
        LabeledRecord rec = tiny_record("r", 2.0, 31);
        const std::vector<double> before = rec.gt->values;
        Rng rng(7), fresh(7);
        apply_desync(rec, 0.0, rng);
        CHECK(rec.gt->values == before);
        CHECK(rec.desync_offset_s == 0.0);
        CHECK(rng.next_u64() == fresh.next_u64());
    }
    SUBCASE("offsets stay inside [-d_max, d_max] and cut the right slice") {
        bool saw_neg = false, saw_pos = false;
        for (uint64_t seed = 0; seed < 50; ++seed) {
            LabeledRecord rec = tiny_record("r", 2.0, 31);
            const std::vector<double> full = rec.gt->values;
            Rng rng(seed);
            apply_desync(rec, 1.0, rng);
            const double u = rec.desync_offset_s;
            CHECK(std::abs(u) <= 1.0);
            saw_neg = saw_neg || u < 0.0;
            saw_pos = saw_pos || u > 0.0;
            REQUIRE(rec.gt->size() == rec.video.t);
            const auto start = static_cast<int64_t>(std::llround((2.0 + u) * 10.0));
            for (int64_t i = 0; i < rec.gt->size(); ++i)
                CHECK(rec.gt->values[i] == full[start + i]);
        }
        CHECK(saw_neg);
        CHECK(saw_pos);
    }
    SUBCASE("fixed seed reproduces the offset") {
        LabeledRecord a = tiny_record("r", 2.0, 31);
        LabeledRecord b = tiny_record("r", 2.0, 31);
        Rng ra(12), rb(12);
        apply_desync(a, 1.5, ra);
        apply_desync(b, 1.5, rb);
        CHECK(a.desync_offset_s == b.desync_offset_s);
        CHECK(a.gt->values == b.gt->values);
    }
    SUBCASE("insufficient margin") {
        LabeledRecord rec = tiny_record("r", 0.5, 31);
        Rng rng(7);
        CHECK_THROWS_AS(apply_desync(rec, 1.0, rng), MarginError);
    }
    SUBCASE("no GT") {
        LabeledRecord rec = tiny_record("r", 2.0, 31);
        rec.gt.reset();
        rec.phi = false;
        Rng rng(7);
        CHECK_THROWS_AS(apply_desync(rec, 1.0, rng), MissingLabelError);
    }
}

TEST_CASE("dataset store/load round trip is bit-exact") {
    const auto dir = temp_dir("roundtrip");

    std::vector<LabeledRecord> recs;
    recs.push_back(tiny_record("rec_a", 2.0, 41));
    recs[0].desync_offset_s = -0.37;
    TruthMeta truth;
    truth.hr_profile.times_s = {0.0, 3.0};
    truth.hr_profile.bpm = {66.0, 68.5};
    truth.skin = Ellipse{8.0, 8.0, 5.0, 6.0};
    truth.patch = PatchInfo{1, 2, 3, 3, 1.75};
    recs[0].truth = truth;

    recs.push_back(tiny_record("rec_b", 0.0, 42));
    recs[1].gt->fps = 10.0;
    recs[1].gt->values[3] = 0.1234567890123456789;  // exercise full-precision csv

    LabeledRecord unlabeled;
    unlabeled.id = "rec_c";
    unlabeled.video = noise_video(40, 16, 18, 7.0, 43);
    unlabeled.phi = false;
    recs.push_back(unlabeled);

    store_dataset(recs, dir.string());
    const auto back = load_dataset(dir.string());
    REQUIRE(back.size() == recs.size());
    for (size_t i = 0; i < recs.size(); ++i) {
        const auto& a = recs[i];
        const auto& b = back[i];
        CHECK(b.id == a.id);
        CHECK(b.video.t == a.video.t);
        CHECK(b.video.h == a.video.h);
        CHECK(b.video.w == a.video.w);
        CHECK(b.video.fps == a.video.fps);
        CHECK(b.video.data == a.video.data);
        CHECK(b.phi == a.phi);
        CHECK(b.desync_offset_s == a.desync_offset_s);
        REQUIRE(b.gt.has_value() == a.gt.has_value());
        if (a.gt) {
            CHECK(b.gt->fps == a.gt->fps);
            CHECK(b.gt->values == a.gt->values);
        }
        REQUIRE(b.truth.has_value() == a.truth.has_value());
        if (a.truth) {
            CHECK(b.truth->hr_profile.times_s == a.truth->hr_profile.times_s);
            CHECK(b.truth->hr_profile.bpm == a.truth->hr_profile.bpm);
            REQUIRE(b.truth->skin.has_value());
            CHECK(b.truth->skin->rx == a.truth->skin->rx);
            REQUIRE(b.truth->patch.has_value());
            CHECK(b.truth->patch->x == a.truth->patch->x);
            CHECK(b.truth->patch->freq_hz == a.truth->patch->freq_hz);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("dataset load rejects corrupted inputs, naming the field") {
    const auto dir = temp_dir("corrupt");
    std::vector<LabeledRecord> recs{tiny_record("rec_a", 1.0, 51)};
    store_dataset(recs, dir.string());
    const auto frames = dir / "rec_a" / "frames.bin";

    SUBCASE("header field renamed") {
        std::ifstream in(frames, std::ios::binary);
        std::string header;
        std::getline(in, header);
        std::string rest((std::istreambuf_iterator<char>(in)), {});
        in.close();
        const auto pos = header.find("\"T\"");
        REQUIRE(pos != std::string::npos);
        header.replace(pos, 3, "\"Z\"");
        std::ofstream out(frames, std::ios::binary);
        out << header << '\n' << rest;
        out.close();
        const auto msg = err_what([&] { (void)load_dataset(dir.string()); });
        CHECK(msg.find("field 'T'") != std::string::npos);
        CHECK_THROWS_AS((void)load_dataset(dir.string()), FormatError);
    }
    SUBCASE("payload truncated") {
        fs::resize_file(frames, fs::file_size(frames) - 7);
        const auto msg = err_what([&] { (void)load_dataset(dir.string()); });
        CHECK(msg.find("shorter") != std::string::npos);
        CHECK_THROWS_AS((void)load_dataset(dir.string()), FormatError);
    }
    SUBCASE("phi = 1 but gt.csv absent") {
        fs::remove(dir / "rec_a" / "gt.csv");
        CHECK_THROWS_AS((void)load_dataset(dir.string()), MissingLabelError);
    }
    SUBCASE("store refuses phi that disagrees with gt presence") {
        std::vector<LabeledRecord> bad{tiny_record("rec_x", 1.0, 52)};
        bad[0].gt.reset();  // phi stays 1
        CHECK_THROWS_AS(store_dataset(bad, (dir / "x").string()), MissingLabelError);
    }
    fs::remove_all(dir);
}
