#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cplab/errors.hpp"
#include "cplab/experiments.hpp"
#include "cplab/plot.hpp"
#include "cplab/png.hpp"
#include "cplab/rng.hpp"
#include "cplab/stats.hpp"
#include "cplab/synth.hpp"
#include "cplab/train.hpp"
#include "cplab/video.hpp"
#include "doctest.h"

using namespace cplab;
namespace fs = std::filesystem;

namespace {

std::string temp_dir() {
    std::string tmpl = "/tmp/cplab_exp_XXXXXX";
    char* p = mkdtemp(tmpl.data());
    REQUIRE(p != nullptr);
    return tmpl;
}

std::string err_what(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// ---- an independent KS oracle: ECDF sup distance by exhaustive scan ----

double ks_brute(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pts = a;
    pts.insert(pts.end(), b.begin(), b.end());
    double d = 0.0;
    for (const double x : pts) {
        double fa = 0, fb = 0;
        for (const double v : a) fa += v <= x ? 1.0 : 0.0;
        for (const double v : b) fb += v <= x ? 1.0 : 0.0;
        d = std::max(d, std::abs(fa / static_cast<double>(a.size()) -
                                 fb / static_cast<double>(b.size())));
    }
    return d;
}

// Kolmogorov survival via the Jacobi theta dual form, an independent route to
// the same distribution: Q(x) = 1 - sqrt(2 pi)/x * sum exp(-(2k-1)^2 pi^2 / (8 x^2)).
double kolmogorov_sf_theta(double x) {
    double cdf = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double q = (2.0 * k - 1.0) * M_PI / x;
        cdf += std::exp(-q * q / 8.0);
    }
    cdf *= std::sqrt(2.0 * M_PI) / x;
    return 1.0 - cdf;
}

// ---- a tiny PNG reader used only as a test oracle ----

struct DecodedPng {
    int64_t w = 0, h = 0;
    std::vector<uint8_t> rgb;

    Rgb at(int64_t x, int64_t y) const {
        const auto i = static_cast<size_t>((y * w + x) * 3);
        return Rgb{rgb[i], rgb[i + 1], rgb[i + 2]};
    }
    bool contains_color(const Rgb& c) const {
        for (size_t i = 0; i + 2 < rgb.size(); i += 3)
            if (rgb[i] == c.r && rgb[i + 1] == c.g && rgb[i + 2] == c.b) return true;
        return false;
    }
};

uint32_t be32(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

DecodedPng decode_png(const std::vector<uint8_t>& bytes) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    REQUIRE(bytes.size() > 8);
    REQUIRE(std::equal(sig, sig + 8, bytes.data()));

    DecodedPng out;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool saw_end = false;
    while (pos + 12 <= bytes.size() && !saw_end) {
        const uint32_t len = be32(&bytes[pos]);
        REQUIRE(pos + 12 + len <= bytes.size());
        const std::string type(bytes.begin() + static_cast<long>(pos) + 4,
                               bytes.begin() + static_cast<long>(pos) + 8);
        const uint8_t* data = &bytes[pos + 8];
        const uint32_t crc_stored = be32(&bytes[pos + 8 + len]);
        uLong crc = crc32(0L, &bytes[pos + 4], 4);
        if (len > 0) crc = crc32(crc, data, len);
        CHECK(static_cast<uint32_t>(crc) == crc_stored);
        if (type == "IHDR") {
            REQUIRE(len == 13);
            out.w = be32(data);
            out.h = be32(data + 4);
            CHECK(data[8] == 8);   // bit depth
            CHECK(data[9] == 2);   // rgb
            CHECK(data[12] == 0);  // no interlace
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            saw_end = true;
        }
        pos += 12 + len;
    }
    REQUIRE(saw_end);
    REQUIRE(out.w > 0);
    REQUIRE(out.h > 0);

    const auto stride = static_cast<size_t>(3 * out.w + 1);
    std::vector<uint8_t> raw(static_cast<size_t>(out.h) * stride);
    uLongf raw_len = raw.size();
    REQUIRE(uncompress(raw.data(), &raw_len, idat.data(), idat.size()) == Z_OK);
    REQUIRE(raw_len == raw.size());
    out.rgb.reserve(raw.size() - static_cast<size_t>(out.h));
    for (int64_t y = 0; y < out.h; ++y) {
        const uint8_t* row = &raw[static_cast<size_t>(y) * stride];
        CHECK(row[0] == 0);  // filter byte
        out.rgb.insert(out.rgb.end(), row + 1, row + stride);
    }
    return out;
}

// ---- micro fixtures: small enough that a training run takes well under a second ----

SynthConfig micro_corpus() {
    SynthConfig c;
    c.n_videos = 4;
    c.duration_s = 8.0;
    c.fps = 8.0;
    c.height = c.width = 32;
    c.hr_min_bpm = 60.0;
    c.hr_max_bpm = 100.0;
    c.seed = 5;
    return c;
}

TrainConfig micro_train() {
    TrainConfig t;
    t.epochs = 2;
    t.steps_per_epoch = 2;
    t.lr = 1e-4;
    t.clip_len_s = 4.0;
    t.crop_size = 16;
    t.model.channels = {2, 3, 4, 4};
    t.sampler.k = 2;
    t.sampler.delta_t_s = 2.0;
    return t;
}

ExperimentSpec micro_spec(ExperimentFamily fam) {
    ExperimentSpec es;
    es.family = fam;
    es.corpus = micro_corpus();
    es.train = micro_train();
    es.eval.crop_size = 16;
    es.eval.window_s = 4.0;
    es.test_videos = 1;
    es.ratios = {0.0, 1.0};
    es.d_max_s = {1.0, 0.0};  // unsorted on purpose
    es.grid_s = {1, 2};
    es.grid_t_s = {4.0};
    es.grid_dt_frac = {0.5};
    return es;
}

// Shared across cases to keep the suite fast; every consumer treats it as const.
const SaliencyResult& micro_saliency_result() {
    static const SaliencyResult r = run_saliency(micro_spec(ExperimentFamily::saliency));
    return r;
}

LabeledRecord plain_record(int64_t h, int64_t w) {
    LabeledRecord rec;
    rec.id = "plain";
    rec.video = VideoClip{8, h, w, 8.0,
                          std::vector<uint8_t>(static_cast<size_t>(8 * h * w * 3), 90)};
    return rec;
}

}  // namespace

// ---- two_sample_ks ----

TEST_CASE("ks: hand-computed sup distance on a shifted triple") {
    const auto ks = two_sample_ks({1, 2, 3}, {2, 3, 4});
    CHECK(ks.statistic == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("ks: identical samples give statistic 0 and p exactly 1") {
    const std::vector<double> a = {0.3, 1.7, 1.7, 2.0, 5.5};
    const auto ks = two_sample_ks(a, a);
    CHECK(ks.statistic == 0.0);
    CHECK(ks.p_value == 1.0);
}

TEST_CASE("ks: disjoint supports give statistic 1") {
    const auto ks = two_sample_ks({0, 1, 2}, {5, 6, 7});
    CHECK(ks.statistic == 1.0);
    const double lambda = std::sqrt(9.0 / 6.0) * 1.0;
    CHECK(ks.p_value == doctest::Approx(kolmogorov_sf_theta(lambda)).epsilon(1e-6));
}

TEST_CASE("ks: statistic matches a brute-force ecdf scan on random tied data") {
    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(static_cast<size_t>(rng.uniform_int(1, 40)));
        std::vector<double> b(static_cast<size_t>(rng.uniform_int(1, 40)));
        // Halved small integers force plenty of ties inside and across samples.
        for (auto& v : a) v = static_cast<double>(rng.uniform_int(0, 9)) / 2.0;
        for (auto& v : b) v = static_cast<double>(rng.uniform_int(0, 9)) / 2.0;
        const auto ks = two_sample_ks(a, b);
        CHECK(ks.statistic == doctest::Approx(ks_brute(a, b)).epsilon(1e-12));

        const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                          static_cast<double>(a.size() + b.size());
        const double lambda = std::sqrt(ne) * ks.statistic;
        const double expect = lambda < 0.04 ? 1.0 : kolmogorov_sf_theta(lambda);
        CHECK(ks.p_value == doctest::Approx(expect).epsilon(1e-3));
    }
}

TEST_CASE("ks: p saturates to 1 when the scaled statistic is tiny") {
    std::vector<double> a(10000), b;
    for (size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(i) * 1e-3;
    b = a;
    b.back() = 1e9;  // moves 1/10000 of the mass, lambda ~ 0.007
    const auto ks = two_sample_ks(a, b);
    CHECK(ks.statistic == doctest::Approx(1e-4).epsilon(1e-9));
    CHECK(ks.p_value == 1.0);
}

TEST_CASE("ks: empty or non-finite samples are rejected") {
    CHECK_THROWS_AS(two_sample_ks({}, {1.0}), InvalidInputError);
    CHECK_THROWS_AS(two_sample_ks({1.0}, {}), InvalidInputError);
    CHECK_THROWS_AS(two_sample_ks({1.0, std::nan("")}, {1.0}), InvalidInputError);
    CHECK_THROWS_AS(two_sample_ks({1.0}, {INFINITY}), InvalidInputError);
}

// ---- run_stats_validation ----

namespace {

SynthConfig stats_corpus(int64_t n) {
    SynthConfig c;
    c.n_videos = n;
    c.duration_s = 16.0;
    c.fps = 8.0;
    c.height = c.width = 32;
    c.hr_min_bpm = 50.0;
    c.hr_max_bpm = 110.0;
    c.seed = 9;
    return c;
}

StatsOptions micro_stats_opt() {
    StatsOptions o;
    o.grid = 2;
    o.windows = 2;
    o.crop_size = 16;
    return o;
}

}  // namespace

TEST_CASE("stats validation: distinct HRs separate cross from intra pairs") {
    const auto corpus = generate_corpus(stats_corpus(8));
    const auto res = run_stats_validation(corpus, micro_stats_opt());

    // 8 slots per video: 8 * C(8,2) intra pairs, C(8,2) video pairs * 56 slot pairs cross.
    CHECK(res.intra_mse.size() == 8 * 28);
    CHECK(res.cross_mse.size() == 28 * 56);
    const auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (const double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    CHECK(mean(res.cross_mse) > mean(res.intra_mse));
    CHECK(res.p_value < 1e-3);
    CHECK(res.ks_statistic > 0.1);
}

TEST_CASE("stats validation: duplicated videos make the two groups indistinguishable") {
    const auto one = generate_corpus(stats_corpus(1));
    std::vector<LabeledRecord> corpus;
    for (int i = 0; i < 8; ++i) corpus.push_back(one[0]);

    const auto res = run_stats_validation(corpus, micro_stats_opt());
    // Cross pairs over duplicated videos reproduce exactly the intra pairs
    // (each twice), so the ECDFs coincide bit for bit.
    CHECK(res.ks_statistic == 0.0);
    CHECK(res.p_value == 1.0);

    const auto again = run_stats_validation(corpus, micro_stats_opt());
    CHECK(again.intra_mse == res.intra_mse);
    CHECK(again.cross_mse == res.cross_mse);
}

TEST_CASE("stats validation: rejects undersized corpora and bad options") {
    const auto corpus = generate_corpus(stats_corpus(8));
    const std::vector<LabeledRecord> seven(corpus.begin(), corpus.begin() + 7);
    CHECK(err_what([&] { run_stats_validation(seven, micro_stats_opt()); }) ==
          "stats validation needs at least 8 videos, got 7");

    StatsOptions bad = micro_stats_opt();
    bad.windows = 1;
    CHECK_THROWS_AS(run_stats_validation(corpus, bad), ConfigError);
    bad = micro_stats_opt();
    bad.crop_size = 4;
    CHECK_THROWS_AS(run_stats_validation(corpus, bad), ConfigError);
}

TEST_CASE("stats validation: mixed video shapes are rejected") {
    auto corpus = generate_corpus(stats_corpus(8));
    SynthConfig longer = stats_corpus(1);
    longer.duration_s = 24.0;
    corpus[3] = generate_corpus(longer)[0];
    CHECK_THROWS_AS(run_stats_validation(corpus, micro_stats_opt()), ConsistencyError);
}

// ---- spec parsing and corpus splitting ----

TEST_CASE("experiment spec: reads keys and nests the module configs") {
    const auto cfg = Config::parse_string(
        "exp.family = label_ratio\n"
        "exp.ratios = 0, 0.25, 1\n"
        "exp.test_videos = 2\n"
        "exp.stats_grid = 2\n"
        "corpus.n_videos = 6\n"
        "train.epochs = 3\n"
        "model.s = 4\n"
        "sampler.k = 2\n"
        "eval.window_s = 10\n");
    const auto es = experiment_spec_from(cfg);
    CHECK(es.family == ExperimentFamily::label_ratio);
    CHECK(es.ratios == std::vector<double>{0.0, 0.25, 1.0});
    CHECK(es.test_videos == 2);
    CHECK(es.stats.grid == 2);
    CHECK(es.corpus.n_videos == 6);
    CHECK(es.train.epochs == 3);
    CHECK(es.train.model.s == 4);
    CHECK(es.train.sampler.k == 2);
    CHECK(es.eval.window_s == 10.0);
    CHECK(es.eval.crop_size == es.train.crop_size);
}

TEST_CASE("experiment spec: desk grids are smaller but always lose to explicit keys") {
    const auto plain = Config::parse_string("exp.family = ablation\n");
    const auto desk = experiment_spec_from(plain, false);
    CHECK(desk.ratios == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(desk.d_max_s == std::vector<double>{0.0, 1.0});
    CHECK(desk.grid_s == std::vector<int64_t>{1, 2});
    CHECK(desk.grid_t_s == std::vector<double>{5.0, 10.0});
    CHECK(desk.grid_dt_frac == std::vector<double>{0.5});

    const auto full = experiment_spec_from(plain, true);
    CHECK(full.ratios.size() == 6);
    CHECK(full.d_max_s == std::vector<double>{0.0, 0.25, 0.5, 1.0, 2.0});
    CHECK(full.grid_s == std::vector<int64_t>{1, 2, 4, 8});
    CHECK(full.grid_dt_frac == std::vector<double>{0.25, 0.5, 0.75});

    const auto forced =
        experiment_spec_from(Config::parse_string("exp.ratios = 0.1, 0.9\n"), false);
    CHECK(forced.ratios == std::vector<double>{0.1, 0.9});
}

TEST_CASE("experiment spec: invalid values raise ConfigError") {
    CHECK_THROWS_AS(experiment_spec_from(Config::parse_string("exp.family = nope\n")),
                    ConfigError);
    CHECK_THROWS_AS(experiment_spec_from(Config::parse_string("exp.ratios = 0, 1.5\n")),
                    ConfigError);
    CHECK_THROWS_AS(experiment_spec_from(Config::parse_string("exp.d_max_s = -1\n")),
                    ConfigError);
    CHECK_THROWS_AS(experiment_spec_from(Config::parse_string("exp.test_videos = 0\n")),
                    ConfigError);
    CHECK_THROWS_AS(experiment_spec_from(Config::parse_string("exp.grid_s = 3\n")),
                    ConfigError);
    CHECK_THROWS_AS(experiment_spec_from(Config::parse_string("exp.grid_s = 2.5\n")),
                    ConfigError);
    CHECK_THROWS_AS(experiment_spec_from(Config::parse_string("exp.grid_dt_frac = 1\n")),
                    ConfigError);
    CHECK_THROWS_AS(experiment_spec_from(Config::parse_string("exp.grid_t_s = 0\n")),
                    ConfigError);
}

TEST_CASE("split_corpus: interior stratified picks keep the HR extremes in train") {
    std::vector<LabeledRecord> all(12);
    for (size_t i = 0; i < all.size(); ++i) all[i].id = "r" + std::to_string(i);
    std::vector<LabeledRecord> tr, te;
    split_corpus(all, 4, tr, te);
    REQUIRE(te.size() == 4);
    CHECK(te[0].id == "r1");
    CHECK(te[1].id == "r4");
    CHECK(te[2].id == "r7");
    CHECK(te[3].id == "r10");
    REQUIRE(tr.size() == 8);
    CHECK(tr.front().id == "r0");
    CHECK(tr.back().id == "r11");

    split_corpus(std::vector<LabeledRecord>(4), 1, tr, te);
    REQUIRE(te.size() == 1);
    CHECK(tr.size() == 3);

    CHECK_THROWS_AS(split_corpus(all, 0, tr, te), ConfigError);
    CHECK_THROWS_AS(split_corpus(all, 12, tr, te), ConfigError);
}

// ---- geometry: crop box and truth masks ----

TEST_CASE("face_crop_box: a square no-truth record covers the whole frame") {
    const auto rec = plain_record(32, 32);
    const auto box = face_crop_box(rec.video, record_landmarks(rec));
    CHECK(box.x0 == 0.0);
    CHECK(box.y0 == 0.0);
    CHECK(box.side == 32.0);
}

TEST_CASE("face_crop_box: the synthetic ellipse yields the centered 1.2x box") {
    const auto corpus = generate_corpus(micro_corpus());
    const auto& rec = corpus[0];
    const auto box = face_crop_box(rec.video, record_landmarks(rec));
    // Vertical landmark extent is 2 * ry = 2 * 0.36 * 32; the box is 1.2x that.
    const double side = 1.2 * 2.0 * 0.36 * 32.0;
    CHECK(box.side == doctest::Approx(side));
    CHECK(box.x0 == doctest::Approx(16.0 - side / 2.0));
    CHECK(box.y0 == doctest::Approx(16.0 - side / 2.0));
}

namespace {

SynthConfig patched_corpus() {
    SynthConfig c = micro_corpus();
    c.patch_enabled = true;
    c.patch_x = c.patch_y = 3;
    c.patch_size = 4;
    c.patch_amp = 0.08;       // loud patch, quiet everything else, so the
    c.modulation_amp = 0.05;  // per-region variance oracle has clear margins
    c.pixel_noise_std = 0.002;
    c.drift_amp = 0.005;
    return c;
}

}  // namespace

TEST_CASE("truth_masks: regions are disjoint and land where the pixels move") {
    const auto corpus = generate_corpus(patched_corpus());
    const auto& rec = corpus[0];
    const int64_t crop_size = 16;
    const auto masks = truth_masks(rec, crop_size);
    REQUIRE(masks.h == crop_size);
    REQUIRE(masks.w == crop_size);
    REQUIRE(masks.has_patch);

    int64_t skin_n = 0, patch_n = 0;
    for (size_t i = 0; i < masks.skin.size(); ++i) {
        skin_n += masks.skin[i];
        patch_n += masks.patch[i];
        CHECK(!(masks.skin[i] && masks.patch[i]));
    }
    CHECK(skin_n > 50);  // the ellipse dominates the crop
    CHECK(patch_n >= 4);
    // The 4px patch at (3, 3) projects into the top-left corner of the crop.
    for (int64_t r = 0; r < crop_size; ++r)
        for (int64_t c = 0; c < crop_size; ++c)
            if (masks.patch[static_cast<size_t>(r * crop_size + c)]) {
                CHECK(r <= 3);
                CHECK(c <= 3);
            }

    // Oracle: temporal pixel variance. The flashing patch and the pulsing skin
    // must both out-move the background through the same crop mapping.
    const VideoClip crop = cropped_record_video(rec, crop_size);
    std::vector<double> sd(static_cast<size_t>(crop_size * crop_size));
    for (int64_t p = 0; p < crop_size * crop_size; ++p) {
        double s = 0, s2 = 0;
        for (int64_t t = 0; t < crop.t; ++t) {
            const auto v = static_cast<double>(
                crop.data[static_cast<size_t>((t * crop_size * crop_size + p) * 3 + 1)]);
            s += v;
            s2 += v * v;
        }
        const double m = s / static_cast<double>(crop.t);
        sd[static_cast<size_t>(p)] = std::sqrt(std::max(0.0, s2 / static_cast<double>(crop.t) - m * m));
    }
    double patch_sd = 0, skin_sd = 0, bg_sd = 0;
    int64_t bg_n = 0;
    for (size_t i = 0; i < sd.size(); ++i) {
        if (masks.patch[i]) patch_sd += sd[i];
        else if (masks.skin[i]) skin_sd += sd[i];
        else {
            bg_sd += sd[i];
            ++bg_n;
        }
    }
    patch_sd /= static_cast<double>(patch_n);
    skin_sd /= static_cast<double>(skin_n);
    bg_sd /= static_cast<double>(bg_n);
    CHECK(patch_sd > 2.0 * bg_sd);
    CHECK(skin_sd > 2.0 * bg_sd);
}

TEST_CASE("truth_masks: records without truth have empty masks") {
    const auto masks = truth_masks(plain_record(32, 32), 16);
    CHECK(!masks.has_patch);
    CHECK(std::count(masks.skin.begin(), masks.skin.end(), 1) == 0);
    CHECK(std::count(masks.patch.begin(), masks.patch.end(), 1) == 0);
}

// ---- png and charts ----

TEST_CASE("png: encode round-trips through an independent decoder") {
    Image img(5, 3);
    for (int64_t y = 0; y < 3; ++y)
        for (int64_t x = 0; x < 5; ++x)
            img.set(x, y, static_cast<uint8_t>(x * 40), static_cast<uint8_t>(y * 80),
                    static_cast<uint8_t>(x + y));
    const auto decoded = decode_png(encode_png(img));
    CHECK(decoded.w == 5);
    CHECK(decoded.h == 3);
    CHECK(decoded.rgb == img.rgb);
}

TEST_CASE("png: write_png emits the same bytes encode_png returns") {
    Image img(4, 4, 10, 200, 30);
    const std::string dir = temp_dir();
    write_png(dir + "/x.png", img);
    const std::string disk = slurp(dir + "/x.png");
    const auto mem = encode_png(img);
    CHECK(disk == std::string(mem.begin(), mem.end()));
    fs::remove_all(dir);
}

TEST_CASE("charts: line chart draws every auto-colored series") {
    Series a, b;
    a.label = "alpha";
    a.xs = {0, 1, 2};
    a.ys = {0.0, 1.0, 0.5};
    b.label = "beta";
    b.xs = {0, 1, 2};
    b.ys = {1.0, 0.2, 0.8};
    const auto img = line_chart("t", "x", "y", {a, b});
    const auto dec = decode_png(encode_png(img));
    CHECK(dec.contains_color(kSeriesPalette[0]));
    CHECK(dec.contains_color(kSeriesPalette[1]));
    CHECK_THROWS_AS(line_chart("t", "x", "y", {}), InvalidInputError);
}

TEST_CASE("charts: boxplot and heatmap validate their inputs") {
    const auto img = boxplot_chart("t", "v", {"a", "b"}, {{1, 2, 3, 10}, {4, 5, 6}});
    CHECK(img.w > 0);
    CHECK_THROWS_AS(boxplot_chart("t", "v", {"a"}, {{1.0, std::nan("")}}), InvalidInputError);
    CHECK_THROWS_AS(boxplot_chart("t", "v", {"a", "b"}, {{1.0}}), InvalidInputError);

    const auto heat = heatmap_image({0.0, 1.0, 2.0, 4.0}, 2, 2, 3);
    CHECK(heat.w == 6);
    CHECK(heat.h == 6);
    const auto dec = decode_png(encode_png(heat));
    // Zero maps to black, the maximum to white.
    CHECK(dec.at(0, 0) == Rgb{0, 0, 0});
    CHECK(dec.at(5, 5) == Rgb{255, 255, 255});
    CHECK_THROWS_AS(heatmap_image({1.0}, 1, 2, 3), InvalidInputError);
    CHECK_THROWS_AS(heatmap_image({-1.0}, 1, 1, 3), InvalidInputError);
}

// ---- family runners on micro configs ----

TEST_CASE("label ratio sweep: keeps spec order and is a pure function of the spec") {
    const auto spec = micro_spec(ExperimentFamily::label_ratio);
    const auto res = run_label_ratio(spec);
    CHECK(res.ratios == spec.ratios);
    REQUIRE(res.runs.size() == 2);
    for (const auto& run : res.runs) {
        CHECK(run.epochs.size() == 2);
        CHECK(run.steps.size() == 4);
        CHECK(run.selected_epoch >= 0);
        CHECK(run.selected_epoch < 2);
        CHECK(run.report.evaluated > 0);
    }
    const auto res2 = run_label_ratio(spec);
    CHECK(report_json(res2) == report_json(res));
}

TEST_CASE("desync sweep: sorts d_max, runs both methods, insists on full labels") {
    auto spec = micro_spec(ExperimentFamily::desync);
    const auto res = run_desync(spec);
    CHECK(res.d_max_s == std::vector<double>{0.0, 1.0});
    CHECK(res.contrast.size() == 2);
    CHECK(res.baseline.size() == 2);
    // Baseline logs carry the supervised loss; the GT contrast terms stay zero.
    for (const auto& s : res.baseline[0].steps) CHECK(s.l_p_rr == 0.0);

    spec.train.label_ratio = 0.5;
    CHECK(err_what([&] { run_desync(spec); }) == "the desync sweep requires label ratio 1");
}

TEST_CASE("ablation: grid cells plus toggles, with the advertised semantics") {
    const auto spec = micro_spec(ExperimentFamily::ablation);
    const auto res = run_ablation(spec);
    std::vector<std::string> names;
    for (const auto& c : res.cells) names.push_back(c.name);
    CHECK(names == std::vector<std::string>{"s1_t4_dt2", "s2_t4_dt2", "full", "no_spatial",
                                            "no_temporal", "no_cross_video", "no_hr_range",
                                            "no_l_p_gr", "no_l_n_gr"});
    for (const auto& c : res.cells) {
        if (c.name == "s1_t4_dt2" || c.name == "no_spatial") CHECK(c.block_s == 1);
        if (c.name == "no_cross_video")
            for (const auto& s : c.run.steps) CHECK(s.l_n_rr == 0.0);
        if (c.name == "full") {
            bool any = false;
            for (const auto& s : c.run.steps) any = any || s.l_n_rr != 0.0;
            CHECK(any);
        }
    }
}

TEST_CASE("noise: unsupervised arms on clean and patched corpora") {
    auto spec = micro_spec(ExperimentFamily::noise);
    spec.corpus = patched_corpus();
    spec.train.label_ratio = 1.0;  // the runner must force this back to 0
    const auto res = run_noise(spec);

    for (const auto& s : res.clean.run.steps) {
        CHECK(s.l_p_gr == 0.0);
        CHECK(s.l_n_gr == 0.0);
    }
    REQUIRE(res.clean.saliency.size() == 1);
    REQUIRE(res.noisy.saliency.size() == 1);
    CHECK(!res.clean.saliency[0].mean_patch.has_value());
    REQUIRE(res.noisy.saliency[0].mean_patch.has_value());
    REQUIRE(res.noisy.saliency[0].patch_fraction.has_value());
    CHECK(*res.noisy.saliency[0].patch_fraction >= 0.0);
    CHECK(*res.noisy.saliency[0].patch_fraction <= 1.0);
    CHECK(res.noisy.saliency[0].map.size() == 16 * 16);
    CHECK(res.clean.saliency[0].skin_fraction >= 0.0);
    CHECK(res.clean.saliency[0].skin_fraction <= 1.0);
}

TEST_CASE("saliency: one map and one waveform overlay per test record") {
    const auto& res = micro_saliency_result();
    REQUIRE(res.maps.size() == 1);
    REQUIRE(res.waves.size() == 1);
    CHECK(res.maps[0].map.size() == 16 * 16);
    CHECK(res.maps[0].record_id == res.waves[0].record_id);
    CHECK(res.waves[0].est.fps == 8.0);
    CHECK(res.waves[0].est.size() == 32);  // 4 s clip at 8 fps
    REQUIRE(res.waves[0].gt.has_value());
    CHECK(res.waves[0].gt->size() == 32);
}

TEST_CASE("stats family runner: wires the corpus into the validation") {
    ExperimentSpec spec = micro_spec(ExperimentFamily::stats);
    spec.corpus = stats_corpus(8);
    spec.stats = micro_stats_opt();
    const auto res = run_stats(spec);
    CHECK(!res.intra_mse.empty());
    CHECK(!res.cross_mse.empty());
    CHECK(res.p_value >= 0.0);
    CHECK(res.p_value <= 1.0);
}

// ---- reports ----

TEST_CASE("report_json: non-finite values ride as strings and reload bit-exact") {
    StatsResult res;
    res.intra_mse = {1.0, INFINITY};
    res.cross_mse = {std::nan(""), -INFINITY};
    res.ks_statistic = 0.5;
    res.p_value = 0.25;
    const std::string text = report_json(res);
    CHECK(text.find("\"inf\"") != std::string::npos);
    CHECK(text.find("\"nan\"") != std::string::npos);
    CHECK(text.find("\"-inf\"") != std::string::npos);
    const auto doc = nlohmann::json::parse(text);
    CHECK(doc.dump(2) + "\n" == text);
    CHECK(doc["ks_statistic"] == 0.5);
}

TEST_CASE("emit_report: label ratio writes the full file set atomically") {
    const auto res = run_label_ratio(micro_spec(ExperimentFamily::label_ratio));
    const std::string dir = temp_dir() + "/label_ratio";
    emit_report(res, dir);

    CHECK(slurp(dir + "/report.json") == report_json(res));
    for (const char* f : {"label_ratio.csv", "rmse_vs_ratio.png", "snr_vs_ratio.png",
                          "ipr_curves.png"})
        CHECK(fs::exists(dir + "/" + f));
    for (const auto& e : fs::directory_iterator(dir))
        CHECK(e.path().extension() != ".tmp");

    const std::string csv = slurp(dir + "/label_ratio.csv");
    CHECK(csv.rfind("ratio,selected_epoch,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 ratios

    const auto chart = decode_png(
        std::vector<uint8_t>(slurp(dir + "/ipr_curves.png").begin(),
                             slurp(dir + "/ipr_curves.png").end()));
    CHECK(chart.contains_color(kSeriesPalette[0]));
    CHECK(chart.contains_color(kSeriesPalette[1]));
    fs::remove_all(fs::path(dir).parent_path());
}

TEST_CASE("emit_report: empty results fail before anything is created") {
    const std::string dir = temp_dir() + "/sub/report";
    CHECK_THROWS_AS(emit_report(LabelRatioResult{}, dir), InvalidInputError);
    CHECK_THROWS_AS(emit_report(DesyncResult{}, dir), InvalidInputError);
    CHECK_THROWS_AS(emit_report(StatsResult{}, dir), InvalidInputError);
    CHECK_THROWS_AS(emit_report(NoiseResult{}, dir), InvalidInputError);
    CHECK_THROWS_AS(emit_report(AblationResult{}, dir), InvalidInputError);
    CHECK_THROWS_AS(emit_report(SaliencyResult{}, dir), InvalidInputError);
    CHECK(!fs::exists(dir));
    CHECK(!fs::exists(fs::path(dir).parent_path()));
    fs::remove_all(fs::path(dir).parent_path().parent_path());
}

TEST_CASE("emit_report: an unwritable destination surfaces IoError") {
    const std::string dir = temp_dir();
    std::ofstream(dir + "/blocker").put('x');
    StatsResult res;
    res.intra_mse = {1.0};
    res.cross_mse = {2.0};
    CHECK_THROWS_AS(emit_report(res, dir + "/blocker/report"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("emit_report: stats produces the boxplot and long-form csv") {
    StatsResult res;
    res.intra_mse = {0.1, 0.2, 0.3};
    res.cross_mse = {0.4, 0.5};
    res.ks_statistic = 1.0;
    res.p_value = 0.01;
    const std::string dir = temp_dir() + "/stats";
    emit_report(res, dir);
    CHECK(slurp(dir + "/report.json") == report_json(res));
    const std::string csv = slurp(dir + "/psd_pair_mse.csv");
    CHECK(csv.rfind("group,psd_pair_mse\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
    CHECK(csv.find("intra,0.1") != std::string::npos);
    CHECK(csv.find("cross,0.5") != std::string::npos);
    CHECK(fs::exists(dir + "/psd_pair_mse.png"));
    fs::remove_all(fs::path(dir).parent_path());
}

TEST_CASE("emit_report: saliency writes heatmaps, overlays and raw waveforms") {
    const auto& res = micro_saliency_result();
    const std::string dir = temp_dir() + "/saliency";
    emit_report(res, dir);

    const std::string id = res.maps[0].record_id;
    CHECK(slurp(dir + "/report.json") == report_json(res));
    CHECK(fs::exists(dir + "/saliency.csv"));
    CHECK(fs::exists(dir + "/saliency_" + id + ".png"));

    const std::string wave_png = slurp(dir + "/waveform_" + id + ".png");
    const auto dec = decode_png(std::vector<uint8_t>(wave_png.begin(), wave_png.end()));
    CHECK(dec.contains_color(kSeriesPalette[0]));  // estimate trace
    CHECK(dec.contains_color(kSeriesPalette[1]));  // gt trace

    const std::string csv = slurp(dir + "/waveform_" + id + ".csv");
    CHECK(csv.rfind("time_s,est,gt\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 33);  // header + 32 samples
    fs::remove_all(fs::path(dir).parent_path());
}

TEST_CASE("emit_report: desync and ablation tables cover every cell") {
    const auto spec = micro_spec(ExperimentFamily::desync);
    const auto res = run_desync(spec);
    const std::string dir = temp_dir();
    emit_report(res, dir + "/desync");
    const std::string csv = slurp(dir + "/desync/desync.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 2 d_max * 2 methods
    CHECK(csv.find(",contrast,") != std::string::npos);
    CHECK(csv.find(",baseline,") != std::string::npos);
    CHECK(fs::exists(dir + "/desync/rmse_vs_dmax.png"));
    CHECK(fs::exists(dir + "/desync/snr_vs_dmax.png"));

    DesyncResult bad = res;
    bad.baseline.pop_back();
    CHECK_THROWS_AS(emit_report(bad, dir + "/desync_bad"), ShapeError);

    const auto abl = run_ablation(micro_spec(ExperimentFamily::ablation));
    emit_report(abl, dir + "/ablation");
    const std::string acsv = slurp(dir + "/ablation/ablation.csv");
    CHECK(std::count(acsv.begin(), acsv.end(), '\n') ==
          static_cast<int64_t>(abl.cells.size()) + 1);
    CHECK(acsv.find("no_cross_video,") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("write_eval_csv: one row per window") {
    EvalReport rep;
    WindowResult w;
    w.record_id = "rec_a";
    w.t0_s = 0.0;
    w.est_hr_bpm = 70.0;
    w.ref_hr_bpm = 72.0;
    rep.windows.push_back(w);
    w.t0_s = 30.0;
    w.error = "no spectral peak";
    rep.windows.push_back(w);

    const std::string dir = temp_dir();
    write_eval_csv(dir + "/eval.csv", rep);
    const std::string csv = slurp(dir + "/eval.csv");
    CHECK(csv.rfind("record_id,t0_s,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("rec_a,30,") != std::string::npos);
    CHECK(csv.find("no spectral peak") != std::string::npos);
    fs::remove_all(dir);
}
