#include "cplab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "cplab/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cplab {

double HrProfile::at(double t) const {
    if (times_s.empty() || times_s.size() != bpm.size())
        throw InvalidProfileError("hr profile: empty or inconsistent table");
    if (times_s.size() == 1 || t <= times_s.front()) return bpm.front();
    if (t >= times_s.back()) return bpm.back();
    const auto it = std::upper_bound(times_s.begin(), times_s.end(), t);
    const auto i = static_cast<size_t>(it - times_s.begin());
    const double u = (t - times_s[i - 1]) / (times_s[i] - times_s[i - 1]);
    return bpm[i - 1] + u * (bpm[i] - bpm[i - 1]);
}

double HrProfile::mean_bpm() const {
    if (bpm.empty()) throw InvalidProfileError("hr profile: empty table");
    double s = 0.0;
    for (double v : bpm) s += v;
    return s / static_cast<double>(bpm.size());
}

LandmarkSequence landmarks_from_ellipse(const Ellipse& e, int64_t frames) {
    std::vector<Landmark> pts;
    const double d = std::numbers::sqrt2 / 2.0;
    pts.push_back({e.cx - e.rx, e.cy});
    pts.push_back({e.cx + e.rx, e.cy});
    pts.push_back({e.cx, e.cy - e.ry});
    pts.push_back({e.cx, e.cy + e.ry});
    pts.push_back({e.cx - e.rx * d, e.cy - e.ry * d});
    pts.push_back({e.cx + e.rx * d, e.cy - e.ry * d});
    pts.push_back({e.cx - e.rx * d, e.cy + e.ry * d});
    pts.push_back({e.cx + e.rx * d, e.cy + e.ry * d});
    LandmarkSequence seq;
    seq.frames.assign(frames, pts);
    return seq;
}

Signal aligned_gt_window(const LabeledRecord& rec, double t0_s, int64_t samples) {
    if (!rec.gt) throw MissingLabelError("record '" + rec.id + "' has no GT signal");
    const Signal& gt = *rec.gt;
    if (std::abs(gt.fps - rec.video.fps) > 1e-9 * rec.video.fps)
        throw ConsistencyError("record '" + rec.id + "': gt fps differs from video fps");
    const int64_t margin = (gt.size() - rec.video.t) / 2;
    if (margin < 0)
        throw ConsistencyError("record '" + rec.id + "': gt shorter than video");
    const auto start = margin + static_cast<int64_t>(std::llround(t0_s * gt.fps));
    if (start < 0 || start + samples > gt.size())
        throw InvalidInputError("aligned_gt_window: window outside the GT trace");
    Signal out;
    out.fps = gt.fps;
    out.values.assign(gt.values.begin() + start, gt.values.begin() + start + samples);
    return out;
}

void mask_labels(std::vector<LabeledRecord>& records, double ratio, Rng& rng) {
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw InvalidInputError("mask_labels: ratio must lie in [0, 1]");
    const auto keep = static_cast<int64_t>(
        std::llround(ratio * static_cast<double>(records.size())));
    std::vector<size_t> labeled;
    for (size_t i = 0; i < records.size(); ++i)
        if (records[i].phi) labeled.push_back(i);
    if (keep > static_cast<int64_t>(labeled.size()))
        throw InvalidInputError("mask_labels: corpus has fewer labeled records than requested");
    rng.shuffle(labeled);
    for (size_t j = static_cast<size_t>(keep); j < labeled.size(); ++j) {
        auto& rec = records[labeled[j]];
        rec.gt.reset();
        rec.phi = false;
        rec.desync_offset_s = 0.0;
    }
}

void apply_desync(LabeledRecord& record, double d_max_s, Rng& rng) {
    if (d_max_s < 0.0) throw InvalidInputError("apply_desync: d_max must be nonnegative");
    if (d_max_s == 0.0) return;
    if (!record.gt) throw MissingLabelError("apply_desync: record has no GT signal");
    Signal& gt = *record.gt;
    if (std::abs(gt.fps - record.video.fps) > 1e-9 * record.video.fps)
        throw ConsistencyError("apply_desync: gt fps differs from video fps");
    const double margin_s =
        (gt.duration_s() - record.video.duration_s()) / 2.0;
    if (margin_s + 1e-9 < d_max_s)
        throw MarginError("apply_desync: GT margin " + std::to_string(margin_s) +
                          " s cannot absorb d_max " + std::to_string(d_max_s) + " s");
    const double u = rng.uniform(-d_max_s, d_max_s);
    const auto start = std::clamp<int64_t>(
        static_cast<int64_t>(std::llround((margin_s + u) * gt.fps)), 0,
        gt.size() - record.video.t);
    Signal cut;
    cut.fps = gt.fps;
    cut.values.assign(gt.values.begin() + start, gt.values.begin() + start + record.video.t);
    gt = std::move(cut);
    record.desync_offset_s = u;
}

namespace {

json profile_to_json(const HrProfile& p) {
    return json{{"times_s", p.times_s}, {"bpm", p.bpm}};
}

HrProfile profile_from_json(const json& j) {
    HrProfile p;
    if (!j.contains("times_s") || !j.contains("bpm"))
        throw FormatError("meta.json: true_hr_profile missing field 'times_s' or 'bpm'");
    p.times_s = j.at("times_s").get<std::vector<double>>();
    p.bpm = j.at("bpm").get<std::vector<double>>();
    return p;
}

void write_frames_bin(const fs::path& path, const VideoClip& v) {
    json header{{"T", v.t}, {"H", v.h}, {"W", v.w}, {"C", 3}, {"fps", v.fps}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(v.data.data()),
              static_cast<std::streamsize>(v.data.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

VideoClip read_frames_bin(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("frames.bin: missing header line");
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception&) {
        throw FormatError("frames.bin: header line is not valid JSON");
    }
    VideoClip v;
    for (const char* field : {"T", "H", "W", "C", "fps"})
        if (!header.contains(field))
            throw FormatError(std::string("frames.bin: header missing field '") + field + "'");
    v.t = header.at("T").get<int64_t>();
    v.h = header.at("H").get<int64_t>();
    v.w = header.at("W").get<int64_t>();
    const auto channels = header.at("C").get<int64_t>();
    v.fps = header.at("fps").get<double>();
    if (channels != 3) throw FormatError("frames.bin: field 'C' must be 3");
    if (v.t <= 0 || v.h <= 0 || v.w <= 0 || !(v.fps > 0.0))
        throw FormatError("frames.bin: nonpositive dimension or fps in header");
    const int64_t expect = v.t * v.h * v.w * 3;
    v.data.resize(expect);
    in.read(reinterpret_cast<char*>(v.data.data()), expect);
    if (in.gcount() != expect)
        throw FormatError("frames.bin: payload shorter than T*H*W*C bytes");
    char extra;
    if (in.read(&extra, 1))
        throw FormatError("frames.bin: payload longer than T*H*W*C bytes");
    return v;
}

}  // namespace

void store_dataset(const std::vector<LabeledRecord>& records, const std::string& dir) {
    if (records.empty()) throw InvalidInputError("store_dataset: no records");
    fs::create_directories(dir);
    for (const auto& rec : records) {
        if (rec.id.empty()) throw InvalidInputError("store_dataset: record with empty id");
        if (rec.phi != rec.gt.has_value())
            throw MissingLabelError("store_dataset: record '" + rec.id +
                                    "' violates phi <=> gt presence");
        const fs::path rdir = fs::path(dir) / rec.id;
        fs::create_directories(rdir);
        write_frames_bin(rdir / "frames.bin", rec.video);

        json meta;
        meta["phi"] = rec.phi ? 1 : 0;
        meta["desync_offset_s"] = rec.desync_offset_s;
        if (rec.truth) {
            meta["true_hr_profile"] = profile_to_json(rec.truth->hr_profile);
            if (rec.truth->skin) {
                const auto& e = *rec.truth->skin;
                meta["skin_mask"] = {{"cx", e.cx}, {"cy", e.cy}, {"rx", e.rx}, {"ry", e.ry}};
            } else {
                meta["skin_mask"] = nullptr;
            }
            if (rec.truth->patch) {
                const auto& p = *rec.truth->patch;
                meta["patch"] = {{"x", p.x}, {"y", p.y}, {"w", p.w}, {"h", p.h},
                                 {"freq_hz", p.freq_hz}};
            } else {
                meta["patch"] = nullptr;
            }
        } else {
            meta["true_hr_profile"] = nullptr;
            meta["skin_mask"] = nullptr;
            meta["patch"] = nullptr;
        }
        if (rec.gt) meta["gt_fps"] = rec.gt->fps;  // exact fps; csv spacing only approximates it
        std::ofstream mout(rdir / "meta.json", std::ios::binary);
        if (!mout) throw IoError("cannot open for writing: " + (rdir / "meta.json").string());
        mout << meta.dump(2) << '\n';

        if (rec.gt) write_signal_csv((rdir / "gt.csv").string(), *rec.gt);
    }
}

std::vector<LabeledRecord> load_dataset(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("dataset directory not found: " + dir);
    std::vector<fs::path> rdirs;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) rdirs.push_back(entry.path());
    std::sort(rdirs.begin(), rdirs.end());
    if (rdirs.empty()) throw FormatError("dataset: no record directories in " + dir);

    std::vector<LabeledRecord> records;
    for (const auto& rdir : rdirs) {
        LabeledRecord rec;
        rec.id = rdir.filename().string();
        rec.video = read_frames_bin(rdir / "frames.bin");

        std::ifstream min(rdir / "meta.json", std::ios::binary);
        if (!min) throw FormatError("dataset record '" + rec.id + "': meta.json missing");
        json meta;
        try {
            min >> meta;
        } catch (const json::exception&) {
            throw FormatError("meta.json: not valid JSON in record '" + rec.id + "'");
        }
        for (const char* field : {"phi", "desync_offset_s"})
            if (!meta.contains(field))
                throw FormatError(std::string("meta.json: missing field '") + field + "'");
        const auto phi_raw = meta.at("phi").get<int64_t>();
        if (phi_raw != 0 && phi_raw != 1)
            throw FormatError("meta.json: field 'phi' must be 0 or 1");
        rec.phi = phi_raw == 1;
        rec.desync_offset_s = meta.at("desync_offset_s").get<double>();

        if (meta.contains("true_hr_profile") && !meta.at("true_hr_profile").is_null()) {
            TruthMeta truth;
            truth.hr_profile = profile_from_json(meta.at("true_hr_profile"));
            if (meta.contains("skin_mask") && !meta.at("skin_mask").is_null()) {
                const auto& j = meta.at("skin_mask");
                for (const char* field : {"cx", "cy", "rx", "ry"})
                    if (!j.contains(field))
                        throw FormatError(std::string("meta.json: skin_mask missing field '") +
                                          field + "'");
                truth.skin = Ellipse{j.at("cx").get<double>(), j.at("cy").get<double>(),
                                     j.at("rx").get<double>(), j.at("ry").get<double>()};
            }
            if (meta.contains("patch") && !meta.at("patch").is_null()) {
                const auto& j = meta.at("patch");
                for (const char* field : {"x", "y", "w", "h", "freq_hz"})
                    if (!j.contains(field))
                        throw FormatError(std::string("meta.json: patch missing field '") +
                                          field + "'");
                truth.patch =
                    PatchInfo{j.at("x").get<int64_t>(), j.at("y").get<int64_t>(),
                              j.at("w").get<int64_t>(), j.at("h").get<int64_t>(),
                              j.at("freq_hz").get<double>()};
            }
            rec.truth = std::move(truth);
        }

        const bool has_gt_file = fs::exists(rdir / "gt.csv");
        if (rec.phi && !has_gt_file)
            throw MissingLabelError("dataset record '" + rec.id +
                                    "': phi = 1 but gt.csv is absent");
        if (!rec.phi && has_gt_file)
            throw MissingLabelError("dataset record '" + rec.id +
                                    "': phi = 0 but gt.csv is present");
        if (rec.phi) {
            rec.gt = read_signal_csv((rdir / "gt.csv").string());
            if (meta.contains("gt_fps")) {
                const double exact = meta.at("gt_fps").get<double>();
                if (std::abs(exact - rec.gt->fps) > 1e-6 * exact)
                    throw FormatError("meta.json: field 'gt_fps' disagrees with gt.csv spacing");
                rec.gt->fps = exact;
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace cplab
