#include "weakloc/dataio.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "weakloc/common.hpp"

namespace weakloc {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// ---- little-endian binary helpers ----

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

constexpr std::size_t kBinaryHeaderBytes = 4 + 4 + 8 + 8;

struct BinaryHeader {
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
};

/// Reads and validates the header and the total file length against the
/// declared shape, before any payload allocation happens.
BinaryHeader read_binary_header(std::ifstream& f, const std::string& path,
                                const char magic[4], std::size_t elem_bytes) {
    unsigned char header[kBinaryHeaderBytes];
    f.read(reinterpret_cast<char*>(header), kBinaryHeaderBytes);
    if (f.gcount() != static_cast<std::streamsize>(kBinaryHeaderBytes)) {
        throw DataError("truncated header in " + path);
    }
    if (std::memcmp(header, magic, 4) != 0) {
        throw DataError("bad magic in " + path + " (expected " + std::string(magic, 4) + ")");
    }
    std::uint32_t version = get_u32(header + 4);
    if (version != 1) {
        throw DataError("unsupported version " + std::to_string(version) + " in " + path);
    }
    BinaryHeader h;
    h.rows = get_u64(header + 8);
    h.cols = get_u64(header + 16);
    if (h.rows == 0 || h.cols == 0) {
        throw DataError("zero rows or columns declared in " + path);
    }
    if (h.cols > std::numeric_limits<std::uint64_t>::max() / h.rows ||
        h.rows * h.cols > std::numeric_limits<std::uint64_t>::max() / elem_bytes) {
        throw DataError("implausible shape declared in " + path);
    }
    std::uint64_t expected = kBinaryHeaderBytes + h.rows * h.cols * elem_bytes;
    f.seekg(0, std::ios::end);
    auto actual = static_cast<std::uint64_t>(f.tellg());
    if (actual != expected) {
        throw DataError("length mismatch in " + path + ": expected " +
                        std::to_string(expected) + " bytes, found " + std::to_string(actual));
    }
    f.seekg(static_cast<std::streamoff>(kBinaryHeaderBytes), std::ios::beg);
    return h;
}

template <typename Scalar>
Eigen::MatrixXd load_binary_matrix(const std::string& path, const char magic[4]) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    BinaryHeader h = read_binary_header(f, path, magic, sizeof(Scalar));

    std::vector<Scalar> buf(h.rows * h.cols);
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(Scalar)));
    if (!f) throw DataError("truncated payload in " + path);
    static_assert(std::endian::native == std::endian::little,
                  "payloads are little-endian; add byte swapping for this platform");

    using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> mapped(buf.data(), static_cast<Eigen::Index>(h.rows),
                                      static_cast<Eigen::Index>(h.cols));
    return mapped.template cast<double>();
}

template <typename Scalar>
void save_binary_matrix(const std::string& path, const Eigen::MatrixXd& m,
                        const char magic[4]) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw DataError("refusing to write empty matrix to " + path);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f.write(magic, 4);
    put_u32(f, 1);
    put_u64(f, static_cast<std::uint64_t>(m.rows()));
    put_u64(f, static_cast<std::uint64_t>(m.cols()));
    using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMajor payload = m.cast<Scalar>();
    static_assert(std::endian::native == std::endian::little,
                  "payloads are little-endian; add byte swapping for this platform");
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(sizeof(Scalar) * payload.size()));
    if (!f) throw DataError("failed writing " + path);
}

// ---- JSON-lines helpers ----

std::string at_line(const std::string& path, std::int64_t lineno) {
    return path + ":" + std::to_string(lineno) + ": ";
}

json parse_line(const std::string& line, const std::string& path, std::int64_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError(at_line(path, lineno) + e.what());
    }
}

const json& require(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw DataError(where + "missing field \"" + key + "\"");
    return *it;
}

BoundingBox parse_box(const json& a, const std::string& where) {
    if (!a.is_array() || a.size() != 4) {
        throw DataError(where + "box must be [x1, y1, x2, y2]");
    }
    return BoundingBox{a[0].get<double>(), a[1].get<double>(), a[2].get<double>(),
                       a[3].get<double>()};
}

std::vector<BoundingBox> parse_boxes(const json& a, const std::string& where) {
    if (!a.is_array()) throw DataError(where + "boxes must be an array");
    std::vector<BoundingBox> boxes;
    boxes.reserve(a.size());
    for (const auto& b : a) boxes.push_back(parse_box(b, where));
    return boxes;
}

json box_to_json(const BoundingBox& b) {
    return json::array({b.x1, b.y1, b.x2, b.y2});
}

json boxes_to_json(std::span<const BoundingBox> boxes) {
    json a = json::array();
    for (const auto& b : boxes) a.push_back(box_to_json(b));
    return a;
}

FrameInterval parse_interval(const json& a, const std::string& where) {
    if (!a.is_array() || a.size() != 2) throw DataError(where + "interval must be [begin, end]");
    return FrameInterval{a[0].get<int>(), a[1].get<int>()};
}

/// Runs `fn` for every non-empty line of a JSON-lines file; errors carry
/// path and line number. Throws when the file holds no records at all,
/// unless `allow_empty` (detections may legitimately be empty).
template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn, bool allow_empty = false) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    std::string line;
    std::int64_t lineno = 0;
    bool any = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = parse_line(line, path, lineno);
        const std::string where = at_line(path, lineno);
        try {
            fn(j, where);
        } catch (const json::exception& e) {
            throw DataError(where + e.what());
        }
        any = true;
    }
    if (!any && !allow_empty) throw DataError("no records found in " + path);
}

void write_lines(const std::string& path, const std::vector<ordered_json>& records) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    for (const auto& j : records) f << j.dump() << '\n';
    if (!f) throw DataError("failed writing " + path);
}

}  // namespace

Eigen::MatrixXd load_features(const std::string& path) {
    return load_binary_matrix<float>(path, "DFC1");
}

void save_features(const std::string& path, const Eigen::MatrixXd& features) {
    save_binary_matrix<float>(path, features, "DFC1");
}

Eigen::MatrixXd load_matrix(const std::string& path) {
    return load_binary_matrix<double>(path, "DMX1");
}

void save_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    save_binary_matrix<double>(path, m, "DMX1");
}

TrackData load_tracks(const std::string& path, double box_scale) {
    if (!(box_scale > 0.0)) throw DataError("box scale must be positive");
    TrackData data;
    for_each_record(path, [&](const json& j, const std::string& where) {
        const std::string type = require(j, "type", where).get<std::string>();
        if (type == "video") {
            VideoRecord v;
            v.video_id = require(j, "video_id", where).get<std::string>();
            v.num_frames = require(j, "num_frames", where).get<int>();
            if (auto it = j.find("shots"); it != j.end()) {
                for (const auto& s : *it) v.shots.push_back(parse_interval(s, where));
            }
            if (auto it = j.find("num_action_classes"); it != j.end()) {
                data.num_action_classes = std::max(data.num_action_classes, it->get<int>());
            }
            data.videos.push_back(std::move(v));
        } else if (type == "track") {
            Track t;
            t.video_id = require(j, "video_id", where).get<std::string>();
            const json& id = require(j, "track_id", where);
            t.track_id = id.is_string() ? id.get<std::string>()
                                        : std::to_string(id.get<std::int64_t>());
            int frame = require(j, "start_frame", where).get<int>();
            for (const auto& b : require(j, "boxes", where)) {
                BoundingBox box = parse_box(b, where);
                if (box_scale != 1.0) box = scale_box(box, box_scale);
                t.detections.push_back(Detection{frame++, box, std::nullopt});
            }
            if (t.detections.empty()) throw DataError(where + "track has no boxes");
            data.tracks.push_back(std::move(t));
        } else if (type == "instance") {
            ActionInstance a;
            a.video_id = require(j, "video_id", where).get<std::string>();
            a.instance_id = require(j, "instance_id", where).get<int>();
            a.class_id = require(j, "class_id", where).get<int>();
            a.interval = FrameInterval{require(j, "begin", where).get<int>(),
                                       require(j, "end", where).get<int>()};
            if (auto it = j.find("keyframes"); it != j.end()) {
                for (const auto& k : *it) {
                    if (!k.is_array() || k.size() != 5) {
                        throw DataError(where + "keyframe must be [frame, x1, y1, x2, y2]");
                    }
                    a.keyframes.push_back(Keyframe{
                        k[0].get<int>(), BoundingBox{k[1].get<double>(), k[2].get<double>(),
                                                     k[3].get<double>(), k[4].get<double>()}});
                }
            }
            if (auto it = j.find("boxes"); it != j.end()) {
                a.boxes = parse_boxes(*it, where);
            }
            data.instances.push_back(std::move(a));
        } else {
            throw DataError(where + "unknown record type \"" + type + "\"");
        }
    });
    for (const auto& a : data.instances) {
        data.num_action_classes = std::max(data.num_action_classes, a.class_id);
    }
    return data;
}

void save_tracks(const std::string& path, const Dataset& dataset) {
    std::vector<ordered_json> lines;
    for (std::size_t vi = 0; vi < dataset.videos().size(); ++vi) {
        const VideoRecord& v = dataset.videos()[vi];
        ordered_json jv{{"type", "video"},
                        {"video_id", v.video_id},
                        {"num_frames", v.num_frames},
                        {"num_action_classes", dataset.num_action_classes()}};
        if (!v.shots.empty()) {
            json shots = json::array();
            for (const auto& s : v.shots) shots.push_back(json::array({s.begin, s.end}));
            jv["shots"] = shots;
        }
        lines.push_back(std::move(jv));
        for (int ti : dataset.video_tracks(static_cast<int>(vi))) {
            const Track& t = dataset.tracks()[static_cast<std::size_t>(ti)];
            std::vector<BoundingBox> boxes;
            boxes.reserve(t.detections.size());
            for (const auto& d : t.detections) boxes.push_back(d.box);
            lines.push_back(ordered_json{{"type", "track"},
                                         {"video_id", t.video_id},
                                         {"track_id", t.track_id},
                                         {"start_frame", t.start_frame()},
                                         {"boxes", boxes_to_json(boxes)}});
        }
        for (int ii : dataset.video_instances(static_cast<int>(vi))) {
            const ActionInstance& a = dataset.instances()[static_cast<std::size_t>(ii)];
            ordered_json ja{{"type", "instance"},     {"video_id", a.video_id},
                            {"instance_id", a.instance_id}, {"class_id", a.class_id},
                            {"begin", a.interval.begin},    {"end", a.interval.end}};
            if (!a.keyframes.empty()) {
                json kfs = json::array();
                for (const auto& k : a.keyframes) {
                    kfs.push_back(json::array(
                        {k.frame, k.box.x1, k.box.y1, k.box.x2, k.box.y2}));
                }
                ja["keyframes"] = kfs;
            }
            if (!a.boxes.empty()) ja["boxes"] = boxes_to_json(a.boxes);
            lines.push_back(std::move(ja));
        }
    }
    write_lines(path, lines);
}

std::vector<AnnotationRecord> load_annotations(const std::string& path) {
    std::vector<AnnotationRecord> records;
    for_each_record(path, [&](const json& j, const std::string& where) {
        const std::string type = require(j, "type", where).get<std::string>();
        if (type != "annotation") {
            throw DataError(where + "expected annotation record, got \"" + type + "\"");
        }
        SupervisionLevel level =
            SupervisionLevel::parse(require(j, "level", where).get<std::string>());
        AnnotationRecord r;
        r.level = level.tag;
        r.video_id = require(j, "video_id", where).get<std::string>();
        switch (level.tag) {
            case SupervisionTag::VideoLevel:
                r.classes = require(j, "classes", where).get<std::vector<int>>();
                break;
            case SupervisionTag::ShotLevel:
                r.shot = parse_interval(require(j, "shot", where), where);
                r.classes = require(j, "classes", where).get<std::vector<int>>();
                break;
            case SupervisionTag::TemporalPoint:
                r.instance_id = require(j, "instance_id", where).get<int>();
                r.class_id = require(j, "class_id", where).get<int>();
                r.point = require(j, "point", where).get<int>();
                break;
            case SupervisionTag::OneBB:
                r.instance_id = require(j, "instance_id", where).get<int>();
                r.class_id = require(j, "class_id", where).get<int>();
                r.point = require(j, "point", where).get<int>();
                r.box = parse_box(require(j, "box", where), where);
                break;
            case SupervisionTag::Temporal:
            case SupervisionTag::TemporalKBB:
            case SupervisionTag::SpatialPoints:
            case SupervisionTag::Full:
                r.instance_id = require(j, "instance_id", where).get<int>();
                r.class_id = require(j, "class_id", where).get<int>();
                r.interval = FrameInterval{require(j, "begin", where).get<int>(),
                                           require(j, "end", where).get<int>()};
                break;
        }
        if (level.tag == SupervisionTag::TemporalKBB) {
            for (const auto& k : require(j, "keyframes", where)) {
                if (!k.is_array() || k.size() != 5) {
                    throw DataError(where + "keyframe must be [frame, x1, y1, x2, y2]");
                }
                r.keyframes.push_back(Keyframe{
                    k[0].get<int>(), BoundingBox{k[1].get<double>(), k[2].get<double>(),
                                                 k[3].get<double>(), k[4].get<double>()}});
            }
        } else if (level.tag == SupervisionTag::SpatialPoints) {
            for (const auto& p : require(j, "points", where)) {
                if (!p.is_array() || p.size() != 3) {
                    throw DataError(where + "point must be [frame, x, y]");
                }
                r.points.push_back(
                    SpatialPoint{p[0].get<int>(), p[1].get<double>(), p[2].get<double>()});
            }
        } else if (level.tag == SupervisionTag::Full) {
            r.boxes = parse_boxes(require(j, "boxes", where), where);
            if (static_cast<int>(r.boxes.size()) != r.interval.length()) {
                throw DataError(where + "boxes length must equal end - begin");
            }
        }
        records.push_back(std::move(r));
    });
    return records;
}

void save_annotations(const std::string& path, std::span<const AnnotationRecord> records) {
    std::vector<ordered_json> lines;
    lines.reserve(records.size());
    for (const AnnotationRecord& r : records) {
        std::string name = r.level == SupervisionTag::TemporalKBB
                               ? "temporal-" + std::to_string(r.keyframes.size()) + "bb"
                               : std::string(tag_name(r.level));
        ordered_json j{{"type", "annotation"}, {"level", name}, {"video_id", r.video_id}};
        switch (r.level) {
            case SupervisionTag::VideoLevel:
                j["classes"] = r.classes;
                break;
            case SupervisionTag::ShotLevel:
                j["shot"] = json::array({r.shot.begin, r.shot.end});
                j["classes"] = r.classes;
                break;
            case SupervisionTag::TemporalPoint:
                j["instance_id"] = r.instance_id;
                j["class_id"] = r.class_id;
                j["point"] = r.point;
                break;
            case SupervisionTag::OneBB:
                j["instance_id"] = r.instance_id;
                j["class_id"] = r.class_id;
                j["point"] = r.point;
                j["box"] = box_to_json(r.box);
                break;
            case SupervisionTag::Temporal:
            case SupervisionTag::TemporalKBB:
            case SupervisionTag::SpatialPoints:
            case SupervisionTag::Full:
                j["instance_id"] = r.instance_id;
                j["class_id"] = r.class_id;
                j["begin"] = r.interval.begin;
                j["end"] = r.interval.end;
                break;
        }
        if (r.level == SupervisionTag::TemporalKBB) {
            json kfs = json::array();
            for (const auto& k : r.keyframes) {
                kfs.push_back(json::array({k.frame, k.box.x1, k.box.y1, k.box.x2, k.box.y2}));
            }
            j["keyframes"] = kfs;
        } else if (r.level == SupervisionTag::SpatialPoints) {
            json pts = json::array();
            for (const auto& p : r.points) pts.push_back(json::array({p.frame, p.x, p.y}));
            j["points"] = pts;
        } else if (r.level == SupervisionTag::Full) {
            j["boxes"] = boxes_to_json(r.boxes);
        }
        lines.push_back(std::move(j));
    }
    write_lines(path, lines);
}

std::vector<DetectionRecord> load_detections(const std::string& path) {
    std::vector<DetectionRecord> records;
    for_each_record(path, [&](const json& j, const std::string& where) {
        const std::string type = require(j, "type", where).get<std::string>();
        if (type != "detection") {
            throw DataError(where + "expected detection record, got \"" + type + "\"");
        }
        DetectionRecord r;
        r.video_id = require(j, "video_id", where).get<std::string>();
        r.class_id = require(j, "class_id", where).get<int>();
        r.interval = FrameInterval{require(j, "begin", where).get<int>(),
                                   require(j, "end", where).get<int>()};
        r.score = require(j, "score", where).get<double>();
        r.boxes = parse_boxes(require(j, "boxes", where), where);
        if (static_cast<int>(r.boxes.size()) != r.interval.length()) {
            throw DataError(where + "boxes length must equal end - begin");
        }
        records.push_back(std::move(r));
    }, /*allow_empty=*/true);
    return records;
}

void save_detections(const std::string& path, std::span<const DetectionRecord> records) {
    std::vector<ordered_json> lines;
    lines.reserve(records.size());
    for (const DetectionRecord& r : records) {
        lines.push_back(ordered_json{{"type", "detection"},
                                     {"video_id", r.video_id},
                                     {"class_id", r.class_id},
                                     {"begin", r.interval.begin},
                                     {"end", r.interval.end},
                                     {"boxes", boxes_to_json(r.boxes)},
                                     {"score", r.score}});
    }
    write_lines(path, lines);
}

std::vector<VideoConstraintSet> load_constraints(const std::string& path) {
    std::vector<VideoConstraintSet> sets;
    for_each_record(path, [&](const json& j, const std::string& where) {
        const std::string type = require(j, "type", where).get<std::string>();
        if (type != "constraints") {
            throw DataError(where + "expected constraints record, got \"" + type + "\"");
        }
        VideoConstraintSet s;
        s.video_id = require(j, "video_id", where).get<std::string>();
        s.level_name = require(j, "level", where).get<std::string>();
        s.row_begin = require(j, "row_begin", where).get<std::int64_t>();
        s.row_end = require(j, "row_end", where).get<std::int64_t>();
        for (const auto& p : require(j, "fixed_one", where)) {
            s.fixed_one.emplace_back(p[0].get<std::int64_t>(), p[1].get<int>());
        }
        for (const auto& p : require(j, "fixed_zero", where)) {
            s.fixed_zero.emplace_back(p[0].get<std::int64_t>(), p[1].get<int>());
        }
        for (const auto& b : require(j, "bags", where)) {
            Bag bag;
            bag.class_id = require(b, "class_id", where).get<int>();
            bag.rows = require(b, "rows", where).get<std::vector<std::int64_t>>();
            s.bags.push_back(std::move(bag));
        }
        sets.push_back(std::move(s));
    });
    return sets;
}

void save_constraints(const std::string& path, std::span<const VideoConstraintSet> sets) {
    std::vector<ordered_json> lines;
    lines.reserve(sets.size());
    for (const VideoConstraintSet& s : sets) {
        json fixed_one = json::array();
        for (const auto& [row, cls] : s.fixed_one) fixed_one.push_back(json::array({row, cls}));
        json fixed_zero = json::array();
        for (const auto& [row, cls] : s.fixed_zero) fixed_zero.push_back(json::array({row, cls}));
        json bags = json::array();
        for (const Bag& b : s.bags) {
            bags.push_back(json{{"class_id", b.class_id}, {"rows", b.rows}});
        }
        lines.push_back(ordered_json{{"type", "constraints"},
                                     {"video_id", s.video_id},
                                     {"level", s.level_name},
                                     {"row_begin", s.row_begin},
                                     {"row_end", s.row_end},
                                     {"fixed_one", fixed_one},
                                     {"fixed_zero", fixed_zero},
                                     {"bags", bags}});
    }
    write_lines(path, lines);
}

void save_report(const std::string& path, const EvalReport& report,
                 const std::vector<std::pair<std::string, std::string>>& config) {
    ordered_json j;
    j["mode"] = report.mode;
    j["thresholds"] = report.thresholds;
    ordered_json per_class = ordered_json::array();
    for (const ClassReport& c : report.per_class) {
        per_class.push_back(ordered_json{
            {"class_id", c.class_id}, {"num_instances", c.num_instances}, {"ap", c.ap}});
    }
    j["per_class"] = per_class;
    j["map"] = report.map;
    ordered_json cfg = ordered_json::object();
    for (const auto& [key, value] : config) cfg[key] = value;
    j["config"] = cfg;

    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f << j.dump(2) << '\n';
    if (!f) throw DataError("failed writing " + path);
}

void save_trace_csv(const std::string& path, std::span<const TraceRow> rows) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f << "iteration,video_id,h,total_gap,gamma\n";
    char buf[96];
    for (const TraceRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", r.h, r.total_gap, r.gamma);
        f << r.iteration << ',' << r.video_id << ',' << buf << '\n';
    }
    if (!f) throw DataError("failed writing " + path);
}

}  // namespace weakloc
