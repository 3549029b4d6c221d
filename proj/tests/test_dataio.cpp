#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "weakloc/common.hpp"
#include "weakloc/dataio.hpp"
#include "weakloc/synth.hpp"

using namespace weakloc;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "weakloc-dataio-tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void append_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void append_u64(std::vector<unsigned char>& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::vector<unsigned char> dfc1_header(std::uint64_t rows, std::uint64_t dim) {
    std::vector<unsigned char> b{'D', 'F', 'C', '1'};
    append_u32(b, 1);
    append_u64(b, rows);
    append_u64(b, dim);
    return b;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("feature file header is validated before the payload") {
    auto path = temp_file("florets.dfc");

    auto ok = dfc1_header(2, 3);
    ok.resize(ok.size() + 24, 0);  // 6 zero floats
    write_bytes(path, ok);
    Eigen::MatrixXd m = load_features(path.string());
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m.isZero());

    auto bad_magic = ok;
    bad_magic[0] = 'X';
    write_bytes(path, bad_magic);
    CHECK_THROWS_AS(load_features(path.string()), DataError);

    auto truncated = dfc1_header(2, 3);
    truncated.resize(truncated.size() + 20, 0);  // 4 bytes short
    write_bytes(path, truncated);
    CHECK_THROWS_AS(load_features(path.string()), DataError);
}

TEST_CASE("feature payload is little-endian f32") {
    auto path = temp_file("one.dfc");
    auto bytes = dfc1_header(1, 1);
    bytes.insert(bytes.end(), {0x00, 0x00, 0x80, 0x3F});  // 1.0f
    write_bytes(path, bytes);
    Eigen::MatrixXd m = load_features(path.string());
    REQUIRE(m.rows() == 1);
    REQUIRE(m.cols() == 1);
    CHECK(m(0, 0) == 1.0);
}

TEST_CASE("feature round trip preserves f32-representable values") {
    auto path = temp_file("roundtrip.dfc");
    Eigen::MatrixXd m(3, 2);
    m << 0.5, -1.25, 3.0, 0.0, -0.125, 1024.0;
    save_features(path.string(), m);
    Eigen::MatrixXd back = load_features(path.string());
    CHECK(back == m);
}

TEST_CASE("matrix round trip is exact for doubles") {
    auto path = temp_file("roundtrip.dmx");
    Eigen::MatrixXd m(2, 3);
    m << 0.1, -2.7, 1e-17, 3.14159265358979, -1e300, 0.0;
    save_matrix(path.string(), m);
    Eigen::MatrixXd back = load_matrix(path.string());
    CHECK(back == m);
    CHECK_THROWS_AS(load_features(path.string()), DataError);  // wrong magic family
}

TEST_CASE("track file round trips through the dataset") {
    SynthConfig cfg;
    cfg.num_videos = 3;
    cfg.frames_per_video = 120;
    cfg.seed = 11;
    SynthResult synth = generate(cfg);

    auto path = temp_file("tracks.jsonl");
    save_tracks(path.string(), synth.dataset);
    TrackData data = load_tracks(path.string());
    CHECK(data.videos.size() == synth.dataset.videos().size());
    CHECK(data.tracks.size() == synth.dataset.tracks().size());
    CHECK(data.instances.size() == synth.dataset.instances().size());
    CHECK(data.num_action_classes == synth.dataset.num_action_classes());

    Dataset rebuilt(data.videos, data.tracks, data.instances, data.num_action_classes);
    CHECK(rebuilt.num_rows() == synth.dataset.num_rows());
    for (std::size_t i = 0; i < data.tracks.size(); ++i) {
        const Track& a = data.tracks[i];
        const Track& b = synth.dataset.tracks()[i];
        CHECK(a.video_id == b.video_id);
        CHECK(a.track_id == b.track_id);
        REQUIRE(a.detections.size() == b.detections.size());
        CHECK(a.detections[0].frame == b.detections[0].frame);
        CHECK(a.detections[0].box == b.detections[0].box);
    }
}

TEST_CASE("box_scale rescales candidate boxes but not ground truth") {
    SynthConfig cfg;
    cfg.num_videos = 1;
    cfg.frames_per_video = 120;
    cfg.seed = 5;
    SynthResult synth = generate(cfg);
    auto path = temp_file("scaled.jsonl");
    save_tracks(path.string(), synth.dataset);

    TrackData plain = load_tracks(path.string());
    TrackData scaled = load_tracks(path.string(), 2.0);

    const BoundingBox& a = plain.tracks[0].detections[0].box;
    const BoundingBox& s = scaled.tracks[0].detections[0].box;
    CHECK(s.center_x() == doctest::Approx(a.center_x()));
    CHECK(s.center_y() == doctest::Approx(a.center_y()));
    CHECK(s.width() == doctest::Approx(2.0 * a.width()));
    CHECK(s.height() == doctest::Approx(2.0 * a.height()));

    CHECK(scaled.instances[0].boxes[0] == plain.instances[0].boxes[0]);
    CHECK(scaled.instances[0].keyframes[0].box == plain.instances[0].keyframes[0].box);
}

TEST_CASE("empty track file is rejected") {
    auto path = temp_file("empty.jsonl");
    write_bytes(path, {});
    CHECK_THROWS_AS(load_tracks(path.string()), DataError);
}

TEST_CASE("single video with one 8-frame track yields one tracklet") {
    auto path = temp_file("tiny.jsonl");
    std::ofstream out(path);
    out << R"({"type":"video","video_id":"v","num_frames":8,"num_action_classes":1})" << "\n";
    out << R"({"type":"track","video_id":"v","track_id":"t0","start_frame":0,)"
        << R"("boxes":[[0,0,8,8],[0,0,8,8],[0,0,8,8],[0,0,8,8],)"
        << R"([0,0,8,8],[0,0,8,8],[0,0,8,8],[0,0,8,8]]})" << "\n";
    out.close();
    TrackData data = load_tracks(path.string());
    Dataset ds(data.videos, data.tracks, data.instances, data.num_action_classes);
    CHECK(ds.num_rows() == 1);
}

TEST_CASE("annotation records round trip per level") {
    SynthConfig cfg;
    cfg.num_videos = 2;
    cfg.frames_per_video = 160;
    cfg.seed = 7;
    SynthResult synth = generate(cfg);

    for (const auto& [level, records] : synth.annotations) {
        auto path = temp_file("ann-" + level + ".jsonl");
        save_annotations(path.string(), records);
        auto back = load_annotations(path.string());
        REQUIRE(back.size() == records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            CHECK(back[i].level == records[i].level);
            CHECK(back[i].video_id == records[i].video_id);
            CHECK(back[i].instance_id == records[i].instance_id);
            CHECK(back[i].class_id == records[i].class_id);
            CHECK(back[i].classes == records[i].classes);
            CHECK(back[i].shot == records[i].shot);
            CHECK(back[i].point == records[i].point);
            CHECK(back[i].interval == records[i].interval);
            CHECK(back[i].boxes == records[i].boxes);
            REQUIRE(back[i].keyframes.size() == records[i].keyframes.size());
            for (std::size_t k = 0; k < records[i].keyframes.size(); ++k) {
                CHECK(back[i].keyframes[k].frame == records[i].keyframes[k].frame);
                CHECK(back[i].keyframes[k].box == records[i].keyframes[k].box);
            }
        }
    }
}

TEST_CASE("empty detection list saves to an empty file and loads back") {
    auto path = temp_file("none.jsonl");
    save_detections(path.string(), {});
    CHECK(slurp(path).empty());
    CHECK(load_detections(path.string()).empty());
}

TEST_CASE("detection record is one line with fields in order") {
    DetectionRecord rec;
    rec.video_id = "v";
    rec.class_id = 2;
    rec.interval = {8, 10};
    rec.boxes = {{0, 0, 4, 4}, {1, 1, 5, 5}};
    rec.score = 0.75;

    auto path = temp_file("single.jsonl");
    save_detections(path.string(), std::vector<DetectionRecord>{rec});
    std::string text = slurp(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    auto pos = [&](const char* key) { return text.find(key); };
    CHECK(pos("video_id") < pos("class_id"));
    CHECK(pos("class_id") < pos("begin"));
    CHECK(pos("begin") < pos("end"));
    CHECK(pos("end") < pos("boxes"));
    CHECK(pos("boxes") < pos("score"));

    auto back = load_detections(path.string());
    REQUIRE(back.size() == 1);
    CHECK(back[0].video_id == rec.video_id);
    CHECK(back[0].class_id == rec.class_id);
    CHECK(back[0].interval == rec.interval);
    CHECK(back[0].boxes == rec.boxes);
    CHECK(back[0].score == rec.score);
}

TEST_CASE("constraint sets round trip") {
    VideoConstraintSet set;
    set.video_id = "v";
    set.level_name = "temporal";
    set.row_begin = 4;
    set.row_end = 10;
    set.fixed_one = {{4, 0}, {5, 2}};
    set.fixed_zero = {{6, 1}, {7, 3}};
    set.bags = {{2, {6, 7}}, {1, {8, 9}}};

    auto path = temp_file("sets.jsonl");
    save_constraints(path.string(), std::vector<VideoConstraintSet>{set});
    auto back = load_constraints(path.string());
    REQUIRE(back.size() == 1);
    CHECK(back[0].video_id == set.video_id);
    CHECK(back[0].level_name == set.level_name);
    CHECK(back[0].row_begin == set.row_begin);
    CHECK(back[0].row_end == set.row_end);
    CHECK(back[0].fixed_one == set.fixed_one);
    CHECK(back[0].fixed_zero == set.fixed_zero);
    REQUIRE(back[0].bags.size() == 2);
    CHECK(back[0].bags[0].class_id == 2);
    CHECK(back[0].bags[0].rows == std::vector<std::int64_t>{6, 7});
    CHECK(back[0].bags[1].rows == std::vector<std::int64_t>{8, 9});
}

TEST_CASE("report document echoes the mAP of its per-class APs") {
    EvalReport report;
    report.mode = "full";
    report.thresholds = {0.5};
    report.per_class = {{1, 2, {1.0}}, {2, 1, {0.5}}};
    report.map = {0.75};

    auto path = temp_file("report.json");
    save_report(path.string(), report, {{"level", "full"}});
    nlohmann::json doc = nlohmann::json::parse(slurp(path));
    CHECK(doc["mode"] == "full");
    CHECK(doc["map"][0] == 0.75);
    CHECK(doc["per_class"][0]["ap"][0] == 1.0);
    CHECK(doc["per_class"][1]["ap"][0] == 0.5);
    CHECK(doc["config"]["level"] == "full");
}

TEST_CASE("trace csv prints full-precision values") {
    std::vector<TraceRow> rows{{0, "v0", 0.5, 0.125, 1.0},
                               {10, "v1", 0.1234567890123456789, 0.0, 0.5}};
    auto path = temp_file("trace.csv");
    save_trace_csv(path.string(), rows);
    std::string text = slurp(path);
    CHECK(text.find("iteration,video_id,h,total_gap,gamma") == 0);
    CHECK(text.find("0,v0,0.5,0.125,1") != std::string::npos);
    CHECK(text.find("0.12345678901234568") != std::string::npos);
}
