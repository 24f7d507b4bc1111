// Copyright 2026 The simtrack authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "simtrack/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "simtrack/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace simtrack {

// ---- logging ----------------------------------------------------------------

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("SIMTRACK_LOG");
        if (env == nullptr) return LogLevel::warn;
        const std::string v(env);
        if (v == "error") return LogLevel::error;
        if (v == "warn") return LogLevel::warn;
        if (v == "info") return LogLevel::info;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

void log_msg(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    static const char* names[] = {"ERROR", "WARN", "INFO", "DEBUG"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

double parse_double(const std::string& s) {
    const char* c = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(c, &end);
    if (end == c || *end != '\0') throw ParseError("malformed number '" + s + "'");
    return v;
}

// ---- frames ------------------------------------------------------------------

void write_pgm(const std::string& path, const Eigen::MatrixXf& img01) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IOError("cannot write " + path);
    f << "P5\n" << img01.cols() << " " << img01.rows() << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(img01.cols()));
    for (Eigen::Index r = 0; r < img01.rows(); ++r) {
        for (Eigen::Index c = 0; c < img01.cols(); ++c) {
            const float v = std::clamp(img01(r, c), 0.0f, 1.0f);
            row[static_cast<std::size_t>(c)] = static_cast<unsigned char>(std::lround(v * 255.0f));
        }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

Eigen::MatrixXf read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IOError("cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw ParseError(path + ": not a binary PGM");
    long width = 0, height = 0, maxval = 0;
    f >> width >> height >> maxval;
    if (width <= 0 || height <= 0 || maxval != 255) throw ParseError(path + ": bad PGM header");
    f.get();  // single whitespace after header
    std::vector<unsigned char> data(static_cast<std::size_t>(width) * height);
    if (!f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()))) {
        throw ParseError(path + ": truncated PGM payload");
    }
    Eigen::MatrixXf img(height, width);
    for (long r = 0; r < height; ++r) {
        for (long c = 0; c < width; ++c) {
            img(r, c) = data[static_cast<std::size_t>(r) * width + c] / 255.0f;
        }
    }
    return img;
}

void write_frame_cube(const std::string& path, const std::vector<Eigen::MatrixXf>& frames) {
    if (frames.empty()) throw InvalidArgument("cannot write empty frame cube");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IOError("cannot write " + path);
    const std::uint32_t n1 = static_cast<std::uint32_t>(frames.front().rows());
    const std::uint32_t n2 = static_cast<std::uint32_t>(frames.front().cols());
    const std::uint32_t k = static_cast<std::uint32_t>(frames.size());
    f.write(reinterpret_cast<const char*>(&n1), 4);
    f.write(reinterpret_cast<const char*>(&n2), 4);
    f.write(reinterpret_cast<const char*>(&k), 4);
    std::vector<unsigned char> row(n2);
    for (const auto& frame : frames) {
        for (std::uint32_t r = 0; r < n1; ++r) {
            for (std::uint32_t c = 0; c < n2; ++c) {
                row[c] = static_cast<unsigned char>(
                    std::lround(std::clamp(frame(r, c), 0.0f, 1.0f) * 255.0f));
            }
            f.write(reinterpret_cast<const char*>(row.data()), n2);
        }
    }
}

std::vector<Eigen::MatrixXf> read_frame_cube(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IOError("cannot open " + path);
    std::uint32_t n1 = 0, n2 = 0, k = 0;
    f.read(reinterpret_cast<char*>(&n1), 4);
    f.read(reinterpret_cast<char*>(&n2), 4);
    f.read(reinterpret_cast<char*>(&k), 4);
    if (!f || n1 == 0 || n2 == 0 || k == 0) throw ParseError(path + ": bad cube header");
    std::vector<Eigen::MatrixXf> frames;
    std::vector<unsigned char> row(n2);
    for (std::uint32_t i = 0; i < k; ++i) {
        Eigen::MatrixXf frame(n1, n2);
        for (std::uint32_t r = 0; r < n1; ++r) {
            if (!f.read(reinterpret_cast<char*>(row.data()), n2)) {
                throw ParseError(path + ": truncated cube payload");
            }
            for (std::uint32_t c = 0; c < n2; ++c) frame(r, c) = row[c] / 255.0f;
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

std::vector<Eigen::MatrixXf> read_frames_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IOError("not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".pgm") paths.push_back(e.path().string());
    }
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw IOError("no .pgm frames in " + dir);
    std::vector<Eigen::MatrixXf> frames;
    frames.reserve(paths.size());
    for (const auto& p : paths) frames.push_back(read_pgm(p));
    return frames;
}

// ---- IQ ----------------------------------------------------------------------

namespace {
constexpr char kIqMagic[8] = {'S', 'I', 'M', 'T', 'R', 'K', 'I', 'Q'};
constexpr std::int64_t kIqHeaderBytes = 8 + 8 + 8 + 8 + 4 + 8;

void write_iq_header(std::FILE* f, const IqHeader& h) {
    std::fwrite(kIqMagic, 1, 8, f);
    std::fwrite(&h.fs, 8, 1, f);
    std::fwrite(&h.f_center, 8, 1, f);
    std::fwrite(&h.t0, 8, 1, f);
    std::fwrite(&h.sensor_id, 4, 1, f);
    std::fwrite(&h.n, 8, 1, f);
}

IqHeader read_iq_header(std::FILE* f, const std::string& path) {
    char magic[8];
    IqHeader h;
    if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kIqMagic, 8) != 0) {
        throw ParseError(path + ": bad IQ magic");
    }
    if (std::fread(&h.fs, 8, 1, f) != 1 || std::fread(&h.f_center, 8, 1, f) != 1 ||
        std::fread(&h.t0, 8, 1, f) != 1 || std::fread(&h.sensor_id, 4, 1, f) != 1 ||
        std::fread(&h.n, 8, 1, f) != 1) {
        throw ParseError(path + ": truncated IQ header");
    }
    return h;
}
}  // namespace

struct IqWriter::Impl {
    std::FILE* f = nullptr;
    IqHeader header;
    std::string path;
};

IqWriter::IqWriter(const std::string& path, double fs, double f_center, double t0,
                   std::uint32_t sensor_id)
    : impl_(new Impl) {
    impl_->f = std::fopen(path.c_str(), "wb");
    impl_->path = path;
    if (impl_->f == nullptr) {
        delete impl_;
        throw IOError("cannot write " + path);
    }
    impl_->header = {fs, f_center, t0, sensor_id, 0};
    write_iq_header(impl_->f, impl_->header);
}

void IqWriter::append(const Eigen::Ref<const Eigen::VectorXcd>& chunk) {
    std::vector<float> buf(static_cast<std::size_t>(chunk.size()) * 2);
    for (Eigen::Index i = 0; i < chunk.size(); ++i) {
        buf[2 * static_cast<std::size_t>(i)] = static_cast<float>(chunk(i).real());
        buf[2 * static_cast<std::size_t>(i) + 1] = static_cast<float>(chunk(i).imag());
    }
    if (std::fwrite(buf.data(), 4, buf.size(), impl_->f) != buf.size()) {
        throw IOError("short write to " + impl_->path);
    }
    impl_->header.n += static_cast<std::uint64_t>(chunk.size());
}

void IqWriter::close() {
    if (impl_->f == nullptr) return;
    std::fseek(impl_->f, 0, SEEK_SET);
    write_iq_header(impl_->f, impl_->header);
    std::fclose(impl_->f);
    impl_->f = nullptr;
}

IqWriter::~IqWriter() {
    close();
    delete impl_;
}

struct IqReader::Impl {
    std::FILE* f = nullptr;
    IqHeader header;
    std::string path;
};

IqReader::IqReader(const std::string& path) : impl_(new Impl) {
    impl_->f = std::fopen(path.c_str(), "rb");
    impl_->path = path;
    if (impl_->f == nullptr) {
        delete impl_;
        throw IOError("cannot open " + path);
    }
    try {
        impl_->header = read_iq_header(impl_->f, path);
    } catch (...) {
        std::fclose(impl_->f);
        delete impl_;
        throw;
    }
}

IqReader::~IqReader() {
    if (impl_->f != nullptr) std::fclose(impl_->f);
    delete impl_;
}

const IqHeader& IqReader::header() const { return impl_->header; }

Eigen::VectorXcd IqReader::read(std::int64_t start, std::int64_t count) const {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(count);
    const std::int64_t n = static_cast<std::int64_t>(impl_->header.n);
    const std::int64_t lo = std::max<std::int64_t>(start, 0);
    const std::int64_t hi = std::min(start + count, n);
    if (hi <= lo) return out;
    std::fseek(impl_->f, kIqHeaderBytes + lo * 8, SEEK_SET);
    std::vector<float> buf(static_cast<std::size_t>(hi - lo) * 2);
    if (std::fread(buf.data(), 4, buf.size(), impl_->f) != buf.size()) {
        throw IOError("short read from " + impl_->path);
    }
    for (std::int64_t i = lo; i < hi; ++i) {
        const std::size_t j = static_cast<std::size_t>(i - lo);
        out(i - start) = std::complex<double>(buf[2 * j], buf[2 * j + 1]);
    }
    return out;
}

void write_iq(const std::string& path, const RFCapture& cap) {
    IqWriter w(path, cap.fs, cap.f_center, cap.t0, cap.sensor_id);
    w.append(cap.samples);
    w.close();
}

RFCapture read_iq(const std::string& path) {
    IqReader r(path);
    RFCapture cap;
    cap.fs = r.header().fs;
    cap.f_center = r.header().f_center;
    cap.t0 = r.header().t0;
    cap.sensor_id = r.header().sensor_id;
    cap.samples = r.read(0, static_cast<std::int64_t>(r.header().n));
    return cap;
}

// ---- CSV ---------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

class CsvReader {
public:
    CsvReader(const std::string& path, const std::string& header) : path_(path), in_(path) {
        if (!in_) throw IOError("cannot open " + path);
        std::string line;
        if (!std::getline(in_, line)) throw ParseError(path + ": empty file");
        ++line_no_;
        if (line != header) {
            throw ParseError(path + ": line 1: expected header '" + header + "'");
        }
    }

    bool next(std::vector<std::string>& fields, std::size_t expected) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty()) continue;
            fields = split_csv(line);
            if (fields.size() != expected) {
                throw ParseError(path_ + ": line " + std::to_string(line_no_) +
                                 ": wrong field count");
            }
            return true;
        }
        return false;
    }

    double num(const std::string& s) const {
        try {
            return parse_double(s);
        } catch (const ParseError&) {
            throw ParseError(path_ + ": line " + std::to_string(line_no_) + ": malformed number");
        }
    }

private:
    std::string path_;
    std::ifstream in_;
    int line_no_ = 0;
};

}  // namespace

void write_detections_csv(const std::string& path, const std::vector<Detection2D>& detections) {
    std::ofstream f(path);
    if (!f) throw IOError("cannot write " + path);
    f << "t,u,v,score,label,contrast,source,area\n";
    for (const auto& d : detections) {
        f << format_double(d.t) << ',' << format_double(d.u) << ',' << format_double(d.v) << ','
          << format_double(d.score) << ',' << d.label << ',' << to_string(d.contrast) << ','
          << to_string(d.source) << ',' << d.area << '\n';
    }
}

std::vector<Detection2D> read_detections_csv(const std::string& path) {
    CsvReader reader(path, "t,u,v,score,label,contrast,source,area");
    std::vector<Detection2D> out;
    std::vector<std::string> fields;
    while (reader.next(fields, 8)) {
        Detection2D d;
        d.t = reader.num(fields[0]);
        d.u = reader.num(fields[1]);
        d.v = reader.num(fields[2]);
        d.score = reader.num(fields[3]);
        d.label = fields[4];
        d.contrast = contrast_from_string(fields[5]);
        d.source = source_from_string(fields[6]);
        d.area = static_cast<int>(reader.num(fields[7]));
        out.push_back(std::move(d));
    }
    return out;
}

void write_locations_csv(const std::string& path, const std::vector<RFLocation>& locations) {
    std::ofstream f(path);
    if (!f) throw IOError("cannot write " + path);
    f << "t,x,y,z,method,residual,label\n";
    for (const auto& l : locations) {
        f << format_double(l.t) << ',' << format_double(l.position.x()) << ','
          << format_double(l.position.y()) << ',' << format_double(l.position.z()) << ','
          << to_string(l.method) << ',' << format_double(l.residual) << ',' << l.device_label
          << '\n';
    }
}

std::vector<RFLocation> read_locations_csv(const std::string& path) {
    CsvReader reader(path, "t,x,y,z,method,residual,label");
    std::vector<RFLocation> out;
    std::vector<std::string> fields;
    while (reader.next(fields, 7)) {
        RFLocation l;
        l.t = reader.num(fields[0]);
        l.position = {reader.num(fields[1]), reader.num(fields[2]), reader.num(fields[3])};
        l.method = fields[4] == "spherical_intersection" ? LocalizationMethod::spherical_intersection
                                                         : LocalizationMethod::ml_constrained;
        l.residual = reader.num(fields[5]);
        l.device_label = fields[6];
        out.push_back(std::move(l));
    }
    return out;
}

void write_confidences_csv(const std::string& path, const ClassSet& classes,
                           const std::vector<ConfidenceVector>& stream) {
    std::ofstream f(path);
    if (!f) throw IOError("cannot write " + path);
    f << "t";
    for (const auto& l : classes.labels) f << ',' << l;
    f << '\n';
    for (const auto& cv : stream) {
        f << format_double(cv.t);
        for (const auto& l : classes.labels) {
            const auto it = cv.conf.find(l);
            f << ',' << format_double(it == cv.conf.end() ? 0.0 : it->second);
        }
        f << '\n';
    }
}

void write_tracks_csv(const std::string& path, const std::vector<TrackRow>& rows) {
    std::ofstream f(path);
    if (!f) throw IOError("cannot write " + path);
    f << "t,track_id,device_label,provenance,u,v,udot,vdot,status\n";
    for (const auto& r : rows) {
        f << format_double(r.t) << ',' << r.track_id << ',' << r.device_label << ','
          << r.provenance << ',' << format_double(r.u) << ',' << format_double(r.v) << ','
          << format_double(r.udot) << ',' << format_double(r.vdot) << ',' << r.status << '\n';
    }
}

std::vector<TrackRow> read_tracks_csv(const std::string& path) {
    CsvReader reader(path, "t,track_id,device_label,provenance,u,v,udot,vdot,status");
    std::vector<TrackRow> out;
    std::vector<std::string> fields;
    while (reader.next(fields, 9)) {
        TrackRow r;
        r.t = reader.num(fields[0]);
        r.track_id = static_cast<int>(reader.num(fields[1]));
        r.device_label = fields[2];
        r.provenance = fields[3];
        r.u = reader.num(fields[4]);
        r.v = reader.num(fields[5]);
        r.udot = reader.num(fields[6]);
        r.vdot = reader.num(fields[7]);
        r.status = fields[8];
        out.push_back(std::move(r));
    }
    return out;
}

void write_eo_truth_csv(const std::string& path, const std::vector<EoTruthRow>& rows) {
    std::ofstream f(path);
    if (!f) throw IOError("cannot write " + path);
    f << "t,target,u,v\n";
    for (const auto& r : rows) {
        f << format_double(r.t) << ',' << r.target << ',' << format_double(r.u) << ','
          << format_double(r.v) << '\n';
    }
}

std::vector<EoTruthRow> read_eo_truth_csv(const std::string& path) {
    CsvReader reader(path, "t,target,u,v");
    std::vector<EoTruthRow> out;
    std::vector<std::string> fields;
    while (reader.next(fields, 4)) {
        EoTruthRow r;
        r.t = reader.num(fields[0]);
        r.target = fields[1];
        r.u = reader.num(fields[2]);
        r.v = reader.num(fields[3]);
        out.push_back(std::move(r));
    }
    return out;
}

void write_rf_truth_csv(const std::string& path, const std::vector<RfTruthRow>& rows) {
    std::ofstream f(path);
    if (!f) throw IOError("cannot write " + path);
    f << "t,pair,delta_tau,target\n";
    for (const auto& r : rows) {
        f << format_double(r.t) << ',' << r.sensor_a << '-' << r.sensor_b << ','
          << format_double(r.delta_tau) << ',' << r.target << '\n';
    }
}

void write_world_truth_csv(const std::string& path, const std::vector<WorldTruthRow>& rows) {
    std::ofstream f(path);
    if (!f) throw IOError("cannot write " + path);
    f << "t,target,x,y,z\n";
    for (const auto& r : rows) {
        f << format_double(r.t) << ',' << r.target << ',' << format_double(r.position.x()) << ','
          << format_double(r.position.y()) << ',' << format_double(r.position.z()) << '\n';
    }
}

std::vector<WorldTruthRow> read_world_truth_csv(const std::string& path) {
    CsvReader reader(path, "t,target,x,y,z");
    std::vector<WorldTruthRow> out;
    std::vector<std::string> fields;
    while (reader.next(fields, 5)) {
        WorldTruthRow r;
        r.t = reader.num(fields[0]);
        r.target = fields[1];
        r.position = {reader.num(fields[2]), reader.num(fields[3]), reader.num(fields[4])};
        out.push_back(std::move(r));
    }
    return out;
}

// ---- configuration -------------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& context) {
    if (!obj.is_object()) throw ConfigError(context + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + context);
        }
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
    const auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    return it->get<T>();
}

Eigen::Matrix3d mat3_from(const json& arr, const std::string& context) {
    if (!arr.is_array() || arr.size() != 9) throw ConfigError(context + " needs 9 row-major floats");
    Eigen::Matrix3d m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = arr[static_cast<std::size_t>(i)].get<double>();
    return m;
}

json mat3_to(const Eigen::Matrix3d& m) {
    json arr = json::array();
    for (int i = 0; i < 9; ++i) arr.push_back(m(i / 3, i % 3));
    return arr;
}

CameraModel camera_from_json(const json& j) {
    check_keys(j, {"K", "R", "T", "width", "height"}, "camera");
    CameraModel cam;
    cam.intrinsic = mat3_from(j.at("K"), "camera.K");
    cam.rotation = mat3_from(j.at("R"), "camera.R");
    const auto& t = j.at("T");
    if (!t.is_array() || t.size() != 3) throw ConfigError("camera.T needs 3 floats");
    for (int i = 0; i < 3; ++i) cam.translation(i) = t[static_cast<std::size_t>(i)].get<double>();
    cam.image_width = j.at("width").get<int>();
    cam.image_height = j.at("height").get<int>();
    cam.validate();
    return cam;
}

json camera_to_json(const CameraModel& cam) {
    json j;
    j["K"] = mat3_to(cam.intrinsic);
    j["R"] = mat3_to(cam.rotation);
    j["T"] = {cam.translation(0), cam.translation(1), cam.translation(2)};
    j["width"] = cam.image_width;
    j["height"] = cam.image_height;
    return j;
}

}  // namespace

CameraModel load_camera_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IOError("cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return camera_from_json(j);
}

Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IOError("cannot open scenario " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    check_keys(j,
               {"name", "duration", "frame_rate", "frame_height", "frame_width", "camera",
                "sensors", "targets", "rf_offsets", "seed", "rf_fs", "sensor_tuning",
                "rf_noise_std", "rf_active_sec", "rf_amp_ref", "eo"},
               "scenario");
    Scenario scn;
    try {
        scn.name = get_or<std::string>(j, "name", "scenario");
        scn.duration = j.at("duration").get<double>();
        scn.frame_rate = get_or(j, "frame_rate", scn.frame_rate);
        scn.frame_height = get_or(j, "frame_height", scn.frame_height);
        scn.frame_width = get_or(j, "frame_width", scn.frame_width);
        scn.camera = camera_from_json(j.at("camera"));
        const json& sensors = j.at("sensors");
        check_keys(sensors, {"reference_id", "items"}, "scenario.sensors");
        scn.sensors.reference_id = sensors.at("reference_id").get<std::uint32_t>();
        for (const auto& s : sensors.at("items")) {
            check_keys(s, {"id", "position"}, "scenario.sensors.items[]");
            SensorLayout::Sensor entry;
            entry.id = s.at("id").get<std::uint32_t>();
            const auto& p = s.at("position");
            if (!p.is_array() || p.size() != 3) throw ConfigError("sensor position needs 3 floats");
            entry.position = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
            scn.sensors.sensors.push_back(entry);
        }
        for (const auto& t : j.at("targets")) {
            check_keys(t, {"device", "pixel_contrast", "pixel_sigma", "scintillation", "waypoints", "tx"},
                       "scenario.targets[]");
            TargetSpec spec;
            spec.device = t.at("device").get<std::string>();
            spec.pixel_contrast = t.at("pixel_contrast").get<double>();
            spec.pixel_sigma = get_or(t, "pixel_sigma", spec.pixel_sigma);
            spec.scintillation = get_or(t, "scintillation", spec.scintillation);
            for (const auto& w : t.at("waypoints")) {
                check_keys(w, {"t", "position"}, "waypoint");
                Waypoint wp;
                wp.t = w.at("t").get<double>();
                const auto& p = w.at("position");
                wp.position = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()};
                spec.waypoints.push_back(wp);
            }
            const json& tx = t.at("tx");
            check_keys(tx,
                       {"center_freq", "bandwidth", "symbol_rate", "burst_period", "burst_len",
                        "hop_pattern", "tx_power_db", "impairments"},
                       "scenario.targets[].tx");
            spec.tx.center_freq = get_or(tx, "center_freq", 0.0);
            spec.tx.bandwidth = get_or(tx, "bandwidth", 0.0);
            spec.tx.symbol_rate = get_or(tx, "symbol_rate", 0.0);
            spec.tx.burst_period = get_or(tx, "burst_period", spec.tx.burst_period);
            spec.tx.burst_len = get_or(tx, "burst_len", spec.tx.burst_len);
            spec.tx.tx_power_db = get_or(tx, "tx_power_db", 0.0);
            if (tx.contains("hop_pattern")) {
                for (const auto& h : tx.at("hop_pattern")) {
                    spec.tx.hop_pattern.push_back(h.get<double>());
                }
            }
            if (tx.contains("impairments")) {
                const json& imp = tx.at("impairments");
                check_keys(imp, {"cfo_hz", "iq_gain_db", "iq_phase_deg", "rise_time_s"},
                           "impairments");
                spec.tx.impairments.cfo_hz = get_or(imp, "cfo_hz", 0.0);
                spec.tx.impairments.iq_gain_db = get_or(imp, "iq_gain_db", 0.0);
                spec.tx.impairments.iq_phase_deg = get_or(imp, "iq_phase_deg", 0.0);
                spec.tx.impairments.rise_time_s = get_or(imp, "rise_time_s", 50e-6);
            }
            scn.targets.push_back(std::move(spec));
        }
        if (j.contains("rf_offsets")) {
            for (const auto& [key, value] : j.at("rf_offsets").items()) {
                scn.rf_offsets[static_cast<std::uint32_t>(std::stoul(key))] = value.get<double>();
            }
        }
        scn.seed = get_or<std::uint64_t>(j, "seed", 1);
        scn.rf_fs = get_or(j, "rf_fs", scn.rf_fs);
        if (j.contains("sensor_tuning")) {
            for (const auto& [key, value] : j.at("sensor_tuning").items()) {
                scn.sensor_tuning[static_cast<std::uint32_t>(std::stoul(key))] =
                    value.get<double>();
            }
        }
        scn.rf_noise_std = get_or(j, "rf_noise_std", scn.rf_noise_std);
        scn.rf_active_sec = get_or(j, "rf_active_sec", scn.rf_active_sec);
        scn.rf_amp_ref = get_or(j, "rf_amp_ref", scn.rf_amp_ref);
        if (j.contains("eo")) {
            const json& eo = j.at("eo");
            check_keys(eo,
                       {"background_rank", "background_level", "background_drift",
                        "cloud_amplitude", "cloud_speed_px", "cloud_sigma_px", "noise_std",
                        "range_ref"},
                       "scenario.eo");
            scn.eo.background_rank = get_or(eo, "background_rank", scn.eo.background_rank);
            scn.eo.background_level = get_or(eo, "background_level", scn.eo.background_level);
            scn.eo.background_drift = get_or(eo, "background_drift", scn.eo.background_drift);
            scn.eo.cloud_amplitude = get_or(eo, "cloud_amplitude", scn.eo.cloud_amplitude);
            scn.eo.cloud_speed_px = get_or(eo, "cloud_speed_px", scn.eo.cloud_speed_px);
            scn.eo.cloud_sigma_px = get_or(eo, "cloud_sigma_px", scn.eo.cloud_sigma_px);
            scn.eo.noise_std = get_or(eo, "noise_std", scn.eo.noise_std);
            scn.eo.range_ref = get_or(eo, "range_ref", scn.eo.range_ref);
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    scn.validate();
    return scn;
}

void save_scenario(const std::string& path, const Scenario& scn) {
    json j;
    j["name"] = scn.name;
    j["duration"] = scn.duration;
    j["frame_rate"] = scn.frame_rate;
    j["frame_height"] = scn.frame_height;
    j["frame_width"] = scn.frame_width;
    j["camera"] = camera_to_json(scn.camera);
    json sensors;
    sensors["reference_id"] = scn.sensors.reference_id;
    sensors["items"] = json::array();
    for (const auto& s : scn.sensors.sensors) {
        sensors["items"].push_back(
            {{"id", s.id}, {"position", {s.position.x(), s.position.y(), s.position.z()}}});
    }
    j["sensors"] = sensors;
    j["targets"] = json::array();
    for (const auto& t : scn.targets) {
        json tj;
        tj["device"] = t.device;
        tj["pixel_contrast"] = t.pixel_contrast;
        tj["pixel_sigma"] = t.pixel_sigma;
        tj["scintillation"] = t.scintillation;
        tj["waypoints"] = json::array();
        for (const auto& w : t.waypoints) {
            tj["waypoints"].push_back(
                {{"t", w.t}, {"position", {w.position.x(), w.position.y(), w.position.z()}}});
        }
        json tx;
        tx["center_freq"] = t.tx.center_freq;
        tx["bandwidth"] = t.tx.bandwidth;
        tx["symbol_rate"] = t.tx.symbol_rate;
        tx["burst_period"] = t.tx.burst_period;
        tx["burst_len"] = t.tx.burst_len;
        tx["hop_pattern"] = t.tx.hop_pattern;
        tx["tx_power_db"] = t.tx.tx_power_db;
        tx["impairments"] = {{"cfo_hz", t.tx.impairments.cfo_hz},
                             {"iq_gain_db", t.tx.impairments.iq_gain_db},
                             {"iq_phase_deg", t.tx.impairments.iq_phase_deg},
                             {"rise_time_s", t.tx.impairments.rise_time_s}};
        tj["tx"] = tx;
        j["targets"].push_back(tj);
    }
    json offsets;
    for (const auto& [id, off] : scn.rf_offsets) offsets[std::to_string(id)] = off;
    j["rf_offsets"] = offsets;
    j["seed"] = scn.seed;
    j["rf_fs"] = scn.rf_fs;
    json tuning;
    for (const auto& [id, f] : scn.sensor_tuning) tuning[std::to_string(id)] = f;
    j["sensor_tuning"] = tuning;
    j["rf_noise_std"] = scn.rf_noise_std;
    j["rf_active_sec"] = scn.rf_active_sec;
    j["rf_amp_ref"] = scn.rf_amp_ref;
    j["eo"] = {{"background_rank", scn.eo.background_rank},
               {"background_level", scn.eo.background_level},
               {"background_drift", scn.eo.background_drift},
               {"cloud_amplitude", scn.eo.cloud_amplitude},
               {"cloud_speed_px", scn.eo.cloud_speed_px},
               {"cloud_sigma_px", scn.eo.cloud_sigma_px},
               {"noise_std", scn.eo.noise_std},
               {"range_ref", scn.eo.range_ref}};
    std::ofstream f(path);
    if (!f) throw IOError("cannot write " + path);
    f << j.dump(2) << "\n";
}

// ---- misc ----------------------------------------------------------------------

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw IOError("cannot create directory " + path + ": " + ec.message());
}

bool file_exists(const std::string& path) { return fs::exists(path); }

std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IOError("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace simtrack
