#include "loopkit/io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace loopkit {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

/// Pulls the next line out of `text` starting at `pos`, tolerating \r\n.
bool next_line(const std::string& text, std::size_t& pos, std::string& line) {
    if (pos >= text.size()) return false;
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    return true;
}

struct PlyProperty {
    std::string name;
    int byte_size = 0;
    bool is_double = false;
};

int scalar_size(const std::string& type) {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32") return 4;
    if (type == "float" || type == "float32") return 4;
    if (type == "double" || type == "float64") return 8;
    return 0;
}

struct PlyData {
    std::vector<PlyProperty> properties;
    std::size_t count = 0;
    bool binary = false;
    std::size_t data_pos = 0;   // byte offset of the first vertex record
    std::size_t header_lines = 0;
};

PlyData parse_ply_header(const std::string& path, const std::string& text) {
    PlyData ply;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    std::string line;

    auto fail = [&](const std::string& what) -> ParseError { return {path, line_no, what}; };

    if (!next_line(text, pos, line)) throw fail("empty file");
    line_no += 1;
    if (line != "ply") throw fail("missing ply magic");

    bool in_vertex = false;
    bool have_vertex = false;
    bool have_format = false;
    while (next_line(text, pos, line)) {
        line_no += 1;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word.empty() || word == "comment" || word == "obj_info") continue;
        if (word == "format") {
            std::string fmt, version;
            ss >> fmt >> version;
            if (fmt == "ascii") {
                ply.binary = false;
            } else if (fmt == "binary_little_endian") {
                ply.binary = true;
            } else {
                throw UnsupportedProperty(path + ": unsupported format " + fmt);
            }
            have_format = true;
        } else if (word == "element") {
            std::string name;
            std::size_t count = 0;
            ss >> name >> count;
            if (!ss) throw fail("malformed element line");
            if (name == "vertex") {
                in_vertex = true;
                have_vertex = true;
                ply.count = count;
            } else {
                if (!have_vertex && count > 0) {
                    throw UnsupportedProperty(path + ": element '" + name + "' precedes vertex data");
                }
                in_vertex = false;
            }
        } else if (word == "property") {
            if (!in_vertex) continue;  // later elements are never read
            std::string type;
            ss >> type;
            if (type == "list") {
                throw UnsupportedProperty(path + ": list property on vertex element");
            }
            PlyProperty prop;
            prop.byte_size = scalar_size(type);
            if (prop.byte_size == 0) throw fail("unknown property type " + type);
            prop.is_double = prop.byte_size == 8 && (type == "double" || type == "float64");
            ss >> prop.name;
            if (!ss) throw fail("malformed property line");
            ply.properties.push_back(prop);
        } else if (word == "end_header") {
            if (!have_format) throw fail("missing format line");
            if (!have_vertex) throw fail("missing vertex element");
            ply.data_pos = pos;
            ply.header_lines = line_no;
            return ply;
        } else {
            throw fail("unknown header keyword " + word);
        }
    }
    throw fail("missing end_header");
}

/// Reads the vertex table of a PLY as named double columns.
std::map<std::string, std::vector<double>> read_ply_columns(const std::string& path,
                                                            const std::string& text,
                                                            const PlyData& ply) {
    std::map<std::string, std::vector<double>> columns;
    for (const PlyProperty& p : ply.properties) columns[p.name].reserve(ply.count);

    if (ply.binary) {
        std::size_t record = 0;
        for (const PlyProperty& p : ply.properties) record += static_cast<std::size_t>(p.byte_size);
        if (ply.data_pos + record * ply.count > text.size()) {
            throw ParseError(path, ply.header_lines, "binary payload truncated");
        }
        const char* base = text.data() + ply.data_pos;
        for (std::size_t i = 0; i < ply.count; ++i) {
            const char* rec = base + i * record;
            for (const PlyProperty& p : ply.properties) {
                double value = 0.0;
                if (p.byte_size == 4 && !p.is_double) {
                    float f;
                    std::memcpy(&f, rec, 4);
                    value = static_cast<double>(f);
                } else if (p.is_double) {
                    std::memcpy(&value, rec, 8);
                } else {
                    // Integer scalar of 1/2/4/8 bytes; only skipped columns
                    // land here, but decode them anyway (little-endian).
                    std::int64_t v = 0;
                    std::memcpy(&v, rec, static_cast<std::size_t>(p.byte_size));
                    value = static_cast<double>(v);
                }
                columns[p.name].push_back(value);
                rec += p.byte_size;
            }
        }
    } else {
        std::size_t pos = ply.data_pos;
        std::size_t line_no = ply.header_lines;
        std::string line;
        for (std::size_t i = 0; i < ply.count; ++i) {
            if (!next_line(text, pos, line)) throw ParseError(path, line_no, "vertex data truncated");
            line_no += 1;
            std::istringstream ss(line);
            for (const PlyProperty& p : ply.properties) {
                double value;
                if (!(ss >> value)) throw ParseError(path, line_no, "malformed vertex line");
                columns[p.name].push_back(value);
            }
        }
    }
    return columns;
}

const std::vector<double>* find_column(const std::map<std::string, std::vector<double>>& columns,
                                       const std::string& name) {
    auto it = columns.find(name);
    return it == columns.end() ? nullptr : &it->second;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

json mat4_to_json(const Mat4& m) {
    json a = json::array();
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) a.push_back(m(r, c));
    }
    return a;
}

Mat4 mat4_from_json(const json& a) {
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m(r, c) = a.at(static_cast<std::size_t>(r * 4 + c)).get<double>();
    }
    return m;
}

json mat6_to_json(const Mat6& m) {
    json a = json::array();
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) a.push_back(m(r, c));
    }
    return a;
}

Mat6 mat6_from_json(const json& a) {
    Mat6 m;
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) m(r, c) = a.at(static_cast<std::size_t>(r * 6 + c)).get<double>();
    }
    return m;
}

}  // namespace

PointCloud read_ply(const std::string& path) {
    std::string text = read_file(path);
    PlyData ply = parse_ply_header(path, text);
    auto columns = read_ply_columns(path, text, ply);

    const auto* x = find_column(columns, "x");
    const auto* y = find_column(columns, "y");
    const auto* z = find_column(columns, "z");
    if (!x || !y || !z) throw ParseError(path, ply.header_lines, "vertex element lacks x/y/z");

    PointCloud cloud;
    cloud.positions.resize(ply.count);
    for (std::size_t i = 0; i < ply.count; ++i) {
        cloud.positions[i] = Vec3((*x)[i], (*y)[i], (*z)[i]);
    }
    const auto* nx = find_column(columns, "nx");
    const auto* ny = find_column(columns, "ny");
    const auto* nz = find_column(columns, "nz");
    if (nx && ny && nz) {
        cloud.normals.resize(ply.count);
        for (std::size_t i = 0; i < ply.count; ++i) {
            Vec3 n((*nx)[i], (*ny)[i], (*nz)[i]);
            double len = n.norm();
            cloud.normals[i] = len > 1e-12 ? Vec3(n / len) : Vec3::Zero();
        }
    }
    return cloud;
}

void write_ply(const std::string& path, const PointCloud& cloud, bool binary) {
    validate_cloud(cloud);
    std::ostringstream out;
    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << cloud.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (cloud.has_normals()) out << "property float nx\nproperty float ny\nproperty float nz\n";
    out << "end_header\n";

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        float row[6];
        row[0] = static_cast<float>(cloud.positions[i].x());
        row[1] = static_cast<float>(cloud.positions[i].y());
        row[2] = static_cast<float>(cloud.positions[i].z());
        int cols = 3;
        if (cloud.has_normals()) {
            row[3] = static_cast<float>(cloud.normals[i].x());
            row[4] = static_cast<float>(cloud.normals[i].y());
            row[5] = static_cast<float>(cloud.normals[i].z());
            cols = 6;
        }
        if (binary) {
            out.write(reinterpret_cast<const char*>(row), cols * 4);
        } else {
            for (int c = 0; c < cols; ++c) out << (c ? " " : "") << format_float(row[c]);
            out << "\n";
        }
    }
    write_file(path, out.str());
}

std::vector<TimedPose> read_trajectory(const std::string& path) {
    std::string text = read_file(path);
    std::vector<TimedPose> out;
    std::size_t pos = 0, line_no = 0;
    std::string line;
    while (next_line(text, pos, line)) {
        line_no += 1;
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        double ts, tx, ty, tz, qx, qy, qz, qw;
        if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
            throw ParseError(path, line_no, "expected 8 values: timestamp translation quaternion");
        }
        Eigen::Quaterniond q(qw, qx, qy, qz);
        if (q.norm() < 1e-12) throw ParseError(path, line_no, "zero quaternion");
        q.normalize();
        out.push_back({ts, {q.toRotationMatrix(), Vec3(tx, ty, tz)}});
    }
    return out;
}

void write_trajectory(const std::string& path, std::span<const TimedPose> trajectory) {
    std::ostringstream out;
    for (const TimedPose& tp : trajectory) {
        Eigen::Quaterniond q(tp.pose.rotation);
        if (q.w() < 0) q.coeffs() = -q.coeffs();
        out << format_double(tp.timestamp) << " " << format_double(tp.pose.translation.x()) << " "
            << format_double(tp.pose.translation.y()) << " " << format_double(tp.pose.translation.z())
            << " " << format_double(q.x()) << " " << format_double(q.y()) << " "
            << format_double(q.z()) << " " << format_double(q.w()) << "\n";
    }
    write_file(path, out.str());
}

std::vector<LogEntry> read_registration_log(const std::string& path) {
    std::string text = read_file(path);
    std::vector<LogEntry> out;
    std::size_t pos = 0, line_no = 0;
    std::string line;
    while (next_line(text, pos, line)) {
        line_no += 1;
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        LogEntry entry;
        {
            std::istringstream ss(line);
            if (!(ss >> entry.i >> entry.j >> entry.n)) {
                throw ParseError(path, line_no, "expected header line 'i j n'");
            }
        }
        for (int r = 0; r < 4; ++r) {
            if (!next_line(text, pos, line)) throw ParseError(path, line_no, "truncated matrix block");
            line_no += 1;
            std::istringstream ss(line);
            if (!(ss >> entry.transform(r, 0) >> entry.transform(r, 1) >> entry.transform(r, 2) >>
                  entry.transform(r, 3))) {
                throw ParseError(path, line_no, "expected 4 matrix values");
            }
        }
        out.push_back(entry);
    }
    return out;
}

void write_registration_log(const std::string& path, std::span<const LogEntry> entries) {
    std::ostringstream out;
    for (const LogEntry& e : entries) {
        out << e.i << " " << e.j << " " << e.n << "\n";
        for (int r = 0; r < 4; ++r) {
            out << format_double(e.transform(r, 0)) << " " << format_double(e.transform(r, 1)) << " "
                << format_double(e.transform(r, 2)) << " " << format_double(e.transform(r, 3)) << "\n";
        }
    }
    write_file(path, out.str());
}

SurfelMap read_surfel_map(const std::string& ply_path, const std::string& vis_path) {
    std::string text = read_file(ply_path);
    PlyData ply = parse_ply_header(ply_path, text);
    auto columns = read_ply_columns(ply_path, text, ply);
    const auto* x = find_column(columns, "x");
    const auto* y = find_column(columns, "y");
    const auto* z = find_column(columns, "z");
    const auto* nx = find_column(columns, "nx");
    const auto* ny = find_column(columns, "ny");
    const auto* nz = find_column(columns, "nz");
    if (!x || !y || !z || !nx || !ny || !nz) {
        throw ParseError(ply_path, ply.header_lines, "surfel map needs positions and normals");
    }
    const auto* radius = find_column(columns, "radius");
    const auto* confidence = find_column(columns, "confidence");
    const auto* t0 = find_column(columns, "t0");
    const auto* tu = find_column(columns, "tu");

    SurfelMap map;
    map.surfels.resize(ply.count);
    for (std::size_t i = 0; i < ply.count; ++i) {
        Surfel& s = map.surfels[i];
        s.position = Vec3((*x)[i], (*y)[i], (*z)[i]);
        Vec3 n((*nx)[i], (*ny)[i], (*nz)[i]);
        double len = n.norm();
        s.normal = len > 1e-12 ? Vec3(n / len) : Vec3::UnitZ();
        if (radius) s.radius = (*radius)[i];
        if (confidence) s.confidence = (*confidence)[i];
        if (t0) s.t0 = (*t0)[i];
        if (tu) s.tu = (*tu)[i];
    }

    std::string vis_text = read_file(vis_path);
    std::size_t pos = 0, line_no = 0;
    std::string line;
    while (next_line(vis_text, pos, line)) {
        line_no += 1;
        if (line_no > ply.count) {
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            throw ParseError(vis_path, line_no, "more visibility lines than surfels");
        }
        std::istringstream ss(line);
        std::vector<int> ids;
        int id;
        while (ss >> id) ids.push_back(id);
        map.visibility.push_back(std::move(ids));
    }
    if (map.visibility.size() != map.surfels.size()) {
        throw ParseError(vis_path, line_no, "fewer visibility lines than surfels");
    }
    return map;
}

void write_surfel_map(const std::string& ply_path, const std::string& vis_path,
                      const SurfelMap& map) {
    if (map.visibility.size() != map.surfels.size()) {
        throw MissingData("write_surfel_map: visibility must parallel surfels");
    }
    std::ostringstream out;
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << map.surfels.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    out << "property float nx\nproperty float ny\nproperty float nz\n";
    out << "property float radius\nproperty float confidence\n";
    out << "property float t0\nproperty float tu\n";
    out << "end_header\n";
    for (const Surfel& s : map.surfels) {
        out << format_float(static_cast<float>(s.position.x())) << " "
            << format_float(static_cast<float>(s.position.y())) << " "
            << format_float(static_cast<float>(s.position.z())) << " "
            << format_float(static_cast<float>(s.normal.x())) << " "
            << format_float(static_cast<float>(s.normal.y())) << " "
            << format_float(static_cast<float>(s.normal.z())) << " "
            << format_float(static_cast<float>(s.radius)) << " "
            << format_float(static_cast<float>(s.confidence)) << " "
            << format_float(static_cast<float>(s.t0)) << " "
            << format_float(static_cast<float>(s.tu)) << "\n";
    }
    write_file(ply_path, out.str());

    std::ostringstream vis;
    for (const std::vector<int>& ids : map.visibility) {
        for (std::size_t i = 0; i < ids.size(); ++i) vis << (i ? " " : "") << ids[i];
        vis << "\n";
    }
    write_file(vis_path, vis.str());
}

std::map<std::string, std::string> read_config(const std::string& path) {
    std::string text = read_file(path);
    std::map<std::string, std::string> out;
    std::size_t pos = 0, line_no = 0;
    std::string line;
    auto trim = [](std::string s) {
        std::size_t a = s.find_first_not_of(" \t");
        std::size_t b = s.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (next_line(text, pos, line)) {
        line_no += 1;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(path, line_no, "expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ParseError(path, line_no, "empty key");
        out[key] = value;
    }
    return out;
}

void write_graph_json(const std::string& path, const PoseGraph& graph) {
    json j;
    j["poses"] = json::array();
    for (const RigidTransform& t : graph.poses) j["poses"].push_back(mat4_to_json(t.matrix()));
    j["odometry"] = json::array();
    for (const OdometryEdge& e : graph.odometry) {
        j["odometry"].push_back({{"from", e.from},
                                 {"to", e.to},
                                 {"rel", mat4_to_json(e.rel.matrix())},
                                 {"info", mat6_to_json(e.info.info)},
                                 {"pairs", e.info.pair_count}});
    }
    j["loops"] = json::array();
    for (const LoopEdge& e : graph.loops) {
        j["loops"].push_back({{"i", e.i},
                              {"j", e.j},
                              {"rel", mat4_to_json(e.rel.matrix())},
                              {"info", mat6_to_json(e.info.info)},
                              {"pairs", e.info.pair_count},
                              {"weight", e.weight}});
    }
    j["last_refresh_count"] = graph.last_refresh_count;
    write_file(path, j.dump(2) + "\n");
}

PoseGraph read_graph_json(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
    try {
        PoseGraph g;
        for (const json& p : j.at("poses")) g.poses.push_back(RigidTransform::from_matrix(mat4_from_json(p)));
        for (const json& e : j.at("odometry")) {
            OdometryEdge edge;
            edge.from = e.at("from").get<int>();
            edge.to = e.at("to").get<int>();
            edge.rel = RigidTransform::from_matrix(mat4_from_json(e.at("rel")));
            edge.info.info = mat6_from_json(e.at("info"));
            edge.info.pair_count = e.at("pairs").get<std::int64_t>();
            g.odometry.push_back(edge);
        }
        for (const json& e : j.at("loops")) {
            LoopEdge edge;
            edge.i = e.at("i").get<int>();
            edge.j = e.at("j").get<int>();
            edge.rel = RigidTransform::from_matrix(mat4_from_json(e.at("rel")));
            edge.info.info = mat6_from_json(e.at("info"));
            edge.info.pair_count = e.at("pairs").get<std::int64_t>();
            edge.weight = e.value("weight", 1.0);
            g.loops.push_back(edge);
        }
        g.last_refresh_count = j.value("last_refresh_count", 0);
        return g;
    } catch (const json::exception& e) {
        throw ParseError(path, 0, e.what());
    }
}

BaProblem read_ba_json(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
    try {
        BaProblem p;
        const json& k = j.at("intrinsics");
        p.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(), k.at("cx").get<double>(),
                        k.at("cy").get<double>(), k.at("width").get<int>(), k.at("height").get<int>()};
        for (const json& e : j.at("keyframes")) {
            Keyframe kf;
            kf.id = e.at("id").get<int>();
            kf.timestamp = e.at("timestamp").get<double>();
            kf.pose = RigidTransform::from_matrix(mat4_from_json(e.at("pose")));
            p.keyframes.push_back(kf);
        }
        for (const json& e : j.at("landmarks")) {
            Landmark lm;
            lm.id = e.at("id").get<int>();
            const json& q = e.at("position");
            lm.position = Vec3(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>());
            p.landmarks.push_back(lm);
        }
        for (const json& e : j.at("observations")) {
            Observation ob;
            ob.keyframe_id = e.at("keyframe").get<int>();
            ob.landmark_id = e.at("landmark").get<int>();
            const json& q = e.at("pixel");
            ob.pixel = Vec2(q.at(0).get<double>(), q.at(1).get<double>());
            ob.sigma = e.value("sigma", 1.0);
            p.observations.push_back(ob);
        }
        return p;
    } catch (const json::exception& e) {
        throw ParseError(path, 0, e.what());
    }
}

void write_ba_json(const std::string& path, const BaProblem& problem) {
    json j;
    j["intrinsics"] = {{"fx", problem.intrinsics.fx}, {"fy", problem.intrinsics.fy},
                       {"cx", problem.intrinsics.cx}, {"cy", problem.intrinsics.cy},
                       {"width", problem.intrinsics.width}, {"height", problem.intrinsics.height}};
    j["keyframes"] = json::array();
    for (const Keyframe& kf : problem.keyframes) {
        j["keyframes"].push_back(
            {{"id", kf.id}, {"timestamp", kf.timestamp}, {"pose", mat4_to_json(kf.pose.matrix())}});
    }
    j["landmarks"] = json::array();
    for (const Landmark& lm : problem.landmarks) {
        j["landmarks"].push_back(
            {{"id", lm.id},
             {"position", {lm.position.x(), lm.position.y(), lm.position.z()}}});
    }
    j["observations"] = json::array();
    for (const Observation& ob : problem.observations) {
        j["observations"].push_back({{"keyframe", ob.keyframe_id},
                                     {"landmark", ob.landmark_id},
                                     {"pixel", {ob.pixel.x(), ob.pixel.y()}},
                                     {"sigma", ob.sigma}});
    }
    write_file(path, j.dump(2) + "\n");
}

}  // namespace loopkit
