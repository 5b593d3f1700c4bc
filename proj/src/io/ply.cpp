#include "polgs/io/ply.hpp"

#include "polgs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace polgs {
namespace {

int type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8")
        return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16")
        return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" ||
        t == "float" || t == "float32")
        return 4;
    if (t == "double" || t == "float64")
        return 8;
    throw DataError("unsupported PLY property type: " + t);
}

double decode(const char* p, const std::string& t) {
    if (t == "float" || t == "float32") {
        float v;
        std::memcpy(&v, p, 4);
        return v;
    }
    if (t == "double" || t == "float64") {
        double v;
        std::memcpy(&v, p, 8);
        return v;
    }
    if (t == "uchar" || t == "uint8")
        return double(*reinterpret_cast<const uint8_t*>(p));
    if (t == "char" || t == "int8")
        return double(*reinterpret_cast<const int8_t*>(p));
    if (t == "ushort" || t == "uint16") {
        uint16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (t == "short" || t == "int16") {
        int16_t v;
        std::memcpy(&v, p, 2);
        return v;
    }
    if (t == "uint" || t == "uint32") {
        uint32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    if (t == "int" || t == "int32") {
        int32_t v;
        std::memcpy(&v, p, 4);
        return v;
    }
    throw DataError("unsupported PLY property type: " + t);
}

struct Property {
    std::string type;
    std::string name;
    int offset = 0; // byte offset within a binary vertex record
};

} // namespace

void write_ply(const std::string& path, const std::vector<PlyPoint>& points) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw DataError("cannot open PLY for writing: " + path);

    os << "ply\nformat binary_little_endian 1.0\n"
       << "element vertex " << points.size() << "\n"
       << "property float x\nproperty float y\nproperty float z\n"
       << "property float nx\nproperty float ny\nproperty float nz\n"
       << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
       << "property float opacity\nend_header\n";

    for (const PlyPoint& p : points) {
        float f[6] = {float(p.position.x()), float(p.position.y()),
                      float(p.position.z()), float(p.normal.x()),
                      float(p.normal.y()),   float(p.normal.z())};
        os.write(reinterpret_cast<const char*>(f), sizeof(f));
        uint8_t c[3];
        for (int i = 0; i < 3; ++i)
            c[i] = uint8_t(std::lround(std::clamp(p.color[i], 0.0, 1.0) * 255.0));
        os.write(reinterpret_cast<const char*>(c), 3);
        const float op = float(p.opacity);
        os.write(reinterpret_cast<const char*>(&op), 4);
    }
    if (!os)
        throw DataError("PLY write failed: " + path);
}

std::vector<PlyPoint> read_ply(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("cannot open PLY: " + path);

    std::string line;
    if (!std::getline(is, line) || line.substr(0, 3) != "ply")
        throw DataError("not a PLY file: " + path);

    bool binary = false, ascii = false;
    size_t vertex_count = 0;
    std::vector<Property> props;
    bool in_vertex = false;
    int record_size = 0;

    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt == "binary_little_endian")
                binary = true;
            else if (fmt == "ascii")
                ascii = true;
            else
                throw DataError("unsupported PLY format: " + fmt);
        } else if (tok == "element") {
            std::string name;
            size_t n;
            ss >> name >> n;
            in_vertex = name == "vertex";
            if (in_vertex)
                vertex_count = n;
            else if (vertex_count == 0)
                in_vertex = false;
        } else if (tok == "property" && in_vertex) {
            Property p;
            ss >> p.type >> p.name;
            if (p.type == "list")
                throw DataError("list properties not supported on vertices");
            p.offset = record_size;
            record_size += type_size(p.type);
            props.push_back(p);
        } else if (tok == "end_header") {
            break;
        }
    }
    if (!binary && !ascii)
        throw DataError("PLY header missing format line: " + path);

    auto find = [&](const char* n) -> const Property* {
        for (const Property& p : props)
            if (p.name == n)
                return &p;
        return nullptr;
    };
    const Property* px = find("x");
    const Property* py = find("y");
    const Property* pz = find("z");
    if (!px || !py || !pz)
        throw DataError("PLY lacks x/y/z vertex properties: " + path);

    std::vector<PlyPoint> out;
    out.reserve(vertex_count);

    if (binary) {
        std::vector<char> rec(record_size);
        for (size_t i = 0; i < vertex_count; ++i) {
            is.read(rec.data(), record_size);
            if (!is)
                throw DataError("PLY truncated: " + path);
            auto val = [&](const Property* p, double fallback) {
                return p ? decode(rec.data() + p->offset, p->type) : fallback;
            };
            PlyPoint pt;
            pt.position = Vec3(decode(rec.data() + px->offset, px->type),
                               decode(rec.data() + py->offset, py->type),
                               decode(rec.data() + pz->offset, pz->type));
            pt.normal = Vec3(val(find("nx"), 0), val(find("ny"), 0),
                             val(find("nz"), 0));
            pt.color = Rgb(val(find("red"), 127.5) / 255.0,
                           val(find("green"), 127.5) / 255.0,
                           val(find("blue"), 127.5) / 255.0);
            pt.opacity = val(find("opacity"), 1.0);
            out.push_back(pt);
        }
    } else {
        for (size_t i = 0; i < vertex_count; ++i) {
            if (!std::getline(is, line))
                throw DataError("PLY truncated: " + path);
            std::istringstream ss(line);
            std::vector<double> vals(props.size());
            for (double& v : vals)
                if (!(ss >> v))
                    throw DataError("bad PLY vertex line: " + path);
            auto val = [&](const char* n, double fallback) {
                for (size_t k = 0; k < props.size(); ++k)
                    if (props[k].name == n)
                        return vals[k];
                return fallback;
            };
            PlyPoint pt;
            pt.position = Vec3(val("x", 0), val("y", 0), val("z", 0));
            pt.normal = Vec3(val("nx", 0), val("ny", 0), val("nz", 0));
            pt.color = Rgb(val("red", 127.5) / 255.0, val("green", 127.5) / 255.0,
                           val("blue", 127.5) / 255.0);
            pt.opacity = val("opacity", 1.0);
            out.push_back(pt);
        }
    }
    return out;
}

} // namespace polgs
