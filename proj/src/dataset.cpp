#include "polgs/dataset.hpp"

#include "polgs/errors.hpp"
#include "polgs/io/exr.hpp"
#include "polgs/io/png.hpp"
#include "polgs/stokes.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace polgs {
namespace {

const char* kAngleFiles[4] = {"I000.exr", "I045.exr", "I090.exr", "I135.exr"};
const char* kAngleNames[4] = {"0", "45", "90", "135"};

Camera camera_from_json(const json& j) {
    Camera cam;
    cam.name = j.at("name").get<std::string>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    const auto& m = j.at("world_to_camera");
    if (!m.is_array() || m.size() != 16)
        throw DataError("world_to_camera must hold 16 row-major floats (view " +
                        cam.name + ")");
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c)
            cam.rotation(r, c) = m[4 * r + c].get<double>();
        cam.translation[r] = m[4 * r + 3].get<double>();
    }
    if (cam.width <= 0 || cam.height <= 0 || cam.fx <= 0 || cam.fy <= 0)
        throw DataError("invalid camera intrinsics for view " + cam.name);
    return cam;
}

json camera_to_json(const Camera& cam) {
    json m = json::array();
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            if (r < 3 && c < 3)
                m.push_back(cam.rotation(r, c));
            else if (r < 3)
                m.push_back(cam.translation[r]);
            else
                m.push_back(c == 3 ? 1.0 : 0.0);
        }
    return json{{"name", cam.name},     {"width", cam.width},
                {"height", cam.height}, {"fx", cam.fx},
                {"fy", cam.fy},         {"cx", cam.cx},
                {"cy", cam.cy},         {"world_to_camera", m}};
}

void check_size(const Image& img, const Camera& cam, const std::string& what) {
    if (img.width() != cam.width || img.height() != cam.height)
        throw DataError(what + " size does not match camera for view " +
                        cam.name);
}

} // namespace

std::vector<PolarizedView> load_dataset(const std::string& root) {
    const fs::path base(root);
    const fs::path index = base / "views.json";
    std::ifstream is(index);
    if (!is)
        throw DataError("cannot open " + index.string());

    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw DataError("malformed views.json: " + std::string(e.what()));
    }
    if (!doc.is_array() || doc.empty())
        throw DataError("views.json must be a non-empty array");

    std::vector<PolarizedView> views;
    views.reserve(doc.size());
    for (const json& j : doc) {
        PolarizedView v;
        try {
            v.camera = camera_from_json(j);
        } catch (const json::exception& e) {
            throw DataError("bad view entry in views.json: " +
                            std::string(e.what()));
        }
        v.name = v.camera.name;

        const double residual = v.camera.orthonormal_residual();
        if (residual > 1e-4)
            throw DataError("non-orthonormal pose for view " + v.name +
                            " (residual " + std::to_string(residual) + ")");
        v.camera.orthonormalize();

        const fs::path dir = base / v.name;
        Image* quads[4] = {&v.i0, &v.i45, &v.i90, &v.i135};
        for (int a = 0; a < 4; ++a) {
            const fs::path p = dir / kAngleFiles[a];
            if (!fs::exists(p))
                throw DataError(std::string("missing polarization angle ") +
                                kAngleNames[a] + " for view " + v.name);
            *quads[a] = read_exr(p.string());
            if (quads[a]->channels() != 3)
                throw DataError(std::string(kAngleFiles[a]) +
                                " must have 3 channels for view " + v.name);
            check_size(*quads[a], v.camera, kAngleFiles[a]);
        }

        const fs::path maskp = dir / "mask.png";
        if (!fs::exists(maskp))
            throw DataError("missing mask.png for view " + v.name);
        v.mask = read_png_gray(maskp.string());
        check_size(v.mask, v.camera, "mask.png");

        if (fs::exists(dir / "gt_normal.exr")) {
            v.gt_normal = read_exr((dir / "gt_normal.exr").string());
            check_size(v.gt_normal, v.camera, "gt_normal.exr");
        }
        if (fs::exists(dir / "gt_depth.exr")) {
            v.gt_depth = read_exr((dir / "gt_depth.exr").string());
            check_size(v.gt_depth, v.camera, "gt_depth.exr");
        }

        v.stokes = stokes_from_quad(v.i0, v.i45, v.i90, v.i135);
        views.push_back(std::move(v));
    }
    return views;
}

void save_dataset(const std::string& root,
                  const std::vector<PolarizedView>& views) {
    const fs::path base(root);
    fs::create_directories(base);

    json doc = json::array();
    for (const PolarizedView& v : views) {
        doc.push_back(camera_to_json(v.camera));
        const fs::path dir = base / v.name;
        fs::create_directories(dir);
        write_exr((dir / "I000.exr").string(), v.i0);
        write_exr((dir / "I045.exr").string(), v.i45);
        write_exr((dir / "I090.exr").string(), v.i90);
        write_exr((dir / "I135.exr").string(), v.i135);
        write_png_gray((dir / "mask.png").string(), v.mask);
        if (!v.gt_normal.empty())
            write_exr((dir / "gt_normal.exr").string(), v.gt_normal);
        if (!v.gt_depth.empty())
            write_exr((dir / "gt_depth.exr").string(), v.gt_depth);
    }
    std::ofstream os(base / "views.json");
    if (!os)
        throw DataError("cannot write views.json under " + root);
    os << doc.dump(2) << "\n";
}

} // namespace polgs
