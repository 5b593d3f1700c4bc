#include "polgs/scene.hpp"

#include "polgs/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <vector>

namespace polgs {
namespace {

constexpr char kMagic[8] = {'P', 'O', 'L', 'G', 'S', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is)
        throw DataError("checkpoint truncated");
    return v;
}

void put_doubles(std::ostream& os, const double* p, size_t n) {
    os.write(reinterpret_cast<const char*>(p), n * sizeof(double));
}

void get_doubles(std::istream& is, double* p, size_t n) {
    is.read(reinterpret_cast<char*>(p), n * sizeof(double));
    if (!is)
        throw DataError("checkpoint truncated");
}

} // namespace

void save_checkpoint(const Scene& scene, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw DataError("cannot open checkpoint for writing: " + path);

    os.write(kMagic, sizeof(kMagic));
    put(os, kVersion);
    put(os, uint32_t{1}); // SH coefficients per color channel (DC only)

    const SurfelCloud& c = scene.cloud;
    const uint64_t n = c.size();
    put(os, n);
    for (uint64_t i = 0; i < n; ++i) put_doubles(os, c.position[i].data(), 3);
    for (uint64_t i = 0; i < n; ++i) put_doubles(os, c.log_scale[i].data(), 2);
    for (uint64_t i = 0; i < n; ++i) put_doubles(os, c.rotation[i].data(), 4);
    put_doubles(os, c.opacity_logit.data(), n);
    for (uint64_t i = 0; i < n; ++i) put_doubles(os, c.color[i].data(), 3);

    put(os, uint32_t(scene.environment.resolution()));
    put_doubles(os, scene.environment.raw().data(),
                scene.environment.raw().size());

    put(os, int64_t{scene.iteration});
    os.flush();
    if (!os)
        throw DataError("checkpoint write failed: " + path);
}

Scene load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("cannot open checkpoint: " + path);

    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("not a checkpoint file: " + path);
    const auto version = get<uint32_t>(is);
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " +
                        std::to_string(version));
    const auto sh_coeffs = get<uint32_t>(is);
    if (sh_coeffs == 0)
        throw DataError("checkpoint has zero color coefficients");
    if (sh_coeffs > 1)
        std::cerr << "warning: checkpoint stores " << sh_coeffs
                  << " SH coefficients per channel; keeping band 0 only\n";

    Scene scene;
    const auto n = get<uint64_t>(is);
    SurfelCloud& c = scene.cloud;
    c.resize(n);
    for (uint64_t i = 0; i < n; ++i) get_doubles(is, c.position[i].data(), 3);
    for (uint64_t i = 0; i < n; ++i) get_doubles(is, c.log_scale[i].data(), 2);
    for (uint64_t i = 0; i < n; ++i) get_doubles(is, c.rotation[i].data(), 4);
    get_doubles(is, c.opacity_logit.data(), n);
    std::vector<double> coeffs(3 * sh_coeffs);
    for (uint64_t i = 0; i < n; ++i) {
        get_doubles(is, coeffs.data(), coeffs.size());
        c.color[i] = Rgb(coeffs[0], coeffs[1], coeffs[2]);
    }

    const auto res = get<uint32_t>(is);
    if (res == 0 || res > 4096)
        throw DataError("checkpoint cubemap resolution out of range");
    scene.environment = Cubemap(int(res));
    get_doubles(is, scene.environment.raw().data(),
                scene.environment.raw().size());

    scene.iteration = get<int64_t>(is);
    return scene;
}

} // namespace polgs
