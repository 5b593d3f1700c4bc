#include "polgs/io/exr.hpp"

#include "polgs/errors.hpp"

#include <ImfChannelList.h>
#include <ImfFrameBuffer.h>
#include <ImfInputFile.h>
#include <ImfOutputFile.h>

#include <vector>

namespace polgs {

Image read_exr(const std::string& path) {
    try {
        Imf::InputFile file(path.c_str());
        const Imath::Box2i dw = file.header().dataWindow();
        const int w = dw.max.x - dw.min.x + 1;
        const int h = dw.max.y - dw.min.y + 1;

        const Imf::ChannelList& chans = file.header().channels();
        std::vector<const char*> names;
        if (chans.findChannel("R") && chans.findChannel("G") &&
            chans.findChannel("B")) {
            names = {"R", "G", "B"};
        } else if (chans.findChannel("Y")) {
            names = {"Y"};
        } else {
            throw DataError("unsupported EXR channel set in " + path);
        }
        const int nc = int(names.size());

        std::vector<float> buf(size_t(w) * h * nc);
        Imf::FrameBuffer fb;
        for (int c = 0; c < nc; ++c) {
            char* base = reinterpret_cast<char*>(buf.data() + c) -
                         (dw.min.x + size_t(dw.min.y) * w) * nc * sizeof(float);
            fb.insert(names[c],
                      Imf::Slice(Imf::FLOAT, base, sizeof(float) * nc,
                                 sizeof(float) * nc * w));
        }
        file.setFrameBuffer(fb);
        file.readPixels(dw.min.y, dw.max.y);

        Image out(w, h, nc);
        for (size_t i = 0; i < out.size(); ++i)
            out.data()[i] = buf[i];
        return out;
    } catch (const DataError&) {
        throw;
    } catch (const std::exception& e) {
        throw DataError("cannot read EXR " + path + ": " + e.what());
    }
}

void write_exr(const std::string& path, const Image& img) {
    if (img.channels() != 1 && img.channels() != 3)
        throw DataError("EXR writer expects 1 or 3 channels");
    const int w = img.width(), h = img.height(), nc = img.channels();
    const char* names3[] = {"R", "G", "B"};
    const char* names1[] = {"Y"};
    const char** names = nc == 3 ? names3 : names1;

    std::vector<float> buf(size_t(w) * h * nc);
    for (size_t i = 0; i < buf.size(); ++i)
        buf[i] = float(img.data()[i]);

    try {
        Imf::Header header(w, h);
        header.compression() = Imf::ZIP_COMPRESSION;
        for (int c = 0; c < nc; ++c)
            header.channels().insert(names[c], Imf::Channel(Imf::FLOAT));

        Imf::OutputFile file(path.c_str(), header);
        Imf::FrameBuffer fb;
        for (int c = 0; c < nc; ++c)
            fb.insert(names[c],
                      Imf::Slice(Imf::FLOAT,
                                 reinterpret_cast<char*>(buf.data() + c),
                                 sizeof(float) * nc, sizeof(float) * nc * w));
        file.setFrameBuffer(fb);
        file.writePixels(h);
    } catch (const std::exception& e) {
        throw DataError("cannot write EXR " + path + ": " + e.what());
    }
}

} // namespace polgs
