#pragma once

// Binary PPM (P6, 8-bit) read/write. PPM is the lossless interchange format
// for every image the tools produce; writes go through a temp file + rename
// so partially written outputs never appear under the final name.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "viewstitch/common.hpp"
#include "viewstitch/image.hpp"

namespace viewstitch {

inline ImageRGB read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::io, "cannot open image: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw Error(errc::io, "not a binary PPM (P6): " + path);

    auto next_int = [&in, &path]() {
        // Skip whitespace and '#' comments.
        while (true) {
            int c = in.peek();
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        if (!in || v < 0) throw Error(errc::io, "malformed PPM header: " + path);
        return v;
    };

    long w = next_int();
    long h = next_int();
    long maxval = next_int();
    if (maxval != 255) throw Error(errc::io, "unsupported PPM maxval (want 255): " + path);
    in.get();  // single whitespace byte before the raster

    ImageRGB img(static_cast<int>(w), static_cast<int>(h));
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw Error(errc::io, "truncated PPM raster: " + path);
    return img;
}

inline void atomic_write_file(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(errc::io, "cannot open for write: " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error(errc::io, "write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

inline void write_ppm(const std::string& path, const ImageRGB& img) {
    if (img.empty()) throw Error(errc::io, "refusing to write empty image: " + path);
    std::string header = "P6\n" + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n255\n";
    std::string payload;
    payload.reserve(header.size() + img.data.size());
    payload.append(header);
    payload.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
    atomic_write_file(path, payload);
}

// Grayscale helper for masks and weight visualizations.
inline void write_ppm_mask(const std::string& path, const MaskU8& mask) {
    ImageRGB img(mask.width, mask.height);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) {
            uint8_t v = mask.at(x, y) ? 255 : 0;
            uint8_t* px = img.px(x, y);
            px[0] = px[1] = px[2] = v;
        }
    write_ppm(path, img);
}

}  // namespace viewstitch
