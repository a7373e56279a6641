#include "di3po/raster.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace di3po {

Raster to_grayscale(const Raster& img) {
    if (img.channels == 1) return img;
    Raster g(img.width, img.height, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int r = img.at(x, y, 0), gg = img.at(x, y, 1), b = img.at(x, y, 2);
            g.at(x, y) = static_cast<uint8_t>((299 * r + 587 * gg + 114 * b + 500) / 1000);
        }
    return g;
}

std::pair<Raster, Raster> split_columns(const Raster& img, int split_x) {
    if (split_x < 1 || split_x >= img.width) throw std::invalid_argument("split_x out of range");
    Raster left(split_x, img.height, img.channels);
    Raster right(img.width - split_x, img.height, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < split_x; ++x)
            for (int c = 0; c < img.channels; ++c) left.at(x, y, c) = img.at(x, y, c);
        for (int x = split_x; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) right.at(x - split_x, y, c) = img.at(x, y, c);
    }
    return {std::move(left), std::move(right)};
}

Grid raster_to_latent(const Raster& gray) {
    Raster g = to_grayscale(gray);
    Grid out(g.width, g.height);
    for (size_t i = 0; i < g.pixels.size(); ++i) out.values[i] = g.pixels[i] / 127.5 - 1.0;
    return out;
}

Raster latent_to_raster(const Grid& latent) {
    Raster out(latent.width, latent.height, 1);
    for (size_t i = 0; i < latent.values.size(); ++i) {
        double v = std::clamp(latent.values[i], -1.0, 1.0);
        out.pixels[i] = static_cast<uint8_t>(std::lround((v + 1.0) * 127.5));
    }
    return out;
}

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32_be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

void append_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
    put_u32_be(out, static_cast<uint32_t>(data.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uint32_t crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_u32_be(out, crc);
}

}  // namespace

std::vector<uint8_t> encode_png(const Raster& img) {
    if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("PNG codec supports 1 or 3 channels");
    if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("empty raster");

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(img.width));
    put_u32_be(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);                                  // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);          // color type
    ihdr.push_back(0);                                  // compression
    ihdr.push_back(0);                                  // filter method
    ihdr.push_back(0);                                  // no interlace
    append_chunk(out, "IHDR", ihdr);

    // Filter type 0 per scanline, fixed zlib level for byte reproducibility.
    size_t stride = static_cast<size_t>(img.width) * img.channels;
    std::vector<uint8_t> raw((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw[(stride + 1) * y] = 0;
        std::memcpy(raw.data() + (stride + 1) * y + 1, img.pixels.data() + stride * y, stride);
    }
    uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_size);
    if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("zlib compress failed");
    comp.resize(comp_size);
    append_chunk(out, "IDAT", comp);
    append_chunk(out, "IEND", {});
    return out;
}

Raster decode_png(const std::vector<uint8_t>& bytes) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() < 8 || std::memcmp(bytes.data(), sig, 8) != 0) throw std::runtime_error("not a PNG file");

    int width = 0, height = 0, channels = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        uint32_t len = get_u32_be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw std::runtime_error("truncated PNG chunk");
        std::string type(reinterpret_cast<const char*>(bytes.data() + pos + 4), 4);
        const uint8_t* data = bytes.data() + pos + 8;
        if (type == "IHDR") {
            width = static_cast<int>(get_u32_be(data));
            height = static_cast<int>(get_u32_be(data + 4));
            int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8 || (color != 0 && color != 2) || interlace != 0)
                throw std::runtime_error("unsupported PNG format (need 8-bit gray/RGB, non-interlaced)");
            channels = color == 0 ? 1 : 3;
        } else if (type == "IDAT") {
            idat.insert(idat.end(), data, data + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0 || idat.empty()) throw std::runtime_error("incomplete PNG");

    size_t stride = static_cast<size_t>(width) * channels;
    std::vector<uint8_t> raw((stride + 1) * height);
    uLongf raw_size = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_size != raw.size())
        throw std::runtime_error("PNG inflate failed");

    Raster img(width, height, channels);
    int bpp = channels;
    for (int y = 0; y < height; ++y) {
        uint8_t filter = raw[(stride + 1) * y];
        const uint8_t* src = raw.data() + (stride + 1) * y + 1;
        uint8_t* cur = img.pixels.data() + stride * y;
        const uint8_t* prev = y > 0 ? img.pixels.data() + stride * (y - 1) : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            int a = i >= static_cast<size_t>(bpp) ? cur[i - bpp] : 0;
            int b = prev ? prev[i] : 0;
            int c = (prev && i >= static_cast<size_t>(bpp)) ? prev[i - bpp] : 0;
            int x = src[i];
            switch (filter) {
                case 0: break;
                case 1: x += a; break;
                case 2: x += b; break;
                case 3: x += (a + b) / 2; break;
                case 4: {
                    int p = a + b - c;
                    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
                    x += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    break;
                }
                default: throw std::runtime_error("bad PNG filter type");
            }
            cur[i] = static_cast<uint8_t>(x & 0xff);
        }
    }
    return img;
}

void write_png(const std::string& path, const Raster& img) {
    std::vector<uint8_t> bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

Raster read_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

}  // namespace di3po
