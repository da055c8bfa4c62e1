#pragma once

// Minimal PNG codec over zlib. The harness only ever needs 8-bit,
// non-interlaced images, and owning the encoder keeps renders byte-stable
// across runs, which the dataset determinism contract depends on.
// Decode accepts gray / gray+alpha / RGB / RGBA / palette at bit depth 8;
// everything lands in 8-bit RGB (alpha is dropped).

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "etchr/errors.hpp"
#include "etchr/image.hpp"

namespace etchr {

namespace detail {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

inline std::uint32_t read_u32_be(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::vector<std::uint8_t>& data) {
    put_u32_be(out, std::uint32_t(data.size()));
    std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    std::uint32_t crc = ::crc32(0, out.data() + crc_start, uInt(out.size() - crc_start));
    put_u32_be(out, crc);
}

inline std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& raw) {
    uLongf cap = ::compressBound(uLong(raw.size()));
    std::vector<std::uint8_t> out(cap);
    if (::compress2(out.data(), &cap, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw IoError("png: deflate failed");
    out.resize(cap);
    return out;
}

inline std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t size,
                                              std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    z_stream zs{};
    if (::inflateInit(&zs) != Z_OK)
        throw IoError("png: inflateInit failed");
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = uInt(size);
    zs.next_out = out.data();
    zs.avail_out = uInt(out.size());
    int rc = ::inflate(&zs, Z_FINISH);
    ::inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != expected)
        throw ParseError("png: corrupt compressed stream");
    return out;
}

inline int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc)
        return a;
    return pb <= pc ? b : c;
}

} // namespace detail

inline std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.empty())
        throw std::invalid_argument("encode_png: empty image");
    std::vector<std::uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};

    std::vector<std::uint8_t> ihdr;
    detail::put_u32_be(ihdr, std::uint32_t(img.width()));
    detail::put_u32_be(ihdr, std::uint32_t(img.height()));
    ihdr.insert(ihdr.end(), {8 /*depth*/, 2 /*RGB*/, 0, 0, 0 /*no interlace*/});
    detail::append_chunk(out, "IHDR", ihdr);

    const std::size_t stride = std::size_t(img.width()) * 3;
    std::vector<std::uint8_t> raw;
    raw.reserve((stride + 1) * img.height());
    for (int y = 0; y < img.height(); ++y) {
        raw.push_back(0); // filter: none
        const std::uint8_t* row = img.bytes().data() + y * stride;
        raw.insert(raw.end(), row, row + stride);
    }
    detail::append_chunk(out, "IDAT", detail::zlib_deflate(raw));
    detail::append_chunk(out, "IEND", {});
    return out;
}

inline Image decode_png(const std::uint8_t* data, std::size_t size) {
    static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    if (size < 8 || std::memcmp(data, sig, 8) != 0)
        throw ParseError("png: bad signature");

    std::uint32_t width = 0, height = 0;
    int color_type = -1;
    std::vector<std::uint8_t> idat;
    std::vector<Rgb> palette;

    std::size_t pos = 8;
    while (pos + 8 <= size) {
        std::uint32_t len = detail::read_u32_be(data + pos);
        if (pos + 12 + len > size)
            throw ParseError("png: truncated chunk");
        std::string type(reinterpret_cast<const char*>(data + pos + 4), 4);
        const std::uint8_t* body = data + pos + 8;
        if (type == "IHDR") {
            if (len != 13)
                throw ParseError("png: bad IHDR");
            width = detail::read_u32_be(body);
            height = detail::read_u32_be(body + 4);
            int depth = body[8];
            color_type = body[9];
            int interlace = body[12];
            if (depth != 8)
                throw ParseError("png: unsupported bit depth " + std::to_string(depth));
            if (interlace != 0)
                throw ParseError("png: interlaced images are not supported");
            if (color_type != 0 && color_type != 2 && color_type != 3 && color_type != 4 &&
                color_type != 6)
                throw ParseError("png: unsupported color type " + std::to_string(color_type));
        } else if (type == "PLTE") {
            for (std::uint32_t i = 0; i + 2 < len; i += 3)
                palette.push_back({body[i], body[i + 1], body[i + 2]});
        } else if (type == "IDAT") {
            idat.insert(idat.end(), body, body + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (width == 0 || height == 0 || color_type < 0)
        throw ParseError("png: missing IHDR");
    if (width > (1u << 20) || height > (1u << 20) ||
        std::uint64_t(width) * height > (1ull << 28))
        throw ParseError("png: image too large");

    const int channels =
        color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 3 ? 1 : color_type == 4 ? 2 : 4;
    const std::size_t stride = std::size_t(width) * channels;
    std::vector<std::uint8_t> raw =
        detail::zlib_inflate(idat.data(), idat.size(), (stride + 1) * height);

    // Undo per-scanline filters in place (into `prior`/`cur` views).
    std::vector<std::uint8_t> pixels(stride * height);
    const int bpp = channels;
    for (std::uint32_t y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
        std::uint8_t* cur = pixels.data() + y * stride;
        const std::uint8_t* up = y > 0 ? pixels.data() + (y - 1) * stride : nullptr;
        for (std::size_t x = 0; x < stride; ++x) {
            int a = x >= std::size_t(bpp) ? cur[x - bpp] : 0;
            int b = up ? up[x] : 0;
            int c = (up && x >= std::size_t(bpp)) ? up[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
            case 0: break;
            case 1: v += a; break;
            case 2: v += b; break;
            case 3: v += (a + b) / 2; break;
            case 4: v += detail::paeth(a, b, c); break;
            default: throw ParseError("png: unknown filter " + std::to_string(filter));
            }
            cur[x] = std::uint8_t(v);
        }
    }

    Image img{int(width), int(height)};
    for (std::uint32_t y = 0; y < height; ++y) {
        const std::uint8_t* row = pixels.data() + y * stride;
        for (std::uint32_t x = 0; x < width; ++x) {
            const std::uint8_t* p = row + x * channels;
            Rgb c;
            switch (color_type) {
            case 0: c = {p[0], p[0], p[0]}; break;
            case 2: c = {p[0], p[1], p[2]}; break;
            case 3:
                if (p[0] >= palette.size())
                    throw ParseError("png: palette index out of range");
                c = palette[p[0]];
                break;
            case 4: c = {p[0], p[0], p[0]}; break;
            default: c = {p[0], p[1], p[2]}; break; // RGBA, alpha dropped
            }
            img.set(int(x), int(y), c);
        }
    }
    return img;
}

inline Image decode_png(const std::vector<std::uint8_t>& data) {
    return decode_png(data.data(), data.size());
}

inline void save_png(const Image& img, const std::filesystem::path& path) {
    auto bytes = encode_png(img);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot open for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f)
        throw IoError("write failed: " + path.string());
}

inline Image load_png(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open image: " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    return decode_png(data);
}

} // namespace etchr
