#include "lumir/image_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lumir {

namespace {

void put_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>(v & 0xff));
}

std::uint32_t get_u32_be(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const std::vector<unsigned char>& data) {
    put_u32_be(out, static_cast<std::uint32_t>(data.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, out.data() + start, static_cast<uInt>(out.size() - start)));
    put_u32_be(out, crc);
}

constexpr unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

std::vector<unsigned char> encode_png_rgb8(int width, int height,
                                           const std::vector<unsigned char>& rgb) {
    if (width < 1 || height < 1) throw std::invalid_argument("encode_png_rgb8: bad dimensions");
    if (rgb.size() != static_cast<size_t>(width) * height * 3) {
        throw std::invalid_argument("encode_png_rgb8: pixel buffer size mismatch");
    }
    // filter 0 scanlines
    std::vector<unsigned char> raw(static_cast<size_t>(height) * (static_cast<size_t>(width) * 3 + 1));
    size_t stride = static_cast<size_t>(width) * 3;
    for (int y = 0; y < height; ++y) {
        unsigned char* row = raw.data() + static_cast<size_t>(y) * (stride + 1);
        row[0] = 0;
        std::memcpy(row + 1, rgb.data() + static_cast<size_t>(y) * stride, stride);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw std::runtime_error("encode_png_rgb8: deflate failed");
    }
    compressed.resize(bound);

    std::vector<unsigned char> out;
    out.insert(out.end(), kSignature, kSignature + 8);
    std::vector<unsigned char> ihdr;
    put_u32_be(ihdr, static_cast<std::uint32_t>(width));
    put_u32_be(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type RGB
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", compressed);
    append_chunk(out, "IEND", {});
    return out;
}

std::vector<unsigned char> decode_png_rgb8(const std::vector<unsigned char>& bytes, int& width,
                                           int& height) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
        throw std::runtime_error("decode_png: not a PNG file");
    }
    size_t pos = 8;
    int w = 0, h = 0, channels = 0;
    bool have_header = false;
    std::vector<unsigned char> idat;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t len = get_u32_be(bytes.data() + pos);
        if (pos + 12 + len > bytes.size()) throw std::runtime_error("decode_png: truncated chunk");
        const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
        const unsigned char* data = bytes.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw std::runtime_error("decode_png: bad IHDR");
            w = static_cast<int>(get_u32_be(data));
            h = static_cast<int>(get_u32_be(data + 4));
            int bit_depth = data[8], color_type = data[9], interlace = data[12];
            if (bit_depth != 8) throw std::runtime_error("decode_png: only 8-bit depth supported");
            if (interlace != 0) throw std::runtime_error("decode_png: interlacing not supported");
            switch (color_type) {
                case 0: channels = 1; break;
                case 2: channels = 3; break;
                case 6: channels = 4; break;
                default:
                    throw std::runtime_error("decode_png: unsupported color type " +
                                             std::to_string(color_type));
            }
            have_header = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!have_header || idat.empty()) throw std::runtime_error("decode_png: missing IHDR/IDAT");

    size_t stride = static_cast<size_t>(w) * static_cast<size_t>(channels);
    uLongf raw_len = static_cast<uLongf>((stride + 1) * static_cast<size_t>(h));
    std::vector<unsigned char> raw(raw_len);
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw std::runtime_error("decode_png: inflate failed");
    }

    std::vector<unsigned char> pixels(static_cast<size_t>(h) * stride);
    int bpp = channels;
    for (int y = 0; y < h; ++y) {
        const unsigned char* src = raw.data() + static_cast<size_t>(y) * (stride + 1);
        unsigned char* dst = pixels.data() + static_cast<size_t>(y) * stride;
        const unsigned char* prev =
            y > 0 ? pixels.data() + static_cast<size_t>(y - 1) * stride : nullptr;
        int ftype = src[0];
        for (size_t x = 0; x < stride; ++x) {
            int a = x >= static_cast<size_t>(bpp) ? dst[x - static_cast<size_t>(bpp)] : 0;
            int b = prev ? prev[x] : 0;
            int c = (prev && x >= static_cast<size_t>(bpp)) ? prev[x - static_cast<size_t>(bpp)] : 0;
            int v = src[1 + x];
            switch (ftype) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw std::runtime_error("decode_png: unknown filter type");
            }
            dst[x] = static_cast<unsigned char>(v & 0xff);
        }
    }

    std::vector<unsigned char> rgb(static_cast<size_t>(w) * h * 3);
    for (size_t i = 0; i < static_cast<size_t>(w) * h; ++i) {
        if (channels == 1) {
            rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = pixels[i];
        } else {
            rgb[i * 3] = pixels[i * static_cast<size_t>(channels)];
            rgb[i * 3 + 1] = pixels[i * static_cast<size_t>(channels) + 1];
            rgb[i * 3 + 2] = pixels[i * static_cast<size_t>(channels) + 2];
        }
    }
    width = w;
    height = h;
    return rgb;
}

void write_png(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || (img.dim(0) != 1 && img.dim(0) != 3)) {
        throw std::invalid_argument("write_png: expected (1|3,H,W) tensor, got " + shape_str(img));
    }
    int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    std::vector<unsigned char> rgb(static_cast<size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                double v = img.at(c == 1 ? 0 : ch, y, x);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                rgb[(static_cast<size_t>(y) * w + x) * 3 + static_cast<size_t>(ch)] =
                    static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
    }
    write_file_bytes(path, encode_png_rgb8(w, h, rgb));
}

Tensor read_png(const std::string& path) {
    int w = 0, h = 0;
    std::vector<unsigned char> rgb = decode_png_rgb8(read_file_bytes(path), w, h);
    Tensor img({3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int ch = 0; ch < 3; ++ch) {
                img.at(ch, y, x) =
                    rgb[(static_cast<size_t>(y) * w + x) * 3 + static_cast<size_t>(ch)] / 255.0;
            }
        }
    }
    return img;
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open file: " + path);
    is.seekg(0, std::ios::end);
    std::streamoff size = is.tellg();
    is.seekg(0, std::ios::beg);
    std::vector<unsigned char> bytes(static_cast<size_t>(size));
    is.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!is) throw std::runtime_error("failed reading file: " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write file: " + path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("failed writing file: " + path);
}

}  // namespace lumir
