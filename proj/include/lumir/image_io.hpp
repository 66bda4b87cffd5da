#pragma once

#include <string>
#include <vector>

#include "lumir/tensor.hpp"

namespace lumir {

// 8-bit PNG codec (zlib-backed). Writes RGB, non-interlaced, filter 0;
// reads 8-bit gray/RGB/RGBA non-interlaced files.
std::vector<unsigned char> encode_png_rgb8(int width, int height,
                                           const std::vector<unsigned char>& rgb);
std::vector<unsigned char> decode_png_rgb8(const std::vector<unsigned char>& bytes, int& width,
                                           int& height);

// Tensor <-> file. Tensors are (3,H,W) in [0,1]; single-channel tensors are
// replicated to RGB on write.
void write_png(const std::string& path, const Tensor& img);
Tensor read_png(const std::string& path);

std::vector<unsigned char> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes);

}  // namespace lumir
