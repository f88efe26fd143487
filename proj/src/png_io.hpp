#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splatmap {

/// 8-bit RGB PNG writer/reader (libpng). Data is row-major interleaved RGB.
void write_rgb_png(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& rgb);
void read_rgb_png(const std::string& path, int& width, int& height, std::vector<uint8_t>& rgb);

}  // namespace splatmap
