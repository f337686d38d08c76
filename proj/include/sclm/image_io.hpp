#pragma once

#include <string>

#include "sclm/tensor.hpp"

namespace sclm {

// 8-bit RGB image I/O (PNG and binary PPM), scaled to [0,1] on load and
// rounded to nearest level on save. The format is picked by extension.
Tensorf load_image(const std::string& path);
void save_image(const std::string& path, const Tensorf& t);

bool is_image_path(const std::string& path);

}  // namespace sclm
