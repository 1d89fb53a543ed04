#pragma once

#include <string>

namespace vivecap::detail {

/// "data:<mime>;base64,..." for an image file. With max_side > 0 an image
/// whose longer side exceeds it is downscaled and re-encoded first.
std::string image_data_url(const std::string& path, int max_side = 0);

}  // namespace vivecap::detail
