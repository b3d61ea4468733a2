#pragma once

#include <string>
#include <string_view>

namespace tmap {

/// Lower-case hex SHA-256 of `bytes`, prefixed "sha256:".
std::string sha256_digest(std::string_view bytes);

}  // namespace tmap
