#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mirage/tensor.hpp"

namespace mirage {

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Wire form of a latent: {"shape": [C, H, W], "data": base64 of
/// little-endian float32 values}. Precision drops to float32 on the wire.
nlohmann::json latent_to_wire(const LatentGrid& grid);
LatentGrid latent_from_wire(const nlohmann::json& payload);

}  // namespace mirage
