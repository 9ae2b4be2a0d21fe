#include "mirage/codec.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <bit>
#include <cstring>

#include "mirage/error.hpp"

namespace mirage {

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    std::string clean;
    clean.reserve(text.size());
    for (char c : text) {
        if (c != '\n' && c != '\r' && c != ' ') clean.push_back(c);
    }
    if (clean.size() % 4 != 0) throw Error(ErrorKind::validation, "base64 payload has invalid length");
    std::vector<std::uint8_t> out(3 * clean.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) throw Error(ErrorKind::validation, "invalid base64 payload");
    // EVP_DecodeBlock counts padding bytes as data.
    std::size_t size = static_cast<std::size_t>(n);
    if (!clean.empty() && clean.back() == '=') --size;
    if (clean.size() > 1 && clean[clean.size() - 2] == '=') --size;
    out.resize(size);
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned char b : digest) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xF]);
    }
    return out;
}

nlohmann::json latent_to_wire(const LatentGrid& grid) {
    std::vector<std::uint8_t> bytes(grid.values().size() * 4);
    std::size_t off = 0;
    for (double v : grid.values()) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int i = 0; i < 4; ++i) bytes[off++] = static_cast<std::uint8_t>(bits >> (8 * i));
    }
    return {{"shape", {grid.channels(), grid.height(), grid.width()}}, {"data", base64_encode(bytes)}};
}

LatentGrid latent_from_wire(const nlohmann::json& payload) {
    if (!payload.is_object() || !payload.contains("shape") || !payload.contains("data")) {
        throw Error(ErrorKind::validation, "latent payload needs 'shape' and 'data'");
    }
    const auto& shape_json = payload.at("shape");
    if (!shape_json.is_array() || shape_json.size() != 3) throw Error(ErrorKind::validation, "latent shape must be [C, H, W]");
    const GridShape shape{shape_json[0].get<std::size_t>(), shape_json[1].get<std::size_t>(),
                          shape_json[2].get<std::size_t>()};
    const auto bytes = base64_decode(payload.at("data").get<std::string>());
    if (bytes.size() != shape.size() * 4) throw Error(ErrorKind::validation, "latent data does not match its shape");
    std::vector<double> values(shape.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
        values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return LatentGrid(shape, std::move(values));
}

}  // namespace mirage
