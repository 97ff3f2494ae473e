#include "texforge/hash.hpp"

#include <openssl/sha.h>

#include <array>

namespace texforge {

std::string sha256_hex(std::span<const unsigned char> data) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
    SHA256(data.data(), data.size(), digest.data());
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(digest.size() * 2);
    for (unsigned char b : digest) {
        out += kHex[b >> 4];
        out += kHex[b & 0xF];
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    return sha256_hex(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(data.data()), data.size()));
}

}  // namespace texforge
