#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "depthpatch/errors.hpp"

namespace depthpatch {

inline std::string base64_encode(const void* data, size_t len) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        std::uint32_t chunk = bytes[i] << 16;
        if (i + 1 < len) chunk |= bytes[i + 1] << 8;
        if (i + 2 < len) chunk |= bytes[i + 2];
        out.push_back(alphabet[(chunk >> 18) & 63]);
        out.push_back(alphabet[(chunk >> 12) & 63]);
        out.push_back(i + 1 < len ? alphabet[(chunk >> 6) & 63] : '=');
        out.push_back(i + 2 < len ? alphabet[chunk & 63] : '=');
    }
    return out;
}

inline std::vector<unsigned char> base64_decode(const std::string& text) {
    auto decode_char = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t chunk = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int val = decode_char(c);
        if (val < 0) throw DataError("base64: invalid character");
        chunk = (chunk << 6) | static_cast<std::uint32_t>(val);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((chunk >> bits) & 0xff));
        }
    }
    return out;
}

inline std::string doubles_to_base64(const std::vector<double>& v) {
    return base64_encode(v.data(), v.size() * sizeof(double));
}

inline std::vector<double> base64_to_doubles(const std::string& text) {
    const std::vector<unsigned char> bytes = base64_decode(text);
    if (bytes.size() % sizeof(double) != 0)
        throw DataError("base64: payload is not a multiple of 8 bytes");
    std::vector<double> out(bytes.size() / sizeof(double));
    std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

}  // namespace depthpatch
