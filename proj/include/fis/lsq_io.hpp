#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fis/errors.hpp"
#include "fis/tensor.hpp"

namespace fis {

// .lsq tensor dump: 16-byte header of four little-endian u32 (F, H, W, D),
// then F*H*W*D little-endian f32 in row-major (frame, height, width, channel)
// order. Byte layout is fixed regardless of host endianness.

namespace detail {

inline void put_u32_le(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    buf.push_back(static_cast<std::uint8_t>(v & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    buf.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32_le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_lsq(const LatentSequence& x) {
    std::vector<std::uint8_t> buf;
    buf.reserve(16 + x.size() * 4);
    detail::put_u32_le(buf, x.frames);
    detail::put_u32_le(buf, x.height);
    detail::put_u32_le(buf, x.width);
    detail::put_u32_le(buf, x.channels);
    if constexpr (std::endian::native == std::endian::little) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(x.data.data());
        buf.insert(buf.end(), p, p + x.size() * 4);
    } else {
        for (float v : x.data) {
            detail::put_u32_le(buf, std::bit_cast<std::uint32_t>(v));
        }
    }
    return buf;
}

inline LatentSequence decode_lsq(const std::vector<std::uint8_t>& buf,
                                 const std::string& origin = "<buffer>") {
    if (buf.size() < 16) {
        throw io_error(origin + ": truncated .lsq header");
    }
    const std::uint32_t f = detail::get_u32_le(buf.data());
    const std::uint32_t h = detail::get_u32_le(buf.data() + 4);
    const std::uint32_t w = detail::get_u32_le(buf.data() + 8);
    const std::uint32_t d = detail::get_u32_le(buf.data() + 12);
    if (f < 1 || h < 1 || w < 1 || d < 1) {
        throw io_error(origin + ": zero dimension in .lsq header");
    }
    const std::size_t n = static_cast<std::size_t>(f) * h * w * d;
    if (buf.size() != 16 + n * 4) {
        throw io_error(origin + ": .lsq payload is " + std::to_string(buf.size() - 16) +
                       " bytes, header implies " + std::to_string(n * 4));
    }
    LatentSequence x(f, h, w, d);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(x.data.data(), buf.data() + 16, n * 4);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            x.data[i] = std::bit_cast<float>(detail::get_u32_le(buf.data() + 16 + i * 4));
        }
    }
    return x;
}

inline void write_lsq(const std::filesystem::path& path, const LatentSequence& x) {
    const auto buf = encode_lsq(x);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw io_error("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw io_error("short write to " + path.string());
    }
}

inline LatentSequence read_lsq(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw io_error("cannot open " + path.string());
    }
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> buf(size);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
    if (!in) {
        throw io_error("short read from " + path.string());
    }
    return decode_lsq(buf, path.string());
}

}  // namespace fis
