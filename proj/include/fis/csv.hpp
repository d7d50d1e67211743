#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "fis/errors.hpp"

namespace fis {

// 9 significant digits, locale-independent.
inline std::string fmt_sig(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::string fmt_fixed3(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

// Write-temp-then-rename so readers never observe a partial file.
inline void atomic_write_bytes(const std::filesystem::path& path, const void* data,
                               std::size_t size) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw io_error("cannot open " + tmp.string() + " for writing");
        }
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) {
            throw io_error("short write to " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw io_error("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                       ec.message());
    }
}

inline void atomic_write_text(const std::filesystem::path& path, const std::string& text) {
    atomic_write_bytes(path, text.data(), text.size());
}

}  // namespace fis
