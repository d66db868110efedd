#pragma once

// Little-endian binary helpers shared by the dataset and policy formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "embnav/common.hpp"

namespace embnav::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class BinaryWriter {
public:
    explicit BinaryWriter(const std::filesystem::path& path)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw Error("cannot open " + path.string() + " for writing");
    }

    void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }
    void u16(std::uint16_t v) { bytes(&v, sizeof v); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void f32(float v) { bytes(&v, sizeof v); }

    void finish() {
        out_.flush();
        if (!out_) throw Error("write failed for " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class BinaryReader {
public:
    explicit BinaryReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw FormatError("cannot open " + path.string());
    }

    /// Throws FormatError naming the byte offset where the data ran out.
    void bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(in_.gcount());
        if (got != n) {
            throw FormatError(path_.string() + ": truncated at byte offset " + std::to_string(offset_ + got) +
                              " (needed " + std::to_string(n) + " bytes at offset " + std::to_string(offset_) + ")");
        }
        offset_ += n;
    }

    std::uint16_t u16() { return read<std::uint16_t>(); }
    std::uint32_t u32() { return read<std::uint32_t>(); }
    std::uint64_t u64() { return read<std::uint64_t>(); }
    float f32() { return read<float>(); }

    std::uint64_t offset() const { return offset_; }

    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) {
            throw FormatError(path_.string() + ": trailing bytes after offset " + std::to_string(offset_));
        }
    }

private:
    template <typename T>
    T read() {
        T v;
        bytes(&v, sizeof v);
        return v;
    }

    std::filesystem::path path_;
    std::ifstream in_;
    std::uint64_t offset_ = 0;
};

}  // namespace embnav::io
