#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace deepbasket {

// Little-endian byte buffer builder for the dataset and checkpoint formats.
class ByteWriter {
public:
    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
        if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
        bytes_.insert(bytes_.end(), bits.begin(), bits.end());
    }

    template <typename T>
    void put_all(std::span<const T> values) {
        for (const T& v : values) put(v);
    }

    void put_bytes(std::string_view raw) { bytes_.insert(bytes_.end(), raw.begin(), raw.end()); }
    void pad_to(std::size_t size) {
        if (bytes_.size() < size) bytes_.resize(size, 0);
    }

    const std::vector<unsigned char>& bytes() const noexcept { return bytes_; }
    std::size_t size() const noexcept { return bytes_.size(); }
    void clear() noexcept { bytes_.clear(); }

private:
    std::vector<unsigned char> bytes_;
};

// Bounds-checked little-endian reader; truncation raises FormatError naming
// the absolute byte offset (base_offset + position).
class ByteReader {
public:
    explicit ByteReader(std::span<const unsigned char> data, std::uint64_t base_offset = 0)
        : data_(data), base_(base_offset) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        require(sizeof(T));
        std::array<unsigned char, sizeof(T)> bits;
        std::memcpy(bits.data(), data_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
        pos_ += sizeof(T);
        return std::bit_cast<T>(bits);
    }

    std::string get_bytes(std::size_t n);
    void skip(std::size_t n);
    std::uint64_t offset() const noexcept { return base_ + pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void require(std::size_t n) const;

    std::span<const unsigned char> data_;
    std::uint64_t base_;
    std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place; the temporary
// is removed if anything fails.
class AtomicFileWriter {
public:
    explicit AtomicFileWriter(std::filesystem::path target);
    ~AtomicFileWriter();
    AtomicFileWriter(const AtomicFileWriter&) = delete;
    AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;

    void write(std::span<const unsigned char> bytes);
    void write_at(std::uint64_t offset, std::span<const unsigned char> bytes);
    void commit();

private:
    std::filesystem::path target_;
    std::filesystem::path temp_;
    std::FILE* file_ = nullptr;
    bool committed_ = false;
};

void write_file_atomically(const std::filesystem::path& path, std::span<const unsigned char> bytes);

}  // namespace deepbasket
