#include "deepbasket/binary_io.hpp"

#include <cerrno>
#include <cstdio>
#include <fstream>
#include <system_error>

#include "deepbasket/errors.hpp"

namespace deepbasket {

void ByteReader::require(std::size_t n) const {
    if (data_.size() - pos_ < n) {
        throw FormatError("unexpected end of data: need " + std::to_string(n) + " bytes, " +
                              std::to_string(data_.size() - pos_) + " left",
                          base_ + pos_);
    }
}

std::string ByteReader::get_bytes(std::size_t n) {
    require(n);
    std::string out(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return out;
}

void ByteReader::skip(std::size_t n) {
    require(n);
    pos_ += n;
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<unsigned char> bytes(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
        throw IoError("failed reading " + path.string());
    }
    return bytes;
}

AtomicFileWriter::AtomicFileWriter(std::filesystem::path target)
    : target_(std::move(target)), temp_(target_.string() + ".partial") {
    file_ = std::fopen(temp_.c_str(), "wb");
    if (file_ == nullptr) {
        throw IoError("cannot create " + temp_.string() + ": " + std::generic_category().message(errno));
    }
}

AtomicFileWriter::~AtomicFileWriter() {
    if (file_ != nullptr) std::fclose(file_);
    if (!committed_) {
        std::error_code ec;
        std::filesystem::remove(temp_, ec);
    }
}

void AtomicFileWriter::write(std::span<const unsigned char> bytes) {
    if (bytes.empty()) return;
    if (std::fwrite(bytes.data(), 1, bytes.size(), file_) != bytes.size()) {
        throw IoError("write failed for " + temp_.string() + ": " + std::generic_category().message(errno));
    }
}

void AtomicFileWriter::write_at(std::uint64_t offset, std::span<const unsigned char> bytes) {
    const long here = std::ftell(file_);
    if (std::fseek(file_, static_cast<long>(offset), SEEK_SET) != 0) {
        throw IoError("seek failed for " + temp_.string());
    }
    write(bytes);
    std::fseek(file_, here, SEEK_SET);
}

void AtomicFileWriter::commit() {
    if (std::fflush(file_) != 0 || std::fclose(file_) != 0) {
        file_ = nullptr;
        throw IoError("flush failed for " + temp_.string() + ": " + std::generic_category().message(errno));
    }
    file_ = nullptr;
    std::error_code ec;
    std::filesystem::rename(temp_, target_, ec);
    if (ec) throw IoError("cannot move " + temp_.string() + " to " + target_.string() + ": " + ec.message());
    committed_ = true;
}

void write_file_atomically(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
    AtomicFileWriter out(path);
    out.write(bytes);
    out.commit();
}

}  // namespace deepbasket
