#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "deepbasket/dataset.hpp"
#include "deepbasket/neural_net.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("deepbasket_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

// Redirects a file descriptor (1 or 2) into a file for the lifetime of the object.
class CaptureFd {
public:
    CaptureFd(int fd, std::filesystem::path file) : fd_(fd), file_(std::move(file)) {
        std::fflush(nullptr);
        saved_ = ::dup(fd_);
        const int target = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        ::dup2(target, fd_);
        ::close(target);
    }
    ~CaptureFd() { release(); }
    std::string release() {
        if (saved_ >= 0) {
            std::fflush(nullptr);
            ::dup2(saved_, fd_);
            ::close(saved_);
            saved_ = -1;
        }
        return slurp(file_);
    }

private:
    int fd_;
    std::filesystem::path file_;
    int saved_ = -1;
};

// Unlabelled-looking dataset with synthetic inputs and labels, cheap to build.
inline deepbasket::Dataset synthetic_dataset(std::size_t n, int n_assets = 1, std::uint64_t seed = 5) {
    deepbasket::Dataset d(n_assets);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        deepbasket::Sample s;
        s.inputs.resize(static_cast<std::size_t>(d.width()));
        for (auto& x : s.inputs) x = u(rng);
        s.label = static_cast<double>(i);
        s.seed = i;
        d.push_back(s);
    }
    return d;
}

}  // namespace testing
