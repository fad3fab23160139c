#pragma once

#include "ccmatch/surface.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("ccmatch_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
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

// Pearson correlation over cells valid in both surfaces (same shape).
inline double correlation(const ccmatch::Surface& a, const ccmatch::Surface& b) {
    double sa = 0, sb = 0, n = 0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            if (a.valid(r, c) && b.valid(r, c)) {
                sa += a.value(r, c);
                sb += b.value(r, c);
                ++n;
            }
    const double ma = sa / n, mb = sb / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c)
            if (a.valid(r, c) && b.valid(r, c)) {
                const double x = a.value(r, c) - ma, y = b.value(r, c) - mb;
                sab += x * y;
                saa += x * x;
                sbb += y * y;
            }
    return sab / std::sqrt(saa * sbb);
}

inline ccmatch::Surface white_noise(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                    double resolution = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    ccmatch::Surface s(rows, cols, resolution);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) s.set(r, c, g(rng));
    return s;
}

}  // namespace testing
