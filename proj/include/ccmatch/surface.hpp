#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccmatch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Input data that cannot be processed (empty surfaces, degenerate fits, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/**
 * Rectangular grid of heights (µm) or intensities with a validity mask.
 *
 * Invalid cells always hold 0.0 so that zero-filled arithmetic (as used by
 * correlation) can read the raw buffer directly. Everything that computes a
 * statistic must consult the mask.
 */
class Surface {
public:
    Surface() = default;
    /// All cells start invalid.
    Surface(std::size_t rows, std::size_t cols, double resolution_um, std::string id = {});

    /// Builds a surface from row-major values; non-finite entries become invalid.
    static Surface from_values(std::size_t rows, std::size_t cols, std::vector<double> values,
                               double resolution_um, std::string id = {});

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return rows_ * cols_; }
    bool empty() const { return size() == 0; }
    double resolution() const { return resolution_; }
    const std::string& id() const { return id_; }
    void set_id(std::string id) { id_ = std::move(id); }

    bool valid(std::size_t r, std::size_t c) const { return mask_[r * cols_ + c] != 0; }
    double value(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    void set(std::size_t r, std::size_t c, double v);
    void set_invalid(std::size_t r, std::size_t c);

    std::span<const double> values() const { return values_; }
    std::span<const std::uint8_t> mask() const { return mask_; }

    std::size_t valid_count() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    double resolution_ = 1.0;
    std::string id_;
    std::vector<double> values_;
    std::vector<std::uint8_t> mask_;
};

/// Identity metadata for one scan, as listed in a manifest.
struct SurfaceMeta {
    std::string id;
    std::string study;
    std::string firearm;
    std::string slide;
    std::string ammunition;
    std::filesystem::path path;

    /// Ground-truth source key: two scans match iff their keys are equal.
    bool same_source(const SurfaceMeta& other) const {
        return study == other.study && firearm == other.firearm && slide == other.slide;
    }
};

/// Lateral resolution of the 2D reflectance microscope images.
inline constexpr double kDefaultGrayscaleResolutionUm = 2.53;

/// Reads an 8-bit single-channel PNG. Every pixel is valid.
Surface load_grayscale_png(const std::filesystem::path& path,
                           double resolution_um = kDefaultGrayscaleResolutionUm);

/// Writes an 8-bit grayscale PNG (values are clamped and rounded; mask ignored).
void save_grayscale_png(const Surface& surface, const std::filesystem::path& path);

/**
 * C3DP depth grid, little-endian:
 *   "C3DP" | u32 version (=1) | u32 rows | u32 cols | f64 resolution | rows*cols f32
 * Missing cells are stored as NaN.
 */
Surface load_depth_grid(const std::filesystem::path& path);
Surface decode_depth_grid(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_depth_grid(const Surface& surface);

/// Written to a temporary sibling and renamed into place.
void save_depth_grid(const Surface& surface, const std::filesystem::path& path);

/// Minimal bounding box containing every valid cell.
Surface crop_to_valid(const Surface& surface);

/// Manifest CSV with header `id,path,study,firearm,slide,ammunition`.
/// Relative paths are resolved against the manifest's directory.
std::vector<SurfaceMeta> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::vector<SurfaceMeta>& rows, const std::filesystem::path& path);

/// Reads a whole file into memory.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Atomically replaces `path` with `contents`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace ccmatch
