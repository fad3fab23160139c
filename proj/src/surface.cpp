#include "ccmatch/surface.hpp"

#include "ccmatch/csv.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace ccmatch {

static_assert(std::endian::native == std::endian::little,
              "C3DP encoding assumes a little-endian host");

Surface::Surface(std::size_t rows, std::size_t cols, double resolution_um, std::string id)
    : rows_(rows), cols_(cols), resolution_(resolution_um), id_(std::move(id)),
      values_(rows * cols, 0.0), mask_(rows * cols, 0) {
    if (!(resolution_um > 0.0) || !std::isfinite(resolution_um)) {
        throw InvalidArgument("surface resolution must be positive");
    }
}

Surface Surface::from_values(std::size_t rows, std::size_t cols, std::vector<double> values,
                             double resolution_um, std::string id) {
    if (values.size() != rows * cols) {
        throw InvalidArgument("value count does not match surface dimensions");
    }
    Surface s(rows, cols, resolution_um, std::move(id));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (std::isfinite(values[i])) {
            s.values_[i] = values[i];
            s.mask_[i] = 1;
        }
    }
    return s;
}

void Surface::set(std::size_t r, std::size_t c, double v) {
    const std::size_t i = r * cols_ + c;
    if (std::isfinite(v)) {
        values_[i] = v;
        mask_[i] = 1;
    } else {
        values_[i] = 0.0;
        mask_[i] = 0;
    }
}

void Surface::set_invalid(std::size_t r, std::size_t c) {
    const std::size_t i = r * cols_ + c;
    values_[i] = 0.0;
    mask_[i] = 0;
}

std::size_t Surface::valid_count() const {
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------
// PNG

Surface load_grayscale_png(const std::filesystem::path& path, double resolution_um) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw FormatError(path.string() + ": " + image.message);
    }
    if (image.format != PNG_FORMAT_GRAY) {
        png_image_free(&image);
        throw FormatError(path.string() + ": expected an 8-bit single-channel PNG");
    }
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        const std::string message = image.message;
        png_image_free(&image);
        throw FormatError(path.string() + ": " + message);
    }
    const std::size_t rows = image.height;
    const std::size_t cols = image.width;
    std::vector<double> values(buffer.begin(), buffer.end());
    return Surface::from_values(rows, cols, std::move(values), resolution_um,
                                path.stem().string());
}

void save_grayscale_png(const Surface& surface, const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(surface.cols());
    image.height = static_cast<png_uint_32>(surface.rows());
    image.format = PNG_FORMAT_GRAY;
    std::vector<png_byte> buffer(surface.size());
    for (std::size_t i = 0; i < buffer.size(); ++i) {
        buffer[i] = static_cast<png_byte>(std::clamp(std::lround(surface.values()[i]), 0L, 255L));
    }
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
        throw Error(path.string() + ": " + image.message);
    }
}

// ---------------------------------------------------------------------------
// C3DP

namespace {

constexpr char kMagic[4] = {'C', '3', 'D', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 4 + 8;

template <typename T>
void append_raw(std::vector<std::uint8_t>& out, T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T read_raw(std::span<const std::uint8_t> bytes, std::size_t offset) {
    T v;
    std::memcpy(&v, bytes.data() + offset, sizeof(T));
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_depth_grid(const Surface& surface) {
    if (surface.rows() > std::numeric_limits<std::uint32_t>::max() ||
        surface.cols() > std::numeric_limits<std::uint32_t>::max()) {
        throw InvalidArgument("surface too large for C3DP");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + surface.size() * sizeof(float));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    append_raw(out, kVersion);
    append_raw(out, static_cast<std::uint32_t>(surface.rows()));
    append_raw(out, static_cast<std::uint32_t>(surface.cols()));
    append_raw(out, surface.resolution());
    const auto values = surface.values();
    const auto mask = surface.mask();
    for (std::size_t i = 0; i < surface.size(); ++i) {
        const float v = mask[i] ? static_cast<float>(values[i])
                                : std::numeric_limits<float>::quiet_NaN();
        append_raw(out, v);
    }
    return out;
}

Surface decode_depth_grid(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("not a C3DP file (bad magic)");
    }
    const auto version = read_raw<std::uint32_t>(bytes, 4);
    if (version != kVersion) {
        throw FormatError("unsupported C3DP version " + std::to_string(version));
    }
    const std::size_t rows = read_raw<std::uint32_t>(bytes, 8);
    const std::size_t cols = read_raw<std::uint32_t>(bytes, 12);
    const double resolution = read_raw<double>(bytes, 16);
    if (rows == 0 || cols == 0) {
        throw FormatError("C3DP grid has zero size");
    }
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
        throw FormatError("C3DP resolution must be positive");
    }
    const std::size_t payload = bytes.size() - kHeaderBytes;
    if (payload != rows * cols * sizeof(float)) {
        throw FormatError("C3DP payload size does not match header (" + std::to_string(rows) +
                          "x" + std::to_string(cols) + " expects " +
                          std::to_string(rows * cols * sizeof(float)) + " bytes, got " +
                          std::to_string(payload) + ")");
    }
    std::vector<double> values(rows * cols);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = read_raw<float>(bytes, kHeaderBytes + i * sizeof(float));
    }
    return Surface::from_values(rows, cols, std::move(values), resolution);
}

Surface load_depth_grid(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        Surface s = decode_depth_grid(bytes);
        s.set_id(path.stem().string());
        return s;
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_depth_grid(const Surface& surface, const std::filesystem::path& path) {
    const auto bytes = encode_depth_grid(surface);
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                             bytes.size()));
}

// ---------------------------------------------------------------------------

Surface crop_to_valid(const Surface& surface) {
    std::size_t r0 = surface.rows(), r1 = 0, c0 = surface.cols(), c1 = 0;
    bool any = false;
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            if (!surface.valid(r, c)) continue;
            any = true;
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
        }
    }
    if (!any) throw DataError("cannot crop a surface with no valid cells");

    Surface out(r1 - r0 + 1, c1 - c0 + 1, surface.resolution(), surface.id());
    for (std::size_t r = r0; r <= r1; ++r) {
        for (std::size_t c = c0; c <= c1; ++c) {
            if (surface.valid(r, c)) out.set(r - r0, c - c0, surface.value(r, c));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest and file helpers

namespace {
const std::vector<std::string> kManifestHeader = {"id", "path", "study", "firearm", "slide",
                                                  "ammunition"};
}

std::vector<SurfaceMeta> load_manifest(const std::filesystem::path& path) {
    const auto rows = csv::read_table(path.string(), kManifestHeader);
    const auto base = path.parent_path();
    std::vector<SurfaceMeta> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        SurfaceMeta m{row[0], row[2], row[3], row[4], row[5], row[1]};
        if (m.id.empty()) throw FormatError(path.string() + ": empty id");
        if (m.path.is_relative()) m.path = base / m.path;
        out.push_back(std::move(m));
    }
    std::vector<std::string> ids;
    for (const auto& m : out) ids.push_back(m.id);
    std::sort(ids.begin(), ids.end());
    if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
        throw FormatError(path.string() + ": duplicate id '" + *dup + "'");
    }
    return out;
}

void save_manifest(const std::vector<SurfaceMeta>& rows, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "id,path,study,firearm,slide,ammunition\n";
    for (const auto& m : rows) {
        os << csv::escape(m.id) << ',' << csv::escape(m.path.string()) << ','
           << csv::escape(m.study) << ',' << csv::escape(m.firearm) << ','
           << csv::escape(m.slide) << ',' << csv::escape(m.ammunition) << '\n';
    }
    write_file_atomic(path, os.str());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string() + ": cannot open file");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(tmp.string() + ": cannot open for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error(tmp.string() + ": write failed");
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

std::vector<std::string> split_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field += ch;
        }
    }
    if (quoted) throw FormatError("unterminated quoted CSV field");
    fields.push_back(std::move(field));
    return fields;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

double parse_double(std::string_view field) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw FormatError("invalid number '" + std::string(field) + "'");
    }
    return v;
}

long long parse_int(std::string_view field) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw FormatError("invalid integer '" + std::string(field) + "'");
    }
    return v;
}

std::vector<std::vector<std::string>> read_table(const std::string& path,
                                                 const std::vector<std::string>& expected_header) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    if (split_line(line) != expected_header) {
        throw FormatError(path + ": unexpected CSV header '" + line + "'");
    }
    std::vector<std::vector<std::string>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto fields = split_line(line);
        if (fields.size() != expected_header.size()) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(expected_header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

}  // namespace csv
}  // namespace ccmatch
