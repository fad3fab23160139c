#include "ccmatch/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace ccmatch::synthetic {

Texture Texture::random(std::uint64_t seed, std::size_t wave_count, double min_wavelength_um,
                        double max_wavelength_um, double rms) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double amplitude = rms * std::sqrt(2.0 / static_cast<double>(wave_count));
    std::vector<Wave> waves;
    waves.reserve(wave_count);
    for (std::size_t i = 0; i < wave_count; ++i) {
        const double wavelength = min_wavelength_um + (max_wavelength_um - min_wavelength_um) * unit(rng);
        const double angle = std::numbers::pi * unit(rng);
        const double k = 2.0 * std::numbers::pi / wavelength;
        waves.push_back({k * std::cos(angle), k * std::sin(angle),
                         2.0 * std::numbers::pi * unit(rng), amplitude});
    }
    return Texture(std::move(waves));
}

double Texture::operator()(double x_um, double y_um) const {
    double v = 0.0;
    for (const auto& w : waves_) v += w.amplitude * std::cos(w.kx * x_um + w.ky * y_um + w.phase);
    return v;
}

namespace {

// Texture-space pixel coordinates (row, col) for output cell (r, c).
std::pair<double, double> place(const Placement& p, std::size_t rows, std::size_t cols,
                                std::size_t r, std::size_t c) {
    const double t = p.theta_degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(t), sn = std::sin(t);
    const double cr = (static_cast<double>(rows) - 1.0) / 2.0;
    const double cc = (static_cast<double>(cols) - 1.0) / 2.0;
    const double dx = static_cast<double>(c) - cc;
    const double dy = cr - static_cast<double>(r);
    const double sx = cs * dx - sn * dy;
    const double sy = sn * dx + cs * dy;
    return {cr - sy - p.shift_rows, cc + sx - p.shift_cols};
}

}  // namespace

Surface sample(const Texture& texture, std::size_t rows, std::size_t cols, double resolution_um,
               const Placement& placement) {
    Surface s(rows, cols, resolution_um);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto [tr, tc] = place(placement, rows, cols, r, c);
            s.set(r, c, texture(tc * resolution_um, tr * resolution_um));
        }
    }
    return s;
}

void add_noise(Surface& surface, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            const double e = noise(rng);
            if (surface.valid(r, c)) surface.set(r, c, surface.value(r, c) + e);
        }
    }
}

Texture source_texture(std::uint64_t seed, double rms_um) {
    return Texture::random(seed, 60, 50.0, 400.0, rms_um);
}

Surface breechface_phantom(const Texture& source, const PhantomSpec& spec,
                           const Placement& placement, std::uint64_t firing_seed) {
    const Texture individual = Texture::random(firing_seed ^ 0x9e3779b97f4a7c15ULL, 60, 70.0, 140.0,
                                               spec.individual_rms);
    const std::size_t n = spec.size;
    const double res = spec.resolution_um;
    const double centre = (static_cast<double>(n) - 1.0) / 2.0;
    const double primer_r = spec.primer_radius_frac * static_cast<double>(n);
    const double pit_r = spec.pit_radius_frac * static_cast<double>(n);

    Surface s(n, n, res);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double dr = static_cast<double>(r) - centre;
            const double dc = static_cast<double>(c) - centre;
            const double rad = std::hypot(dr, dc);
            if (rad > primer_r) continue;
            const double x = static_cast<double>(c) * res, y = static_cast<double>(r) * res;
            const double r_mm = rad * res / 1000.0;
            const auto [tr, tc] = place(placement, n, n, r, c);
            double z = spec.tilt_x * x + spec.tilt_y * y + spec.offset_um +
                       spec.bowl_um_per_mm2 * r_mm * r_mm + source(tc * res, tr * res) +
                       individual(x, y);
            if (rad < pit_r) z -= spec.pit_depth_um;
            s.set(r, c, z);
        }
    }
    add_noise(s, spec.white_noise_um, firing_seed);
    return s;
}

std::filesystem::path write_study(const std::filesystem::path& dir, std::size_t guns,
                                  std::size_t cases, std::uint64_t seed, const PhantomSpec& spec) {
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-180.0, 180.0);
    std::uniform_real_distribution<double> shift(-12.0, 12.0);
    std::vector<SurfaceMeta> manifest;
    for (std::size_t g = 0; g < guns; ++g) {
        const Texture tex = source_texture(seed * 1000003ULL + g + 1);
        for (std::size_t k = 0; k < cases; ++k) {
            const Placement pl{angle(rng), shift(rng), shift(rng)};
            const std::uint64_t firing_seed = rng();
            Surface s = breechface_phantom(tex, spec, pl, firing_seed);
            const std::string id = "g" + std::to_string(g + 1) + "_c" + std::to_string(k + 1);
            s.set_id(id);
            const auto file = id + ".c3dp";
            save_depth_grid(s, dir / file);
            manifest.push_back({id, "synthetic", "gun" + std::to_string(g + 1), "", "none", file});
        }
    }
    const auto path = dir / "manifest.csv";
    save_manifest(manifest, path);
    return path;
}

}  // namespace ccmatch::synthetic
