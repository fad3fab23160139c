#pragma once

// Synthetic surfaces with known structure, for tests, demos, and acceptance runs.

#include "ccmatch/surface.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ccmatch::synthetic {

/// Sum of plane waves with wavelengths in a band; evaluated at positions in µm.
class Texture {
public:
    struct Wave {
        double kx, ky;  ///< radians per µm
        double phase;
        double amplitude;
    };

    Texture() = default;
    explicit Texture(std::vector<Wave> waves) : waves_(std::move(waves)) {}

    /// Random orientations and phases; wavelengths uniform in [min_um, max_um].
    static Texture random(std::uint64_t seed, std::size_t wave_count, double min_wavelength_um,
                          double max_wavelength_um, double rms);

    double operator()(double x_um, double y_um) const;
    const std::vector<Wave>& waves() const { return waves_; }

private:
    std::vector<Wave> waves_;
};

/// Maps output grid cell (r, c) to texture coordinates: rotate about the grid
/// centre so that `rotate(result, theta)` undoes it, then subtract the shift.
struct Placement {
    double theta_degrees = 0.0;
    double shift_rows = 0.0;
    double shift_cols = 0.0;
};

/// Samples a texture on a grid (texture x = column, y = row, both in µm).
Surface sample(const Texture& texture, std::size_t rows, std::size_t cols, double resolution_um,
               const Placement& placement = {});

/// Adds i.i.d. Gaussian noise with the given standard deviation to valid cells.
void add_noise(Surface& surface, double sigma, std::uint64_t seed);

/// Knobs for a cartridge-case-like phantom.
struct PhantomSpec {
    std::size_t size = 800;             ///< square grid edge in pixels
    double resolution_um = 3.125;
    double tilt_x = 0.004;              ///< plane slope (µm per µm)
    double tilt_y = -0.003;
    double offset_um = 20.0;
    double bowl_um_per_mm2 = 1.5;       ///< radial bowl: depth grows with r^2
    double primer_radius_frac = 0.47;   ///< cells beyond this (fraction of size) are missing
    double pit_radius_frac = 0.14;      ///< firing pin impression
    double pit_depth_um = 60.0;
    double individual_rms = 0.5;        ///< per-firing texture relative to the source texture
    double white_noise_um = 0.05;
};

/// Gun-level (source) texture used by `breechface_phantom`.
Texture source_texture(std::uint64_t seed, double rms_um = 1.0);

/// One firing: plane + bowl + placed source texture + individual texture + pit,
/// with the area outside the primer missing.
Surface breechface_phantom(const Texture& source, const PhantomSpec& spec,
                           const Placement& placement, std::uint64_t firing_seed);

/// Writes `guns x cases` phantoms as C3DP files plus `manifest.csv`. Returns the manifest path.
std::filesystem::path write_study(const std::filesystem::path& dir, std::size_t guns,
                                  std::size_t cases, std::uint64_t seed,
                                  const PhantomSpec& spec = {});

}  // namespace ccmatch::synthetic
