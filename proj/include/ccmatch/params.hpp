#pragma once

#include "ccmatch/preprocess.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace ccmatch {

/**
 * Plain-text `key=value` parameter file. Blank lines and `#` comments are
 * ignored. Recognised keys:
 *
 *   ransac.delta_um        ransac.iterations     ransac.sample_size
 *   ransac.confidence      ransac.outlier_rate   resample.resolution_um
 *   loess.span             loess.degree          filter.short_um
 *   filter.long_um
 *
 * Unknown keys are an error. Missing keys keep their defaults.
 */
PreprocessParams parse_params(std::string_view text);
PreprocessParams load_params(const std::filesystem::path& path);

/// Every key in a fixed order with round-trip precision; stable across runs.
std::string canonical_params(const PreprocessParams& params);

}  // namespace ccmatch
