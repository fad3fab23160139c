#include "ccmatch/params.hpp"

#include "ccmatch/csv.hpp"

#include <fstream>
#include <sstream>

namespace ccmatch {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int parse_int_value(std::string_view key, std::string_view v) {
    try {
        return static_cast<int>(csv::parse_int(v));
    } catch (const FormatError&) {
        throw InvalidArgument("parameter " + std::string(key) + ": expected an integer, got '" +
                              std::string(v) + "'");
    }
}

double parse_double_value(std::string_view key, std::string_view v) {
    try {
        return csv::parse_double(v);
    } catch (const FormatError&) {
        throw InvalidArgument("parameter " + std::string(key) + ": expected a number, got '" +
                              std::string(v) + "'");
    }
}

}  // namespace

PreprocessParams parse_params(std::string_view text) {
    PreprocessParams p;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = line;
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument("parameter line " + std::to_string(lineno) + ": missing '='");
        }
        const auto key = trim(view.substr(0, eq));
        const auto value = trim(view.substr(eq + 1));
        if (key == "ransac.delta_um") p.ransac.inlier_threshold_um = parse_double_value(key, value);
        else if (key == "ransac.iterations") p.ransac.iterations = parse_int_value(key, value);
        else if (key == "ransac.sample_size") p.ransac.sample_size = parse_int_value(key, value);
        else if (key == "ransac.confidence") p.ransac.confidence = parse_double_value(key, value);
        else if (key == "ransac.outlier_rate") p.ransac.outlier_rate = parse_double_value(key, value);
        else if (key == "resample.resolution_um") p.resolution_um = parse_double_value(key, value);
        else if (key == "loess.span") p.loess.span = parse_double_value(key, value);
        else if (key == "loess.degree") p.loess.degree = parse_int_value(key, value);
        else if (key == "filter.short_um") p.filter.short_cutoff_um = parse_double_value(key, value);
        else if (key == "filter.long_um") p.filter.long_cutoff_um = parse_double_value(key, value);
        else throw InvalidArgument("unknown parameter '" + std::string(key) + "'");
    }
    validate(p.ransac);
    validate(p.loess);
    validate(p.filter);
    if (!(p.resolution_um > 0.0)) throw InvalidArgument("resample.resolution_um must be positive");
    return p;
}

PreprocessParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument(path.string() + ": cannot open parameter file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_params(ss.str());
}

std::string canonical_params(const PreprocessParams& p) {
    std::ostringstream os;
    os << "filter.long_um=" << csv::format_double(p.filter.long_cutoff_um) << '\n'
       << "filter.short_um=" << csv::format_double(p.filter.short_cutoff_um) << '\n'
       << "loess.degree=" << p.loess.degree << '\n'
       << "loess.span=" << csv::format_double(p.loess.span) << '\n'
       << "ransac.confidence=" << csv::format_double(p.ransac.confidence) << '\n'
       << "ransac.delta_um=" << csv::format_double(p.ransac.inlier_threshold_um) << '\n'
       << "ransac.iterations=" << p.ransac.iterations << '\n'
       << "ransac.outlier_rate=" << csv::format_double(p.ransac.outlier_rate) << '\n'
       << "ransac.sample_size=" << p.ransac.sample_size << '\n'
       << "resample.resolution_um=" << csv::format_double(p.resolution_um) << '\n';
    return os.str();
}

}  // namespace ccmatch
