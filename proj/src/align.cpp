#include "ccmatch/align.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>

namespace ccmatch {

Surface standardize(const Surface& surface) {
    const std::size_t n = surface.valid_count();
    if (n < 2) throw DataError("standardize needs at least two valid cells");
    const auto values = surface.values();
    const auto mask = surface.mask();
    double mean = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < surface.size(); ++i) {
        if (mask[i]) {
            mean += values[i];
            scale = std::max(scale, std::abs(values[i]));
        }
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < surface.size(); ++i) {
        if (mask[i]) ss += (values[i] - mean) * (values[i] - mean);
    }
    if (!(std::sqrt(ss / static_cast<double>(n)) > 1e-12 * scale) || ss == 0.0) {
        throw DataError("standardize: surface has zero variance");
    }
    const double norm = std::sqrt(ss);
    Surface out(surface.rows(), surface.cols(), surface.resolution(), surface.id());
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            if (surface.valid(r, c)) out.set(r, c, (surface.value(r, c) - mean) / norm);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// FFT machinery

namespace {

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};
using RealBuffer = std::unique_ptr<double[], FftwDeleter>;
using ComplexBuffer = std::unique_ptr<fftw_complex[], FftwDeleter>;

RealBuffer alloc_real(std::size_t n) { return RealBuffer(fftw_alloc_real(n)); }
ComplexBuffer alloc_complex(std::size_t n) { return ComplexBuffer(fftw_alloc_complex(n)); }

struct PlanPair {
    fftw_plan forward;
    fftw_plan inverse;
};

// The FFTW planner is not thread-safe; plans are created once per size under a lock
// and then only used through the thread-safe new-array execute functions.
const PlanPair& plans_for(int rows, int cols) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, PlanPair> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find({rows, cols});
    if (it != cache.end()) return it->second;
    const auto n_real = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    const auto n_cplx = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols / 2 + 1);
    auto real = alloc_real(n_real);
    auto cplx = alloc_complex(n_cplx);
    PlanPair p{
        fftw_plan_dft_r2c_2d(rows, cols, real.get(), cplx.get(), FFTW_ESTIMATE),
        fftw_plan_dft_c2r_2d(rows, cols, cplx.get(), real.get(), FFTW_ESTIMATE),
    };
    return cache.emplace(std::pair{rows, cols}, p).first->second;
}

std::size_t fft_size(std::size_t n) {
    for (;; ++n) {
        std::size_t m = n;
        for (std::size_t f : {2, 3, 5, 7}) {
            while (m % f == 0) m /= f;
        }
        if (m == 1) return n;
    }
}

double norm_of(const Surface& s) {
    double ss = 0.0;
    for (double v : s.values()) ss += v * v;  // invalid cells hold 0
    return std::sqrt(ss);
}

void check_lags(const Surface& a, const Surface& b, LagRange lags) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw InvalidArgument("cross-correlation needs equally sized surfaces");
    }
    if (lags.rows < 0 || lags.cols < 0 || static_cast<std::size_t>(lags.rows) >= a.rows() ||
        static_cast<std::size_t>(lags.cols) >= a.cols()) {
        throw InvalidArgument("lag range exceeds the grid size");
    }
}

/// Holds the transform of a fixed reference surface and correlates others against it.
class Correlator {
public:
    Correlator(const Surface& reference, LagRange lags)
        : rows_(reference.rows()), cols_(reference.cols()), lags_(lags),
          prows_(fft_size(rows_ + static_cast<std::size_t>(lags.rows))),
          pcols_(fft_size(cols_ + static_cast<std::size_t>(lags.cols))),
          plans_(plans_for(static_cast<int>(prows_), static_cast<int>(pcols_))),
          ref_spectrum_(alloc_complex(spectrum_size())), ref_norm_(norm_of(reference)) {
        transform(reference, ref_spectrum_.get());
    }

    CorrelationGrid correlate(const Surface& other) const {
        if (other.rows() != rows_ || other.cols() != cols_) {
            throw InvalidArgument("cross-correlation needs equally sized surfaces");
        }
        auto spec = alloc_complex(spectrum_size());
        transform(other, spec.get());
        // conj(F_ref) * F_other gives sum_i ref(i) other(i + k).
        for (std::size_t i = 0; i < spectrum_size(); ++i) {
            const std::complex<double> a(ref_spectrum_[i][0], -ref_spectrum_[i][1]);
            const std::complex<double> b(spec[i][0], spec[i][1]);
            const auto p = a * b;
            spec[i][0] = p.real();
            spec[i][1] = p.imag();
        }
        auto real = alloc_real(prows_ * pcols_);
        fftw_execute_dft_c2r(plans_.inverse, spec.get(), real.get());

        const double denom = ref_norm_ * norm_of(other) * static_cast<double>(prows_ * pcols_);
        CorrelationGrid grid;
        grid.range = lags_;
        grid.values.reserve(static_cast<std::size_t>((2 * lags_.rows + 1) * (2 * lags_.cols + 1)));
        const auto pr = static_cast<long>(prows_);
        const auto pc = static_cast<long>(pcols_);
        for (int k = -lags_.rows; k <= lags_.rows; ++k) {
            const long kr = (k + pr) % pr;
            for (int l = -lags_.cols; l <= lags_.cols; ++l) {
                const long lc = (l + pc) % pc;
                grid.values.push_back(denom > 0.0 ? real[static_cast<std::size_t>(kr * pc + lc)] / denom
                                                  : 0.0);
            }
        }
        return grid;
    }

private:
    std::size_t spectrum_size() const { return prows_ * (pcols_ / 2 + 1); }

    void transform(const Surface& s, fftw_complex* out) const {
        auto real = alloc_real(prows_ * pcols_);
        std::fill(real.get(), real.get() + prows_ * pcols_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r) {
            for (std::size_t c = 0; c < cols_; ++c) real[r * pcols_ + c] = s.value(r, c);
        }
        fftw_execute_dft_r2c(plans_.forward, real.get(), out);
    }

    std::size_t rows_, cols_;
    LagRange lags_;
    std::size_t prows_, pcols_;
    const PlanPair& plans_;
    ComplexBuffer ref_spectrum_;
    double ref_norm_;
};

}  // namespace

CorrelationGrid cross_correlation(const Surface& a, const Surface& b, LagRange lags) {
    check_lags(a, b, lags);
    return Correlator(a, lags).correlate(b);
}

CorrelationGrid cross_correlation_direct(const Surface& a, const Surface& b, LagRange lags) {
    check_lags(a, b, lags);
    const double denom = norm_of(a) * norm_of(b);
    const auto R = static_cast<long>(a.rows());
    const auto C = static_cast<long>(a.cols());
    CorrelationGrid grid;
    grid.range = lags;
    for (int k = -lags.rows; k <= lags.rows; ++k) {
        for (int l = -lags.cols; l <= lags.cols; ++l) {
            double acc = 0.0;
            for (long i = std::max(0L, -static_cast<long>(k)); i < std::min(R, R - k); ++i) {
                for (long j = std::max(0L, -static_cast<long>(l)); j < std::min(C, C - l); ++j) {
                    acc += a.value(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *
                           b.value(static_cast<std::size_t>(i + k), static_cast<std::size_t>(j + l));
                }
            }
            grid.values.push_back(denom > 0.0 ? acc / denom : 0.0);
        }
    }
    return grid;
}

LagPeak peak(const CorrelationGrid& grid) {
    LagPeak best;
    bool first = true;
    std::size_t i = 0;
    for (int k = -grid.range.rows; k <= grid.range.rows; ++k) {
        for (int l = -grid.range.cols; l <= grid.range.cols; ++l, ++i) {
            const double v = grid.values[i];
            const int dist = std::abs(k) + std::abs(l);
            const int best_dist = std::abs(best.k) + std::abs(best.l);
            if (first || v > best.value || (v == best.value && dist < best_dist)) {
                best = {v, k, l};
                first = false;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Geometry

Surface rotate(const Surface& surface, double theta_degrees) {
    double cs, sn;
    const double turns = theta_degrees / 90.0;
    if (turns == std::round(turns)) {
        static constexpr double kCos[4] = {1, 0, -1, 0};
        static constexpr double kSin[4] = {0, 1, 0, -1};
        const auto q = static_cast<int>(((static_cast<long>(std::round(turns)) % 4) + 4) % 4);
        cs = kCos[q];
        sn = kSin[q];
    } else {
        const double t = theta_degrees * std::numbers::pi / 180.0;
        cs = std::cos(t);
        sn = std::sin(t);
    }
    const double cr = (static_cast<double>(surface.rows()) - 1.0) / 2.0;
    const double cc = (static_cast<double>(surface.cols()) - 1.0) / 2.0;
    const auto R = static_cast<long>(surface.rows());
    const auto C = static_cast<long>(surface.cols());

    const auto snap = [](double v) {
        const double n = std::round(v);
        return std::abs(v - n) < 1e-9 ? n : v;
    };

    Surface out(surface.rows(), surface.cols(), surface.resolution(), surface.id());
    for (long r = 0; r < R; ++r) {
        for (long c = 0; c < C; ++c) {
            const double dx = static_cast<double>(c) - cc;
            const double dy = cr - static_cast<double>(r);
            // Inverse map: rotate the output offset by -theta to find the source.
            const double sx = cs * dx + sn * dy;
            const double sy = -sn * dx + cs * dy;
            const double src_c = snap(cc + sx);
            const double src_r = snap(cr - sy);
            const double fr0 = std::floor(src_r), fc0 = std::floor(src_c);
            const double fr = src_r - fr0, fc = src_c - fc0;
            const long r0 = static_cast<long>(fr0), c0 = static_cast<long>(fc0);

            double acc = 0.0;
            bool ok = true;
            for (int dr = 0; dr <= 1 && ok; ++dr) {
                const double wr = dr ? fr : 1.0 - fr;
                if (wr == 0.0) continue;
                for (int dc = 0; dc <= 1; ++dc) {
                    const double wc = dc ? fc : 1.0 - fc;
                    if (wc == 0.0) continue;
                    const long rr = r0 + dr, cc2 = c0 + dc;
                    if (rr < 0 || rr >= R || cc2 < 0 || cc2 >= C ||
                        !surface.valid(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc2))) {
                        ok = false;
                        break;
                    }
                    acc += wr * wc * surface.value(static_cast<std::size_t>(rr),
                                                   static_cast<std::size_t>(cc2));
                }
            }
            if (ok) out.set(static_cast<std::size_t>(r), static_cast<std::size_t>(c), acc);
        }
    }
    return out;
}

Surface pad_to(const Surface& surface, std::size_t rows, std::size_t cols) {
    if (rows < surface.rows() || cols < surface.cols()) {
        throw InvalidArgument("pad_to cannot shrink a surface");
    }
    if (rows == surface.rows() && cols == surface.cols()) return surface;
    const std::size_t r0 = (rows - surface.rows()) / 2;
    const std::size_t c0 = (cols - surface.cols()) / 2;
    Surface out(rows, cols, surface.resolution(), surface.id());
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            if (surface.valid(r, c)) out.set(r + r0, c + c0, surface.value(r, c));
        }
    }
    return out;
}

LagRange default_lags(std::size_t rows, std::size_t cols, double lag_fraction) {
    if (!(lag_fraction >= 0.0 && lag_fraction < 1.0)) {
        throw InvalidArgument("lag fraction must lie in [0, 1)");
    }
    const auto bound = [&](std::size_t n) {
        const auto l = static_cast<int>(std::floor(lag_fraction * static_cast<double>(n)));
        return std::min(l, static_cast<int>(n) - 1);
    };
    return {std::max(0, bound(rows)), std::max(0, bound(cols))};
}

std::vector<double> coarse_angles() {
    std::vector<double> out;
    for (int t = -175; t <= -15; t += 5) out.push_back(t);
    for (int i = -4; i <= 4; ++i) out.push_back(2.5 * i);
    for (int t = 15; t <= 180; t += 5) out.push_back(t);
    return out;
}

std::vector<double> fine_angles(double theta_coarse) {
    const bool inner = theta_coarse >= -10.0 && theta_coarse <= 10.0;
    const double step = inner ? 0.5 : 1.0;
    std::vector<double> out;
    for (int i = -4; i <= 4; ++i) out.push_back(theta_coarse + step * i);
    return out;
}

// ---------------------------------------------------------------------------
// Search

namespace {

double normalize_angle(double theta) {
    double t = std::fmod(theta, 360.0);
    if (t <= -180.0) t += 360.0;
    if (t > 180.0) t -= 360.0;
    return t;
}

struct Candidate {
    double theta;
    LagPeak lag;
};

// True if a should replace b as the best alignment.
bool better(const Candidate& a, const Candidate& b) {
    if (a.lag.value != b.lag.value) return a.lag.value > b.lag.value;
    const double ta = std::abs(normalize_angle(a.theta));
    const double tb = std::abs(normalize_angle(b.theta));
    if (ta != tb) return ta < tb;
    const int da = std::abs(a.lag.k) + std::abs(a.lag.l);
    const int db = std::abs(b.lag.k) + std::abs(b.lag.l);
    if (da != db) return da < db;
    return normalize_angle(a.theta) < normalize_angle(b.theta);
}

std::optional<LagPeak> try_angle(const Correlator& corr, const Surface& surface2, double theta) {
    Surface rotated = rotate(surface2, theta);
    try {
        return peak(corr.correlate(standardize(rotated)));
    } catch (const DataError&) {
        return std::nullopt;  // rotation left too little valid data
    }
}

}  // namespace

LagPeak correlate_at_angle(const Surface& standardized1, const Surface& surface2, double theta,
                           LagRange lags) {
    check_lags(standardized1, surface2, lags);
    Correlator corr(standardized1, lags);
    return peak(corr.correlate(standardize(rotate(surface2, theta))));
}

AlignResult align(const Surface& surface1, const Surface& surface2, const AlignParams& params) {
    const std::size_t rows = std::max(surface1.rows(), surface2.rows());
    const std::size_t cols = std::max(surface1.cols(), surface2.cols());
    const Surface a = standardize(pad_to(surface1, rows, cols));
    const Surface b = pad_to(surface2, rows, cols);
    const LagRange lags = default_lags(rows, cols, params.lag_fraction);
    const Correlator corr(a, lags);

    std::map<long, Candidate> seen;  // keyed by angle in millidegrees
    std::optional<Candidate> best;
    const auto evaluate = [&](double theta) {
        const long key = std::lround(theta * 1000.0);
        if (seen.contains(key)) return;
        auto lag = try_angle(corr, b, theta);
        if (!lag) return;
        Candidate cand{theta, *lag};
        seen.emplace(key, cand);
        if (!best || better(cand, *best)) best = cand;
    };

    for (double t : coarse_angles()) evaluate(t);
    if (!best) throw DataError("alignment failed: no rotation left enough valid overlap");
    const double coarse_best = best->theta;
    for (double t : fine_angles(coarse_best)) evaluate(t);

    return {best->lag.value, normalize_angle(best->theta), best->lag.k, best->lag.l};
}

PairScore similarity(const Surface& surface1, const Surface& surface2, const AlignParams& params) {
    const bool swap = surface2.id() < surface1.id();
    const Surface& first = swap ? surface2 : surface1;
    const Surface& second = swap ? surface1 : surface2;
    PairScore score;
    score.id1 = first.id();
    score.id2 = second.id();
    score.align12 = align(first, second, params);
    score.align21 = align(second, first, params);
    score.c12 = score.align12.ccf_max;
    score.c21 = score.align21.ccf_max;
    score.s_hat = std::max(score.c12, score.c21);
    return score;
}

}  // namespace ccmatch
