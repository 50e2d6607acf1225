#include <cmath>

#include "ltube/analysis.hpp"
#include "ltube/errors.hpp"

namespace ltube {

std::vector<double> series_autocorrelation(const std::vector<double>& series, const std::vector<std::int64_t>& lags,
                                           bool centered) {
    const std::size_t n = series.size();
    std::vector<double> out(lags.size(), 0.0);
    if (n == 0) return out;
    double mean = 0;
    if (centered) {
        for (double x : series) mean += x;
        mean /= static_cast<double>(n);
    }
    double c0 = 0;
    for (double x : series) c0 += (x - mean) * (x - mean);
    c0 /= static_cast<double>(n);
    if (!(c0 > 0)) return out;
    for (std::size_t k = 0; k < lags.size(); ++k) {
        const std::int64_t lag = lags[k];
        if (lag < 0 || static_cast<std::size_t>(lag) >= n) {
            out[k] = std::nan("");
            continue;
        }
        const std::size_t l = static_cast<std::size_t>(lag);
        double c = 0;
        for (std::size_t i = 0; i + l < n; ++i) c += (series[i] - mean) * (series[i + l] - mean);
        out[k] = c / static_cast<double>(n - l) / c0;
    }
    return out;
}

CorrelationResult autocorrelation(const QuenchedTube& tube, const SectionSpec& D, const Observable& f,
                                  const std::vector<std::int64_t>& lags, std::int64_t n_returns, Rng& rng,
                                  bool centered, bool any_cell, int batches) {
    if (D.kind != SectionKind::D) throw InvalidSection("autocorrelation needs a D section");
    if (batches < 2) throw ConfigError("autocorrelation needs at least two batches");
    constexpr std::int64_t kBudget = 10'000'000;
    std::vector<double> series;
    series.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n_returns, 0)));
    SectionPoint p = sample_measure(tube, D, 1, rng).front();
    while (static_cast<std::int64_t>(series.size()) < n_returns) {
        std::optional<SectionReturn> r;
        try {
            r = first_return_D(tube, D, p, kBudget, any_cell);
        } catch (const SingularOrbit&) {
        }
        if (!r) {
            p = sample_measure(tube, D, 1, rng).front();
            continue;
        }
        p = r->point;
        series.push_back(f(p));
    }

    CorrelationResult out;
    out.lags = lags;
    out.returns = static_cast<std::int64_t>(series.size());
    out.values = series_autocorrelation(series, lags, centered);
    out.errors.assign(lags.size(), 0.0);
    const std::size_t len = series.size() / static_cast<std::size_t>(batches);
    if (len < 2) return out;
    std::vector<double> sum(lags.size(), 0.0), sum2(lags.size(), 0.0);
    for (int b = 0; b < batches; ++b) {
        const auto first = series.begin() + static_cast<std::ptrdiff_t>(b * len);
        const std::vector<double> part(first, first + static_cast<std::ptrdiff_t>(len));
        const std::vector<double> c = series_autocorrelation(part, lags, centered);
        for (std::size_t k = 0; k < lags.size(); ++k) {
            sum[k] += c[k];
            sum2[k] += c[k] * c[k];
        }
    }
    const double B = batches;
    for (std::size_t k = 0; k < lags.size(); ++k) {
        const double m = sum[k] / B;
        const double var = std::max(0.0, (sum2[k] / B - m * m) * B / (B - 1));
        out.errors[k] = std::sqrt(var / B);
    }
    return out;
}

}  // namespace ltube
