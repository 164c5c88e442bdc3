#include "qarank/summary.hpp"

#include <algorithm>
#include <numeric>

namespace qarank {

namespace {

double median_of(const std::vector<double>& sorted, std::size_t lo, std::size_t hi)
{
    // median of sorted[lo, hi)
    const std::size_t n = hi - lo;
    const std::size_t mid = lo + n / 2;
    if (n % 2 == 1) return sorted[mid];
    return (sorted[mid - 1] + sorted[mid]) / 2.0;
}

}  // namespace

double mean(const std::vector<double>& values)
{
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

Quartiles tukey_hinges(std::vector<double> values)
{
    Quartiles q;
    const std::size_t n = values.size();
    if (n == 0) return q;
    std::sort(values.begin(), values.end());
    q.median = median_of(values, 0, n);
    const std::size_t half = (n + 1) / 2;
    q.q1 = median_of(values, 0, half);
    q.q3 = median_of(values, n - half, n);
    return q;
}

}  // namespace qarank
