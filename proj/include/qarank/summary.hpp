#pragma once

#include <vector>

namespace qarank {

struct Quartiles {
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
};

double mean(const std::vector<double>& values);

/// Tukey hinges: Q1 and Q3 are the medians of the lower and upper halves, where the
/// overall median belongs to both halves when the count is odd. Empty input gives zeros.
Quartiles tukey_hinges(std::vector<double> values);

}  // namespace qarank
