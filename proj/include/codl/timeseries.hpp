#pragma once

#include <string>
#include <vector>

#include "codl/tensor.hpp"

namespace codl {

// Sampled multivariate series: times plus one state row per time. Row 0 is
// the initial condition; rows 1.. are the prediction targets.
struct TimeSeries {
    std::vector<double> times;
    Tensor states; // constant [N x d]
    std::vector<std::string> names; // column labels after the leading "t"

    int n_points() const { return (int)times.size(); }
    int dim() const { return states.dims().cols; }

    std::span<const double> row(int i) const;
    Tensor initial_state() const;            // [d]
    Tensor target_states() const;            // [(N-1) x d]
    std::vector<double> target_times() const { return {times.begin() + 1, times.end()}; }

    void validate() const;
};

// Comma-separated, `.` decimal, header row, LF endings; values rendered
// with 17 significant digits so the round-trip is exact.
void write_csv(const TimeSeries& ts, const std::string& path);
TimeSeries read_csv(const std::string& path);

} // namespace codl
