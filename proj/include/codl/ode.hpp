#pragma once

#include <functional>
#include <span>
#include <vector>

#include "codl/tensor.hpp"

namespace codl {

// Right-hand side f(t, y) -> dy/dt, evaluated on tensors so gradients flow
// through the fixed-step solvers when y / the dynamics are tape-attached.
using Dynamics = std::function<Tensor(double t, const Tensor& y)>;

struct IvpProblem {
    Dynamics dynamics;
    Tensor y0;                   // [d]
    std::vector<double> t_grid;  // strictly increasing, length >= 2

    void validate() const;
};

// Solution estimates at t_grid[1..]; the initial point is not repeated.
struct Trajectory {
    std::vector<double> times;
    std::vector<Tensor> states; // one [d] tensor per time
    Tensor stacked() const;     // [N x d]
};

Trajectory solve_euler(const IvpProblem& p);
Trajectory solve_rk4(const IvpProblem& p);

// Plain-array dynamics for the adaptive solver (data generation only, no
// gradient flow).
using RawDynamics = std::function<void(double t, std::span<const double> y, std::span<double> dy)>;

struct Dopri5Stats {
    long accepted = 0;
    long rejected = 0;
    long evals = 0;
};

// Dormand-Prince 5(4) with error-based step control (safety 0.9, factor
// clamp [0.2, 10], initial step span/100) and quartic dense output sampled
// at output_grid. output_grid must be increasing and inside (t0, t1].
Trajectory solve_dopri5(const RawDynamics& f, std::span<const double> y0, double t0, double t1,
                        double rtol, double atol, std::span<const double> output_grid,
                        Dopri5Stats* stats = nullptr);

} // namespace codl
