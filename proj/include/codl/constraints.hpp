#pragma once

#include <functional>
#include <string>
#include <vector>

#include "codl/ode.hpp"
#include "codl/tensor.hpp"
#include "codl/timeseries.hpp"

namespace codl {

enum class ConstraintKind : uint8_t {
    Inequality, // c(y) <= 0 feasible
    Equality,   // c(y) == 0 feasible
};

// Scalar-valued per-time-step constraint on a predicted state.
struct Constraint {
    ConstraintKind kind;
    std::function<Tensor(const Tensor& y)> fn;
    std::string name;
};

struct ConstraintSet {
    std::vector<Constraint> items;
};

// sum(y) - bound <= 0 (for 1-d states this is the plain upper bound).
ConstraintSet capacity_bound_constraint(double bound);
// sum(y) - m_total == 0
ConstraintSet mass_conservation_constraint(double m_total);

enum class LossForm : uint8_t {
    L1,      // mean |c| (equality), mean [c]+ (inequality)
    Squared, // mean c^2, mean ([c]+)^2
};

// Per-constraint average violation over the trajectory, summed across
// constraints. Zero in L1 form exactly when the trajectory is feasible at
// tolerance 0. Differentiable when the trajectory is tape-attached.
Tensor admissibility_loss(const Trajectory& traj, const ConstraintSet& cs, LossForm form);

// MSE against target rows 1..; time grids must agree exactly.
Tensor optimization_loss(const Trajectory& traj, const TimeSeries& target);

// MSE plus mu times the total (summed over steps) violation: hinge terms
// for inequalities, absolute residuals for equalities.
Tensor penalty_loss(const Trajectory& traj, const TimeSeries& target, const ConstraintSet& cs,
                    double mu);

// L1-form average violation evaluated without gradient recording.
double violation_metric(const Trajectory& traj, const ConstraintSet& cs);

// Every constraint within tol_feas at every step.
bool is_feasible(const Trajectory& traj, const ConstraintSet& cs, double tol_feas);

} // namespace codl
