#include "codl/constraints.hpp"

#include <cmath>

namespace codl {

ConstraintSet capacity_bound_constraint(double bound) {
    ConstraintSet cs;
    cs.items.push_back({ConstraintKind::Inequality,
                        [bound](const Tensor& y) { return add_scalar(sum(y), -bound); },
                        "capacity<=" + std::to_string(bound)});
    return cs;
}

ConstraintSet mass_conservation_constraint(double m_total) {
    ConstraintSet cs;
    cs.items.push_back({ConstraintKind::Equality,
                        [m_total](const Tensor& y) { return add_scalar(sum(y), -m_total); },
                        "mass==" + std::to_string(m_total)});
    return cs;
}

namespace {

Tensor constraint_values(const Trajectory& traj, const Constraint& c) {
    std::vector<Tensor> vals;
    vals.reserve(traj.states.size());
    for (const Tensor& y : traj.states) {
        Tensor v = c.fn(y);
        if (v.len() != 1)
            throw ContractError("constraint '" + c.name + "' must evaluate to a scalar");
        vals.push_back(std::move(v));
    }
    return stack_rows(vals);
}

// Constant copy of a state, detaching it from any tape.
Tensor detach(const Tensor& y) {
    auto d = y.data();
    return Tensor::constant(y.dims(), {d.begin(), d.end()});
}

} // namespace

Tensor admissibility_loss(const Trajectory& traj, const ConstraintSet& cs, LossForm form) {
    if (traj.states.empty()) throw ContractError("admissibility_loss on empty trajectory");
    if (cs.items.empty()) return Tensor::scalar(0.0);
    Tensor total;
    for (const Constraint& c : cs.items) {
        Tensor v = constraint_values(traj, c);
        Tensor per = c.kind == ConstraintKind::Inequality ? relu_pos(v) : abs(v);
        if (form == LossForm::Squared) per = square(per);
        Tensor m = mean(per);
        total = total.empty() ? m : add(total, m);
    }
    return total;
}

Tensor optimization_loss(const Trajectory& traj, const TimeSeries& target) {
    const auto tt = target.target_times();
    if (tt.size() != traj.times.size())
        throw ContractError("trajectory has " + std::to_string(traj.times.size()) +
                            " steps, target has " + std::to_string(tt.size()));
    for (size_t i = 0; i < tt.size(); ++i)
        if (tt[i] != traj.times[i])
            throw ContractError("time grid mismatch at step " + std::to_string(i));
    return mse(traj.stacked(), target.target_states());
}

Tensor penalty_loss(const Trajectory& traj, const TimeSeries& target, const ConstraintSet& cs,
                    double mu) {
    if (!(mu > 0.0)) throw ConfigError("penalty parameter mu must be > 0");
    Tensor total = optimization_loss(traj, target);
    for (const Constraint& c : cs.items) {
        Tensor v = constraint_values(traj, c);
        Tensor per = c.kind == ConstraintKind::Inequality ? relu_pos(v) : abs(v);
        total = add(total, scale(sum(per), mu));
    }
    return total;
}

double violation_metric(const Trajectory& traj, const ConstraintSet& cs) {
    if (traj.states.empty() || cs.items.empty()) return 0.0;
    Trajectory plain;
    plain.times = traj.times;
    plain.states.reserve(traj.states.size());
    for (const Tensor& y : traj.states) plain.states.push_back(detach(y));
    return admissibility_loss(plain, cs, LossForm::L1).value();
}

bool is_feasible(const Trajectory& traj, const ConstraintSet& cs, double tol_feas) {
    if (tol_feas < 0.0) throw ConfigError("tol_feas must be >= 0");
    for (const Tensor& y : traj.states) {
        Tensor yc = detach(y);
        for (const Constraint& c : cs.items) {
            const double v = c.fn(yc).value();
            if (c.kind == ConstraintKind::Inequality) {
                if (v > tol_feas) return false;
            } else {
                if (std::fabs(v) > tol_feas) return false;
            }
        }
    }
    return true;
}

} // namespace codl
