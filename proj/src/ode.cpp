#include "codl/ode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace codl {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
// 5th-order minus embedded 4th-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output weights.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kShrink = 0.2;
constexpr double kGrow = 10.0;

Tensor eval_dynamics(const IvpProblem& p, double t, const Tensor& y) {
    Tensor dy = p.dynamics(t, y);
    if (!(dy.dims() == y.dims()))
        throw DimensionError("dynamics output " + dy.dims().str() + " does not match state " +
                             y.dims().str());
    return dy;
}

void check_state(const Tensor& y, size_t step, double t) {
    if (!all_finite(y.data()))
        throw DivergenceError("non-finite state at step " + std::to_string(step) +
                              " (t=" + std::to_string(t) + ")");
}

} // namespace

void IvpProblem::validate() const {
    if (!dynamics) throw ContractError("IvpProblem: missing dynamics");
    if (t_grid.size() < 2) throw ContractError("IvpProblem: time grid needs at least 2 points");
    for (size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1]))
            throw ContractError("IvpProblem: time grid not strictly increasing at index " +
                                std::to_string(i));
    if (y0.dims().rank != 1) throw DimensionError("IvpProblem: y0 must be a vector");
}

Tensor Trajectory::stacked() const { return stack_rows(states); }

Trajectory solve_euler(const IvpProblem& p) {
    p.validate();
    Trajectory out;
    out.times.assign(p.t_grid.begin() + 1, p.t_grid.end());
    out.states.reserve(out.times.size());
    Tensor y = p.y0;
    for (size_t n = 0; n + 1 < p.t_grid.size(); ++n) {
        const double h = p.t_grid[n + 1] - p.t_grid[n];
        Tensor f = eval_dynamics(p, p.t_grid[n], y);
        y = axpy(y, f, h);
        check_state(y, n + 1, p.t_grid[n + 1]);
        out.states.push_back(y);
    }
    return out;
}

Trajectory solve_rk4(const IvpProblem& p) {
    p.validate();
    Trajectory out;
    out.times.assign(p.t_grid.begin() + 1, p.t_grid.end());
    out.states.reserve(out.times.size());
    Tensor y = p.y0;
    for (size_t n = 0; n + 1 < p.t_grid.size(); ++n) {
        const double t = p.t_grid[n];
        const double h = p.t_grid[n + 1] - t;
        Tensor k1 = eval_dynamics(p, t, y);
        Tensor k2 = eval_dynamics(p, t + h / 2, axpy(y, k1, h / 2));
        Tensor k3 = eval_dynamics(p, t + h / 2, axpy(y, k2, h / 2));
        Tensor k4 = eval_dynamics(p, t + h, axpy(y, k3, h));
        y = axpy(axpy(axpy(axpy(y, k1, h / 6), k2, h / 3), k3, h / 3), k4, h / 6);
        check_state(y, n + 1, p.t_grid[n + 1]);
        out.states.push_back(y);
    }
    return out;
}

Trajectory solve_dopri5(const RawDynamics& f, std::span<const double> y0, double t0, double t1,
                        double rtol, double atol, std::span<const double> output_grid,
                        Dopri5Stats* stats) {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw ContractError("dopri5: rtol and atol must be > 0");
    if (!(t1 > t0)) throw ContractError("dopri5: empty time span");
    const size_t d = y0.size();
    for (size_t i = 0; i < output_grid.size(); ++i) {
        if (output_grid[i] <= t0 || output_grid[i] > t1 + 1e-12 * (t1 - t0))
            throw ContractError("dopri5: output point outside span at index " + std::to_string(i));
        if (i > 0 && !(output_grid[i] > output_grid[i - 1]))
            throw ContractError("dopri5: output grid not increasing");
    }

    const double span = t1 - t0;
    std::vector<double> y(y0.begin(), y0.end());
    std::vector<double> k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d), ytmp(d), ynew(d);
    std::vector<double> rc1(d), rc2(d), rc3(d), rc4(d), rc5(d);

    Trajectory out;
    out.times.assign(output_grid.begin(), output_grid.end());
    out.states.reserve(output_grid.size());
    size_t gi = 0;

    Dopri5Stats local;
    Dopri5Stats& st = stats ? *stats : local;

    auto fe = [&](double t, const std::vector<double>& yy, std::vector<double>& dy) {
        f(t, yy, dy);
        ++st.evals;
    };

    double t = t0;
    double h = span / 100.0;
    fe(t, y, k1); // FSAL seed

    while (t < t1 - 1e-14 * span) {
        if (h < 1e-12 * span)
            throw StiffnessError("dopri5: step size underflow at t=" + std::to_string(t));
        if (t + h > t1) h = t1 - t;

        for (size_t i = 0; i < d; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        fe(t + c2 * h, ytmp, k2);
        for (size_t i = 0; i < d; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        fe(t + c3 * h, ytmp, k3);
        for (size_t i = 0; i < d; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        fe(t + c4 * h, ytmp, k4);
        for (size_t i = 0; i < d; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        fe(t + c5 * h, ytmp, k5);
        for (size_t i = 0; i < d; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                  a65 * k5[i]);
        fe(t + h, ytmp, k6);
        for (size_t i = 0; i < d; ++i)
            ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        fe(t + h, ynew, k7);

        double err = 0.0;
        for (size_t i = 0; i < d; ++i) {
            const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                   e6 * k6[i] + e7 * k7[i]);
            const double sk = atol + rtol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
            err += (ei / sk) * (ei / sk);
        }
        err = std::sqrt(err / (double)d);

        if (!std::isfinite(err))
            throw DivergenceError("dopri5: non-finite state at t=" + std::to_string(t));

        const double factor =
            std::clamp(kSafety * std::pow(err, -0.2), kShrink, kGrow);

        if (err <= 1.0) {
            ++st.accepted;
            // Dense-output coefficients over [t, t+h].
            for (size_t i = 0; i < d; ++i) {
                const double ydiff = ynew[i] - y[i];
                const double bspl = h * k1[i] - ydiff;
                rc1[i] = y[i];
                rc2[i] = ydiff;
                rc3[i] = bspl;
                rc4[i] = ydiff - h * k7[i] - bspl;
                rc5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                              d7 * k7[i]);
            }
            const double tnext = t + h;
            while (gi < output_grid.size() && output_grid[gi] <= tnext + 1e-14 * span) {
                const double theta = (output_grid[gi] - t) / h;
                std::vector<double> row(d);
                for (size_t i = 0; i < d; ++i) {
                    const double th1 = 1.0 - theta;
                    row[i] = rc1[i] +
                             theta * (rc2[i] + th1 * (rc3[i] + theta * (rc4[i] + th1 * rc5[i])));
                }
                out.states.push_back(Tensor::vector(std::move(row)));
                ++gi;
            }
            t = tnext;
            std::swap(y, ynew);
            std::swap(k1, k7); // FSAL
            h *= factor;
        } else {
            ++st.rejected;
            h *= std::min(factor, 1.0);
        }
    }

    // Grid points at t1 that rounding left behind land on the final state.
    while (gi < output_grid.size()) {
        out.states.push_back(Tensor::vector(std::vector<double>(y.begin(), y.end())));
        ++gi;
    }
    return out;
}

} // namespace codl
