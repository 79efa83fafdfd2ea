#include "codl/datasets.hpp"

#include <cmath>

#include "codl/ode.hpp"

namespace codl {

std::string dataset_name(Dataset d) { return d == Dataset::Wpg ? "wpg" : "cr"; }

Dataset dataset_from_name(const std::string& name) {
    if (name == "wpg") return Dataset::Wpg;
    if (name == "cr") return Dataset::Cr;
    throw ConfigError("unknown dataset '" + name + "' (expected wpg or cr)");
}

std::vector<double> GridSpec::grid() const {
    if (n_points < 2) throw ConfigError("grid needs at least 2 points");
    std::vector<double> g(n_points);
    const double step = (t_end - t_begin) / (double)(n_points - 1);
    for (int i = 0; i < n_points; ++i) g[i] = t_begin + i * step;
    g.back() = t_end;
    return g;
}

const std::vector<ExperimentSpec>& experiment_table() {
    static const std::vector<ExperimentSpec> table = {
        {"1.0", Dataset::Wpg, {200, 0, 300}, {200, 0, 300}},
        {"2.0", Dataset::Wpg, {200, 0, 300}, {200, 0, 400}},
        {"2.1", Dataset::Wpg, {100, 0, 300}, {200, 0, 400}},
        {"2.2", Dataset::Wpg, {300, 0, 300}, {200, 0, 400}},
        {"3.0", Dataset::Wpg, {200, 0, 300}, {300, 0, 300}},
        {"3.1", Dataset::Wpg, {100, 0, 300}, {300, 0, 300}},
        {"3.2", Dataset::Wpg, {300, 0, 300}, {300, 0, 300}},
        {"1.0", Dataset::Cr, {100, 0, 100}, {100, 0, 100}},
        {"2.0", Dataset::Cr, {100, 0, 100}, {100, 0, 200}},
        {"2.1", Dataset::Cr, {50, 0, 100}, {100, 0, 200}},
        {"2.2", Dataset::Cr, {150, 0, 100}, {100, 0, 200}},
        {"3.0", Dataset::Cr, {100, 0, 100}, {200, 0, 100}},
        {"3.1", Dataset::Cr, {50, 0, 100}, {200, 0, 100}},
        {"3.2", Dataset::Cr, {150, 0, 100}, {200, 0, 100}},
    };
    return table;
}

const ExperimentSpec& find_experiment(Dataset d, std::string_view id) {
    for (const auto& e : experiment_table())
        if (e.dataset == d && e.id == id) return e;
    throw ConfigError("unknown experiment '" + std::string(id) + "' for dataset " +
                      dataset_name(d));
}

namespace {

TimeSeries assemble(const std::vector<double>& grid, std::span<const double> y0,
                    const Trajectory& traj, std::vector<std::string> names) {
    TimeSeries ts;
    ts.times = grid;
    ts.names = std::move(names);
    const int d = (int)y0.size();
    std::vector<double> flat;
    flat.reserve((size_t)grid.size() * d);
    flat.insert(flat.end(), y0.begin(), y0.end());
    for (const Tensor& s : traj.states) {
        auto row = s.data();
        flat.insert(flat.end(), row.begin(), row.end());
    }
    ts.states = Tensor::matrix((int)grid.size(), d, std::move(flat));
    ts.validate();
    return ts;
}

} // namespace

DataBundle generate_wpg(const ExperimentSpec& spec, const WpgParams& p) {
    if (spec.dataset != Dataset::Wpg) throw ConfigError("generate_wpg on a non-WPG spec");
    RawDynamics logistic = [&p](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = p.r * y[0] * (1.0 - y[0] / p.K);
    };
    const std::array<double, 1> y0{p.P0};

    auto make = [&](const GridSpec& gs) {
        const std::vector<double> grid = gs.grid();
        Trajectory traj =
            solve_dopri5(logistic, y0, grid.front(), grid.back(), 1e-8, 1e-8,
                         std::span<const double>(grid).subspan(1));
        TimeSeries ts = assemble(grid, y0, traj, {"P"});
        for (double v : ts.states.data())
            if (v > p.bound + 1e-9)
                throw Error("generated population " + std::to_string(v) + " exceeds bound " +
                            std::to_string(p.bound));
        return ts;
    };

    DataBundle b;
    b.train = make(spec.train);
    b.test = make(spec.test);
    return b;
}

DataBundle generate_cr(const ExperimentSpec& spec, const CrParams& p) {
    if (spec.dataset != Dataset::Cr) throw ConfigError("generate_cr on a non-CR spec");
    Dynamics kinetics = [&p](double, const Tensor& y) {
        auto m = y.data();
        const double r1 = p.k1 * m[0] * m[1];
        const double r2 = p.k2 * m[2];
        return Tensor::vector({-r1, -r1 + r2, r1 - r2, r2});
    };
    const double m_total = p.y0[0] + p.y0[1] + p.y0[2] + p.y0[3];

    auto make = [&](const GridSpec& gs, double& drift) {
        const std::vector<double> grid = gs.grid();
        Trajectory traj =
            solve_euler({kinetics, Tensor::vector({p.y0.begin(), p.y0.end()}), grid});
        TimeSeries ts = assemble(grid, p.y0, traj, {"mA", "mB", "mC", "mD"});
        drift = 0.0;
        for (int i = 0; i < ts.n_points(); ++i) {
            auto row = ts.row(i);
            double s = 0.0;
            for (double v : row) s += v;
            drift = std::max(drift, std::fabs(s - m_total));
        }
        return ts;
    };

    DataBundle b;
    b.train = make(spec.train, b.mass_drift_train);
    b.test = make(spec.test, b.mass_drift_test);
    return b;
}

DataBundle generate(const ExperimentSpec& spec) {
    return spec.dataset == Dataset::Wpg ? generate_wpg(spec) : generate_cr(spec);
}

} // namespace codl
