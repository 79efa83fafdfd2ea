#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "codl/timeseries.hpp"

namespace codl {

enum class Dataset : uint8_t { Wpg, Cr };

std::string dataset_name(Dataset d);
Dataset dataset_from_name(const std::string& name);

// Verhulst logistic growth, population in billions.
struct WpgParams {
    double r = 0.026;
    double K = 12.0;
    double P0 = 2.518629;
    double bound = 12.0; // capacity constraint on predictions
};

// Two-step reaction A+B -> C, C -> B+D; masses in grams.
struct CrParams {
    double k1 = 0.1;
    double k2 = 0.05;
    std::array<double, 4> y0{1.0, 1.0, 0.0, 0.0};
};

struct GridSpec {
    int n_points;
    double t_begin, t_end;

    // Endpoints included: t_i = t_begin + i*(t_end - t_begin)/(n_points - 1).
    std::vector<double> grid() const;
};

struct ExperimentSpec {
    std::string id; // 1.0, 2.0, 2.1, 2.2, 3.0, 3.1, 3.2
    Dataset dataset;
    GridSpec train, test;
};

// All 14 specs (7 per dataset).
const std::vector<ExperimentSpec>& experiment_table();
const ExperimentSpec& find_experiment(Dataset d, std::string_view id);

struct DataBundle {
    TimeSeries train, test;
    // Measured max |sum(m) - m_total| over each generated series (CR only;
    // the reaction equations do not conserve mass exactly, the equality
    // constraint uses m_total at t_0 regardless).
    double mass_drift_train = 0.0;
    double mass_drift_test = 0.0;
};

// Logistic IVP solved with adaptive Dormand-Prince (rtol = atol = 1e-8),
// sampled on the spec grids. Generated populations never exceed the bound.
DataBundle generate_wpg(const ExperimentSpec& spec, const WpgParams& params = {});

// Kinetics solved with fixed-step Euler independently on each grid; the
// grid-dependent discretization error is part of the dataset's definition.
DataBundle generate_cr(const ExperimentSpec& spec, const CrParams& params = {});

DataBundle generate(const ExperimentSpec& spec);

} // namespace codl
