#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codl/constraints.hpp"
#include "codl/net.hpp"
#include "codl/timeseries.hpp"

namespace codl {

enum class Strategy : uint8_t {
    NoStrategy,     // two stages, every trial accepted
    UpdatePrevious, // reject trials whose admissibility worsens vs the previous point
    UpdateBest,     // reject trials whose admissibility worsens vs the incumbent
    Vanilla,        // optimization stage only
    Penalty,        // single stage minimizing the L1 exact-penalty function
};

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);
std::string loss_form_name(LossForm f);
LossForm loss_form_from_name(const std::string& name);

struct PenaltySchedule {
    double mu0 = 1.0;
    double growth = 10.0;
    int period = 0; // iterations between mu *= growth; 0 -> k_max/5
};

struct TrainConfig {
    double lr = 1e-5;
    double tol = 1e-4;
    int k_min = 20;
    int k_max = 10000;
    Strategy strategy = Strategy::UpdatePrevious;
    LossForm loss_form = LossForm::Squared;
    uint64_t seed = 1;
    int curve_stride = 20;
    PenaltySchedule penalty;
    // The pseudocode never resets optimizer state on rejection, and it runs
    // a single optimizer across both stages. Carrying the stage-one moments
    // into stage two matters: warm second moments damp the parameter
    // directions stage one just flattened, which otherwise pick up
    // full-size steps again and reinflate the violation. Both knobs exist
    // for ablation.
    bool adam_reset_on_reject = false;
    bool adam_carry_over = true;
    // Admissibility-stage iteration guard; 0 means the default 10*k_max.
    // Reduced-scale runs (small k_max) with tight tolerances need the cap
    // decoupled from the optimization budget.
    long admissibility_cap = 0;

    long effective_admissibility_cap() const {
        return admissibility_cap > 0 ? admissibility_cap : 10L * k_max;
    }

    void validate() const;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction; deterministic.
class Adam {
  public:
    explicit Adam(size_t n, AdamConfig cfg = {});
    void step(std::span<double> theta, std::span<const double> grad, double lr);
    void reset();
    long steps() const { return t_; }

  private:
    std::vector<double> m_, v_;
    long t_ = 0;
    AdamConfig cfg_;
};

struct TraceSample {
    int iter;
    double loss_II;
    double loss_I;
};

struct TrainTrace {
    std::vector<TraceSample> samples;
    int admissibility_iterations = 0;
    std::vector<double> theta;    // final parameters
    double p_stage2_start = 0.0;  // L_I at the optimization-stage start
    double p_final = 0.0;         // L_I at the final parameters
};

// Header `iter,loss_II,loss_I`, one row per sample, 17 significant digits.
void write_trace_csv(const TrainTrace& trace, const std::string& path);

// Preference-point acceptance: a trial is rejected iff it is strictly worse.
inline bool accept_trial(double p_ref, double p_trial) { return !(p_trial > p_ref); }

// Returns (theta_k, P_k): the previous point when the trial worsens
// admissibility, otherwise the trial.
std::pair<std::vector<double>, double> update_previous(double p_prev, double p_trial,
                                                       const std::vector<double>& theta_prev,
                                                       const std::vector<double>& theta_trial);

// Returns (theta_k, P_best): the incumbent when the trial worsens
// admissibility, otherwise the trial, which also becomes the new incumbent.
std::pair<std::vector<double>, double> update_best(double p_best, double p_trial,
                                                   const std::vector<double>& theta_best,
                                                   const std::vector<double>& theta_trial);

// Two-stage training on one time series: an admissibility stage driving the
// constraint-violation loss under the feasibility tolerance, then an
// optimization stage minimizing the data-fit loss with a preference-point
// strategy. Forward passes solve the IVP on the training grid with
// fixed-step RK4, differentiated through the solver steps.
class TwoStageTrainer {
  public:
    TwoStageTrainer(DynamicsNet net, TimeSeries train, ConstraintSet cs, TrainConfig cfg);

    // Full run per the configured strategy (stage one included when the
    // strategy has one).
    TrainTrace run();

    // Stage one from the net's initial parameters: loops while the
    // admissibility loss is at least tol or fewer than k_min iterations have
    // run; hard-capped at 10*k_max iterations. Returns (theta, steps taken).
    std::pair<std::vector<double>, int> train_admissibility();
    std::pair<std::vector<double>, int> train_admissibility(Adam& adam);

    // Stage two (also the vanilla/penalty single stage) from theta0.
    TrainTrace train_optimization(std::vector<double> theta0, Adam* carried = nullptr);

  private:
    double eval_loss_I(const std::vector<double>& theta);
    // Forward + backward; returns the minimized loss, fills grad; for the
    // penalty strategy *mse_out gets the pure data-fit component.
    double eval_grad(const std::vector<double>& theta, bool admissibility, double mu,
                     std::vector<double>& grad, double* mse_out);

    DynamicsNet net_;
    TimeSeries train_;
    ConstraintSet cs_;
    TrainConfig cfg_;
    Tape tape_;
    Tensor y0_;
};

} // namespace codl
