#include "codl/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace codl {

std::string strategy_name(Strategy s) {
    switch (s) {
    case Strategy::NoStrategy: return "noStrategy";
    case Strategy::UpdatePrevious: return "updatePrevious";
    case Strategy::UpdateBest: return "updateBest";
    case Strategy::Vanilla: return "vanilla";
    case Strategy::Penalty: return "penalty";
    }
    throw ConfigError("bad strategy value");
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "noStrategy") return Strategy::NoStrategy;
    if (name == "updatePrevious") return Strategy::UpdatePrevious;
    if (name == "updateBest") return Strategy::UpdateBest;
    if (name == "vanilla") return Strategy::Vanilla;
    if (name == "penalty") return Strategy::Penalty;
    throw ConfigError("unknown strategy '" + name + "'");
}

std::string loss_form_name(LossForm f) { return f == LossForm::L1 ? "l1" : "squared"; }

LossForm loss_form_from_name(const std::string& name) {
    if (name == "l1") return LossForm::L1;
    if (name == "squared") return LossForm::Squared;
    throw ConfigError("unknown loss form '" + name + "'");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
    if (k_min < 0) throw ConfigError("k_min must be >= 0");
    if (admissibility_cap < 0) throw ConfigError("admissibility_cap must be >= 0");
    if (k_max < 1) throw ConfigError("k_max must be >= 1");
    if (curve_stride < 1) throw ConfigError("curve_stride must be >= 1");
    if (strategy == Strategy::Penalty) {
        if (!(penalty.mu0 > 0.0)) throw ConfigError("penalty mu0 must be > 0");
        if (!(penalty.growth >= 1.0)) throw ConfigError("penalty growth must be >= 1");
        if (penalty.period < 0) throw ConfigError("penalty period must be >= 0");
    }
}

// --- Adam -------------------------------------------------------------------

Adam::Adam(size_t n, AdamConfig cfg) : m_(n, 0.0), v_(n, 0.0), cfg_(cfg) {}

void Adam::step(std::span<double> theta, std::span<const double> grad, double lr) {
    if (theta.size() != m_.size() || grad.size() != m_.size())
        throw DimensionError("adam_step: parameter/gradient size mismatch");
    if (!all_finite(grad))
        throw DivergenceError("adam_step: non-finite gradient at step " + std::to_string(t_ + 1));
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, (double)t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, (double)t_);
    for (size_t i = 0; i < m_.size(); ++i) {
        const double g = grad[i];
        m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
        v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
}

void Adam::reset() {
    std::fill(m_.begin(), m_.end(), 0.0);
    std::fill(v_.begin(), v_.end(), 0.0);
    t_ = 0;
}

// --- preference-point strategies ---------------------------------------------

std::pair<std::vector<double>, double> update_previous(double p_prev, double p_trial,
                                                       const std::vector<double>& theta_prev,
                                                       const std::vector<double>& theta_trial) {
    if (!accept_trial(p_prev, p_trial)) return {theta_prev, p_prev};
    return {theta_trial, p_trial};
}

std::pair<std::vector<double>, double> update_best(double p_best, double p_trial,
                                                   const std::vector<double>& theta_best,
                                                   const std::vector<double>& theta_trial) {
    if (!accept_trial(p_best, p_trial)) return {theta_best, p_best};
    return {theta_trial, p_trial};
}

// --- trainer ------------------------------------------------------------------

TwoStageTrainer::TwoStageTrainer(DynamicsNet net, TimeSeries train, ConstraintSet cs,
                                 TrainConfig cfg)
    : net_(std::move(net)), train_(std::move(train)), cs_(std::move(cs)), cfg_(cfg) {
    cfg_.validate();
    train_.validate();
    if (net_.state_dim() != train_.dim())
        throw DimensionError("network state dim " + std::to_string(net_.state_dim()) +
                             " does not match data dim " + std::to_string(train_.dim()));
    y0_ = train_.initial_state();
}

double TwoStageTrainer::eval_loss_I(const std::vector<double>& theta) {
    tape_.reset();
    NetEval ev(&tape_, net_.spec, theta);
    Trajectory traj = solve_rk4({ev.dynamics(), y0_, train_.times});
    return admissibility_loss(traj, cs_, cfg_.loss_form).value();
}

double TwoStageTrainer::eval_grad(const std::vector<double>& theta, bool admissibility, double mu,
                                  std::vector<double>& grad, double* mse_out) {
    tape_.reset();
    NetEval ev(&tape_, net_.spec, theta);
    Trajectory traj = solve_rk4({ev.dynamics(), y0_, train_.times});
    Tensor loss;
    if (admissibility) {
        loss = admissibility_loss(traj, cs_, cfg_.loss_form);
    } else if (cfg_.strategy == Strategy::Penalty) {
        Tensor fit = optimization_loss(traj, train_);
        loss = fit;
        for (const Constraint& c : cs_.items) {
            std::vector<Tensor> vals;
            vals.reserve(traj.states.size());
            for (const Tensor& y : traj.states) vals.push_back(c.fn(y));
            Tensor v = stack_rows(vals);
            Tensor per = c.kind == ConstraintKind::Inequality ? relu_pos(v) : abs(v);
            loss = add(loss, scale(sum(per), mu));
        }
        if (mse_out) *mse_out = fit.value();
    } else {
        loss = optimization_loss(traj, train_);
    }
    if (!admissibility && mse_out && cfg_.strategy != Strategy::Penalty) *mse_out = loss.value();
    tape_.backward(loss);
    ev.collect_grad(grad);
    return loss.value();
}

std::pair<std::vector<double>, int> TwoStageTrainer::train_admissibility() {
    Adam adam(net_.params.size());
    return train_admissibility(adam);
}

std::pair<std::vector<double>, int> TwoStageTrainer::train_admissibility(Adam& adam) {
    std::vector<double> theta = net_.params;
    std::vector<double> grad;
    const long cap = cfg_.effective_admissibility_cap();
    double best = std::numeric_limits<double>::infinity();

    long k = 1;
    for (;; ++k) {
        const double loss_I = eval_grad(theta, /*admissibility=*/true, 0.0, grad, nullptr);
        if (!std::isfinite(loss_I))
            throw DivergenceError("admissibility stage: non-finite loss at iteration " +
                                  std::to_string(k));
        best = std::min(best, loss_I);
        if (loss_I < cfg_.tol && k > cfg_.k_min) break;
        if (k > cap) {
            if (loss_I >= cfg_.tol)
                throw NonConvergenceError(
                    "admissibility stage hit the hard cap of " + std::to_string(cap) +
                        " iterations with loss " + std::to_string(loss_I) + " >= tol; best seen " +
                        std::to_string(best),
                    best);
            break;
        }
        if (!all_finite(grad))
            throw DivergenceError("admissibility stage: non-finite gradient at iteration " +
                                  std::to_string(k));
        adam.step(theta, grad, cfg_.lr);
    }
    return {std::move(theta), (int)(k - 1)};
}

TrainTrace TwoStageTrainer::train_optimization(std::vector<double> theta0, Adam* carried) {
    TrainTrace trace;
    std::vector<double> theta = std::move(theta0);
    std::vector<double> grad;
    Adam fresh(theta.size());
    Adam& adam = carried ? *carried : fresh;

    const bool preference = cfg_.strategy == Strategy::UpdatePrevious ||
                            cfg_.strategy == Strategy::UpdateBest;
    // P_0: admissibility of the starting point, the first comparison point.
    double p_ref = eval_loss_I(theta);
    trace.p_stage2_start = p_ref;
    double p_current = p_ref;

    double mu = cfg_.penalty.mu0;
    const int mu_period =
        cfg_.penalty.period > 0 ? cfg_.penalty.period : std::max(1, cfg_.k_max / 5);

    std::vector<double> theta_best;
    if (cfg_.strategy == Strategy::UpdateBest) theta_best = theta;

    for (int k = 1; k <= cfg_.k_max; ++k) {
        double mse_value = 0.0;
        const double loss =
            eval_grad(theta, /*admissibility=*/false, mu, grad, &mse_value);
        if (!std::isfinite(loss))
            throw DivergenceError("optimization stage: non-finite loss at iteration " +
                                  std::to_string(k));
        if (!all_finite(grad))
            throw DivergenceError("optimization stage: non-finite gradient at iteration " +
                                  std::to_string(k));

        std::vector<double> theta_trial = theta;
        adam.step(theta_trial, grad, cfg_.lr);

        const bool sample = k % cfg_.curve_stride == 0;
        const bool need_p = preference || sample || k == cfg_.k_max;
        const double p_trial =
            need_p ? eval_loss_I(theta_trial) : std::numeric_limits<double>::quiet_NaN();

        switch (cfg_.strategy) {
        case Strategy::Vanilla:
        case Strategy::NoStrategy:
        case Strategy::Penalty:
            theta = std::move(theta_trial);
            p_current = p_trial;
            break;
        case Strategy::UpdatePrevious: {
            if (accept_trial(p_ref, p_trial)) {
                theta = std::move(theta_trial);
                p_ref = p_trial;
            } else if (cfg_.adam_reset_on_reject) {
                adam.reset();
            }
            p_current = p_ref;
            break;
        }
        case Strategy::UpdateBest: {
            if (accept_trial(p_ref, p_trial)) {
                theta_best = theta_trial;
                theta = std::move(theta_trial);
                p_ref = p_trial;
            } else {
                theta = theta_best;
                if (cfg_.adam_reset_on_reject) adam.reset();
            }
            p_current = p_ref;
            break;
        }
        }

        if (sample) trace.samples.push_back({k, mse_value, p_current});

        if (cfg_.strategy == Strategy::Penalty && k % mu_period == 0) mu *= cfg_.penalty.growth;
    }

    trace.p_final = p_current;
    trace.theta = std::move(theta);
    return trace;
}

TrainTrace TwoStageTrainer::run() {
    switch (cfg_.strategy) {
    case Strategy::Vanilla:
    case Strategy::Penalty:
        return train_optimization(net_.params);
    case Strategy::NoStrategy:
    case Strategy::UpdatePrevious:
    case Strategy::UpdateBest: {
        Adam adam(net_.params.size());
        auto [theta0, iters] = train_admissibility(adam);
        TrainTrace trace =
            train_optimization(std::move(theta0), cfg_.adam_carry_over ? &adam : nullptr);
        trace.admissibility_iterations = iters;
        return trace;
    }
    }
    throw ConfigError("bad strategy value");
}

void write_trace_csv(const TrainTrace& trace, const std::string& path) {
    std::string body = "iter,loss_II,loss_I\n";
    char buf[96];
    for (const TraceSample& s : trace.samples) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", s.iter, s.loss_II, s.loss_I);
        body += buf;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << body;
    if (!out) throw Error("write failed: " + path);
}

} // namespace codl
