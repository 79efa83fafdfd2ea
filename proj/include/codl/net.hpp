#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "codl/ode.hpp"
#include "codl/tensor.hpp"

namespace codl {

struct LayerSpec {
    enum class Kind : uint8_t { Linear, Tanh, Elu };
    Kind kind = Kind::Linear;
    int in = 0, out = 0; // Linear only

    static LayerSpec linear(int in, int out) { return {Kind::Linear, in, out}; }
    static LayerSpec tanh() { return {Kind::Tanh, 0, 0}; }
    static LayerSpec elu() { return {Kind::Elu, 0, 0}; }
    bool operator==(const LayerSpec&) const = default;
};

// MLP defining the ODE right-hand side. The field is autonomous: the input
// width equals the state dimension, so time never feeds the network.
// params holds, per linear layer, W row-major [out x in] followed by b [out].
struct DynamicsNet {
    std::vector<LayerSpec> spec;
    std::vector<double> params;
    uint64_t rng_seed = 0;

    int state_dim() const;
};

int param_count(const std::vector<LayerSpec>& spec);
uint64_t spec_hash(const std::vector<LayerSpec>& spec);
void validate_spec(const std::vector<LayerSpec>& spec);

// Seeded init: each linear layer drawn uniformly from
// [-1/sqrt(fan_in), +1/sqrt(fan_in)]. The uniform mapping is pinned (not
// std::uniform_real_distribution) so identical seeds give bit-identical
// parameters across library versions.
DynamicsNet build_net(std::vector<LayerSpec> spec, uint64_t seed);
DynamicsNet build_wpg_net(uint64_t seed); // 1 -> lin 50 -> tanh -> lin 50 -> elu -> lin 1
DynamicsNet build_cr_net(uint64_t seed);  // 4 -> lin 50 -> tanh -> lin 64 -> elu -> lin 50 -> tanh -> lin 4

// Binds parameters to a tape once (leaves reused across every dynamics
// evaluation of one forward pass) or, with tape == nullptr, as constants.
class NetEval {
  public:
    NetEval(Tape* tape, const DynamicsNet& net);
    NetEval(Tape* tape, const std::vector<LayerSpec>& spec, std::span<const double> theta);

    Tensor operator()(double t, const Tensor& y) const;
    Dynamics dynamics() const;
    // Flat gradient w.r.t. params, valid after the tape's backward().
    void collect_grad(std::vector<double>& grad) const;

  private:
    struct Bound {
        Tensor w, b;
        int in, out;
    };
    std::vector<LayerSpec> spec_;
    std::vector<Bound> linear_;
    int n_params_ = 0;
    bool on_tape_ = false;
};

Tensor net_forward(const DynamicsNet& net, double t, const Tensor& y);

// Self-describing binary container: magic "CODL", version byte, spec hash,
// layer table, seed, then little-endian 64-bit parameter floats.
void save_params(const DynamicsNet& net, const std::string& path);
DynamicsNet load_params(const std::string& path);

} // namespace codl
