#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "anocast/common.hpp"

namespace anocast {

// ---------------------------------------------------------------------------
// Stochastic growth-relaxation system. The primary state P follows logistic
// excitation with constant forcing up to t_ramp, then exponential relaxation
// back to the baseline p0. Rectangular random pulses ride on the excitation
// phase whenever the previous step's |dP/dt| crosses grad_threshold.
// ---------------------------------------------------------------------------

struct SimConfig {
    double p_coeff = 1.2;     // logistic growth rate
    double p_sat = 2.0;       // primary saturation level
    double t_coeff = 0.8;     // forcing gain
    double v_amp = 1.0;       // forcing amplitude
    double tau = 4.0;         // forcing time constant
    double w_width = 2.0;     // forcing width
    double alpha_relax = 1.5; // relaxation rate
    double p0 = 0.18;         // baseline state
    double t_ramp = 190.0;    // excitation-phase end time
    double t_end = 200.0;     // total duration
    double dt = 0.002;        // integration step
    double t_sat = 1.2;       // auxiliary saturation level
    double aux_gain = 0.8;    // auxiliary coupling gain
    double aux_rate = 0.35;   // auxiliary lag rate
    double grad_threshold = 0.05;
    std::pair<double, double> pert_amp_range{0.35, 0.95};
    std::pair<int, int> pert_len_range{5, 12}; // steps
    double pert_prob = 0.012;                  // per-armed-step trigger probability
    std::uint64_t seed = 42;

    // constant P_RF level applied during excitation
    double forcing_level() const { return t_coeff * v_amp / (w_width * tau); }

    void validate() const; // throws ConfigError
};

struct PerturbEvent {
    std::size_t start;
    std::size_t end; // inclusive step index
    double amplitude;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<double> primary;
    std::vector<double> auxiliary;
    std::vector<double> forcing;
    std::vector<PerturbEvent> perturbation_log;

    std::size_t size() const { return times.size(); }
};

// dP/dt during excitation: logistic growth plus forcing plus pulse value.
double excitation_rate(double p, double forcing, double eta, const SimConfig& cfg);

// dP/dt during relaxation: exponential decay toward the baseline.
double relaxation_rate(double p, const SimConfig& cfg);

// RNG stream tag for the pulse process, fixed so that replays can derive
// the identical stream from the config seed.
inline constexpr std::uint64_t kPulseStream = 1;

// Rectangular pulse source. One pulse may be active at a time; a new pulse
// arms only when |prev_rate| >= grad_threshold. Draw order per trigger:
// uniform01 (trigger), amplitude, length.
class PerturbationProcess {
public:
    PerturbationProcess(const SimConfig& cfg, std::uint64_t stream_seed);

    // eta for step `step_index`, given the previous step's dP/dt
    double step(double prev_rate, std::size_t step_index);

    // truncates an open pulse so the log covers exactly the emitted steps
    void close();

    const std::vector<PerturbEvent>& log() const { return log_; }

private:
    SimConfig cfg_;
    Rng rng_;
    int remaining_ = 0;
    double amp_ = 0.0;
    std::size_t last_emit_ = 0;
    std::vector<PerturbEvent> log_;
};

// Explicit fixed-step integration of the full system; deterministic in seed.
Trajectory simulate(const SimConfig& cfg);

} // namespace anocast
