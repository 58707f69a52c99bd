#include "anocast/sim.hpp"

#include <cmath>
#include <string>

namespace anocast {

namespace {

// floor with a guard against representation error in t/dt ratios
std::size_t step_count(double span, double dt) {
    return static_cast<std::size_t>(std::floor(span / dt + 1e-9));
}

} // namespace

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(t_ramp > 0.0) || !(t_end > t_ramp))
        throw ConfigError("need t_end > t_ramp > 0");
    if (!(p0 > 0.0) || !(p_sat > p0))
        throw ConfigError("need p_sat > p0 > 0");
    if (!(alpha_relax > 0.0)) throw ConfigError("alpha_relax must be positive");
    if (!(t_sat > 0.0)) throw ConfigError("t_sat must be positive");
    if (!(tau > 0.0) || !(w_width > 0.0))
        throw ConfigError("tau and w_width must be positive");
    if (pert_amp_range.first > pert_amp_range.second)
        throw ConfigError("pert_amp_range must be ordered");
    if (pert_len_range.first < 1 || pert_len_range.first > pert_len_range.second)
        throw ConfigError("pert_len_range must be ordered and at least 1 step");
    if (pert_prob < 0.0 || pert_prob > 1.0)
        throw ConfigError("pert_prob must lie in [0, 1]");
}

double excitation_rate(double p, double forcing, double eta, const SimConfig& cfg) {
    if (!std::isfinite(p) || !std::isfinite(forcing) || !std::isfinite(eta))
        throw StateError("excitation_rate: non-finite input");
    return cfg.p_coeff * p * (1.0 - p / cfg.p_sat) + forcing + eta;
}

double relaxation_rate(double p, const SimConfig& cfg) {
    if (!std::isfinite(p)) throw StateError("relaxation_rate: non-finite input");
    return -cfg.alpha_relax * (p - cfg.p0);
}

PerturbationProcess::PerturbationProcess(const SimConfig& cfg, std::uint64_t stream_seed)
    : cfg_(cfg), rng_(stream_seed) {}

double PerturbationProcess::step(double prev_rate, std::size_t step_index) {
    if (remaining_ > 0) {
        --remaining_;
        last_emit_ = step_index;
        return amp_;
    }
    if (std::abs(prev_rate) >= cfg_.grad_threshold) {
        if (rng_.uniform01() < cfg_.pert_prob) {
            amp_ = rng_.uniform(cfg_.pert_amp_range.first, cfg_.pert_amp_range.second);
            const int len = rng_.uniform_int(cfg_.pert_len_range.first, cfg_.pert_len_range.second);
            log_.push_back({step_index, step_index + static_cast<std::size_t>(len) - 1, amp_});
            remaining_ = len - 1;
            last_emit_ = step_index;
            return amp_;
        }
    }
    return 0.0;
}

void PerturbationProcess::close() {
    if (remaining_ > 0 && !log_.empty()) {
        log_.back().end = last_emit_;
        remaining_ = 0;
    }
}

Trajectory simulate(const SimConfig& cfg) {
    cfg.validate();
    const std::size_t n = step_count(cfg.t_end, cfg.dt) + 1;
    const std::size_t last_excited = step_count(cfg.t_ramp, cfg.dt);
    const double forcing = cfg.forcing_level();

    Trajectory tr;
    tr.times.resize(n);
    tr.primary.resize(n);
    tr.auxiliary.resize(n);
    tr.forcing.resize(n);

    PerturbationProcess pulses(cfg, Rng::derive(cfg.seed, kPulseStream));

    double p = cfg.p0;
    double aux = 0.0;
    double prev_rate = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(p) || !std::isfinite(aux))
            throw DivergenceError("non-finite state at step " + std::to_string(i));
        const bool excited = i <= last_excited;
        tr.times[i] = static_cast<double>(i) * cfg.dt;
        tr.primary[i] = p;
        tr.auxiliary[i] = aux;
        tr.forcing[i] = excited ? forcing : 0.0;
        if (i + 1 == n) break;

        double rate;
        if (excited) {
            const double eta = pulses.step(prev_rate, i);
            rate = excitation_rate(p, forcing, eta, cfg);
        } else {
            rate = relaxation_rate(p, cfg);
        }
        const double aux_slope =
            cfg.aux_rate * (cfg.aux_gain * p * (1.0 - aux / cfg.t_sat) - aux);
        p += cfg.dt * rate;
        aux += cfg.dt * aux_slope;
        prev_rate = rate;
    }
    pulses.close();
    tr.perturbation_log = pulses.log();
    return tr;
}

} // namespace anocast
