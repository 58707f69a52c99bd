#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "anocast/sim.hpp"
#include "anocast/tensor.hpp"

namespace anocast {

struct SplitRange {
    std::size_t begin = 0;
    std::size_t end = 0; // exclusive

    std::size_t length() const { return end - begin; }
};

struct ChannelStats {
    double mean = 0.0;
    double std = 1.0;
};

struct SplitFractions {
    double train = 0.7;
    double val = 0.15; // remainder is the test range
};

// ---------------------------------------------------------------------------
// Time-ordered dataset: a target series plus driver channels, contiguous
// train/val/test ranges, and z-score statistics fitted on the train range
// only. Channels that are constant on the train range keep scale 1 so the
// standardized values stay finite.
// ---------------------------------------------------------------------------

struct Dataset {
    std::vector<double> times;
    std::vector<std::string> driver_names;
    std::vector<std::vector<double>> drivers; // channel-major, each length N
    std::vector<double> target;
    SplitRange train, val, test;
    std::vector<ChannelStats> driver_stats;
    ChannelStats target_stats;

    std::size_t size() const { return target.size(); }
    std::size_t driver_dim() const { return drivers.size(); }

    double std_target(std::size_t i) const {
        return (target[i] - target_stats.mean) / target_stats.std;
    }
    double std_driver(std::size_t ch, std::size_t i) const {
        return (drivers[ch][i] - driver_stats[ch].mean) / driver_stats[ch].std;
    }
    double denorm_target(double v) const { return v * target_stats.std + target_stats.mean; }

    std::size_t driver_index(const std::string& name) const; // DataError if unknown
};

Dataset make_dataset(const Trajectory& traj, SplitFractions f = {});

// CSV with header `t,<target>,<drivers...>`; monotone time stamps required.
Dataset load_csv(const std::string& path, SplitFractions f = {});

void write_trajectory_csv(const std::string& path, const Trajectory& traj);
void write_truth_json(const std::string& path, const std::vector<PerturbEvent>& events);
std::vector<PerturbEvent> load_truth_json(const std::string& path);

// ---------------------------------------------------------------------------
// Sliding windows. The window ending at index t covers [t-T+1, t] and is
// labeled with y_{t+1}; a range of length L yields exactly L - T windows.
// All values are standardized with the dataset's train-range statistics.
// ---------------------------------------------------------------------------

struct WindowItem {
    Tensor drivers; // [T x D]
    Tensor y_hist;  // [T]
    double label;   // standardized y_{t+1}
    std::size_t t;  // absolute index of the window end
};

struct WindowedSet {
    std::size_t window = 0;
    std::vector<WindowItem> items;
};

WindowedSet make_windows(const Dataset& ds, std::size_t window, SplitRange range);

// ---------------------------------------------------------------------------
// Event-level detection quality. A flag matches an unmatched truth event if
// it falls inside [start - tol, end + tol]; matching is one to one and
// maximizes the number of matched pairs.
// ---------------------------------------------------------------------------

struct DetectionReport {
    std::vector<std::size_t> flags;
    std::vector<bool> flag_matched;  // per flag
    std::vector<bool> event_matched; // per truth event
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long tolerance = 0;
};

DetectionReport evaluate_detection(const std::vector<std::size_t>& flags,
                                   const std::vector<PerturbEvent>& events, long tolerance);

} // namespace anocast
