#include "anocast/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace anocast {

namespace {

ChannelStats fit_stats(const std::vector<double>& series, const SplitRange& range) {
    const std::size_t n = range.length();
    double mean = 0.0;
    for (std::size_t i = range.begin; i < range.end; ++i) mean += series[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = range.begin; i < range.end; ++i) {
        const double d = series[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    double std = std::sqrt(var);
    if (std < 1e-12) std = 1.0; // constant channel: keep values finite
    return {mean, std};
}

void finalize(Dataset& ds, SplitFractions f) {
    const std::size_t n = ds.size();
    if (!(f.train > 0.0) || f.val < 0.0 || !(f.train + f.val < 1.0))
        throw ConfigError("split fractions must satisfy train > 0, val >= 0, train + val < 1");
    const auto train_end = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.train));
    const auto val_end =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * (f.train + f.val)));
    if (train_end < 2 || val_end <= train_end || val_end >= n)
        throw DataError("series too short for the requested split");
    ds.train = {0, train_end};
    ds.val = {train_end, val_end};
    ds.test = {val_end, n};
    ds.target_stats = fit_stats(ds.target, ds.train);
    ds.driver_stats.clear();
    for (const auto& ch : ds.drivers) ds.driver_stats.push_back(fit_stats(ch, ds.train));
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& field, std::size_t line_no) {
    const char* s = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0')
        throw ParseError("line " + std::to_string(line_no) + ": bad numeric field '" + field +
                         "'");
    return v;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

} // namespace

std::size_t Dataset::driver_index(const std::string& name) const {
    for (std::size_t i = 0; i < driver_names.size(); ++i)
        if (driver_names[i] == name) return i;
    throw DataError("unknown driver channel '" + name + "'");
}

Dataset make_dataset(const Trajectory& traj, SplitFractions f) {
    Dataset ds;
    ds.times = traj.times;
    ds.target = traj.primary;
    ds.driver_names = {"T_aux", "P_RF"};
    ds.drivers = {traj.auxiliary, traj.forcing};
    finalize(ds, f);
    return ds;
}

Dataset load_csv(const std::string& path, SplitFractions f) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    auto header = split_fields(line);
    if (header.size() < 3)
        throw ParseError(path + ": header needs t, a target, and at least one driver");

    Dataset ds;
    ds.driver_names.assign(header.begin() + 2, header.end());
    ds.drivers.resize(ds.driver_names.size());

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        const double t = parse_double(fields[0], line_no);
        if (!ds.times.empty() && t <= ds.times.back())
            throw DataError("line " + std::to_string(line_no) + ": time stamps must increase");
        ds.times.push_back(t);
        ds.target.push_back(parse_double(fields[1], line_no));
        for (std::size_t c = 0; c < ds.drivers.size(); ++c)
            ds.drivers[c].push_back(parse_double(fields[2 + c], line_no));
    }
    if (ds.target.empty()) throw ParseError(path + ": no data rows");
    finalize(ds, f);
    return ds;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "t,P,T_aux,P_RF\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out << format_double(traj.times[i]) << ',' << format_double(traj.primary[i]) << ','
            << format_double(traj.auxiliary[i]) << ',' << format_double(traj.forcing[i])
            << '\n';
    }
    if (!out) throw DataError("failed writing " + path);
}

void write_truth_json(const std::string& path, const std::vector<PerturbEvent>& events) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& e : events)
        doc.push_back({{"start", e.start}, {"end", e.end}, {"amplitude", e.amplitude}});
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << doc.dump();
}

std::vector<PerturbEvent> load_truth_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    std::vector<PerturbEvent> events;
    for (const auto& entry : doc)
        events.push_back({entry.at("start").get<std::size_t>(),
                          entry.at("end").get<std::size_t>(),
                          entry.at("amplitude").get<double>()});
    return events;
}

WindowedSet make_windows(const Dataset& ds, std::size_t window, SplitRange range) {
    if (window == 0) throw ConfigError("window must be positive");
    if (range.end > ds.size() || range.begin >= range.end)
        throw ConfigError("window range out of bounds");
    if (range.length() <= window)
        throw ConfigError("range of length " + std::to_string(range.length()) +
                          " cannot fit windows of size " + std::to_string(window));

    const std::size_t d = ds.driver_dim();
    WindowedSet ws;
    ws.window = window;
    for (std::size_t t = range.begin + window - 1; t + 1 < range.end; ++t) {
        WindowItem item;
        item.t = t;
        item.drivers = Tensor({window, d});
        item.y_hist = Tensor({window});
        for (std::size_t j = 0; j < window; ++j) {
            const std::size_t idx = t - window + 1 + j;
            for (std::size_t c = 0; c < d; ++c) item.drivers.at(j, c) = ds.std_driver(c, idx);
            item.y_hist.data[j] = ds.std_target(idx);
        }
        item.label = ds.std_target(t + 1);
        ws.items.push_back(std::move(item));
    }
    return ws;
}

DetectionReport evaluate_detection(const std::vector<std::size_t>& flags,
                                   const std::vector<PerturbEvent>& events, long tolerance) {
    if (tolerance < 0) throw ConfigError("tolerance must be nonnegative");
    if (!std::is_sorted(flags.begin(), flags.end()))
        throw ContractError("flags must be sorted ascending");

    DetectionReport rep;
    rep.flags = flags;
    rep.tolerance = tolerance;
    rep.flag_matched.assign(flags.size(), false);
    rep.event_matched.assign(events.size(), false);

    // event order by window end; matching each flag to the unmatched
    // containing event with the earliest end maximizes matched pairs
    std::vector<std::size_t> order(events.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (events[a].end != events[b].end) return events[a].end < events[b].end;
        return events[a].start < events[b].start;
    });

    const auto tol = static_cast<long>(tolerance);
    for (std::size_t fi = 0; fi < flags.size(); ++fi) {
        const auto flag = static_cast<long>(flags[fi]);
        for (std::size_t oi : order) {
            if (rep.event_matched[oi]) continue;
            const long lo = static_cast<long>(events[oi].start) - tol;
            const long hi = static_cast<long>(events[oi].end) + tol;
            if (flag < lo || flag > hi) continue;
            rep.event_matched[oi] = true;
            rep.flag_matched[fi] = true;
            break;
        }
    }

    std::size_t matched_flags = 0;
    for (bool m : rep.flag_matched) matched_flags += m ? 1 : 0;
    std::size_t matched_events = 0;
    for (bool m : rep.event_matched) matched_events += m ? 1 : 0;

    rep.precision =
        flags.empty() ? 0.0
                      : static_cast<double>(matched_flags) / static_cast<double>(flags.size());
    rep.recall = events.empty() ? 0.0
                                : static_cast<double>(matched_events) /
                                      static_cast<double>(events.size());
    rep.f1 = (rep.precision + rep.recall) == 0.0
                 ? 0.0
                 : 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall);
    return rep;
}

} // namespace anocast
