#pragma once

#include <array>
#include <chrono>
#include <cstdio>
#include <ostream>
#include <string>

#include "driftwt/data.hpp"
#include "driftwt/model.hpp"

namespace driftwt {

struct AccuracyResult {
    double top1 = 0.0;
    double topk = 0.0;
};

// Fraction of argmax-correct predictions plus top-k fraction. A label counts
// as top-k when fewer than k classes rank ahead of it; ties rank the lower
// class index first.
inline AccuracyResult accuracy(const Classifier& model, const std::vector<Sample>& split, int k) {
    require(!split.empty(), "accuracy: empty split");
    require(k >= 1, "accuracy: k must be at least 1");
    std::size_t hit1 = 0, hitk = 0;
    for (const Sample& s : split) {
        const Vec lg = model.logits(s.x);
        const std::size_t y = static_cast<std::size_t>(s.label);
        std::size_t best = 0;
        std::size_t ahead = 0;
        for (std::size_t c = 0; c < lg.size(); ++c) {
            if (lg[c] > lg[best]) best = c;
            if (c != y && (lg[c] > lg[y] || (lg[c] == lg[y] && c < y))) ++ahead;
        }
        if (best == y) ++hit1;
        if (ahead < static_cast<std::size_t>(k)) ++hitk;
    }
    const double n = static_cast<double>(split.size());
    return {static_cast<double>(hit1) / n, static_cast<double>(hitk) / n};
}

// Scale-normalized squared error between an estimated weight vector and the
// oracle: both sides are divided by their means first, so estimators that are
// correct up to a global scale score zero.
inline double we_nmse(const Vec& estimated, const Vec& oracle) {
    require(estimated.size() == oracle.size(), "we_nmse: length mismatch");
    require(!oracle.empty(), "we_nmse: empty vectors");
    const double om = mean(oracle);
    require(om != 0.0, "we_nmse: zero-mean oracle");
    const double em = mean(estimated);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        const double o = oracle[i] / om;
        const double e = (em != 0.0) ? estimated[i] / em : 0.0;
        num += (e - o) * (e - o);
        den += o * o;
    }
    require(den > 0, "we_nmse: degenerate oracle");
    return num / den;
}

// ---- Stage-wise profiling ----------------------------------------------------

enum class Stage {
    fetch_tr_data,
    fetch_val_data,
    forward_tr,
    forward_val,
    get_tr_loss,
    get_val_loss,
    estimate_weights,
    weight_tr_loss,
    backward,
    update_model,
};

inline constexpr std::size_t kNumStages = 10;

inline const char* stage_name(Stage s) {
    static const char* names[kNumStages] = {
        "fetch tr data", "fetch val data", "forward tr data", "forward val data",
        "get tr loss",   "get val loss",   "estimate weights", "weight tr loss",
        "backward",      "update model"};
    return names[static_cast<std::size_t>(s)];
}

// Which iterations of a window are recorded: `skip` warm-up iterations, then
// `stabilize` settling iterations, then `record` measured iterations.
// record < 0 records every iteration after the warm-up.
struct WindowPolicy {
    int skip = 0;
    int stabilize = 0;
    int record = -1;
};

// Accumulates per-stage wall time over recorded iterations. One timer per
// training thread; stages within an iteration must not overlap.
class StageTimer {
public:
    explicit StageTimer(WindowPolicy policy = {}) : policy_(policy) { totals_.fill(0.0); iter_.fill(0.0); }

    void start(Stage s) { marks_[static_cast<std::size_t>(s)] = clock::now(); }

    void stop(Stage s) {
        const auto i = static_cast<std::size_t>(s);
        iter_[i] += std::chrono::duration<double>(clock::now() - marks_[i]).count();
    }

    // Classifies the just-finished iteration per the window policy and folds
    // it into the totals when it falls in the recording span.
    void end_iteration() {
        const int pos = pos_in_window_++;
        const bool recording =
            pos >= policy_.skip + policy_.stabilize &&
            (policy_.record < 0 || pos < policy_.skip + policy_.stabilize + policy_.record);
        if (recording) {
            for (std::size_t i = 0; i < kNumStages; ++i) totals_[i] += iter_[i];
            ++recorded_;
            if (policy_.record >= 0 &&
                pos + 1 == policy_.skip + policy_.stabilize + policy_.record)
                ++windows_done_;
        }
        iter_.fill(0.0);
    }

    // Re-arms the window counter (one profiling window per call site, e.g.
    // per profiled epoch).
    void new_window() { pos_in_window_ = 0; }

    std::size_t recorded_iterations() const { return recorded_; }

    // Number of completed windows; in record-all mode the whole run counts as
    // one window.
    std::size_t windows() const { return policy_.record < 0 ? (recorded_ > 0 ? 1 : 0) : windows_done_; }

    double total_seconds(Stage s) const { return totals_[static_cast<std::size_t>(s)]; }

    double total_seconds() const {
        double t = 0.0;
        for (double v : totals_) t += v;
        return t;
    }

    struct Scoped {
        StageTimer& t;
        Stage s;
        Scoped(StageTimer& timer, Stage stage) : t(timer), s(stage) { t.start(s); }
        ~Scoped() { t.stop(s); }
    };

private:
    using clock = std::chrono::steady_clock;
    WindowPolicy policy_;
    std::array<clock::time_point, kNumStages> marks_{};
    std::array<double, kNumStages> iter_{};
    std::array<double, kNumStages> totals_{};
    int pos_in_window_ = 0;
    std::size_t recorded_ = 0;
    std::size_t windows_done_ = 0;
};

struct StageRow {
    std::string stage;
    double seconds = 0.0;  // mean over windows
    double percent = 0.0;
};

inline std::vector<StageRow> stage_report(const StageTimer& timer) {
    require(timer.windows() >= 1, "stage_report: no recorded window");
    const double nw = static_cast<double>(timer.windows());
    const double total = timer.total_seconds();
    std::vector<StageRow> rows;
    rows.reserve(kNumStages);
    for (std::size_t i = 0; i < kNumStages; ++i) {
        const Stage s = static_cast<Stage>(i);
        StageRow r;
        r.stage = stage_name(s);
        r.seconds = timer.total_seconds(s) / nw;
        r.percent = total > 0 ? 100.0 * timer.total_seconds(s) / total : 0.0;
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void write_stage_csv(std::ostream& os, const std::vector<StageRow>& rows) {
    os << "stage,seconds,percent\n";
    char buf[40];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.9g", r.seconds);
        os << r.stage << ',' << buf;
        std::snprintf(buf, sizeof(buf), "%.6g", r.percent);
        os << ',' << buf << '\n';
    }
}

inline std::string stage_report_json(const std::vector<StageRow>& rows) {
    std::string out = "[";
    char buf[96];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "{\"stage\":\"%s\",\"seconds\":%.9g,\"percent\":%.6g}",
                      rows[i].stage.c_str(), rows[i].seconds, rows[i].percent);
        out += buf;
        if (i + 1 < rows.size()) out += ',';
    }
    out += "]";
    return out;
}

// ---- Weight statistics -------------------------------------------------------

struct GroupStats {
    std::string name;
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    std::vector<std::size_t> histogram;
};

// Order-statistics summary of one group of weights with a fixed-bin histogram
// over [0, hist_max).
inline GroupStats summarize_weights(const std::string& name, Vec values, std::size_t bins = 20,
                                    double hist_max = 2.0) {
    GroupStats g;
    g.name = name;
    g.count = values.size();
    g.histogram.assign(bins, 0);
    if (values.empty()) return g;
    g.mean = mean(values);
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    g.q1 = quantile(0.25);
    g.median = quantile(0.5);
    g.q3 = quantile(0.75);
    for (double v : values) {
        std::size_t b = static_cast<std::size_t>(v / hist_max * static_cast<double>(bins));
        if (b >= bins) b = bins - 1;
        ++g.histogram[b];
    }
    return g;
}

}  // namespace driftwt
