#include "eval/collapse.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace reca {

void CollapseMonitor::record_loss(int64_t step, double loss) {
    if (!losses.empty() && step <= losses.back().first)
        fail(Error::Kind::invalid_arg, "loss trace steps must be strictly increasing");
    losses.emplace_back(step, loss);
}

void CollapseMonitor::record_eval(int64_t step, double overall) {
    if (!evals.empty() && step <= evals.back().first)
        fail(Error::Kind::invalid_arg, "eval trace steps must be strictly increasing");
    evals.emplace_back(step, overall);
}

CollapseResult detect_collapse(const CollapseMonitor& mon) {
    CollapseResult out;
    if (mon.losses.empty()) return out;
    const int w = std::max(1, mon.window);
    double window_sum = 0;
    size_t eval_at = 0;  // evals consumed so far (those with step <= current)
    double eval_peak = -1, eval_now = -1;
    for (size_t i = 0; i < mon.losses.size(); ++i) {
        const auto [step, loss] = mon.losses[i];
        window_sum += loss;
        if (i >= static_cast<size_t>(w)) window_sum -= mon.losses[i - w].second;
        const size_t n = std::min(i + 1, static_cast<size_t>(w));
        while (eval_at < mon.evals.size() && mon.evals[eval_at].first <= step) {
            eval_now = mon.evals[eval_at].second;
            eval_peak = std::max(eval_peak, eval_now);
            ++eval_at;
        }
        const bool loss_low = window_sum / n < mon.loss_threshold;
        const bool eval_dropped = eval_peak >= 0 && (eval_peak - eval_now) >= mon.eval_drop;
        if (loss_low && eval_dropped) {
            out.collapsed = true;
            out.onset_step = step;
            return out;
        }
    }
    return out;
}

} // namespace reca
