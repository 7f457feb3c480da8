#pragma once
// Collapse detection for reconstruction training: a run has collapsed into
// copying its conditioning when the reconstruction loss falls to near zero
// while generation quality drops.  Both conditions are required; a low loss
// with stable evaluation is healthy convergence.

#include <cstdint>
#include <vector>

namespace reca {

struct CollapseMonitor {
    double loss_threshold = 0.05;  // nats per predicted token
    double eval_drop = 0.05;       // five absolute points on the eval overall
    int window = 25;               // trailing loss records averaged per step

    std::vector<std::pair<int64_t, double>> losses;  // (step, per-token loss)
    std::vector<std::pair<int64_t, double>> evals;   // (step, eval overall in [0,1])

    void record_loss(int64_t step, double loss);
    void record_eval(int64_t step, double overall);
};

struct CollapseResult {
    bool collapsed = false;
    int64_t onset_step = -1;  // earliest step where both conditions held
};

// earliest loss-record step where the trailing-window mean loss is below the
// threshold and the latest eval at or before that step sits at least
// `eval_drop` below the running eval peak
CollapseResult detect_collapse(const CollapseMonitor& mon);

} // namespace reca
