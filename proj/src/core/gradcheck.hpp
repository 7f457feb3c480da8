#pragma once

#include <functional>
#include <string>

#include "core/optim.hpp"

namespace reca {

// Central-difference gradient verification against the tape.
//
// `run(do_backward)` must rebuild the forward pass from the current parameter
// values and return the scalar loss; when `do_backward` is true it must also
// run backward so the analytic gradients land in the store's `g` buffers
// (which gradcheck zeroes first).  The function is then called twice per
// probed coordinate with a perturbed weight.  Relative error uses a floored
// denominator so coordinates whose true gradient is ~0 compare against the
// finite-difference noise floor instead of dividing by zero.

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int worst_index = -1;
    int checked = 0;
};

// probes up to `per_param` random coordinates of every trainable parameter
GradCheckReport gradcheck(ParamStore& ps, const std::function<double(bool)>& run,
                          int per_param, uint64_t seed, double h = 1e-5);

} // namespace reca
