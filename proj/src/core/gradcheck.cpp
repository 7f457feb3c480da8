#include "core/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace reca {

GradCheckReport gradcheck(ParamStore& ps, const std::function<double(bool)>& run,
                          int per_param, uint64_t seed, double h) {
    ps.zero_grads();
    (void)run(true);

    // snapshot analytic gradients before perturbing anything
    std::map<std::string, std::vector<double>> analytic;
    for (const auto& [name, p] : ps.params)
        if (p.trainable) analytic[name] = p.g;

    GradCheckReport rep;
    for (auto& [name, p] : ps.params) {
        if (!p.trainable) continue;
        int64_t n = numel(p.shape);
        Rng rng = rng_stream(seed, "gradcheck/" + name);
        int probes = (int)std::min<int64_t>(per_param, n);
        for (int k = 0; k < probes; ++k) {
            int64_t i = (n <= per_param) ? k : (int64_t)rng.below((uint64_t)n);
            double saved = p.w[i];
            p.w[i] = saved + h;
            double fp = run(false);
            p.w[i] = saved - h;
            double fm = run(false);
            p.w[i] = saved;
            double fd = (fp - fm) / (2.0 * h);
            double ad = analytic[name][i];
            double rel = std::fabs(fd - ad) / std::max({std::fabs(fd), std::fabs(ad), 1e-5});
            ++rep.checked;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = name;
                rep.worst_index = (int)i;
            }
        }
    }
    return rep;
}

} // namespace reca
