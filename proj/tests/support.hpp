#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "anocast/tensor.hpp"

namespace support {

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

// Central finite differences against one reverse sweep. `build` must
// construct a fresh scalar graph over the same leaf nodes on every call.
inline double max_grad_error(const std::vector<anocast::NodePtr>& leaves,
                             const std::function<anocast::NodePtr()>& build,
                             double eps = 1e-5) {
    auto root = build();
    anocast::backward(root);
    std::vector<std::vector<double>> grads;
    grads.reserve(leaves.size());
    for (auto& lf : leaves) grads.push_back(lf->grad.data);

    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& lf = leaves[li];
        for (std::size_t i = 0; i < lf->value.numel(); ++i) {
            const double keep = lf->value.data[i];
            lf->value.data[i] = keep + eps;
            const double up = build()->value.data[0];
            lf->value.data[i] = keep - eps;
            const double dn = build()->value.data[0];
            lf->value.data[i] = keep;
            const double fd = (up - dn) / (2.0 * eps);
            worst = std::max(worst, rel_err(fd, grads[li][i]));
        }
    }
    return worst;
}

} // namespace support
