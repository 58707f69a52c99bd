#pragma once

#include <functional>
#include <vector>

#include "anocast/data.hpp"
#include "anocast/nn.hpp"

namespace anocast::detail {

// Shared mini-batch loop for the forecasters: seeded shuffle schedule, mean
// squared batch loss, adaptive-moment updates. Returns per-epoch mean loss.
std::vector<double> train_mse(const std::vector<WindowItem>& items, std::size_t epochs,
                              std::size_t batch, std::uint64_t seed, std::vector<Param>& params,
                              const std::function<NodePtr(const WindowItem&)>& predict);

} // namespace anocast::detail
