#include "train_util.hpp"

#include <cmath>
#include <numeric>

namespace anocast::detail {

std::vector<double> train_mse(const std::vector<WindowItem>& items, std::size_t epochs,
                              std::size_t batch, std::uint64_t seed, std::vector<Param>& params,
                              const std::function<NodePtr(const WindowItem&)>& predict) {
    if (items.empty()) throw DataError("empty training set");
    if (epochs < 1 || batch < 1) throw ConfigError("epochs and batch must be at least 1");

    Adam opt(params);
    Rng order_rng(Rng::derive(seed, 0x0d0e));
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> history;
    history.reserve(epochs);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        order_rng.shuffle(order);
        double total = 0.0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const std::size_t b1 = std::min(order.size(), b0 + batch);
            std::vector<NodePtr> preds;
            preds.reserve(b1 - b0);
            Tensor labels({b1 - b0});
            for (std::size_t k = b0; k < b1; ++k) {
                const auto& item = items[order[k]];
                preds.push_back(predict(item));
                labels.data[k - b0] = item.label;
            }
            auto loss = mse(concat(preds), leaf(std::move(labels)));
            const double lv = loss->value.data[0];
            if (!std::isfinite(lv))
                throw DivergenceError("non-finite loss in epoch " + std::to_string(epoch));
            backward(loss);
            opt.step();
            total += lv * static_cast<double>(b1 - b0);
        }
        history.push_back(total / static_cast<double>(order.size()));
    }
    return history;
}

} // namespace anocast::detail
