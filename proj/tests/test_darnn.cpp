#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "anocast/darnn.hpp"
#include "anocast/sim.hpp"
#include "support.hpp"

using namespace anocast;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Tensor t({r, c});
    for (auto& v : t.data) v = rng.normal() * 0.5;
    return t;
}

Tensor random_vector(std::size_t n, Rng& rng) {
    Tensor t({n});
    for (auto& v : t.data) v = rng.normal() * 0.5;
    return t;
}

// constant target with wiggling drivers; the standardizer maps the target
// to all zeros, so a trained model must pin its output at the target mean
Dataset constant_target_dataset(std::size_t n, double level) {
    Trajectory traj;
    for (std::size_t i = 0; i < n; ++i) {
        traj.times.push_back(static_cast<double>(i));
        traj.primary.push_back(level);
        traj.auxiliary.push_back(std::sin(0.3 * static_cast<double>(i)));
        traj.forcing.push_back(std::cos(0.17 * static_cast<double>(i)));
    }
    return make_dataset(traj);
}

} // namespace

TEST_CASE("single driver channel gets unit input attention") {
    DarnnModel model({4, 1, 3, 3}, 5);
    Rng rng(99);
    auto out = model.forward(random_matrix(4, 1, rng), random_vector(4, rng));
    for (std::size_t t = 0; t < 4; ++t) CHECK(out.input_attention.at(t, 0) == 1.0);
}

TEST_CASE("window of one gets unit temporal attention") {
    DarnnModel model({1, 2, 3, 3}, 5);
    Rng rng(99);
    auto out = model.forward(random_matrix(1, 2, rng), random_vector(1, rng));
    REQUIRE(out.temporal_attention.numel() == 1);
    CHECK(out.temporal_attention.data[0] == 1.0);
}

TEST_CASE("attention weights stay on the simplex") {
    DarnnModel model({6, 3, 5, 4}, 17);
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        auto out = model.forward(random_matrix(6, 3, rng), random_vector(6, rng));
        for (std::size_t t = 0; t < 6; ++t) {
            double row = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(out.input_attention.at(t, k) >= 0.0);
                row += out.input_attention.at(t, k);
            }
            CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
        }
        double tot = 0.0;
        for (double w : out.temporal_attention.data) {
            CHECK(w >= 0.0);
            tot += w;
        }
        CHECK(tot == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("all-zero parameters give a zero prediction and uniform attention") {
    DarnnModel model({4, 2, 3, 3}, 23);
    for (auto& p : model.params())
        std::fill(p.node->value.data.begin(), p.node->value.data.end(), 0.0);
    Rng rng(8);
    auto out = model.forward(random_matrix(4, 2, rng), random_vector(4, rng));
    CHECK(out.prediction->value.data[0] == 0.0);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t k = 0; k < 2; ++k) CHECK(out.input_attention.at(t, k) == 0.5);
    for (double w : out.temporal_attention.data) CHECK(w == 0.25);
}

TEST_CASE("attention sparsity unit values") {
    CHECK(attention_sparsity({0.25, 0.25, 0.25, 0.25}) == 0.0);
    CHECK(attention_sparsity({0.0, 0.0, 1.0, 0.0}) == 1.0);
    CHECK(attention_sparsity({0.5, 0.5, 0.0, 0.0}) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(attention_sparsity({1.0}) == 0.0);

    const std::vector<double> a{0.1, 0.2, 0.3, 0.4};
    const std::vector<double> b{0.4, 0.1, 0.3, 0.2};
    CHECK(attention_sparsity(a) == doctest::Approx(attention_sparsity(b)).epsilon(1e-12));

    CHECK(attention_sparsity({0.6, 0.3, 0.1}) > attention_sparsity({0.4, 0.3, 0.3}));

    CHECK_THROWS_AS(attention_sparsity({}), ContractError);
    CHECK_THROWS_AS(attention_sparsity({0.5, -0.1, 0.6}), ContractError);
    CHECK_THROWS_AS(attention_sparsity({0.3, 0.3}), ContractError);
}

TEST_CASE("full-model gradient check") {
    DarnnModel model({4, 2, 3, 3}, 11);
    Rng rng(31);
    const Tensor drivers = random_matrix(4, 2, rng);
    const Tensor y_hist = random_vector(4, rng);

    std::vector<NodePtr> leaves;
    for (auto& p : model.params()) leaves.push_back(p.node);
    const double worst = support::max_grad_error(
        leaves, [&] { return model.forward(drivers, y_hist).prediction; });
    CHECK(worst < 1e-4);
}

TEST_CASE("constant series is fit to within a hundredth") {
    auto ds = constant_target_dataset(140, 3.7);
    auto train_set = make_windows(ds, 8, ds.train);
    auto val_set = make_windows(ds, 8, ds.val);
    REQUIRE(!train_set.items.empty());
    REQUIRE(!val_set.items.empty());

    DarnnModel model({8, 2, 8, 8}, 7);
    auto history = model.train(train_set, 60, 16, 7);
    REQUIRE(history.size() == 60);
    CHECK(history.back() < history.front());

    for (const auto& item : val_set.items) {
        const auto out = model.forward(item.drivers, item.y_hist);
        CHECK(std::abs(ds.denorm_target(out.prediction->value.data[0]) - 3.7) < 1e-2);
    }
}

TEST_CASE("training is deterministic in the seed") {
    auto ds = constant_target_dataset(60, 1.5);
    auto train_set = make_windows(ds, 5, ds.train);

    DarnnModel a({5, 2, 4, 4}, 13);
    DarnnModel b({5, 2, 4, 4}, 13);
    auto ha = a.train(train_set, 4, 8, 21);
    auto hb = b.train(train_set, 4, 8, 21);
    CHECK(ha == hb);

    const auto& item = train_set.items.front();
    CHECK(a.forward(item.drivers, item.y_hist).prediction->value.data[0] ==
          b.forward(item.drivers, item.y_hist).prediction->value.data[0]);

    DarnnModel c({5, 2, 4, 4}, 14);
    auto hc = c.train(train_set, 4, 8, 21);
    CHECK(hc != ha);
}

TEST_CASE("save and load round-trip is exact") {
    auto ds = constant_target_dataset(60, 2.0);
    auto train_set = make_windows(ds, 5, ds.train);

    DarnnModel model({5, 2, 4, 4}, 3);
    model.train(train_set, 3, 8, 3);

    const std::string path = "darnn_roundtrip.json";
    model.save(path);
    auto loaded = DarnnModel::load(path);
    std::remove(path.c_str());

    CHECK(loaded.config().window == 5);
    CHECK(loaded.config().driver_dim == 2);
    CHECK(loaded.config().enc_hidden == 4);
    CHECK(loaded.config().dec_hidden == 4);

    for (const auto& item : train_set.items) {
        const double want = model.forward(item.drivers, item.y_hist).prediction->value.data[0];
        const double got = loaded.forward(item.drivers, item.y_hist).prediction->value.data[0];
        CHECK(want == got);
    }
}

TEST_CASE("shape and configuration errors") {
    CHECK_THROWS_AS(DarnnModel({0, 2, 4, 4}, 1), ConfigError);
    CHECK_THROWS_AS(DarnnModel({5, 0, 4, 4}, 1), ConfigError);
    CHECK_THROWS_AS(DarnnModel({5, 2, 0, 4}, 1), ConfigError);

    DarnnModel model({5, 2, 4, 4}, 1);
    Rng rng(2);
    CHECK_THROWS_AS(model.forward(random_matrix(4, 2, rng), random_vector(5, rng)), ShapeError);
    CHECK_THROWS_AS(model.forward(random_matrix(5, 3, rng), random_vector(5, rng)), ShapeError);
    CHECK_THROWS_AS(model.forward(random_matrix(5, 2, rng), random_vector(4, rng)), ShapeError);

    auto ds = constant_target_dataset(60, 1.0);
    auto wrong = make_windows(ds, 6, ds.train);
    CHECK_THROWS_AS(model.train(wrong, 2, 8, 1), ConfigError);

    auto right = make_windows(ds, 5, ds.train);
    CHECK_THROWS_AS(model.train(right, 0, 8, 1), ConfigError);
    CHECK_THROWS_AS(model.train(right, 2, 0, 1), ConfigError);

    WindowedSet empty;
    empty.window = 5;
    CHECK_THROWS_AS(model.train(empty, 2, 8, 1), DataError);
}
