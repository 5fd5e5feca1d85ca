#include <doctest.h>

#include <cmath>

#include "core/gradcheck.hpp"
#include "core/moe.hpp"

using namespace hoigen;

namespace {

using DStore = ParamStoreT<double>;
using DTensor = TensorT<double>;

/// Router whose logits equal the input tokens (identity projections, tau=1).
RouterT<double> identity_router(int n) {
    RouterT<double> r;
    r.n_experts = n;
    r.w_route = DTensor::zeros({n, n}, true);
    r.r = DTensor::zeros({n, n}, true);
    for (int i = 0; i < n; ++i) {
        r.w_route.values()[static_cast<size_t>(i) * n + i] = 1.0;
        r.r.values()[static_cast<size_t>(i) * n + i] = 1.0;
    }
    r.tau = DTensor::from_values({1}, {1.0}, true);
    return r;
}

}  // namespace

TEST_CASE("route: logits [2,1,0,-1] with k=2 selects experts {0,1} with softmax-renormalized gates") {
    auto router = identity_router(4);
    auto tokens = DTensor::from_values({1, 4}, {2.0, 1.0, 0.0, -1.0});
    auto res = route(tokens, router, 2);
    CHECK(res.indices == std::vector<int>{0, 1});
    // oracle: softmax over {2,1} = (1/(1+e^-1), e^-1/(1+e^-1))
    CHECK(res.gates.values()[0] == doctest::Approx(0.7310585786).epsilon(1e-9));
    CHECK(res.gates.values()[1] == doctest::Approx(0.2689414214).epsilon(1e-9));
}

TEST_CASE("route: all-equal logits with k=N gives uniform gates") {
    auto router = identity_router(6);
    auto tokens = DTensor::zeros({3, 6});
    auto res = route(tokens, router, 6);
    for (double g : res.gates.values()) CHECK(g == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("route: k=1 gives a single unit gate") {
    auto router = identity_router(4);
    auto tokens = DTensor::from_values({2, 4}, {0.3, -0.2, 1.4, 0.0, 2.0, 0.1, 0.2, 0.3});
    auto res = route(tokens, router, 1);
    for (double g : res.gates.values()) CHECK(g == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("route: top-k argmax is invariant to adding a constant to a token's logits") {
    auto router = identity_router(5);
    Rng rng(3);
    auto tokens = DTensor::randn({4, 5}, rng);
    auto base = route(tokens, router, 2);
    auto shifted = tokens.detach();
    for (int t = 0; t < 4; ++t)
        for (int e = 0; e < 5; ++e) shifted.values()[static_cast<size_t>(t) * 5 + e] += 7.25;
    auto moved = route(shifted, router, 2);
    CHECK(base.indices == moved.indices);
}

TEST_CASE("route: f sums to 1 and counts slots at weight 1/k") {
    auto router = identity_router(4);
    Rng rng(5);
    auto tokens = DTensor::randn({6, 4}, rng);
    auto res = route(tokens, router, 2);
    double total = 0.0;
    for (double v : res.f) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("balance_loss: uniform 1/16 and collapse oracles") {
    std::vector<double> uniform(16, 1.0 / 16.0);
    CHECK(balance_loss_value(uniform, uniform) == doctest::Approx(0.0625).epsilon(1e-12));
    std::vector<double> collapsed(16, 0.0);
    collapsed[0] = 1.0;
    CHECK(balance_loss_value(collapsed, collapsed) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("balance_loss matches direct summation on random inputs") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> f(16), p(16);
        for (auto& v : f) v = rng.uniform();
        for (auto& v : p) v = rng.uniform();
        double expect = 0.0;
        for (int i = 0; i < 16; ++i) expect += f[static_cast<size_t>(i)] * p[static_cast<size_t>(i)];
        CHECK(balance_loss_value(f, p) == doctest::Approx(expect).epsilon(1e-12));

        DTensor pt = DTensor::zeros({1, 16});
        for (int i = 0; i < 16; ++i) pt.values()[static_cast<size_t>(i)] = p[static_cast<size_t>(i)];
        CHECK(balance_loss(f, pt).item() == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("balance_loss with f=P is minimized at uniform over sampled simplex points") {
    const int n = 16;
    std::vector<double> uniform(n, 1.0 / n);
    const double at_uniform = balance_loss_value(uniform, uniform);
    Rng rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> f(n);
        double z = 0.0;
        for (auto& v : f) {
            v = -std::log(1.0 - rng.uniform());
            z += v;
        }
        for (auto& v : f) v /= z;
        CHECK(balance_loss_value(f, f) >= at_uniform - 1e-12);
    }
}

TEST_CASE("expert_forward: zero modulation reduces to FFN(W2 gelu(x) + b2)") {
    DStore ps(11);
    auto expert = FilmExpertT<double>::create(ps, "e", 6, 8, 16);
    // zero the conditioning path
    std::fill(expert.w1.w.values().begin(), expert.w1.w.values().end(), 0.0);
    std::fill(expert.w1.b.values().begin(), expert.w1.b.values().end(), 0.0);
    Rng rng(12);
    auto x = DTensor::randn({5, 8}, rng);
    auto cond = DTensor::randn({1, 6}, rng);
    auto got = expert(x, cond);
    auto expect = expert.ffn(expert.w2(gelu(x)));
    REQUIRE(got.shape() == expect.shape());
    for (int64_t i = 0; i < got.size(); ++i)
        CHECK(got.values()[static_cast<size_t>(i)] ==
              doctest::Approx(expect.values()[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("expert_forward preserves the token shape") {
    DStore ps(13);
    auto expert = FilmExpertT<double>::create(ps, "e", 6, 8, 16);
    Rng rng(14);
    auto x = DTensor::randn({7, 8}, rng);
    auto cond = DTensor::randn({1, 6}, rng);
    CHECK(expert(x, cond).shape() == std::vector<int>{7, 8});
    CHECK_THROWS_AS(expert(DTensor::zeros({7, 9}), cond), TensorError);
}

TEST_CASE("gradcheck: FiLM modulation w.r.t. the scale parameters C_f^1") {
    DStore ps(15);
    auto expert = FilmExpertT<double>::create(ps, "e", 6, 8, 16);
    Rng rng(16);
    auto x = DTensor::randn({4, 8}, rng).detach();
    auto c2 = DTensor::randn({1, 8}, rng).detach();
    auto f = [&](const DTensor& c1) {
        auto modulated = add(mul(x, add_scalar(c1, 1.0)), c2);
        return mean(expert.ffn(expert.w2(gelu(modulated))));
    };
    auto report = gradcheck<double>(f, DTensor::randn({1, 8}, rng), 1e-3, 1e-4);
    CHECK(report.passed);
}

TEST_CASE("gradcheck: expert_forward w.r.t. condition input") {
    DStore ps(17);
    auto expert = FilmExpertT<double>::create(ps, "e", 6, 8, 16);
    Rng rng(18);
    auto x = DTensor::randn({4, 8}, rng).detach();
    auto report = gradcheck<double>(
        [&](const DTensor& cond) { return mean(expert(x, cond)); },
        DTensor::randn({1, 6}, rng), 1e-3, 1e-4);
    CHECK(report.passed);
}

TEST_CASE("moe_forward: tied expert parameters make output independent of routing") {
    DStore ps(19);
    MoELayerT<double> moe(ps, "moe", 8, 6, 4, 2, 8, 16);
    // tie every expert to expert 0
    for (int e = 1; e < 4; ++e) {
        const std::string src = "moe.expert0", dst = "moe.expert" + std::to_string(e);
        for (const char* leaf : {".w1.w", ".w1.b", ".w2.w", ".w2.b", ".ffn.fc1.w", ".ffn.fc1.b",
                                 ".ffn.fc2.w", ".ffn.fc2.b"})
            ps.get(dst + leaf).values() = ps.get(src + leaf).values();
    }
    Rng rng(20);
    auto tokens = DTensor::randn({5, 8}, rng);
    auto cond = DTensor::randn({1, 6}, rng);
    auto out = moe.forward(tokens, cond);
    auto single = moe.experts()[0](tokens, cond);
    for (int64_t i = 0; i < out.fused.size(); ++i)
        CHECK(out.fused.values()[static_cast<size_t>(i)] ==
              doctest::Approx(single.values()[static_cast<size_t>(i)]).epsilon(1e-9));
}

TEST_CASE("moe_forward: exactly k=2 experts receive gradient for a single token") {
    DStore ps(21);
    MoELayerT<double> moe(ps, "moe", 8, 6, 16, 2, 8, 16);
    Rng rng(22);
    auto tokens = DTensor::randn({1, 8}, rng);
    auto cond = DTensor::randn({1, 6}, rng);
    ps.zero_grad();
    auto out = moe.forward(tokens, cond);
    mean(out.fused).backward();
    int experts_with_grad = 0;
    for (int e = 0; e < 16; ++e) {
        const auto& g = ps.get("moe.expert" + std::to_string(e) + ".w2.w").grad();
        bool any = false;
        for (double v : g) any = any || v != 0.0;
        experts_with_grad += any ? 1 : 0;
    }
    CHECK(experts_with_grad == 2);
    CHECK(out.indices.size() == 2);
}

TEST_CASE("moe_forward matches a dense weighted-sum oracle (N_t=3, N_e=4, k=2)") {
    DStore ps(23);
    MoELayerT<double> moe(ps, "moe", 8, 6, 4, 2, 8, 16);
    Rng rng(24);
    auto tokens = DTensor::randn({3, 8}, rng);
    auto cond = DTensor::randn({1, 6}, rng);
    auto out = moe.forward(tokens, cond);

    // dense oracle: evaluate every expert on every token, then per token sum
    // the gate-weighted selected outputs
    auto routing = route(tokens, moe.router(), 2);
    for (int t = 0; t < 3; ++t) {
        std::vector<double> expect(8, 0.0);
        for (int j = 0; j < 2; ++j) {
            const int e = routing.indices[static_cast<size_t>(t) * 2 + j];
            const double g = routing.gates.values()[static_cast<size_t>(t) * 2 + j];
            auto row = slice_rows(tokens, t, t + 1);
            auto y = moe.experts()[static_cast<size_t>(e)](row, cond);
            for (int c = 0; c < 8; ++c) expect[static_cast<size_t>(c)] += g * y.values()[static_cast<size_t>(c)];
        }
        for (int c = 0; c < 8; ++c)
            CHECK(out.fused.values()[static_cast<size_t>(t) * 8 + c] ==
                  doctest::Approx(expect[static_cast<size_t>(c)]).epsilon(1e-9));
    }
}

TEST_CASE("moe_forward gate rows are nonnegative and sum to 1") {
    DStore ps(25);
    MoELayerT<double> moe(ps, "moe", 8, 6, 16, 2, 8, 16);
    Rng rng(26);
    auto tokens = DTensor::randn({9, 8}, rng);
    auto cond = DTensor::randn({1, 6}, rng);
    auto routing = route(tokens, moe.router(), 2);
    for (int t = 0; t < 9; ++t) {
        double s = 0.0;
        for (int j = 0; j < 2; ++j) {
            const double g = routing.gates.values()[static_cast<size_t>(t) * 2 + j];
            CHECK(g >= 0.0);
            s += g;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("gradcheck: moe_forward end-to-end with fixed routing") {
    DStore ps(27);
    MoELayerT<double> moe(ps, "moe", 6, 4, 4, 2, 6, 12);
    Rng rng(28);
    auto cond = DTensor::randn({1, 4}, rng).detach();
    // freeze the routing decided by the unperturbed input
    auto tokens0 = DTensor::randn({3, 6}, rng);
    auto fixed = route(tokens0, moe.router(), 2).indices;
    auto f = [&](const DTensor& x) {
        auto out = moe.forward(x, cond, &fixed);
        return add(mean(out.fused), out.balance);
    };
    auto report = gradcheck<double>(f, tokens0.detach(), 1e-3, 1e-4);
    CHECK(report.passed);

    // and through the condition path
    auto fc = [&](const DTensor& c) {
        auto out = moe.forward(tokens0.detach(), c, &fixed);
        return mean(out.fused);
    };
    auto report_c = gradcheck<double>(fc, cond.clone(), 1e-3, 1e-4);
    CHECK(report_c.passed);
}
