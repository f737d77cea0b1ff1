#include <doctest.h>

#include <sstream>

#include "driftwt/weights.hpp"

using namespace driftwt;

TEST_SUITE("weights") {
    TEST_CASE("initialization to all ones") {
        WeightStore ws(3);
        CHECK(ws.values() == Vec{1, 1, 1});
        CHECK(WeightStore(1).values() == Vec{1});
        WeightStore big(17);
        CHECK(sum(big.values()) == 17.0);
    }

    TEST_CASE("gather preserves index order") {
        WeightStore ws(4);
        CHECK(ws.gather({2, 0}) == Vec{1, 1});
        ws.scatter({0}, Vec{0.5});
        CHECK(ws.gather({0}) == Vec{0.5});
        ws.scatter({1, 3}, Vec{0.2, 0.9});
        const Vec fwd = ws.gather({1, 3});
        Vec rev = ws.gather({3, 1});
        std::reverse(rev.begin(), rev.end());
        CHECK(fwd == rev);
    }

    TEST_CASE("index contracts") {
        WeightStore ws(3);
        CHECK_THROWS_AS(ws.gather({3}), contract_error);
        CHECK_THROWS_AS(ws.gather({0, 0}), contract_error);
        CHECK_THROWS_AS(ws.scatter({0}, Vec{1, 2}), contract_error);
        CHECK_THROWS_AS(ws.scatter({0}, Vec{-0.1}), contract_error);
        CHECK_THROWS_AS(ws.scatter({1}, Vec{std::nan("")}), contract_error);
    }

    TEST_CASE("scatter replaces exactly the indexed entries") {
        WeightStore ws(5);
        ws.scatter({1, 3}, Vec{0.25, 4.0});
        CHECK(ws.values() == Vec{1, 0.25, 1, 4.0, 1});
        CHECK(ws.gather({1, 3}) == Vec{0.25, 4.0});
    }

    TEST_CASE("disjoint scatters commute") {
        Rng rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 6 + rng.below(10);
            std::vector<std::size_t> order(n);
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            rng.shuffle(order);
            const std::size_t ka = 1 + rng.below(n / 2);
            const std::size_t kb = 1 + rng.below(n - ka);
            std::vector<std::size_t> ia(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(ka));
            std::vector<std::size_t> ib(order.begin() + static_cast<std::ptrdiff_t>(ka),
                                        order.begin() + static_cast<std::ptrdiff_t>(ka + kb));
            Vec va(ka), vb(kb);
            for (auto& v : va) v = std::abs(rng.normal());
            for (auto& v : vb) v = std::abs(rng.normal());
            WeightStore w1(n), w2(n);
            w1.scatter(ia, va);
            w1.scatter(ib, vb);
            w2.scatter(ib, vb);
            w2.scatter(ia, va);
            CHECK(w1.values() == w2.values());
        }
    }

    TEST_CASE("csv export carries index, weight and the noisy flag") {
        WeightStore ws(3);
        ws.scatter({1}, Vec{0.5});
        std::vector<bool> noisy = {false, true, false};
        std::ostringstream os;
        ws.write_csv(os, &noisy);
        CHECK(os.str() == "index,weight,is_noisy\n0,1,0\n1,0.5,1\n2,1,0\n");
    }
}
