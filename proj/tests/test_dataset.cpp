#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "flatlab/dataset.hpp"
#include "flatlab/io.hpp"

using namespace flatlab;

namespace {

// independent integer Gaussian elimination for the rank oracle (entries of the
// complete-set differences are 0/±2, exact in integer arithmetic)
int int_rank(std::vector<std::vector<long>> rows) {
    if (rows.empty()) return 0;
    const std::size_t cols = rows[0].size();
    int rank = 0;
    for (std::size_t c = 0; c < cols && rank < static_cast<int>(rows.size()); ++c) {
        std::size_t pivot = rows.size();
        for (std::size_t r = rank; r < rows.size(); ++r)
            if (rows[r][c] != 0) { pivot = r; break; }
        if (pivot == rows.size()) continue;
        std::swap(rows[rank], rows[pivot]);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (static_cast<int>(r) == rank || rows[r][c] == 0) continue;
            const long a = rows[r][c], b = rows[rank][c];
            for (std::size_t j = 0; j < cols; ++j) rows[r][j] = rows[r][j] * b - rows[rank][j] * a;
        }
        ++rank;
    }
    return rank;
}

} // namespace

TEST_CASE("xor samples carry the product label exactly") {
    const auto data = sample_xor(6, 200, 42);
    REQUIRE(data.size() == 200);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.row(i);
        for (double v : x) CHECK((v == 1.0 || v == -1.0));
        CHECK(data.labels[i] == x[0] * x[1]); // exact, not approximate
        if (x[0] == 1.0 && x[1] == 1.0) CHECK(data.labels[i] == 1.0);
        if (x[0] == -1.0 && x[1] == 1.0) CHECK(data.labels[i] == -1.0);
    }
    CHECK_THROWS(sample_xor(1, 10, 0));
}

TEST_CASE("d=2 sampling only ever produces the four enumerated points") {
    const auto cube = enumerate_hypercube(2);
    REQUIRE(cube.size() == 4);
    // lexicographic with -1 < +1: labels (+1, -1, -1, +1)
    CHECK(cube.labels == std::vector<double>{1, -1, -1, 1});
    std::set<std::vector<double>> allowed;
    for (std::size_t i = 0; i < 4; ++i)
        allowed.insert({cube.row(i)[0], cube.row(i)[1], cube.labels[i]});
    const auto data = sample_xor(2, 500, 3);
    for (std::size_t i = 0; i < data.size(); ++i)
        CHECK(allowed.count({data.row(i)[0], data.row(i)[1], data.labels[i]}) == 1);
}

TEST_CASE("hypercube enumeration counts and capacity") {
    double sum = 0;
    for (double y : enumerate_hypercube(2).labels) sum += y;
    CHECK(sum == 0.0);
    const auto c3 = enumerate_hypercube(3);
    CHECK(c3.size() == 8);
    int plus = 0;
    for (double y : c3.labels) plus += y > 0;
    CHECK(plus == 4);
    CHECK(enumerate_hypercube(10).size() == 1024);
    CHECK_THROWS(enumerate_hypercube(23));

    // Monte-Carlo label mean of the d=10 distribution stays near the exhaustive mean 0
    const auto mc = sample_xor(10, 10000, 5);
    double mean = 0;
    for (double y : mc.labels) mean += y;
    mean /= mc.size();
    CHECK(std::abs(mean) < 0.05);
}

TEST_CASE("complete xor set: counts, rank, labels") {
    const auto c4 = build_complete_xor_set(4);
    CHECK(c4.size() == 12); // 4*(d-1)
    const auto c3 = build_complete_xor_set(3);
    CHECK(c3.size() == 8);

    // rank of the tail difference span via independent integer elimination
    std::set<std::vector<double>> tails;
    for (std::size_t i = 0; i < c3.size(); ++i) {
        auto x = c3.row(i);
        tails.insert({x.begin() + 2, x.end()});
    }
    std::vector<std::vector<long>> diffs;
    const auto first = *tails.begin();
    for (auto it = std::next(tails.begin()); it != tails.end(); ++it) {
        std::vector<long> d(first.size());
        for (std::size_t j = 0; j < d.size(); ++j) d[j] = std::lround((*it)[j] - first[j]);
        diffs.push_back(d);
    }
    CHECK(int_rank(diffs) == 1); // d - 2

    for (std::size_t i = 0; i < c4.size(); ++i)
        CHECK(c4.labels[i] == c4.row(i)[0] * c4.row(i)[1]);
    CHECK(is_complete_xor(c4));
    CHECK(is_complete_xor(sample_xor(5, 12, 0)) == false);
    CHECK_THROWS(build_complete_xor_set(2));
}

TEST_CASE("uniform ball sampling: support, labels, radial moment") {
    const int d = 10;
    const auto data = sample_uniform_ball(d, 100000, 11);
    const double R = std::sqrt(static_cast<double>(d));
    double mean_norm2 = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.row(i);
        double n2 = 0;
        for (double v : x) n2 += v * v;
        CHECK(std::sqrt(n2) <= R + 1e-12);
        CHECK(data.labels[i] == doctest::Approx(std::abs(x[0]) - std::abs(x[1])).epsilon(1e-12));
        mean_norm2 += n2;
    }
    mean_norm2 /= data.size();
    // E||x||^2 = d * d/(d+2) for the uniform ball of radius sqrt(d)
    const double expected = d * static_cast<double>(d) / (d + 2);
    CHECK(std::abs(mean_norm2 - expected) / expected < 0.05);
}

TEST_CASE("circle sampling: unit circle coordinates padded to radius R") {
    const auto zero = sample_circle(50, [](double, double) { return 0.0; }, 1.0, 2, 7);
    for (double y : zero.labels) CHECK(y == 0.0);

    const auto data = sample_circle(200, [](double x, double) { return x; }, 3.0, 5, 7);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto x = data.row(i);
        CHECK(std::abs(x[0] * x[0] + x[1] * x[1] - 1.0) < 1e-12);
        double n2 = 0;
        for (double v : x) n2 += v * v;
        CHECK(std::sqrt(n2) == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(data.labels[i] >= -1.0);
        CHECK(data.labels[i] <= 1.0);
    }
    CHECK_THROWS(sample_circle(10, [](double, double) { return 0.0; }, 0.5, 2, 0));
}

TEST_CASE("identical seeds give bit-identical datasets") {
    const auto a = sample_xor(8, 300, 123);
    const auto b = sample_xor(8, 300, 123);
    CHECK(a.inputs == b.inputs);
    CHECK(a.labels == b.labels);
    const auto c = sample_uniform_ball(6, 500, 9);
    const auto e = sample_uniform_ball(6, 500, 9);
    CHECK(c.inputs == e.inputs);
    CHECK(sample_xor(8, 300, 124).inputs != a.inputs);
}

TEST_CASE("dedupe produces distinct rows and respects capacity") {
    const auto data = sample_xor(4, 16, 77, true);
    std::set<std::vector<double>> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
        rows.insert({data.row(i).begin(), data.row(i).end()});
    CHECK(rows.size() == 16);
    CHECK_THROWS(sample_xor(3, 9, 0, true));
}

TEST_CASE("hypercube points satisfy the extreme-point separation margin") {
    const auto data = sample_xor(7, 30, 2, true);
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = 0; j < data.size(); ++j) {
            if (i == j) continue;
            double self = 0, cross = 0;
            for (std::size_t c = 0; c < data.d; ++c) {
                self += data.row(i)[c] * data.row(i)[c];
                cross += data.row(i)[c] * data.row(j)[c];
            }
            CHECK(self - cross >= 2.0);
        }
}

TEST_CASE("csv round trip preserves doubles exactly") {
    const auto data = sample_uniform_ball(4, 25, 31);
    const std::string path = "test_dataset_roundtrip.csv";
    save_dataset_csv(data, path);
    const auto loaded = load_dataset_csv(path);
    CHECK(loaded.d == data.d);
    CHECK(loaded.inputs == data.inputs);
    CHECK(loaded.labels == data.labels);
    std::remove(path.c_str());
}

TEST_CASE("exhaustive test sets below 2^20, monte carlo above") {
    CHECK(make_xor_test_set(8, 0).size() == 256);
    const auto mc = make_xor_test_set(30, 0);
    CHECK(mc.size() == 10000);
    for (std::size_t i = 0; i < 50; ++i)
        CHECK(mc.labels[i] == mc.row(i)[0] * mc.row(i)[1]);
}
