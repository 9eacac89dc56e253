#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "hwaware/datasets.hpp"

using namespace hwaware;

TEST_CASE("noise-free half moons lie on their arcs") {
    auto set = make_half_moons(400, 0.0, 3);
    REQUIRE(set.size() == 400);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double x = set.points(i, 0), y = set.points(i, 1);
        if (set.labels[i] == 0) {
            CHECK(x * x + y * y == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(y >= 0.0);
        } else {
            const double dx = 1.0 - x, dy = 0.5 - y;
            CHECK(dx * dx + dy * dy == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(y <= 0.5 + 1e-12);
        }
    }
}

TEST_CASE("class balance and smallest set") {
    auto two = make_half_moons(2, 0.1, 1);
    CHECK((two.labels[0] + two.labels[1]) == 1);
    auto odd = make_half_moons(7, 0.1, 1);
    std::size_t zeros = 0;
    for (auto l : odd.labels) zeros += l == 0;
    CHECK(zeros == 4);
    CHECK_THROWS_AS(make_half_moons(1, 0.1, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_half_moons(10, -0.1, 1), std::invalid_argument);
}

TEST_CASE("same seed, same set; labels are shuffled") {
    auto a = make_half_moons(1075, 0.1, 7);
    auto b = make_half_moons(1075, 0.1, 7);
    CHECK(a.points == b.points);
    CHECK(a.labels == b.labels);
    CHECK_FALSE(make_half_moons(1075, 0.1, 8).points == a.points);
    // Not sorted by class.
    std::size_t changes = 0;
    for (std::size_t i = 1; i < a.size(); ++i) changes += a.labels[i] != a.labels[i - 1];
    CHECK(changes > 100);
}

TEST_CASE("noise spread matches the requested std") {
    const double sd = 0.1;
    auto clean = make_half_moons(20000, 0.0, 5);
    auto noisy = make_half_moons(20000, sd, 5);
    // Distance to the class arc is dominated by the radial noise component.
    double ss = 0.0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        const double x = noisy.points(i, 0), y = noisy.points(i, 1);
        const double r = noisy.labels[i] == 0 ? std::hypot(x, y) : std::hypot(1.0 - x, 0.5 - y);
        ss += (r - 1.0) * (r - 1.0);
    }
    CHECK(std::sqrt(ss / noisy.size()) == doctest::Approx(sd).epsilon(0.05));
    CHECK(clean.size() == noisy.size());
}

TEST_CASE("train/test split sizes and contents") {
    auto all = make_half_moons(1075, 0.1, 7);
    auto [train, test] = split(all, 875);
    CHECK(train.size() == 875);
    CHECK(test.size() == 200);
    CHECK(train.points(0, 0) == all.points(0, 0));
    CHECK(test.points(0, 1) == all.points(875, 1));
    CHECK(test.labels.back() == all.labels.back());
    CHECK_THROWS(split(all, 2000));
}

TEST_CASE("write_csv header and row count") {
    auto set = make_half_moons(10, 0.1, 2);
    auto path = std::filesystem::temp_directory_path() / "hwaware_moons.csv";
    write_csv(set, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,y,label");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 10);
    std::filesystem::remove(path);
}
