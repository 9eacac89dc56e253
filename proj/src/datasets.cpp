#include "hwaware/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "hwaware/rng.hpp"

namespace hwaware {

void LabeledSet::validate() const {
    if (points.rows() != labels.size() || (points.cols() != 2 && !labels.empty())) {
        throw std::invalid_argument("labeled set: points must be n x 2 with n labels");
    }
    for (auto l : labels) {
        if (l > 1) throw std::invalid_argument("labeled set: labels must be 0 or 1");
    }
}

LabeledSet LabeledSet::subset(std::size_t begin, std::size_t end) const {
    if (begin > end || end > size()) throw std::out_of_range("labeled set: bad subset range");
    LabeledSet out{Matrix(end - begin, points.cols()), {}};
    for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t c = 0; c < points.cols(); ++c) out.points(i - begin, c) = points(i, c);
        out.labels.push_back(labels[i]);
    }
    return out;
}

LabeledSet make_half_moons(std::size_t n, double noise_std, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("make_half_moons: n must be >= 2");
    if (!(noise_std >= 0.0)) throw std::invalid_argument("make_half_moons: noise_std must be >= 0");
    Rng rng(seed);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::normal_distribution<double> noise(0.0, 1.0);

    const std::size_t n0 = (n + 1) / 2;
    Matrix raw(n, 2);
    std::vector<std::uint8_t> raw_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = angle(rng);
        const bool upper = i < n0;
        raw(i, 0) = upper ? std::cos(t) : 1.0 - std::cos(t);
        raw(i, 1) = upper ? std::sin(t) : 0.5 - std::sin(t);
        raw_labels[i] = upper ? 0 : 1;
        if (noise_std > 0.0) {
            raw(i, 0) += noise_std * noise(rng);
            raw(i, 1) += noise_std * noise(rng);
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    LabeledSet set{Matrix(n, 2), std::vector<std::uint8_t>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        set.points(i, 0) = raw(order[i], 0);
        set.points(i, 1) = raw(order[i], 1);
        set.labels[i] = raw_labels[order[i]];
    }
    return set;
}

std::pair<LabeledSet, LabeledSet> split(const LabeledSet& set, std::size_t n_train) {
    if (n_train > set.size()) throw std::invalid_argument("split: n_train exceeds set size");
    return {set.subset(0, n_train), set.subset(n_train, set.size())};
}

void write_csv(const LabeledSet& set, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "x,y,label\n";
    for (std::size_t i = 0; i < set.size(); ++i) {
        out << set.points(i, 0) << ',' << set.points(i, 1) << ',' << int(set.labels[i]) << '\n';
    }
}

}  // namespace hwaware
