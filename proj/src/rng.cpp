#include "persona/rng.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace persona {

namespace {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

Rng Rng::substream(uint64_t stream) const {
    // Fold the current stream in so nested substreams stay distinct.
    return Rng(seed_, splitmix64(stream_ ^ 0xd2b74407b1ce6e93ULL) + stream);
}

uint64_t Rng::next_u64() {
    uint64_t key = splitmix64(seed_) ^ splitmix64(splitmix64(stream_ ^ 0xa0761d6478bd642fULL));
    return splitmix64(key + counter_++ * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t Rng::uniform_int(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    // Rejection-free multiply-shift is biased for huge n; n here is small.
    return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
}

double Rng::normal() {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

double Rng::normal(double mean, double stddev) { return mean + stddev * normal(); }

double Rng::lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

bool Rng::bernoulli(double p) { return uniform() < p; }

int Rng::categorical(std::span<const double> weights) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("categorical: non-positive weight total");
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
}

int Rng::poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    double l = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
        ++k;
        p *= uniform();
    } while (p > l);
    return k - 1;
}

std::vector<size_t> Rng::permutation(size_t n) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = n; i > 1; --i) {
        size_t j = uniform_int(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

}  // namespace persona
