#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace persona {

// Counter-based deterministic generator (splitmix64 over a mixed
// seed/stream/counter state). Substreams are independent: draws for
// stream k never depend on how many values other streams consumed,
// so adding customers never perturbs earlier customers' data.
//
// All distribution mappings are hand-rolled so output is bit-identical
// across platforms and standard library versions.
class Rng {
public:
    Rng(uint64_t seed, uint64_t stream = 0);

    // Derive an independent substream (e.g. one per customer).
    Rng substream(uint64_t stream) const;

    uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n);
    // Standard normal via Box-Muller (consumes two uniforms per pair).
    double normal();
    double normal(double mean, double stddev);
    // exp(normal(mu, sigma)).
    double lognormal(double mu, double sigma);
    bool bernoulli(double p);
    // Index drawn from an (unnormalized is fine) weight vector.
    int categorical(std::span<const double> weights);
    // Knuth's method; intended for small lambda.
    int poisson(double lambda);

    // Fisher-Yates over indices 0..n-1.
    std::vector<size_t> permutation(size_t n);

private:
    uint64_t seed_;
    uint64_t stream_;
    uint64_t counter_ = 0;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace persona
