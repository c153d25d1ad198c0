/*
 * Copyright 2026 The dispclutter Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DISPCLUTTER_RNG_HPP
#define DISPCLUTTER_RNG_HPP

#include <cstdint>
#include <random>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "dispclutter/core.hpp"

namespace dispclutter {

/// Stream identity: algorithm "splitmix64-keyed mt19937_64 + boost ziggurat normal".
///
/// Realization `i` of a run with seed `s` draws from its own engine seeded with
/// splitmix64(splitmix64(s) ^ splitmix64(i + golden)). mt19937_64 and the Boost
/// ziggurat normal are both fully specified in source, so a seed reproduces the
/// same numbers on any conforming platform; std::normal_distribution is not.
inline constexpr const char* kRngAlgorithm = "splitmix64/mt19937_64/boost-ziggurat-normal";

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class SeedStream {
public:
    explicit SeedStream(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Engine seed for the sub-stream of realization `index`.
    std::uint64_t substream_seed(std::uint64_t index) const noexcept {
        return splitmix64(splitmix64(seed_) ^ splitmix64(index + 0x9E3779B97F4A7C15ULL));
    }

    std::mt19937_64 engine(std::uint64_t index) const { return std::mt19937_64(substream_seed(index)); }

    /// `n` standard normal deviates from sub-stream `index`.
    RealVector standard_normals(std::uint64_t index, Eigen::Index n) const {
        auto eng = engine(index);
        boost::random::normal_distribution<double> normal(0.0, 1.0);
        RealVector z(n);
        for (Eigen::Index k = 0; k < n; ++k) z[k] = normal(eng);
        return z;
    }

    std::string tag(std::uint64_t index) const {
        return std::to_string(seed_) + ":" + std::to_string(index);
    }

private:
    std::uint64_t seed_;
};

}  // namespace dispclutter

#endif  // DISPCLUTTER_RNG_HPP
