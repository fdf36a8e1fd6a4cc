// rscran: downlink C-RAN rate-splitting simulator and optimization library
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <complex>
#include <cstdint>

namespace rscran
{

// Self-contained generator (xoshiro256++ seeded via splitmix64, Box-Muller
// normals). Channel realizations must be bit-identical for a given seed, so
// the implementation-defined std:: distributions are avoided on purpose.
class Rng
{
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform on [0, 1)
    double uniform();

    /// Uniform on [lo, hi)
    double uniform(double lo, double hi);

    /// Uniform integer on {0, 1, ..., n-1}
    std::uint64_t uniform_int(std::uint64_t n);

    /// Standard normal
    double normal();

    /// Circularly-symmetric complex normal with unit variance, CN(0, 1)
    std::complex<double> normal_complex();

  private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace rscran
