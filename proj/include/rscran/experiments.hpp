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

#include <string>
#include <vector>

#include "rscran/algorithms.hpp"

namespace rscran
{

inline constexpr int kConfigSchemaVersion = 1;

enum class SweepVar
{
    Backhaul, ///< backhaul capacity, Mbps
    Power,    ///< max transmit power, dBm
    Users,    ///< user count
    Mu,       ///< weak-user percentile for RS-CMD schemes
};

std::string to_string(SweepVar var);
SweepVar sweep_var_from_string(const std::string &name);

struct SweepSpec
{
    SweepVar variable = SweepVar::Backhaul;
    std::vector<double> values;
    std::vector<Scheme> schemes;
    int realizations = 10;
    NetworkConfig base;
    SchemeParams params;
    std::string out_path;

    void validate() const;
    static SweepSpec from_json_file(const std::string &path);
    static SweepSpec from_json_text(const std::string &text);
};

/// One CSV row. Aggregate rows reuse the schema with sentinel seeds: -1 is
/// the mean over feasible runs (feasible column = feasible-run count), -2 the
/// sample standard deviation (present when two or more runs were feasible).
struct SweepRow
{
    std::string sweep_var;
    double value = 0.0;
    std::string scheme;
    double mu = 0.0;
    long long seed = 0;
    double sum_rate_mbps = 0.0;
    double private_rate_mbps = 0.0;
    double common_rate_mbps = 0.0;
    double iterations_alg2 = 0.0;
    double iterations_alg3 = 0.0;
    long long feasible = 0;
};

std::string csv_header();
std::string to_csv_line(const SweepRow &row);
void write_csv(const std::vector<SweepRow> &rows, const std::string &path);
std::vector<SweepRow> read_csv(const std::string &path);

/// Runs every (value, scheme, realization) cell with seed = base seed +
/// realization index and returns data rows plus aggregates, sorted by
/// (value, scheme, seed). Writes out_path when set.
std::vector<SweepRow> run_sweep(const SweepSpec &spec);

/// Percentage gain of each scheme's mean sum-rate over the static-tin
/// baseline at the same sweep value.
struct GainRow
{
    double value = 0.0;
    std::string scheme;
    double gain_pct = 0.0;
    bool valid = false; ///< false when the baseline mean is zero
};

std::vector<GainRow> summarize(const std::vector<SweepRow> &rows);
std::string gains_to_csv(const std::vector<GainRow> &gains);

/// Parses the full run/sweep JSON config (network/ica/cmd sections)
SchemeParams scheme_params_from_json_text(const std::string &text);

} // namespace rscran
