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

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rscran/experiments.hpp"

namespace
{

std::string slurp(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cmd_run(const std::string &config_path, const std::string &scheme_name, long long seed,
            double mu, const std::string &out_path)
{
    const std::string text = slurp(config_path);
    const auto j = nlohmann::json::parse(text);
    rscran::NetworkConfig cfg = j.contains("network")
                                    ? rscran::NetworkConfig::from_json_text(j.at("network").dump())
                                    : rscran::NetworkConfig{};
    rscran::SchemeParams params = rscran::scheme_params_from_json_text(text);
    if (seed >= 0)
        cfg.rng_seed = static_cast<std::uint64_t>(seed);
    if (mu >= 0.0)
        params.cmd.mu = mu;
    const rscran::Scheme scheme = rscran::scheme_from_string(scheme_name);

    const rscran::Topology topo = rscran::build_topology(cfg);
    rscran::Rng rng(cfg.rng_seed);
    const rscran::ChannelState h = rscran::generate_channels(cfg, topo, rng);
    const rscran::RunResult result = rscran::run_scheme(scheme, h, cfg, params);

    std::cout << "scheme=" << rscran::to_string(result.scheme) << " seed=" << cfg.rng_seed
              << " feasible=" << (result.feasible ? 1 : 0)
              << " sum_rate_mbps=" << result.report.weighted_sum / 1e6
              << " private_mbps=" << arma::sum(result.report.rate_private) / 1e6
              << " common_mbps=" << arma::sum(result.report.rate_common) / 1e6
              << " iters_alg2=" << result.iterations_alg2
              << " iters_alg3=" << result.iterations_alg3 << "\n";
    if (!result.error.empty())
        std::cerr << "note: " << result.error << "\n";

    if (!out_path.empty())
    {
        rscran::SweepRow row;
        row.sweep_var = "single";
        row.value = 0.0;
        row.scheme = rscran::to_string(result.scheme);
        row.mu = result.mu;
        row.seed = static_cast<long long>(cfg.rng_seed);
        row.sum_rate_mbps = result.report.weighted_sum / 1e6;
        row.private_rate_mbps = arma::sum(result.report.rate_private) / 1e6;
        row.common_rate_mbps = arma::sum(result.report.rate_common) / 1e6;
        row.iterations_alg2 = result.iterations_alg2;
        row.iterations_alg3 = result.iterations_alg3;
        row.feasible = result.feasible ? 1 : 0;
        rscran::write_csv({row}, out_path);
    }
    return result.feasible ? 0 : 2;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"rscran: downlink C-RAN rate-splitting simulator"};
    app.require_subcommand(1);

    std::string config_path, out_path, scheme_name = "dynamic-rscmd", spec_path, csv_path;
    long long seed = -1;
    double mu = -1.0;
    int realizations = -1;

    auto *run = app.add_subcommand("run", "run one scenario");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--scheme", scheme_name,
                    "dynamic-rscmd | static-rscmd | dynamic-tin | static-tin");
    run->add_option("--seed", seed, "override rngSeed");
    run->add_option("--mu", mu, "override the weak-user percentile");
    run->add_option("--out", out_path, "write a one-row CSV");

    auto *sweep = app.add_subcommand("sweep", "run a sweep spec");
    sweep->add_option("--spec", spec_path, "JSON sweep spec")->required();
    sweep->add_option("--out", out_path, "override the spec output path");
    sweep->add_option("--seed", seed, "override the base seed");
    sweep->add_option("--realizations", realizations, "override the realization count");

    auto *summ = app.add_subcommand("summarize", "gain table vs static-tin");
    summ->add_option("--csv", csv_path, "sweep CSV to summarize")->required();
    summ->add_option("--out", out_path, "write the gain table to a file");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (run->parsed())
            return cmd_run(config_path, scheme_name, seed, mu, out_path);
        if (sweep->parsed())
        {
            rscran::SweepSpec spec = rscran::SweepSpec::from_json_file(spec_path);
            if (!out_path.empty())
                spec.out_path = out_path;
            if (seed >= 0)
                spec.base.rng_seed = static_cast<std::uint64_t>(seed);
            if (realizations > 0)
                spec.realizations = realizations;
            const auto rows = rscran::run_sweep(spec);
            std::cout << "wrote " << rows.size() << " rows";
            if (!spec.out_path.empty())
                std::cout << " to " << spec.out_path;
            std::cout << "\n";
            return 0;
        }
        if (summ->parsed())
        {
            const auto rows = rscran::read_csv(csv_path);
            const std::string table = rscran::gains_to_csv(rscran::summarize(rows));
            if (out_path.empty())
                std::cout << table;
            else
            {
                std::ofstream out(out_path, std::ios::binary);
                if (!out)
                    throw std::runtime_error("cannot open output file: " + out_path);
                out << table;
            }
            return 0;
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
