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

#include "rscran/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rscran
{

std::string to_string(SweepVar var)
{
    switch (var)
    {
    case SweepVar::Backhaul:
        return "backhaul";
    case SweepVar::Power:
        return "power";
    case SweepVar::Users:
        return "users";
    case SweepVar::Mu:
        return "mu";
    }
    return "unknown";
}

SweepVar sweep_var_from_string(const std::string &name)
{
    if (name == "backhaul")
        return SweepVar::Backhaul;
    if (name == "power")
        return SweepVar::Power;
    if (name == "users")
        return SweepVar::Users;
    if (name == "mu")
        return SweepVar::Mu;
    throw std::invalid_argument("unknown sweep variable: " + name);
}

void SweepSpec::validate() const
{
    if (realizations < 1)
        throw std::invalid_argument("realizations must be >= 1");
    if (values.empty())
        throw std::invalid_argument("sweep values must be non-empty");
    if (!std::is_sorted(values.begin(), values.end()))
        throw std::invalid_argument("sweep values must be sorted ascending");
    if (schemes.empty())
        throw std::invalid_argument("schemes must be non-empty");
    base.validate();
}

namespace
{

IcaParams ica_params_from_json(const nlohmann::json &j)
{
    IcaParams p;
    auto get = [&j](const char *key, auto &field) {
        if (j.contains(key))
            field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("rho1", p.rho1);
    get("rho2", p.rho2);
    get("theta0", p.theta0);
    get("delta", p.delta);
    get("xi", p.xi);
    get("betaExponent", p.beta_exponent);
    get("maxIterations", p.max_iterations);
    get("stationarityTol", p.stationarity_tol);
    get("solverTol", p.solver_tol);
    get("gammaFloor", p.gamma_floor);
    get("gammaAnchorFloor", p.gamma_anchor_floor);
    p.validate();
    return p;
}

CmdSelectParams cmd_params_from_json(const nlohmann::json &j)
{
    CmdSelectParams p;
    if (j.contains("mu"))
        p.mu = j.at("mu").get<double>();
    if (j.contains("dLayers"))
        p.d_layers = j.at("dLayers").get<int>();
    if (j.contains("maxPhi"))
        p.max_phi = j.at("maxPhi").get<int>();
    p.validate();
    return p;
}

SchemeParams scheme_params_from_json(const nlohmann::json &j)
{
    SchemeParams p;
    if (j.contains("ica"))
        p.ica = ica_params_from_json(j.at("ica"));
    if (j.contains("cmd"))
        p.cmd = cmd_params_from_json(j.at("cmd"));
    if (j.contains("staticClusterSize"))
        p.static_cluster_size = j.at("staticClusterSize").get<int>();
    if (j.contains("eps1DbmHz"))
        p.eps1_dbm_hz = j.at("eps1DbmHz").get<double>();
    if (j.contains("eps2DbmHz"))
        p.eps2_dbm_hz = j.at("eps2DbmHz").get<double>();
    return p;
}

void check_schema_version(const nlohmann::json &j)
{
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kConfigSchemaVersion)
        throw std::runtime_error("unsupported config schema_version");
}

} // namespace

SchemeParams scheme_params_from_json_text(const std::string &text)
{
    const auto j = nlohmann::json::parse(text);
    check_schema_version(j);
    return scheme_params_from_json(j);
}

SweepSpec SweepSpec::from_json_text(const std::string &text)
{
    const auto j = nlohmann::json::parse(text);
    check_schema_version(j);
    SweepSpec spec;
    if (j.contains("network"))
        spec.base = NetworkConfig::from_json_text(j.at("network").dump());
    spec.params = scheme_params_from_json(j);
    if (!j.contains("sweep"))
        throw std::runtime_error("sweep spec requires a \"sweep\" section");
    const auto &s = j.at("sweep");
    spec.variable = sweep_var_from_string(s.at("variable").get<std::string>());
    spec.values = s.at("values").get<std::vector<double>>();
    for (const auto &name : s.at("schemes"))
        spec.schemes.push_back(scheme_from_string(name.get<std::string>()));
    if (s.contains("realizations"))
        spec.realizations = s.at("realizations").get<int>();
    if (s.contains("outPath"))
        spec.out_path = s.at("outPath").get<std::string>();
    spec.validate();
    return spec;
}

SweepSpec SweepSpec::from_json_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open sweep spec: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string csv_header()
{
    return "sweep_var,value,scheme,mu,seed,sum_rate_mbps,private_rate_mbps,common_rate_mbps,"
           "iterations_alg2,iterations_alg3,feasible";
}

namespace
{
std::string fmt(double v, const char *spec_fmt = "%.6f")
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec_fmt, v);
    return buf;
}
} // namespace

std::string to_csv_line(const SweepRow &r)
{
    std::ostringstream os;
    os << r.sweep_var << ',' << fmt(r.value, "%g") << ',' << r.scheme << ','
       << fmt(r.mu, "%g") << ',' << r.seed << ',' << fmt(r.sum_rate_mbps) << ','
       << fmt(r.private_rate_mbps) << ',' << fmt(r.common_rate_mbps) << ','
       << fmt(r.iterations_alg2, "%g") << ',' << fmt(r.iterations_alg3, "%g") << ','
       << r.feasible;
    return os.str();
}

void write_csv(const std::vector<SweepRow> &rows, const std::string &path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open output file: " + path);
    out << csv_header() << '\n';
    for (const auto &r : rows)
        out << to_csv_line(r) << '\n';
}

std::vector<SweepRow> read_csv(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open csv: " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty csv: " + path);
    if (line != csv_header())
        throw std::runtime_error("unexpected csv header in " + path);
    std::vector<SweepRow> rows;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string field;
        SweepRow r;
        auto next = [&]() {
            if (!std::getline(ss, field, ','))
                throw std::runtime_error("malformed csv row: " + line);
            return field;
        };
        r.sweep_var = next();
        r.value = std::stod(next());
        r.scheme = next();
        r.mu = std::stod(next());
        r.seed = std::stoll(next());
        r.sum_rate_mbps = std::stod(next());
        r.private_rate_mbps = std::stod(next());
        r.common_rate_mbps = std::stod(next());
        r.iterations_alg2 = std::stod(next());
        r.iterations_alg3 = std::stod(next());
        r.feasible = std::stoll(next());
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace
{

NetworkConfig apply_sweep_value(const SweepSpec &spec, double value)
{
    NetworkConfig cfg = spec.base;
    switch (spec.variable)
    {
    case SweepVar::Backhaul:
        cfg.backhaul_capacity_mbps = value;
        break;
    case SweepVar::Power:
        cfg.p_max_dbm = value;
        break;
    case SweepVar::Users:
        cfg.num_users = static_cast<int>(value);
        break;
    case SweepVar::Mu:
        break;
    }
    return cfg;
}

} // namespace

std::vector<SweepRow> run_sweep(const SweepSpec &spec)
{
    spec.validate();
    std::vector<SweepRow> rows;
    const std::string var_name = to_string(spec.variable);

    for (double value : spec.values)
    {
        for (Scheme scheme : spec.schemes)
        {
            NetworkConfig cfg = apply_sweep_value(spec, value);
            SchemeParams params = spec.params;
            if (spec.variable == SweepVar::Mu && scheme_is_rs(scheme))
                params.cmd.mu = value;

            std::vector<SweepRow> group;
            for (int r = 0; r < spec.realizations; ++r)
            {
                cfg.rng_seed = spec.base.rng_seed + static_cast<std::uint64_t>(r);
                const Topology topo = build_topology(cfg);
                Rng rng(cfg.rng_seed);
                const ChannelState h = generate_channels(cfg, topo, rng);
                const RunResult result = run_scheme(scheme, h, cfg, params);

                SweepRow row;
                row.sweep_var = var_name;
                row.value = value;
                row.scheme = to_string(scheme);
                row.mu = result.mu;
                row.seed = static_cast<long long>(cfg.rng_seed);
                row.sum_rate_mbps = result.report.weighted_sum / 1e6;
                row.private_rate_mbps = arma::sum(result.report.rate_private) / 1e6;
                row.common_rate_mbps = arma::sum(result.report.rate_common) / 1e6;
                row.iterations_alg2 = result.iterations_alg2;
                row.iterations_alg3 = result.iterations_alg3;
                row.feasible = result.feasible ? 1 : 0;
                group.push_back(std::move(row));
            }
            std::sort(group.begin(), group.end(),
                      [](const SweepRow &a, const SweepRow &b) { return a.seed < b.seed; });

            // Aggregates over feasible runs. The mean row always follows its
            // group; the standard-deviation row appears once two or more
            // feasible runs exist. The mean row's feasible column carries the
            // feasible-run count, so the rejection count is group size minus
            // that value.
            SweepRow mean = group.front(), stddev = group.front();
            mean.seed = -1;
            stddev.seed = -2;
            std::vector<const SweepRow *> ok;
            for (const auto &g : group)
                if (g.feasible)
                    ok.push_back(&g);
            auto agg = [&](auto field) {
                double m = 0.0, s = 0.0;
                for (const auto *g : ok)
                    m += field(*g);
                if (!ok.empty())
                    m /= static_cast<double>(ok.size());
                if (ok.size() > 1)
                {
                    for (const auto *g : ok)
                        s += std::pow(field(*g) - m, 2);
                    s = std::sqrt(s / static_cast<double>(ok.size() - 1));
                }
                return std::pair<double, double>(m, s);
            };
            auto [m_sum, s_sum] = agg([](const SweepRow &g) { return g.sum_rate_mbps; });
            auto [m_p, s_p] = agg([](const SweepRow &g) { return g.private_rate_mbps; });
            auto [m_c, s_c] = agg([](const SweepRow &g) { return g.common_rate_mbps; });
            auto [m_i2, s_i2] = agg([](const SweepRow &g) { return g.iterations_alg2; });
            auto [m_i3, s_i3] = agg([](const SweepRow &g) { return g.iterations_alg3; });
            mean.sum_rate_mbps = m_sum;
            mean.private_rate_mbps = m_p;
            mean.common_rate_mbps = m_c;
            mean.iterations_alg2 = m_i2;
            mean.iterations_alg3 = m_i3;
            mean.feasible = static_cast<long long>(ok.size());
            stddev.sum_rate_mbps = s_sum;
            stddev.private_rate_mbps = s_p;
            stddev.common_rate_mbps = s_c;
            stddev.iterations_alg2 = s_i2;
            stddev.iterations_alg3 = s_i3;
            stddev.feasible = static_cast<long long>(ok.size());

            rows.insert(rows.end(), group.begin(), group.end());
            rows.push_back(std::move(mean));
            if (ok.size() > 1)
                rows.push_back(std::move(stddev));
        }
    }

    std::sort(rows.begin(), rows.end(), [](const SweepRow &a, const SweepRow &b) {
        if (a.value != b.value)
            return a.value < b.value;
        if (a.scheme != b.scheme)
            return a.scheme < b.scheme;
        return a.seed < b.seed;
    });

    if (!spec.out_path.empty())
        write_csv(rows, spec.out_path);
    return rows;
}

std::vector<GainRow> summarize(const std::vector<SweepRow> &rows)
{
    // baseline and per-scheme means come from the aggregate rows (seed == -1)
    std::map<double, double> baseline;
    std::map<std::pair<double, std::string>, double> means;
    for (const auto &r : rows)
    {
        if (r.seed != -1)
            continue;
        means[{r.value, r.scheme}] = r.sum_rate_mbps;
        if (r.scheme == to_string(Scheme::StaticTIN))
            baseline[r.value] = r.sum_rate_mbps;
    }
    if (baseline.empty())
        throw std::runtime_error("summarize: static-tin baseline missing from csv");

    std::vector<GainRow> gains;
    for (const auto &[key, mean] : means)
    {
        const auto &[value, scheme] = key;
        if (scheme == to_string(Scheme::StaticTIN))
            continue;
        auto it = baseline.find(value);
        if (it == baseline.end())
            throw std::runtime_error("summarize: static-tin baseline missing for value " +
                                     std::to_string(value));
        GainRow g;
        g.value = value;
        g.scheme = scheme;
        if (it->second > 0.0)
        {
            g.gain_pct = 100.0 * (mean / it->second - 1.0);
            g.valid = true;
        }
        gains.push_back(std::move(g));
    }
    return gains;
}

std::string gains_to_csv(const std::vector<GainRow> &gains)
{
    std::ostringstream os;
    os << "value,scheme,gain_pct_vs_static_tin\n";
    for (const auto &g : gains)
    {
        os << fmt(g.value, "%g") << ',' << g.scheme << ',';
        if (g.valid)
            os << fmt(g.gain_pct, "%.4f");
        else
            os << "error:zero-baseline";
        os << '\n';
    }
    return os.str();
}

} // namespace rscran
