#include "mediogrid/sim_config.hpp"

#include "mediogrid/config_text.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace mediogrid
{
    namespace
    {
        Bytes megabytes_key(KeyReader &keys, const std::string &key, Bytes fallback, int line)
        {
            auto mb = keys.number(key);
            if (!mb)
                return fallback;
            if (!(*mb > 0.0))
                throw ConfigError(line, key + " must be positive");
            return static_cast<Bytes>(std::llround(*mb * static_cast<double>(kBytesPerMB)));
        }

        void no_directives(const ConfigSection &s)
        {
            for (const auto &line : s.lines)
            {
                if (!line.directive.empty())
                    throw ConfigError(line.number, "unexpected directive '" + line.directive + "' in [" + s.kind + "]");
            }
        }

        void single(const ConfigSection &s, bool &seen)
        {
            if (seen)
                throw ConfigError(s.number, "duplicate [" + s.kind + "] section");
            if (!s.args.empty())
                throw ConfigError(s.number, "[" + s.kind + "] takes no arguments");
            seen = true;
        }
    } // namespace

    SimConfig load_sim_config(std::string_view text)
    {
        SimConfig config;
        config.topology = load_topology(text);

        bool seen_replication = false, seen_ingest = false, seen_sched = false, seen_monitor = false;
        int ingest_line = 0;
        for (const auto &s : parse_config_sections(text))
        {
            if (s.kind == "replication")
            {
                single(s, seen_replication);
                ReplicationPolicy policy;
                for (const auto &line : s.lines)
                {
                    if (line.directive.empty())
                        continue;
                    if (line.directive != "target" || !line.args.empty() || line.pairs.size() != 1)
                        throw ConfigError(line.number, "expected 'target <cluster>=<node>'");
                    const auto &[cluster, node] = line.pairs.front();
                    if (node.empty())
                        throw ConfigError(line.number, "target needs a node");
                    if (!policy.targets.emplace(cluster, node).second)
                        throw ConfigError(line.number, "duplicate target for cluster '" + cluster + "'");
                }
                KeyReader keys(s);
                auto acquisition = keys.text("acquisition");
                if (!acquisition)
                    throw ConfigError(s.number, "[replication] requires acquisition=<node>");
                policy.acquisition_node = *acquisition;
                if (auto p = keys.integer("parallelism"))
                    policy.parallelism = static_cast<int>(*p);
                if (auto f = keys.flag("fanout"))
                    policy.intra_fanout = *f;
                if (auto vo = keys.text("vo"))
                    policy.vo = *vo;
                keys.reject_unknown();
                try
                {
                    validate(policy, config.topology);
                }
                catch (const ReplicationError &e)
                {
                    throw ConfigError(s.number, e.what());
                }
                config.policy = std::move(policy);
            }
            else if (s.kind == "ingest")
            {
                single(s, seen_ingest);
                no_directives(s);
                ingest_line = s.number;
                KeyReader keys(s);
                const auto areas = keys.integer("areas").value_or(1);
                if (areas < 0)
                    throw ConfigError(s.number, "areas must be non-negative");
                config.ingest.areas = numbered_areas(static_cast<int>(areas));
                if (auto rate = keys.integer("rate_per_day"))
                {
                    if (*rate < 1)
                        throw ConfigError(s.number, "rate_per_day must be at least 1");
                    config.ingest.granules_per_area_per_day = static_cast<int>(*rate);
                }
                auto &sizes = config.ingest.sizes;
                sizes.size_250m = megabytes_key(keys, "size_250m_mb", sizes.size_250m, s.number);
                sizes.size_500m = megabytes_key(keys, "size_500m_mb", sizes.size_500m, s.number);
                sizes.size_1km = megabytes_key(keys, "size_1km_mb", sizes.size_1km, s.number);
                keys.reject_unknown();
            }
            else if (s.kind == "sched")
            {
                single(s, seen_sched);
                no_directives(s);
                KeyReader keys(s);
                if (auto a = keys.number("alpha"))
                {
                    if (!(*a > 0.0 && *a <= 1.0))
                        throw ConfigError(s.number, "alpha must lie in (0, 1]");
                    config.sched.alpha = *a;
                }
                if (auto p = keys.integer("p_default"))
                {
                    if (*p < 1)
                        throw ConfigError(s.number, "p_default must be at least 1");
                    config.sched.p_default = static_cast<int>(*p);
                }
                if (auto r = keys.integer("requests_per_day"))
                {
                    if (*r < 0)
                        throw ConfigError(s.number, "requests_per_day must be non-negative");
                    config.sched.requests_per_day = static_cast<int>(*r);
                }
                if (auto st = keys.integer("pipeline_stages"))
                {
                    if (*st < 1)
                        throw ConfigError(s.number, "pipeline_stages must be at least 1");
                    config.sched.pipeline_stages = static_cast<int>(*st);
                }
                if (auto vo = keys.text("vo"))
                    config.sched.vo = *vo;
                keys.reject_unknown();
            }
            else if (s.kind == "monitor")
            {
                single(s, seen_monitor);
                no_directives(s);
                KeyReader keys(s);
                if (auto period = keys.number("period_s"))
                {
                    if (*period < 0.0)
                        throw ConfigError(s.number, "period_s must be non-negative");
                    config.monitor.period = *period;
                }
                if (auto loss = keys.number("loss"))
                {
                    if (!(*loss >= 0.0 && *loss <= 1.0))
                        throw ConfigError(s.number, "loss must lie in [0, 1]");
                    config.monitor.loss_probability = *loss;
                }
                keys.reject_unknown();
            }
        }

        if (seen_ingest && !config.ingest.areas.empty() && !config.policy)
            throw ConfigError(ingest_line, "[ingest] needs a [replication] section naming the acquisition node");
        if (!seen_ingest)
            config.ingest.areas.clear();
        return config;
    }

    std::string read_text_file(const std::string &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw std::runtime_error("cannot open '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }
} // namespace mediogrid
