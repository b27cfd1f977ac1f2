#include "mediogrid/monitor.hpp"

#include "mediogrid/topology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>

namespace mediogrid
{
    namespace
    {
        constexpr std::string_view kMagic = "MG1";
        constexpr std::size_t kFieldCount = 8;

        void check_field(std::string_view value, std::string_view what)
        {
            if (value.empty())
                throw CodecError(std::string(what) + " must not be empty");
            if (value.find_first_of("|\n\r") != std::string_view::npos)
                throw CodecError(std::string(what) + " contains a reserved character");
        }

        double parse_number(std::string_view text, std::string_view what)
        {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
                throw CodecError("unparseable " + std::string(what) + " '" + std::string(text) + "'");
            return v;
        }
    } // namespace

    std::string encode(const MetricSample &s)
    {
        if (!std::isfinite(s.ts) || s.ts < 0.0)
            throw CodecError("timestamp must be finite and non-negative");
        if (!std::isfinite(s.value))
            throw CodecError("value must be finite");
        check_field(s.node, "node");
        check_field(s.vo, "vo");
        check_field(s.name, "name");
        check_field(s.unit, "unit");
        if (s.job)
        {
            check_field(*s.job, "job");
            if (*s.job == "-")
                throw CodecError("job id '-' is reserved");
        }

        char ts[64];
        char value[64];
        std::snprintf(ts, sizeof ts, "%.9f", s.ts);
        std::snprintf(value, sizeof value, "%.17g", s.value);

        std::string out;
        out.reserve(64 + s.node.size() + s.vo.size() + s.name.size());
        out += kMagic;
        out += '|';
        out += ts;
        out += '|';
        out += s.node;
        out += '|';
        out += s.vo;
        out += '|';
        out += s.job ? *s.job : std::string("-");
        out += '|';
        out += s.name;
        out += '|';
        out += value;
        out += '|';
        out += s.unit;
        out += '\n';
        return out;
    }

    MetricSample decode(std::string_view datagram)
    {
        if (datagram.empty() || datagram.back() != '\n')
            throw CodecError("datagram must end with a newline");
        datagram.remove_suffix(1);
        if (datagram.find_first_of("\n\r") != std::string_view::npos)
            throw CodecError("datagram spans more than one line");

        std::array<std::string_view, kFieldCount> fields;
        std::size_t count = 0;
        std::size_t start = 0;
        while (true)
        {
            auto bar = datagram.find('|', start);
            if (count == kFieldCount)
                throw CodecError("too many fields");
            fields[count++] = datagram.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start);
            if (bar == std::string_view::npos)
                break;
            start = bar + 1;
        }
        if (count != kFieldCount)
            throw CodecError("expected 8 fields, got " + std::to_string(count));
        if (fields[0] != kMagic)
            throw CodecError("bad magic '" + std::string(fields[0]) + "'");

        MetricSample s;
        s.ts = parse_number(fields[1], "timestamp");
        if (s.ts < 0.0)
            throw CodecError("negative timestamp");
        check_field(fields[2], "node");
        check_field(fields[3], "vo");
        check_field(fields[4], "job");
        check_field(fields[5], "name");
        check_field(fields[7], "unit");
        s.node = fields[2];
        s.vo = fields[3];
        if (fields[4] != "-")
            s.job = std::string(fields[4]);
        s.name = fields[5];
        s.value = parse_number(fields[6], "value");
        s.unit = fields[7];
        return s;
    }

    MetricDictionary::MetricDictionary()
        : names_{std::string(metric::ftp_in_bytes), std::string(metric::ftp_out_bytes),  std::string(metric::load),
                 std::string(metric::cpu_pct),      std::string(metric::mem_mb),         std::string(metric::dropped_granules),
                 std::string(metric::replica_skipped)}
    {
    }

    void MetricDictionary::add(std::string name)
    {
        check_field(name, "metric name");
        names_.insert(std::move(name));
    }

    bool MetricDictionary::contains(std::string_view name) const { return names_.find(name) != names_.end(); }

    std::string_view to_string(GroupBy g) noexcept
    {
        switch (g)
        {
        case GroupBy::node: return "node";
        case GroupBy::vo: return "vo";
        case GroupBy::cluster: return "cluster";
        }
        return "node";
    }

    std::string_view to_string(Aggregation a) noexcept
    {
        switch (a)
        {
        case Aggregation::sum: return "sum";
        case Aggregation::avg: return "avg";
        case Aggregation::rate: return "rate";
        }
        return "sum";
    }

    std::optional<GroupBy> parse_group_by(std::string_view text) noexcept
    {
        if (text == "node")
            return GroupBy::node;
        if (text == "vo")
            return GroupBy::vo;
        if (text == "cluster")
            return GroupBy::cluster;
        return std::nullopt;
    }

    std::optional<Aggregation> parse_aggregation(std::string_view text) noexcept
    {
        if (text == "sum")
            return Aggregation::sum;
        if (text == "avg")
            return Aggregation::avg;
        if (text == "rate")
            return Aggregation::rate;
        return std::nullopt;
    }

    MetricRepository::MetricRepository(MetricDictionary dictionary) : dictionary_(std::move(dictionary)) {}

    void MetricRepository::append(MetricSample sample)
    {
        if (!dictionary_.contains(sample.name))
            throw MonitorError("unknown metric '" + sample.name + "'");
        const std::size_t idx = log_.size();
        auto &series = index_[sample.name];
        series[{sample.node, sample.vo}].push_back(idx);
        log_.push_back(std::move(sample));
    }

    const std::map<std::pair<NodeId, std::string>, std::vector<std::size_t>> *
    MetricRepository::series(std::string_view metric) const
    {
        auto it = index_.find(metric);
        return it == index_.end() ? nullptr : &it->second;
    }

    MetricRepository MetricRepository::replay(std::string_view log_text, MetricDictionary dictionary)
    {
        MetricRepository repo(std::move(dictionary));
        std::size_t line = 0;
        while (!log_text.empty())
        {
            ++line;
            auto nl = log_text.find('\n');
            auto len = nl == std::string_view::npos ? log_text.size() : nl + 1;
            try
            {
                repo.append(decode(log_text.substr(0, len)));
            }
            catch (const MonitorError &e)
            {
                throw MonitorError("metric log line " + std::to_string(line) + ": " + e.what());
            }
            log_text.remove_prefix(len);
        }
        return repo;
    }

    std::vector<AccountingRow> accounting(const MetricRepository &repo, const AccountingQuery &query,
                                          const GridTopology *topology)
    {
        if (!repo.dictionary().contains(query.metric))
            throw MonitorError("unknown metric '" + query.metric + "'");
        if (!(query.t0 < query.t1))
            throw MonitorError("empty window interval");
        if (query.group_by == GroupBy::cluster && topology == nullptr)
            throw MonitorError("cluster grouping needs a topology");

        struct Acc
        {
            double sum = 0.0;
            std::uint64_t count = 0;
        };
        std::map<std::string, Acc> groups;

        if (const auto *series = repo.series(query.metric))
        {
            const auto &log = repo.samples();
            for (const auto &[key, indices] : *series)
            {
                std::string group;
                switch (query.group_by)
                {
                case GroupBy::node: group = key.first; break;
                case GroupBy::vo: group = key.second; break;
                case GroupBy::cluster:
                    try
                    {
                        group = topology->cluster_of(key.first).name;
                    }
                    catch (const TopologyError &e)
                    {
                        throw MonitorError(e.what());
                    }
                    break;
                }
                for (auto idx : indices)
                {
                    const auto &s = log[idx];
                    if (s.ts < query.t0 || s.ts >= query.t1)
                        continue;
                    auto &acc = groups[group];
                    acc.sum += s.value;
                    ++acc.count;
                }
            }
        }

        std::vector<AccountingRow> rows;
        rows.reserve(groups.size());
        for (const auto &[group, acc] : groups)
        {
            double value = acc.sum;
            if (query.agg == Aggregation::avg)
                value = acc.sum / static_cast<double>(acc.count);
            else if (query.agg == Aggregation::rate)
                value = acc.sum / (query.t1 - query.t0);
            rows.push_back(AccountingRow{group, value});
        }
        return rows;
    }

    Collector::Collector(MetricDictionary dictionary) : repo_(std::move(dictionary)) {}

    bool Collector::ingest(std::string_view datagram)
    {
        MetricSample sample;
        try
        {
            sample = decode(datagram);
        }
        catch (const CodecError &)
        {
            std::lock_guard lock(mutex_);
            ++decode_errors_;
            return false;
        }

        std::lock_guard lock(mutex_);
        if (!repo_.dictionary().contains(sample.name))
        {
            ++unknown_metrics_;
            return false;
        }
        auto [it, fresh] = last_ts_.try_emplace(sample.node, sample.ts);
        if (!fresh)
        {
            if (sample.ts < it->second)
            {
                ++regressions_;
                return false;
            }
            it->second = sample.ts;
        }
        repo_.append(std::move(sample));
        log_.append(datagram);
        return true;
    }

    std::size_t Collector::size() const
    {
        std::lock_guard lock(mutex_);
        return repo_.size();
    }

    std::uint64_t Collector::decode_errors() const
    {
        std::lock_guard lock(mutex_);
        return decode_errors_;
    }

    std::uint64_t Collector::unknown_metrics() const
    {
        std::lock_guard lock(mutex_);
        return unknown_metrics_;
    }

    std::uint64_t Collector::time_regressions() const
    {
        std::lock_guard lock(mutex_);
        return regressions_;
    }

    std::string Collector::log_text() const
    {
        std::lock_guard lock(mutex_);
        return log_;
    }

    MetricRepository Collector::repository() const
    {
        std::lock_guard lock(mutex_);
        return repo_;
    }

    Agent::Agent(NodeId node, Collector &collector, double loss_probability, RandomStream rng)
        : node_(std::move(node)), collector_(&collector), loss_(loss_probability), rng_(std::move(rng))
    {
        if (!(loss_ >= 0.0 && loss_ <= 1.0))
            throw MonitorError("loss probability must lie in [0, 1]");
    }

    void Agent::emit(const MetricSample &sample)
    {
        MetricSample wire = sample;
        wire.ts = quantize_time(sample.ts);
        const std::string datagram = encode(wire);
        const double draw = rng_.uniform01();
        if (draw < loss_)
        {
            ++lost_;
            return;
        }
        if (collector_->ingest(datagram))
            ++delivered_;
        else
            ++rejected_;
    }

    void JobTree::register_job(JobRecord job)
    {
        if (job.id.empty())
            throw MonitorError("job id must not be empty");
        if (jobs_.count(job.id))
            throw MonitorError("duplicate job '" + job.id + "'");
        if (job.parent)
        {
            if (*job.parent == job.id)
                throw MonitorError("job '" + job.id + "' cannot be its own parent (cycle)");
            auto parent = jobs_.find(*job.parent);
            if (parent == jobs_.end())
                throw MonitorError("unknown parent job '" + *job.parent + "'");
            parent->second.children.push_back(job.id);
        }
        auto id = job.id;
        jobs_.emplace(std::move(id), Entry{std::move(job), {}});
    }

    bool JobTree::contains(std::string_view id) const { return jobs_.find(id) != jobs_.end(); }

    const JobRecord &JobTree::job(std::string_view id) const
    {
        auto it = jobs_.find(id);
        if (it == jobs_.end())
            throw MonitorError("unknown job '" + std::string(id) + "'");
        return it->second.record;
    }

    const std::vector<std::string> &JobTree::children(std::string_view id) const
    {
        auto it = jobs_.find(id);
        if (it == jobs_.end())
            throw MonitorError("unknown job '" + std::string(id) + "'");
        return it->second.children;
    }

    std::vector<std::string> JobTree::subtree(std::string_view id) const
    {
        std::vector<std::string> out{std::string(job(id).id)};
        for (std::size_t i = 0; i < out.size(); ++i)
        {
            for (const auto &child : children(out[i]))
                out.push_back(child);
        }
        return out;
    }

    double job_rollup(const JobTree &tree, const MetricRepository &repo, std::string_view job,
                      std::string_view metric, Seconds t0, Seconds t1)
    {
        if (!(t0 < t1))
            throw MonitorError("empty window interval");
        if (!repo.dictionary().contains(metric))
            throw MonitorError("unknown metric '" + std::string(metric) + "'");
        const auto members = tree.subtree(job);
        const std::set<std::string, std::less<>> wanted(members.begin(), members.end());

        double total = 0.0;
        const auto *series = repo.series(metric);
        if (!series)
            return total;
        const auto &log = repo.samples();
        for (const auto &[key, indices] : *series)
        {
            for (auto idx : indices)
            {
                const auto &s = log[idx];
                if (s.job && s.ts >= t0 && s.ts < t1 && wanted.count(*s.job))
                    total += s.value;
            }
        }
        return total;
    }

    std::array<MetricSample, 3> node_stats_sample(const NodeId &node, int active_sessions, Seconds ts)
    {
        const double load = active_sessions;
        const std::string vo(kSystemVo);
        return {
            MetricSample{ts, node, vo, std::nullopt, std::string(metric::load), load, "sessions"},
            MetricSample{ts, node, vo, std::nullopt, std::string(metric::cpu_pct), std::min(100.0, 10.0 * load), "pct"},
            MetricSample{ts, node, vo, std::nullopt, std::string(metric::mem_mb), 512.0 + 64.0 * load, "MB"},
        };
    }
} // namespace mediogrid
