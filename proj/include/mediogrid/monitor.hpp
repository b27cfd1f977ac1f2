#pragma once

#include "mediogrid/simcore.hpp"
#include "mediogrid/units.hpp"

#include <array>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mediogrid
{
    class GridTopology;

    class MonitorError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class CodecError : public MonitorError
    {
    public:
        using MonitorError::MonitorError;
    };

    namespace metric
    {
        inline constexpr std::string_view ftp_in_bytes = "ftp_in_bytes";
        inline constexpr std::string_view ftp_out_bytes = "ftp_out_bytes";
        inline constexpr std::string_view load = "load";
        inline constexpr std::string_view cpu_pct = "cpu_pct";
        inline constexpr std::string_view mem_mb = "mem_mb";
        inline constexpr std::string_view dropped_granules = "dropped_granules";
        inline constexpr std::string_view replica_skipped = "replica_skipped";
    } // namespace metric

    // VO used for samples that describe a node rather than a user's work.
    inline constexpr std::string_view kSystemVo = "system";

    struct MetricSample
    {
        Seconds ts = 0.0;
        NodeId node;
        std::string vo;
        std::optional<std::string> job;
        std::string name;
        double value = 0.0;
        std::string unit;

        bool operator==(const MetricSample &) const = default;
    };

    using MetricSink = std::function<void(const MetricSample &)>;

    /// Datagram line: `MG1|<ts>|<node>|<vo>|<job or ->|<name>|<value>|<unit>\n`.
    /// Timestamps are written with nine decimals, so encode() expects them on the
    /// nanosecond grid (see quantize_time) for decode() to return them bit-exact.
    std::string encode(const MetricSample &sample);
    MetricSample decode(std::string_view datagram);

    /// Names accepted by the collector: the built-in set plus user metrics.
    class MetricDictionary
    {
    public:
        MetricDictionary();

        void add(std::string name);
        bool contains(std::string_view name) const;
        const std::set<std::string, std::less<>> &names() const noexcept { return names_; }

    private:
        std::set<std::string, std::less<>> names_;
    };

    enum class GroupBy
    {
        node,
        vo,
        cluster,
    };

    enum class Aggregation
    {
        sum,
        avg,
        rate,
    };

    std::string_view to_string(GroupBy g) noexcept;
    std::string_view to_string(Aggregation a) noexcept;
    std::optional<GroupBy> parse_group_by(std::string_view text) noexcept;
    std::optional<Aggregation> parse_aggregation(std::string_view text) noexcept;

    /// Window is half-open: [t0, t1).
    struct AccountingQuery
    {
        std::string metric;
        GroupBy group_by = GroupBy::node;
        Seconds t0 = 0.0;
        Seconds t1 = 0.0;
        Aggregation agg = Aggregation::sum;
    };

    struct AccountingRow
    {
        std::string group;
        double value = 0.0;

        bool operator==(const AccountingRow &) const = default;
    };

    /// Append-only sample log with a (metric, node, vo) index.
    class MetricRepository
    {
    public:
        explicit MetricRepository(MetricDictionary dictionary = {});

        void append(MetricSample sample);

        const std::vector<MetricSample> &samples() const noexcept { return log_; }
        std::size_t size() const noexcept { return log_.size(); }
        const MetricDictionary &dictionary() const noexcept { return dictionary_; }
        MetricDictionary &dictionary() noexcept { return dictionary_; }

        /// Sample indices for one metric, grouped by (node, vo).
        const std::map<std::pair<NodeId, std::string>, std::vector<std::size_t>> *
        series(std::string_view metric) const;

        /// Rebuild a repository from datagram lines (one per line).
        static MetricRepository replay(std::string_view log_text, MetricDictionary dictionary = {});

    private:
        MetricDictionary dictionary_;
        std::vector<MetricSample> log_;
        std::map<std::string, std::map<std::pair<NodeId, std::string>, std::vector<std::size_t>>, std::less<>> index_;
    };

    /// Windowed aggregation. Cluster grouping needs the topology to map nodes.
    std::vector<AccountingRow> accounting(const MetricRepository &repo, const AccountingQuery &query,
                                          const GridTopology *topology = nullptr);

    /// Receives datagrams from agents. Safe to call from several threads.
    class Collector
    {
    public:
        explicit Collector(MetricDictionary dictionary = {});

        /// Returns false (and counts the reason) when the datagram is rejected.
        bool ingest(std::string_view datagram);

        std::size_t size() const;
        std::uint64_t decode_errors() const;
        std::uint64_t unknown_metrics() const;
        std::uint64_t time_regressions() const;

        /// Accepted datagram lines in arrival order.
        std::string log_text() const;
        MetricRepository repository() const;

        template <typename F>
        auto with_repository(F &&f) const
        {
            std::lock_guard lock(mutex_);
            return f(repo_);
        }

    private:
        mutable std::mutex mutex_;
        MetricRepository repo_;
        std::string log_;
        std::map<NodeId, Seconds, std::less<>> last_ts_;
        std::uint64_t decode_errors_ = 0;
        std::uint64_t unknown_metrics_ = 0;
        std::uint64_t regressions_ = 0;
    };

    /// Per-node emitter with a lossy datagram channel to a collector.
    class Agent
    {
    public:
        Agent(NodeId node, Collector &collector, double loss_probability, RandomStream rng);

        void emit(const MetricSample &sample);

        const NodeId &node() const noexcept { return node_; }
        std::uint64_t delivered() const noexcept { return delivered_; }
        std::uint64_t lost() const noexcept { return lost_; }
        std::uint64_t rejected() const noexcept { return rejected_; }

    private:
        NodeId node_;
        Collector *collector_;
        double loss_;
        RandomStream rng_;
        std::uint64_t delivered_ = 0;
        std::uint64_t lost_ = 0;
        std::uint64_t rejected_ = 0;
    };

    struct JobRecord
    {
        std::string id;
        std::optional<std::string> parent;
        std::string vo;
        NodeId node;
    };

    /// Fork tree of jobs; children are registered after their parent.
    class JobTree
    {
    public:
        void register_job(JobRecord job);

        bool contains(std::string_view id) const;
        const JobRecord &job(std::string_view id) const;
        const std::vector<std::string> &children(std::string_view id) const;
        /// The job itself followed by every transitive descendant.
        std::vector<std::string> subtree(std::string_view id) const;
        std::size_t size() const noexcept { return jobs_.size(); }

    private:
        struct Entry
        {
            JobRecord record;
            std::vector<std::string> children;
        };
        std::map<std::string, Entry, std::less<>> jobs_;
    };

    /// Sum of `metric` over a job and all of its descendants within [t0, t1).
    double job_rollup(const JobTree &tree, const MetricRepository &repo, std::string_view job,
                      std::string_view metric, Seconds t0, Seconds t1);

    /// Synthetic load/cpu/memory triplet for a node with `active_sessions` transfers.
    std::array<MetricSample, 3> node_stats_sample(const NodeId &node, int active_sessions, Seconds ts);
} // namespace mediogrid
