#pragma once

#include "mediogrid/catalog.hpp"
#include "mediogrid/monitor.hpp"
#include "mediogrid/simcore.hpp"
#include "mediogrid/topology.hpp"
#include "mediogrid/transfer.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mediogrid
{
    class ReplicationError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    inline constexpr int kChannelsPerGranule = 36;

    enum class Resolution
    {
        m250,
        m500,
        km1,
    };

    std::string_view to_string(Resolution r) noexcept;

    /// Per-resolution channel file sizes. Channels 1-2 are 250 m, 3-7 are
    /// 500 m and 8-36 are 1 km, following the MODIS band layout.
    struct ChannelSizeTable
    {
        Bytes size_250m = megabytes(150);
        Bytes size_500m = megabytes(60);
        Bytes size_1km = megabytes(25);

        static Resolution resolution_of(int channel);
        Bytes size_of(Resolution r) const noexcept;
        Bytes granule_total() const noexcept;
    };

    struct ChannelFile
    {
        int index = 0;
        Resolution resolution = Resolution::km1;
        Bytes size = 0;

        bool operator==(const ChannelFile &) const = default;
    };

    struct GranuleSpec
    {
        std::string area;
        Seconds acquired_at = 0.0;
        std::vector<ChannelFile> channels;

        std::string collection() const;
        std::string lfn(int channel) const;
        Bytes total_size() const noexcept;

        bool operator==(const GranuleSpec &) const = default;
    };

    struct ReplicationPolicy
    {
        NodeId acquisition_node;
        std::map<ClusterId, NodeId> targets; // cluster -> designated node
        int parallelism = 10;
        // One extra hop from each designated node to the rest of its cluster.
        bool intra_fanout = false;
        std::string vo = "mediogrid";
    };

    /// Throws ReplicationError when nodes are missing or misplaced.
    void validate(const ReplicationPolicy &policy, const GridTopology &topology);

    struct IngestSchedule
    {
        std::vector<std::string> areas;
        int granules_per_area_per_day = 20;
        ChannelSizeTable sizes;
    };

    /// Area ids "A01".."Ann".
    std::vector<std::string> numbered_areas(int count);

    /// Time-ordered granules. Area a's k-th granule of a day lands at
    /// (k + (a + 0.5) / areas) * interval plus uniform jitter within +-10% of
    /// the interval, where interval = 86400 / rate.
    std::vector<GranuleSpec> generate_granules(const IngestSchedule &schedule, int days, std::uint64_t seed);

    /// Closed-form replication bytes per day landing in each target cluster.
    std::map<ClusterId, Bytes> predicted_daily_traffic(const IngestSchedule &schedule, const ReplicationPolicy &policy,
                                                       const ChannelSizeTable &sizes,
                                                       const GridTopology *topology = nullptr);

    /// Free space per node, initialized from the topology capacities.
    class StorageLedger
    {
    public:
        explicit StorageLedger(const GridTopology &topology);

        bool reserve(std::string_view node, Bytes bytes);
        Bytes free_bytes(std::string_view node) const;

    private:
        std::map<NodeId, Bytes, std::less<>> free_;
    };

    struct ReplicationStats
    {
        std::uint64_t granules_ingested = 0;
        std::uint64_t granules_dropped = 0;
        std::uint64_t files_registered = 0;
        std::uint64_t transfers_scheduled = 0;
        std::uint64_t transfers_completed = 0;
        std::uint64_t replicas_added = 0;
        std::uint64_t replicas_skipped = 0;
        Bytes bytes_replicated = 0;
        std::map<ClusterId, Bytes> bytes_by_cluster;
    };

    /// Acquisition server plus static replication daemon.
    class ReplicationDaemon
    {
    public:
        ReplicationDaemon(Simulation &sim, const GridTopology &topology, Catalog &catalog, TransferEngine &engine,
                          StorageLedger &storage, ReplicationPolicy policy, MetricSink sink = {},
                          JobTree *jobs = nullptr);

        /// Register the granule's 36 channel files with one replica on the
        /// acquisition node. Returns the lfns, or nothing if the node is full.
        std::vector<std::string> ingest(const GranuleSpec &granule);

        /// Start one third-party transfer per target cluster; catalog replicas
        /// are added as each transfer completes.
        std::vector<TransferSpec> replicate(const GranuleSpec &granule);

        /// Ingest then replicate, as done on each granule arrival.
        void on_arrival(const GranuleSpec &granule);

        const ReplicationPolicy &policy() const noexcept { return policy_; }
        const ReplicationStats &stats() const noexcept { return stats_; }

        /// Parent job of every replication transfer, when a job tree is attached.
        static constexpr std::string_view kRootJob = "replication";

    private:
        std::string storage_path(const std::string &lfn) const;
        void complete(const TransferReport &report, const std::string &cluster, bool fan_out);
        void emit_counter(std::string_view name, const NodeId &node, const std::string &job);

        Simulation *sim_;
        const GridTopology *topology_;
        Catalog *catalog_;
        TransferEngine *engine_;
        StorageLedger *storage_;
        ReplicationPolicy policy_;
        MetricSink sink_;
        JobTree *jobs_;
        ReplicationStats stats_;
        std::uint64_t job_counter_ = 0;
    };
} // namespace mediogrid
