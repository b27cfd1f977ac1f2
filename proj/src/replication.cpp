#include "mediogrid/replication.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <tuple>

namespace mediogrid
{
    namespace
    {
        constexpr Seconds kDay = 86400.0;
    }

    std::string_view to_string(Resolution r) noexcept
    {
        switch (r)
        {
        case Resolution::m250: return "250m";
        case Resolution::m500: return "500m";
        case Resolution::km1: return "1km";
        }
        return "1km";
    }

    Resolution ChannelSizeTable::resolution_of(int channel)
    {
        if (channel < 1 || channel > kChannelsPerGranule)
            throw ReplicationError("channel index out of range: " + std::to_string(channel));
        if (channel <= 2)
            return Resolution::m250;
        if (channel <= 7)
            return Resolution::m500;
        return Resolution::km1;
    }

    Bytes ChannelSizeTable::size_of(Resolution r) const noexcept
    {
        switch (r)
        {
        case Resolution::m250: return size_250m;
        case Resolution::m500: return size_500m;
        case Resolution::km1: return size_1km;
        }
        return size_1km;
    }

    Bytes ChannelSizeTable::granule_total() const noexcept
    {
        return 2 * size_250m + 5 * size_500m + 29 * size_1km;
    }

    std::string GranuleSpec::collection() const { return fmt::format("granule/{}/{:.3f}", area, acquired_at); }

    std::string GranuleSpec::lfn(int channel) const { return fmt::format("{}/ch{:02d}", collection(), channel); }

    Bytes GranuleSpec::total_size() const noexcept
    {
        Bytes total = 0;
        for (const auto &c : channels)
            total += c.size;
        return total;
    }

    void validate(const ReplicationPolicy &policy, const GridTopology &topology)
    {
        if (!topology.has_node(policy.acquisition_node))
            throw ReplicationError("unknown acquisition node '" + policy.acquisition_node + "'");
        if (policy.parallelism < 1)
            throw ReplicationError("replication parallelism must be at least 1");
        if (policy.vo.empty())
            throw ReplicationError("replication VO must not be empty");
        for (const auto &[cluster, node] : policy.targets)
        {
            if (!topology.has_node(node))
                throw ReplicationError("unknown target node '" + node + "'");
            if (topology.node(node).cluster != cluster)
                throw ReplicationError("target node '" + node + "' is not in cluster '" + cluster + "'");
            if (node == policy.acquisition_node)
                throw ReplicationError("target node '" + node + "' is the acquisition node");
        }
    }

    std::vector<std::string> numbered_areas(int count)
    {
        std::vector<std::string> out;
        for (int i = 1; i <= count; ++i)
            out.push_back(fmt::format("A{:02d}", i));
        return out;
    }

    std::vector<GranuleSpec> generate_granules(const IngestSchedule &schedule, int days, std::uint64_t seed)
    {
        if (schedule.areas.empty())
            throw ReplicationError("ingest schedule has no areas");
        if (days < 1)
            throw ReplicationError("days must be at least 1");
        if (schedule.granules_per_area_per_day < 1)
            throw ReplicationError("granules per area per day must be at least 1");

        RandomStream jitter(seed, "ingest-jitter");
        const int rate = schedule.granules_per_area_per_day;
        const double interval = kDay / rate;
        const double area_count = static_cast<double>(schedule.areas.size());

        std::vector<GranuleSpec> out;
        out.reserve(static_cast<std::size_t>(days) * schedule.areas.size() * static_cast<std::size_t>(rate));
        for (int day = 0; day < days; ++day)
        {
            for (std::size_t a = 0; a < schedule.areas.size(); ++a)
            {
                // Phase spreads areas across the interval; slot stays inside (k, k+1).
                const double phase = 0.1 + 0.8 * (static_cast<double>(a) + 0.5) / area_count;
                for (int k = 0; k < rate; ++k)
                {
                    GranuleSpec g;
                    g.area = schedule.areas[a];
                    g.acquired_at = day * kDay + (k + phase) * interval + jitter.uniform(-0.1, 0.1) * interval;
                    g.channels.reserve(kChannelsPerGranule);
                    for (int ch = 1; ch <= kChannelsPerGranule; ++ch)
                    {
                        const auto res = ChannelSizeTable::resolution_of(ch);
                        g.channels.push_back(ChannelFile{ch, res, schedule.sizes.size_of(res)});
                    }
                    out.push_back(std::move(g));
                }
            }
        }
        std::stable_sort(out.begin(), out.end(), [](const GranuleSpec &x, const GranuleSpec &y) {
            return std::tie(x.acquired_at, x.area) < std::tie(y.acquired_at, y.area);
        });
        return out;
    }

    std::map<ClusterId, Bytes> predicted_daily_traffic(const IngestSchedule &schedule, const ReplicationPolicy &policy,
                                                       const ChannelSizeTable &sizes, const GridTopology *topology)
    {
        std::map<ClusterId, Bytes> out;
        const Bytes per_copy = static_cast<Bytes>(schedule.areas.size()) *
                               static_cast<Bytes>(schedule.granules_per_area_per_day) * sizes.granule_total();
        for (const auto &[cluster, designated] : policy.targets)
        {
            Bytes copies = 1;
            if (policy.intra_fanout && topology)
            {
                for (const auto &n : topology->cluster(cluster).nodes)
                {
                    if (n.name != designated && n.name != policy.acquisition_node)
                        ++copies;
                }
            }
            out[cluster] = per_copy * copies;
        }
        return out;
    }

    StorageLedger::StorageLedger(const GridTopology &topology)
    {
        for (const auto &c : topology.clusters())
        {
            for (const auto &n : c.nodes)
                free_[n.name] = n.storage_capacity;
        }
    }

    bool StorageLedger::reserve(std::string_view node, Bytes bytes)
    {
        auto it = free_.find(node);
        if (it == free_.end())
            throw ReplicationError("unknown node '" + std::string(node) + "'");
        if (it->second < bytes)
            return false;
        it->second -= bytes;
        return true;
    }

    Bytes StorageLedger::free_bytes(std::string_view node) const
    {
        auto it = free_.find(node);
        if (it == free_.end())
            throw ReplicationError("unknown node '" + std::string(node) + "'");
        return it->second;
    }

    ReplicationDaemon::ReplicationDaemon(Simulation &sim, const GridTopology &topology, Catalog &catalog,
                                         TransferEngine &engine, StorageLedger &storage, ReplicationPolicy policy,
                                         MetricSink sink, JobTree *jobs)
        : sim_(&sim),
          topology_(&topology),
          catalog_(&catalog),
          engine_(&engine),
          storage_(&storage),
          policy_(std::move(policy)),
          sink_(std::move(sink)),
          jobs_(jobs)
    {
        validate(policy_, topology);
        if (jobs_ && !jobs_->contains(kRootJob))
            jobs_->register_job(JobRecord{std::string(kRootJob), std::nullopt, policy_.vo, policy_.acquisition_node});
    }

    std::string ReplicationDaemon::storage_path(const std::string &lfn) const { return "/data/" + lfn; }

    void ReplicationDaemon::emit_counter(std::string_view name, const NodeId &node, const std::string &job)
    {
        if (!sink_)
            return;
        std::optional<std::string> tag;
        if (!job.empty())
            tag = job;
        sink_(MetricSample{sim_->now(), node, policy_.vo, tag, std::string(name), 1.0, "count"});
    }

    std::vector<std::string> ReplicationDaemon::ingest(const GranuleSpec &granule)
    {
        if (granule.channels.size() != kChannelsPerGranule)
            throw ReplicationError("granule must carry exactly 36 channels");
        if (!storage_->reserve(policy_.acquisition_node, granule.total_size()))
        {
            ++stats_.granules_dropped;
            emit_counter(metric::dropped_granules, policy_.acquisition_node, "");
            return {};
        }

        std::vector<std::string> lfns;
        lfns.reserve(granule.channels.size());
        const auto collection = granule.collection();
        for (const auto &ch : granule.channels)
        {
            auto lfn = fmt::format("{}/ch{:02d}", collection, ch.index);
            catalog_->register_file(lfn, collection, ch.size);
            catalog_->add_replica(lfn, PhysicalLocation{policy_.acquisition_node, storage_path(lfn)});
            lfns.push_back(std::move(lfn));
        }
        ++stats_.granules_ingested;
        stats_.files_registered += lfns.size();
        return lfns;
    }

    std::vector<TransferSpec> ReplicationDaemon::replicate(const GranuleSpec &granule)
    {
        const auto collection = granule.collection();
        const auto lfns = catalog_->list_collection(collection);
        if (lfns.size() != granule.channels.size())
            throw ReplicationError("granule '" + collection + "' was not ingested");
        if (sim_->now() + kTimeQuantum < granule.acquired_at)
            throw ReplicationError("granule '" + collection + "' replicated before its acquisition time");

        std::vector<FileItem> files;
        files.reserve(granule.channels.size());
        for (const auto &ch : granule.channels)
            files.push_back(FileItem{granule.lfn(ch.index), ch.size, std::nullopt});

        std::vector<TransferSpec> scheduled;
        for (const auto &[cluster, node] : policy_.targets)
        {
            const auto job = fmt::format("repl-{}", ++job_counter_);
            if (!storage_->reserve(node, granule.total_size()))
            {
                ++stats_.replicas_skipped;
                emit_counter(metric::replica_skipped, node, "");
                continue;
            }
            TransferSpec spec;
            spec.source = PhysicalLocation{policy_.acquisition_node, "/data/" + collection};
            spec.dest_node = node;
            spec.files = files;
            spec.parallelism = policy_.parallelism;
            spec.options = TransferOptions{true, true};
            spec.mode = TransferMode::third_party;
            spec.controller = policy_.acquisition_node;
            spec.vo = policy_.vo;
            spec.job = job;
            if (jobs_)
                jobs_->register_job(JobRecord{job, std::string(kRootJob), policy_.vo, node});

            ++stats_.transfers_scheduled;
            engine_->execute(spec, [this, cluster = cluster](const TransferReport &r) {
                complete(r, cluster, policy_.intra_fanout);
            });
            scheduled.push_back(std::move(spec));
        }
        return scheduled;
    }

    void ReplicationDaemon::complete(const TransferReport &report, const std::string &cluster, bool fan_out)
    {
        const auto &dest = report.spec.dest_node;
        for (const auto &f : report.spec.files)
        {
            catalog_->add_replica(f.lfn, PhysicalLocation{dest, storage_path(f.lfn)});
            ++stats_.replicas_added;
        }
        ++stats_.transfers_completed;
        stats_.bytes_replicated += report.bytes_moved;
        stats_.bytes_by_cluster[cluster] += report.bytes_moved;

        if (!fan_out)
            return;
        for (const auto &n : topology_->cluster(cluster).nodes)
        {
            if (n.name == dest || n.name == policy_.acquisition_node)
                continue;
            const auto job = fmt::format("repl-{}", ++job_counter_);
            if (!storage_->reserve(n.name, report.bytes_moved))
            {
                ++stats_.replicas_skipped;
                emit_counter(metric::replica_skipped, n.name, "");
                continue;
            }
            TransferSpec hop;
            hop.source = PhysicalLocation{dest, report.spec.source.path};
            hop.dest_node = n.name;
            hop.files = report.spec.files;
            hop.parallelism = policy_.parallelism;
            hop.mode = TransferMode::third_party;
            hop.controller = policy_.acquisition_node;
            hop.vo = policy_.vo;
            hop.job = job;
            if (jobs_)
                jobs_->register_job(JobRecord{job, report.spec.job, policy_.vo, n.name});
            ++stats_.transfers_scheduled;
            engine_->execute(std::move(hop), [this, cluster](const TransferReport &r) { complete(r, cluster, false); });
        }
    }

    void ReplicationDaemon::on_arrival(const GranuleSpec &granule)
    {
        if (!ingest(granule).empty())
            replicate(granule);
    }
} // namespace mediogrid
