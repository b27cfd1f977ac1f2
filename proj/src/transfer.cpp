#include "mediogrid/transfer.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace mediogrid
{
    namespace
    {
        Seconds per_file_overhead(const TransferSpec &spec, const NetworkLink &link, std::size_t index)
        {
            Seconds t = 0.0;
            if (!spec.options.channel_reuse || index == 0)
                t += link.per_file_rounds * link.rtt();
            if (!spec.options.pipelining)
                t += link.command_round * link.rtt();
            return t;
        }
    } // namespace

    void validate(const TransferSpec &spec)
    {
        if (spec.parallelism < 1)
            throw TransferError("parallelism must be at least 1");
        if (spec.files.empty())
            throw TransferError("transfer has no files");
        if (spec.source.node.empty() || spec.dest_node.empty())
            throw TransferError("transfer endpoints must be named");
        if (spec.vo.empty())
            throw TransferError("transfer needs a VO");
        if (spec.mode == TransferMode::two_party && spec.controller)
            throw TransferError("only third-party transfers have a controller");
        for (const auto &f : spec.files)
        {
            if (f.lfn.empty())
                throw TransferError("file without lfn");
            if (f.size == 0)
                throw TransferError("file '" + f.lfn + "' has zero size");
            if (f.range)
            {
                if (f.range->length == 0)
                    throw TransferError("empty byte range for '" + f.lfn + "'");
                if (f.range->offset > f.size || f.range->length > f.size - f.range->offset)
                    throw TransferError("byte range exceeds size of '" + f.lfn + "'");
            }
        }
    }

    Seconds estimate_time(const TransferSpec &spec, const NetworkLink &link)
    {
        validate(spec);
        const Mbps rate = aggregate_throughput(link, spec.parallelism);
        Seconds total = link.handshake_rounds * link.rtt();
        for (std::size_t i = 0; i < spec.files.size(); ++i)
            total += per_file_overhead(spec, link, i) + to_megabits(spec.files[i].payload()) / rate;
        return total;
    }

    TransferEngine::TransferEngine(Simulation &sim, const GridTopology &topology, MetricSink sink)
        : sim_(&sim), topology_(&topology), sink_(std::move(sink))
    {
    }

    std::uint64_t TransferEngine::execute(TransferSpec spec, CompletionHandler on_complete)
    {
        validate(spec);
        NetworkLink link;
        try
        {
            if (spec.controller)
                topology_->node(*spec.controller);
            link = topology_->resolve_link(spec.source.node, spec.dest_node);
        }
        catch (const TopologyError &e)
        {
            throw TransferError(e.what());
        }

        auto t = std::make_unique<Transfer>();
        t->id = next_id_++;
        t->spec = std::move(spec);
        t->link = link;
        t->on_complete = std::move(on_complete);
        t->start = sim_->now();

        ++node_sessions_[t->spec.source.node];
        if (t->spec.dest_node != t->spec.source.node)
            ++node_sessions_[t->spec.dest_node];
        links_.try_emplace(link.id, LinkState{link, {}});

        auto &ref = *t;
        transfers_.emplace(ref.id, std::move(t));
        begin_file(ref);
        return ref.id;
    }

    void TransferEngine::begin_file(Transfer &t)
    {
        Seconds delay = per_file_overhead(t.spec, t.link, t.file);
        if (t.file == 0)
            delay += t.link.handshake_rounds * t.link.rtt();
        if (delay <= 0.0)
        {
            join_link(t.id);
            return;
        }
        const auto id = t.id;
        sim_->schedule_after(delay, EventKind::reshare, fmt::format("transfer={} join file={}", id, t.file),
                             [this, id] { join_link(id); });
    }

    void TransferEngine::join_link(std::uint64_t id)
    {
        auto &t = *transfers_.at(id);
        t.in_data = true;
        t.remaining_mbit = to_megabits(t.spec.files[t.file].payload());
        t.rate = 0.0;
        t.last_update = sim_->now();
        auto &link = links_.at(t.link.id);
        link.sessions.push_back(id);
        reshare(link);
    }

    void TransferEngine::reshare(LinkState &state)
    {
        const Seconds now = sim_->now();
        int total_streams = 0;
        for (auto sid : state.sessions)
            total_streams += transfers_.at(sid)->spec.parallelism;
        if (total_streams == 0)
            return;
        const Mbps capacity = aggregate_throughput(state.link, total_streams);

        for (auto sid : state.sessions)
        {
            auto &t = *transfers_.at(sid);
            const double progressed = std::min(t.remaining_mbit, t.rate * (now - t.last_update));
            t.remaining_mbit -= progressed;
            delivered_mbit_ += progressed;
            t.last_update = now;

            const double p = t.spec.parallelism;
            const Mbps rate = std::min(capacity * p / total_streams, p * state.link.rmax);
            if (t.pending && rate == t.rate)
                continue;
            if (t.pending)
                sim_->cancel(*t.pending);
            t.rate = rate;

            const bool last = t.file + 1 == t.spec.files.size();
            const auto kind = last ? EventKind::transfer_complete : EventKind::reshare;
            std::string detail = last ? fmt::format("transfer={} src={} dst={}", sid, t.spec.source.node, t.spec.dest_node)
                                      : fmt::format("transfer={} done file={}", sid, t.file);
            t.pending = sim_->schedule_at(now + t.remaining_mbit / rate, kind, std::move(detail),
                                          [this, sid] { finish_file(sid); });
        }
    }

    void TransferEngine::finish_file(std::uint64_t id)
    {
        auto &t = *transfers_.at(id);
        const Seconds now = sim_->now();
        t.pending.reset();
        t.in_data = false;
        delivered_mbit_ += t.remaining_mbit;
        t.remaining_mbit = 0.0;
        t.rate = 0.0;

        auto &link = links_.at(t.link.id);
        link.sessions.erase(std::find(link.sessions.begin(), link.sessions.end(), id));

        const auto &file = t.spec.files[t.file];
        const double bytes = static_cast<double>(file.payload());
        t.completed.push_back(FileCompletion{file.lfn, now});
        t.moved += file.payload();

        std::optional<std::string> job;
        if (!t.spec.job.empty())
            job = t.spec.job;
        emit(MetricSample{now, t.spec.source.node, t.spec.vo, job, std::string(metric::ftp_out_bytes), bytes, "B"});
        emit(MetricSample{now, t.spec.dest_node, t.spec.vo, job, std::string(metric::ftp_in_bytes), bytes, "B"});

        ++t.file;
        if (t.file < t.spec.files.size())
        {
            begin_file(t);
            reshare(link);
            return;
        }

        TransferReport report;
        report.id = t.id;
        report.start_time = t.start;
        report.end_time = now;
        report.bytes_moved = t.moved;
        report.per_file = std::move(t.completed);
        report.effective_throughput = to_megabits(t.moved) / (now - t.start);
        report.spec = std::move(t.spec);
        auto on_complete = std::move(t.on_complete);

        for (const auto &node : {report.spec.source.node, report.spec.dest_node})
        {
            auto it = node_sessions_.find(node);
            if (--it->second == 0)
                node_sessions_.erase(it);
            if (report.spec.source.node == report.spec.dest_node)
                break;
        }
        transfers_.erase(id);
        reshare(link);

        reports_.push_back(report);
        if (on_complete)
            on_complete(reports_.back());
    }

    void TransferEngine::emit(const MetricSample &sample)
    {
        if (sink_)
            sink_(sample);
    }

    int TransferEngine::active_sessions(std::string_view node) const
    {
        auto it = node_sessions_.find(node);
        return it == node_sessions_.end() ? 0 : it->second;
    }

    std::size_t TransferEngine::in_flight() const noexcept { return transfers_.size(); }

    std::vector<SessionView> TransferEngine::link_sessions(std::string_view link_id) const
    {
        std::vector<SessionView> out;
        auto it = links_.find(link_id);
        if (it == links_.end())
            return out;
        const Seconds now = sim_->now();
        for (auto sid : it->second.sessions)
        {
            const auto &t = *transfers_.at(sid);
            const double left = std::max(0.0, t.remaining_mbit - t.rate * (now - t.last_update));
            out.push_back(SessionView{sid, t.spec.parallelism, left, t.rate});
        }
        return out;
    }

    double TransferEngine::delivered_mbit() const
    {
        double total = delivered_mbit_;
        const Seconds now = sim_->now();
        for (const auto &[id, t] : transfers_)
        {
            if (t->in_data)
                total += std::min(t->remaining_mbit, t->rate * (now - t->last_update));
        }
        return total;
    }
} // namespace mediogrid
