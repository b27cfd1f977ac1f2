#include "mediogrid/sched.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace mediogrid
{
    std::string_view to_string(Decision d) noexcept
    {
        switch (d)
        {
        case Decision::local_hit: return "local_hit";
        case Decision::coalesced: return "coalesced";
        case Decision::fetch: return "fetch";
        case Decision::unsatisfiable: return "unsatisfiable";
        }
        return "unsatisfiable";
    }

    BandwidthPredictor::BandwidthPredictor(double alpha, int default_streams)
        : alpha_(alpha), default_streams_(default_streams)
    {
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw SchedError("EWMA alpha must lie in (0, 1]");
        if (default_streams < 1)
            throw SchedError("default stream count must be at least 1");
    }

    void BandwidthPredictor::observe(const NetworkLink &link, Mbps achieved)
    {
        if (!(achieved > 0.0) || !std::isfinite(achieved))
            throw SchedError("throughput observation must be positive");
        auto &e = links_[link.id];
        e.ewma = e.observations == 0 ? achieved : alpha_ * achieved + (1.0 - alpha_) * e.ewma;
        ++e.observations;
    }

    Mbps BandwidthPredictor::predict(const NetworkLink &link) const
    {
        if (auto it = links_.find(link.id); it != links_.end())
            return it->second.ewma;
        return aggregate_throughput(link, default_streams_);
    }

    std::optional<LinkEstimate> BandwidthPredictor::estimate(std::string_view link_id) const
    {
        if (auto it = links_.find(link_id); it != links_.end())
            return it->second;
        return std::nullopt;
    }

    GreedyScheduler::GreedyScheduler(const GridTopology &topology, const Catalog &catalog,
                                     const BandwidthPredictor &predictor, int parallelism)
        : topology_(&topology), catalog_(&catalog), predictor_(&predictor), parallelism_(parallelism)
    {
        if (parallelism < 1)
            throw SchedError("parallelism must be at least 1");
    }

    Seconds GreedyScheduler::predicted_time(Bytes size, const NetworkLink &link) const
    {
        const Seconds setup = (link.handshake_rounds + link.per_file_rounds) * link.rtt();
        return setup + to_megabits(size) / predictor_->predict(link);
    }

    SchedulePlan GreedyScheduler::select_source(const DataRequest &request, const InFlightIndex &in_flight) const
    {
        SchedulePlan plan;
        plan.request_id = request.id;

        const CatalogRecord *record = catalog_->find(request.lfn);
        if (record)
        {
            for (const auto &loc : record->replicas)
            {
                if (loc.node == request.dest_node)
                {
                    plan.decision = Decision::local_hit;
                    plan.source = loc;
                    return plan;
                }
            }
        }

        if (auto it = in_flight.find({request.lfn, request.dest_node}); it != in_flight.end())
        {
            plan.decision = Decision::coalesced;
            plan.coalesced_transfer = it->second;
            return plan;
        }

        if (!record || record->replicas.empty())
        {
            plan.error = "no replica of '" + request.lfn + "' and no transfer in flight";
            return plan;
        }
        if (!topology_->has_node(request.dest_node))
        {
            plan.error = "unknown destination node '" + request.dest_node + "'";
            return plan;
        }

        // Replicas come in (node, path) order; strict < keeps the first on ties.
        std::optional<Seconds> best;
        for (const auto &loc : record->replicas)
        {
            if (!topology_->has_node(loc.node))
                continue;
            const auto t = predicted_time(record->size, topology_->resolve_link(loc.node, request.dest_node));
            if (!best || t < *best)
            {
                best = t;
                plan.source = loc;
            }
        }
        if (!best)
        {
            plan.error = "no replica of '" + request.lfn + "' on a known node";
            return plan;
        }
        plan.decision = Decision::fetch;
        plan.parallelism = parallelism_;
        plan.predicted_seconds = *best;
        return plan;
    }

    std::vector<SchedulePlan> GreedyScheduler::schedule(std::vector<DataRequest> batch,
                                                        const InFlightIndex &in_flight) const
    {
        std::stable_sort(batch.begin(), batch.end(), [](const DataRequest &a, const DataRequest &b) {
            return std::tie(a.issued_at, a.id) < std::tie(b.issued_at, b.id);
        });

        std::map<std::pair<std::string, NodeId>, std::uint64_t> planned;
        std::vector<SchedulePlan> plans;
        plans.reserve(batch.size());
        for (const auto &req : batch)
        {
            auto plan = select_source(req, in_flight);
            if (plan.decision == Decision::fetch)
            {
                auto [it, fresh] = planned.try_emplace({req.lfn, req.dest_node}, req.id);
                if (!fresh)
                {
                    SchedulePlan joined;
                    joined.request_id = req.id;
                    joined.decision = Decision::coalesced;
                    joined.coalesced_request = it->second;
                    plan = std::move(joined);
                }
            }
            plans.push_back(std::move(plan));
        }
        return plans;
    }
} // namespace mediogrid
