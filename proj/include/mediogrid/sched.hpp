#pragma once

#include "mediogrid/catalog.hpp"
#include "mediogrid/topology.hpp"
#include "mediogrid/units.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mediogrid
{
    class SchedError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct DataRequest
    {
        std::uint64_t id = 0;
        std::string lfn;
        NodeId dest_node;
        std::string vo;
        std::string job;
        Seconds issued_at = 0.0;
    };

    struct LinkEstimate
    {
        Mbps ewma = 0.0;
        std::uint64_t observations = 0;
    };

    /// Per-link EWMA of achieved throughput. Unobserved links fall back to the
    /// topology model at the default stream count.
    class BandwidthPredictor
    {
    public:
        explicit BandwidthPredictor(double alpha = 0.25, int default_streams = 10);

        void observe(const NetworkLink &link, Mbps achieved);
        Mbps predict(const NetworkLink &link) const;
        std::optional<LinkEstimate> estimate(std::string_view link_id) const;

        double alpha() const noexcept { return alpha_; }
        int default_streams() const noexcept { return default_streams_; }

    private:
        double alpha_;
        int default_streams_;
        std::map<std::string, LinkEstimate, std::less<>> links_;
    };

    enum class Decision
    {
        local_hit,
        coalesced,
        fetch,
        unsatisfiable,
    };

    std::string_view to_string(Decision d) noexcept;

    struct SchedulePlan
    {
        std::uint64_t request_id = 0;
        Decision decision = Decision::unsatisfiable;
        std::optional<PhysicalLocation> source; // fetch only
        int parallelism = 0;
        Seconds predicted_seconds = 0.0;
        // Coalesced plans point at either an in-flight transfer or the request
        // whose fetch was planned earlier in the same batch.
        std::optional<std::uint64_t> coalesced_transfer;
        std::optional<std::uint64_t> coalesced_request;
        std::string error;
    };

    /// Transfers already moving a file toward a node: (lfn, dest) -> transfer id.
    using InFlightIndex = std::map<std::pair<std::string, NodeId>, std::uint64_t>;

    /// Greedy data scheduler: local copy first, then join an in-flight fetch,
    /// else fetch from the replica with the least predicted completion time.
    class GreedyScheduler
    {
    public:
        GreedyScheduler(const GridTopology &topology, const Catalog &catalog, const BandwidthPredictor &predictor,
                        int parallelism = 10);

        /// Predicted seconds to move `size` bytes over `link` with pipelining on.
        Seconds predicted_time(Bytes size, const NetworkLink &link) const;

        SchedulePlan select_source(const DataRequest &request, const InFlightIndex &in_flight = {}) const;

        /// FIFO by (issued_at, id). Unsatisfiable requests yield a plan with an
        /// error instead of aborting the batch.
        std::vector<SchedulePlan> schedule(std::vector<DataRequest> batch, const InFlightIndex &in_flight = {}) const;

        int parallelism() const noexcept { return parallelism_; }

    private:
        const GridTopology *topology_;
        const Catalog *catalog_;
        const BandwidthPredictor *predictor_;
        int parallelism_;
    };
} // namespace mediogrid
