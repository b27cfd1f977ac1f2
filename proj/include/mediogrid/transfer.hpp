#pragma once

#include "mediogrid/catalog.hpp"
#include "mediogrid/monitor.hpp"
#include "mediogrid/simcore.hpp"
#include "mediogrid/topology.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mediogrid
{
    class TransferError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct ByteRange
    {
        Bytes offset = 0;
        Bytes length = 0;

        bool operator==(const ByteRange &) const = default;
    };

    struct FileItem
    {
        std::string lfn;
        Bytes size = 0;
        std::optional<ByteRange> range;

        /// Bytes actually moved: the range length, or the whole file.
        Bytes payload() const noexcept { return range ? range->length : size; }

        bool operator==(const FileItem &) const = default;
    };

    struct TransferOptions
    {
        bool channel_reuse = true;
        bool pipelining = true;

        bool operator==(const TransferOptions &) const = default;
    };

    enum class TransferMode
    {
        two_party,
        third_party,
    };

    struct TransferSpec
    {
        PhysicalLocation source;
        NodeId dest_node;
        std::vector<FileItem> files;
        int parallelism = 1;
        TransferOptions options;
        TransferMode mode = TransferMode::two_party;
        // Node that ordered a third-party transfer. Its control exchange is not timed.
        std::optional<NodeId> controller;
        std::string vo;
        std::string job;

        bool operator==(const TransferSpec &) const = default;
    };

    /// Throws TransferError when the spec breaks a structural invariant.
    void validate(const TransferSpec &spec);

    struct FileCompletion
    {
        std::string lfn;
        Seconds completed_at = 0.0;

        bool operator==(const FileCompletion &) const = default;
    };

    struct TransferReport
    {
        std::uint64_t id = 0;
        TransferSpec spec;
        Seconds start_time = 0.0;
        Seconds end_time = 0.0;
        Bytes bytes_moved = 0;
        std::vector<FileCompletion> per_file;
        Mbps effective_throughput = 0.0;
    };

    /// Closed-form duration on an otherwise idle link:
    /// h*rtt + sum over files of (channel setup + command round + bits / A(p)).
    Seconds estimate_time(const TransferSpec &spec, const NetworkLink &link);

    /// Current view of one session on a shared link.
    struct SessionView
    {
        std::uint64_t transfer_id = 0;
        int streams = 0;
        double remaining_mbit = 0.0;
        Mbps rate = 0.0;
    };

    /// Event-driven transfer engine. Sessions alternate between latency-bound
    /// setup phases (not shared) and data phases that share their link by
    /// stream-weighted fair share, each capped at p * r_max.
    class TransferEngine
    {
    public:
        using CompletionHandler = std::function<void(const TransferReport &)>;

        TransferEngine(Simulation &sim, const GridTopology &topology, MetricSink sink = {});

        TransferEngine(const TransferEngine &) = delete;
        TransferEngine &operator=(const TransferEngine &) = delete;

        /// Start a transfer at now(). Returns its id; `on_complete` runs inside
        /// the completion event after the traffic samples were emitted.
        std::uint64_t execute(TransferSpec spec, CompletionHandler on_complete = {});

        /// Transfers that are in flight and touch `node` as source or destination.
        int active_sessions(std::string_view node) const;
        std::size_t in_flight() const noexcept;

        /// Sessions currently in a data phase on `link_id`, with remaining payload
        /// projected to now().
        std::vector<SessionView> link_sessions(std::string_view link_id) const;

        /// Megabits of data-phase payload delivered so far across all transfers.
        double delivered_mbit() const;

        const std::vector<TransferReport> &reports() const noexcept { return reports_; }

    private:
        struct Transfer
        {
            std::uint64_t id = 0;
            TransferSpec spec;
            NetworkLink link;
            CompletionHandler on_complete;
            Seconds start = 0.0;
            std::size_t file = 0;
            std::vector<FileCompletion> completed;
            Bytes moved = 0;
            bool in_data = false;
            double remaining_mbit = 0.0; // left in the current data phase
            Mbps rate = 0.0;
            Seconds last_update = 0.0;
            std::optional<EventId> pending;
        };

        struct LinkState
        {
            NetworkLink link;
            std::vector<std::uint64_t> sessions; // in join order
        };

        void begin_file(Transfer &t);
        void join_link(std::uint64_t id);
        void finish_file(std::uint64_t id);
        void reshare(LinkState &link);
        void emit(const MetricSample &sample);

        Simulation *sim_;
        const GridTopology *topology_;
        MetricSink sink_;
        std::uint64_t next_id_ = 1;
        double delivered_mbit_ = 0.0;
        std::map<std::uint64_t, std::unique_ptr<Transfer>> transfers_;
        std::map<std::string, LinkState, std::less<>> links_;
        std::map<NodeId, int, std::less<>> node_sessions_;
        std::vector<TransferReport> reports_;
    };
} // namespace mediogrid
