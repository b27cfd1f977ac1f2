#pragma once

#include "mediogrid/units.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mediogrid
{
    class TopologyError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    enum class NodeRole
    {
        acquisition,
        storage,
        compute,
    };

    std::string_view to_string(NodeRole role) noexcept;
    std::optional<NodeRole> parse_node_role(std::string_view text) noexcept;

    struct Node
    {
        NodeId name;
        ClusterId cluster;
        Bytes storage_capacity = 0;
        NodeRole role = NodeRole::storage;

        bool operator==(const Node &) const = default;
    };

    /// Parametric link. Latency is stored in milliseconds, as configured.
    struct NetworkLink
    {
        // Stable identity used for link sharing and bandwidth prediction:
        // "loop:<node>", "intra:<cluster>" or "inter:<a>|<b>" with a < b.
        std::string id;
        Mbps bandwidth = 0.0;
        double rtt_ms = 0.0;
        Mbps rmax = 0.0;
        double gamma = 0.0;
        int handshake_rounds = 0;
        int per_file_rounds = 0;
        int command_round = 0;

        Seconds rtt() const noexcept { return rtt_ms / 1000.0; }

        bool operator==(const NetworkLink &) const = default;
    };

    struct ModelConstants
    {
        Mbps rmax = 10.0;
        double gamma = 0.02;
        int handshake_rounds = 3;
        int per_file_rounds = 2;
        int command_round = 1;

        bool operator==(const ModelConstants &) const = default;
    };

    struct Cluster
    {
        ClusterId name;
        std::vector<Node> nodes;
        NetworkLink intra_link;

        bool operator==(const Cluster &) const = default;
    };

    inline constexpr Mbps kLoopbackBandwidth = 1e6;
    inline constexpr Mbps kDefaultIntraBandwidth = 1000.0;
    inline constexpr double kDefaultIntraRttMs = 0.2;

    /// Streams beyond which a link saturates: ceil(B / r_max).
    int knee_streams(const NetworkLink &link);

    /// Aggregate rate of `streams` parallel streams sharing `link`:
    /// min(B, p*r_max) / (1 + gamma * max(0, p - knee)).
    Mbps aggregate_throughput(const NetworkLink &link, int streams);

    /// Checks the per-link invariants; `where` prefixes the error message.
    void validate_link(const NetworkLink &link, std::string_view where);

    class GridTopology
    {
    public:
        GridTopology() = default;
        GridTopology(std::vector<Cluster> clusters,
                     std::map<std::pair<ClusterId, ClusterId>, NetworkLink> inter_links,
                     ModelConstants defaults,
                     std::optional<NetworkLink> default_inter_link = std::nullopt);

        const std::vector<Cluster> &clusters() const noexcept { return clusters_; }
        const ModelConstants &defaults() const noexcept { return defaults_; }
        const std::optional<NetworkLink> &default_inter_link() const noexcept { return default_inter_; }
        const std::map<std::pair<ClusterId, ClusterId>, NetworkLink> &inter_links() const noexcept { return inter_links_; }

        bool has_node(std::string_view name) const;
        const Node &node(std::string_view name) const;
        const Cluster &cluster(std::string_view name) const;
        const Cluster &cluster_of(std::string_view node_name) const;

        /// Loopback for src == dst, intra-cluster link, else the inter-cluster link.
        NetworkLink resolve_link(std::string_view src, std::string_view dst) const;

        /// Inter-cluster link for a cluster pair (explicit or from defaults).
        NetworkLink link_between(std::string_view a, std::string_view b) const;

        /// Serialize to the config grammar with every constant written out.
        std::string to_config_text() const;

        bool operator==(const GridTopology &other) const;

    private:
        std::vector<Cluster> clusters_;
        std::map<std::pair<ClusterId, ClusterId>, NetworkLink> inter_links_;
        ModelConstants defaults_;
        std::optional<NetworkLink> default_inter_;
        std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> node_index_;
    };

    /// Parse the topology sections (`[cluster]`, `[link]`, `[defaults]`) of a config.
    /// Other known sections are skipped.
    GridTopology load_topology(std::string_view config_text);

    /// Two-cluster grid carrying the default calibration: utcn (storage server)
    /// and upb (clients), 100 Mb/s / 50 ms between them, 1 Gb/s inside each.
    std::string_view default_calibration_config() noexcept;
    GridTopology default_calibration_topology();

    std::string loopback_link_id(std::string_view node);
    std::string intra_link_id(std::string_view cluster);
    std::string inter_link_id(std::string_view a, std::string_view b);
} // namespace mediogrid
