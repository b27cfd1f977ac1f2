#include "mediogrid/topology.hpp"

#include "mediogrid/config_text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace mediogrid
{
    std::string_view to_string(NodeRole role) noexcept
    {
        switch (role)
        {
        case NodeRole::acquisition: return "acquisition";
        case NodeRole::storage: return "storage";
        case NodeRole::compute: return "compute";
        }
        return "storage";
    }

    std::optional<NodeRole> parse_node_role(std::string_view text) noexcept
    {
        if (text == "acquisition")
            return NodeRole::acquisition;
        if (text == "storage")
            return NodeRole::storage;
        if (text == "compute")
            return NodeRole::compute;
        return std::nullopt;
    }

    std::string loopback_link_id(std::string_view node) { return "loop:" + std::string(node); }
    std::string intra_link_id(std::string_view cluster) { return "intra:" + std::string(cluster); }

    std::string inter_link_id(std::string_view a, std::string_view b)
    {
        if (b < a)
            std::swap(a, b);
        return "inter:" + std::string(a) + "|" + std::string(b);
    }

    int knee_streams(const NetworkLink &link)
    {
        return static_cast<int>(std::ceil(link.bandwidth / link.rmax));
    }

    Mbps aggregate_throughput(const NetworkLink &link, int streams)
    {
        if (streams < 1)
            throw TopologyError("stream count must be at least 1");
        const double p = streams;
        const double excess = std::max(0, streams - knee_streams(link));
        return std::min(link.bandwidth, p * link.rmax) / (1.0 + link.gamma * excess);
    }

    void validate_link(const NetworkLink &link, std::string_view where)
    {
        const std::string prefix = std::string(where) + ": ";
        if (!(link.bandwidth > 0.0))
            throw TopologyError(prefix + "bandwidth must be positive");
        if (!(link.rtt_ms >= 0.0))
            throw TopologyError(prefix + "rtt must be non-negative");
        if (!(link.rmax > 0.0) || link.rmax > link.bandwidth)
            throw TopologyError(prefix + "rmax must lie in (0, bandwidth]");
        if (!(link.gamma >= 0.0))
            throw TopologyError(prefix + "gamma must be non-negative");
        if (link.handshake_rounds < 0 || link.per_file_rounds < 0)
            throw TopologyError(prefix + "round counts must be non-negative");
        if (link.command_round != 0 && link.command_round != 1)
            throw TopologyError(prefix + "command_round must be 0 or 1");
    }

    GridTopology::GridTopology(std::vector<Cluster> clusters,
                               std::map<std::pair<ClusterId, ClusterId>, NetworkLink> inter_links,
                               ModelConstants defaults,
                               std::optional<NetworkLink> default_inter_link)
        : clusters_(std::move(clusters)),
          defaults_(defaults),
          default_inter_(std::move(default_inter_link))
    {
        std::set<ClusterId> cluster_names;
        for (std::size_t ci = 0; ci < clusters_.size(); ++ci)
        {
            auto &c = clusters_[ci];
            if (!cluster_names.insert(c.name).second)
                throw TopologyError("duplicate cluster '" + c.name + "'");
            if (c.nodes.empty())
                throw TopologyError("cluster '" + c.name + "' has no nodes");
            c.intra_link.id = intra_link_id(c.name);
            validate_link(c.intra_link, "cluster " + c.name);
            for (std::size_t ni = 0; ni < c.nodes.size(); ++ni)
            {
                auto &n = c.nodes[ni];
                n.cluster = c.name;
                if (n.storage_capacity == 0)
                    throw TopologyError("node '" + n.name + "' needs positive storage capacity");
                if (!node_index_.emplace(n.name, std::pair{ci, ni}).second)
                    throw TopologyError("duplicate node '" + n.name + "'");
            }
        }

        for (auto &[pair, link] : inter_links)
        {
            auto [a, b] = pair;
            if (a == b)
                throw TopologyError("link from cluster '" + a + "' to itself");
            if (!cluster_names.count(a) || !cluster_names.count(b))
                throw TopologyError("link references unknown cluster " + a + "/" + b);
            if (b < a)
                std::swap(a, b);
            link.id = inter_link_id(a, b);
            validate_link(link, "link " + a + " " + b);
            if (!inter_links_.emplace(std::pair{a, b}, link).second)
                throw TopologyError("duplicate link " + a + " " + b);
        }
        if (default_inter_)
        {
            default_inter_->id.clear();
            validate_link(*default_inter_, "defaults");
        }
    }

    bool GridTopology::has_node(std::string_view name) const
    {
        return node_index_.find(name) != node_index_.end();
    }

    const Node &GridTopology::node(std::string_view name) const
    {
        auto it = node_index_.find(name);
        if (it == node_index_.end())
            throw TopologyError("unknown node '" + std::string(name) + "'");
        return clusters_[it->second.first].nodes[it->second.second];
    }

    const Cluster &GridTopology::cluster(std::string_view name) const
    {
        for (const auto &c : clusters_)
        {
            if (c.name == name)
                return c;
        }
        throw TopologyError("unknown cluster '" + std::string(name) + "'");
    }

    const Cluster &GridTopology::cluster_of(std::string_view node_name) const
    {
        auto it = node_index_.find(node_name);
        if (it == node_index_.end())
            throw TopologyError("unknown node '" + std::string(node_name) + "'");
        return clusters_[it->second.first];
    }

    NetworkLink GridTopology::link_between(std::string_view a, std::string_view b) const
    {
        std::pair<ClusterId, ClusterId> key{std::string(a), std::string(b)};
        if (key.second < key.first)
            std::swap(key.first, key.second);
        if (auto it = inter_links_.find(key); it != inter_links_.end())
            return it->second;
        if (!default_inter_)
            throw TopologyError("no link defined between clusters '" + key.first + "' and '" + key.second + "'");
        NetworkLink link = *default_inter_;
        link.id = inter_link_id(key.first, key.second);
        return link;
    }

    NetworkLink GridTopology::resolve_link(std::string_view src, std::string_view dst) const
    {
        const Cluster &sc = cluster_of(src);
        const Cluster &dc = cluster_of(dst);
        if (src == dst)
        {
            NetworkLink loop;
            loop.id = loopback_link_id(src);
            loop.bandwidth = kLoopbackBandwidth;
            loop.rmax = kLoopbackBandwidth;
            return loop;
        }
        if (sc.name == dc.name)
            return sc.intra_link;
        return link_between(sc.name, dc.name);
    }

    bool GridTopology::operator==(const GridTopology &other) const
    {
        return clusters_ == other.clusters_ && inter_links_ == other.inter_links_ &&
               defaults_ == other.defaults_ && default_inter_ == other.default_inter_;
    }

    namespace
    {
        void write_link_keys(std::string &out, const NetworkLink &l)
        {
            out += fmt::format("bandwidth_mbps={}\nrtt_ms={}\nrmax_mbps={}\ngamma={}\nh={}\nhf={}\ncommand_round={}\n",
                               l.bandwidth, l.rtt_ms, l.rmax, l.gamma, l.handshake_rounds, l.per_file_rounds,
                               l.command_round);
        }

        // Fills a link from section keys, falling back to `base` for anything absent.
        NetworkLink read_link(KeyReader &keys, NetworkLink base)
        {
            if (auto v = keys.number("bandwidth_mbps"))
                base.bandwidth = *v;
            if (auto v = keys.number("rtt_ms"))
                base.rtt_ms = *v;
            if (auto v = keys.number("rmax_mbps"))
                base.rmax = *v;
            if (auto v = keys.number("gamma"))
                base.gamma = *v;
            if (auto v = keys.integer("h"))
                base.handshake_rounds = static_cast<int>(*v);
            if (auto v = keys.integer("hf"))
                base.per_file_rounds = static_cast<int>(*v);
            if (auto v = keys.integer("command_round"))
                base.command_round = static_cast<int>(*v);
            return base;
        }

        NetworkLink from_constants(const ModelConstants &k)
        {
            NetworkLink l;
            l.rmax = k.rmax;
            l.gamma = k.gamma;
            l.handshake_rounds = k.handshake_rounds;
            l.per_file_rounds = k.per_file_rounds;
            l.command_round = k.command_round;
            return l;
        }

        // Runs a builder and tags topology errors with the section's line number.
        template <typename F>
        auto at_line(int line, F &&f)
        {
            try
            {
                return f();
            }
            catch (const TopologyError &e)
            {
                throw ConfigError(line, e.what());
            }
        }
    } // namespace

    std::string GridTopology::to_config_text() const
    {
        std::string out;
        out += "[defaults]\n";
        out += fmt::format("rmax_mbps={}\ngamma={}\nh={}\nhf={}\ncommand_round={}\n", defaults_.rmax, defaults_.gamma,
                           defaults_.handshake_rounds, defaults_.per_file_rounds, defaults_.command_round);
        if (default_inter_)
        {
            // The remaining default-link constants are the model constants above.
            out += fmt::format("bandwidth_mbps={}\nrtt_ms={}\n", default_inter_->bandwidth, default_inter_->rtt_ms);
        }
        for (const auto &c : clusters_)
        {
            out += fmt::format("\n[cluster {}]\n", c.name);
            write_link_keys(out, c.intra_link);
            for (const auto &n : c.nodes)
            {
                if (n.storage_capacity % kBytesPerGB != 0)
                    throw TopologyError("node '" + n.name + "' capacity is not a whole number of GB");
                out += fmt::format("node {} capacity_gb={} role={}\n", n.name, n.storage_capacity / kBytesPerGB,
                                   to_string(n.role));
            }
        }
        for (const auto &[pair, link] : inter_links_)
        {
            out += fmt::format("\n[link {} {}]\n", pair.first, pair.second);
            write_link_keys(out, link);
        }
        return out;
    }

    GridTopology load_topology(std::string_view config_text)
    {
        const auto sections = parse_config_sections(config_text);

        ModelConstants constants;
        std::optional<NetworkLink> default_inter;
        bool seen_defaults = false;
        for (const auto &s : sections)
        {
            if (s.kind != "defaults")
                continue;
            if (seen_defaults)
                throw ConfigError(s.number, "duplicate [defaults] section");
            seen_defaults = true;
            if (!s.args.empty())
                throw ConfigError(s.number, "[defaults] takes no arguments");
            for (const auto &line : s.lines)
            {
                if (!line.directive.empty())
                    throw ConfigError(line.number, "unexpected directive '" + line.directive + "' in [defaults]");
            }
            KeyReader keys(s);
            if (auto v = keys.number("rmax_mbps"))
                constants.rmax = *v;
            if (auto v = keys.number("gamma"))
                constants.gamma = *v;
            if (auto v = keys.integer("h"))
                constants.handshake_rounds = static_cast<int>(*v);
            if (auto v = keys.integer("hf"))
                constants.per_file_rounds = static_cast<int>(*v);
            if (auto v = keys.integer("command_round"))
                constants.command_round = static_cast<int>(*v);
            auto bandwidth = keys.number("bandwidth_mbps");
            auto rtt = keys.number("rtt_ms");
            keys.reject_unknown();
            if (rtt && !bandwidth)
                throw ConfigError(s.number, "rtt_ms in [defaults] requires bandwidth_mbps");
            if (bandwidth)
            {
                NetworkLink l = from_constants(constants);
                l.bandwidth = *bandwidth;
                l.rtt_ms = rtt.value_or(0.0);
                at_line(s.number, [&] {
                    validate_link(l, "defaults");
                    return 0;
                });
                default_inter = l;
            }
            at_line(s.number, [&] {
                NetworkLink probe = from_constants(constants);
                probe.bandwidth = std::max(probe.rmax, 1.0);
                validate_link(probe, "defaults");
                return 0;
            });
        }

        std::vector<Cluster> clusters;
        std::map<std::pair<ClusterId, ClusterId>, NetworkLink> links;
        std::set<std::string> node_names;
        std::set<std::string> cluster_names;

        for (const auto &s : sections)
        {
            if (s.kind == "cluster")
            {
                if (s.args.size() != 1)
                    throw ConfigError(s.number, "[cluster] takes exactly one name");
                Cluster c;
                c.name = s.args.front();
                if (!cluster_names.insert(c.name).second)
                    throw ConfigError(s.number, "duplicate cluster '" + c.name + "'");

                for (const auto &line : s.lines)
                {
                    if (line.directive.empty())
                        continue;
                    if (line.directive != "node")
                        throw ConfigError(line.number, "unknown directive '" + line.directive + "'");
                    if (line.args.size() != 1)
                        throw ConfigError(line.number, "node needs exactly one name");
                    Node n;
                    n.name = line.args.front();
                    n.cluster = c.name;
                    bool have_capacity = false;
                    for (const auto &[key, value] : line.pairs)
                    {
                        if (key == "capacity_gb")
                        {
                            auto gb = parse_integer(value, line.number, key);
                            if (gb <= 0)
                                throw ConfigError(line.number, "capacity_gb must be positive");
                            n.storage_capacity = static_cast<Bytes>(gb) * kBytesPerGB;
                            have_capacity = true;
                        }
                        else if (key == "role")
                        {
                            auto role = parse_node_role(value);
                            if (!role)
                                throw ConfigError(line.number, "unknown role '" + value + "'");
                            n.role = *role;
                        }
                        else
                        {
                            throw ConfigError(line.number, "unknown key '" + key + "'");
                        }
                    }
                    if (!have_capacity)
                        throw ConfigError(line.number, "node '" + n.name + "' is missing capacity_gb");
                    if (!node_names.insert(n.name).second)
                        throw ConfigError(line.number, "duplicate node '" + n.name + "'");
                    c.nodes.push_back(std::move(n));
                }

                KeyReader keys(s);
                NetworkLink base = from_constants(constants);
                base.bandwidth = kDefaultIntraBandwidth;
                base.rtt_ms = kDefaultIntraRttMs;
                c.intra_link = read_link(keys, base);
                keys.reject_unknown();
                if (c.nodes.empty())
                    throw ConfigError(s.number, "cluster '" + c.name + "' has no nodes");
                at_line(s.number, [&] {
                    validate_link(c.intra_link, "cluster " + c.name);
                    return 0;
                });
                clusters.push_back(std::move(c));
            }
            else if (s.kind == "link")
            {
                if (s.args.size() != 2)
                    throw ConfigError(s.number, "[link] takes two cluster names");
                for (const auto &line : s.lines)
                {
                    if (!line.directive.empty())
                        throw ConfigError(line.number, "unexpected directive '" + line.directive + "' in [link]");
                }
                KeyReader keys(s);
                if (!keys.number("bandwidth_mbps"))
                    throw ConfigError(s.number, "[link] requires bandwidth_mbps");
                KeyReader fresh(s);
                NetworkLink l = read_link(fresh, from_constants(constants));
                fresh.reject_unknown();
                std::pair<ClusterId, ClusterId> key{s.args[0], s.args[1]};
                if (key.second < key.first)
                    std::swap(key.first, key.second);
                if (links.count(key))
                    throw ConfigError(s.number, "duplicate link " + key.first + " " + key.second);
                at_line(s.number, [&] {
                    validate_link(l, "link " + key.first + " " + key.second);
                    return 0;
                });
                links.emplace(key, l);
            }
        }

        for (const auto &[pair, link] : links)
        {
            if (!cluster_names.count(pair.first) || !cluster_names.count(pair.second))
                throw TopologyError("link references unknown cluster " + pair.first + "/" + pair.second);
        }
        return GridTopology(std::move(clusters), std::move(links), constants, default_inter);
    }

    std::string_view default_calibration_config() noexcept
    {
        return R"(# Default calibration: UTCN storage server, UPB clients.
[defaults]
rmax_mbps=10
gamma=0.02
h=3
hf=2
command_round=1

[cluster utcn]
bandwidth_mbps=1000
rtt_ms=0.2
rmax_mbps=200
node utcn-storage capacity_gb=4000 role=storage
node utcn-c1 capacity_gb=500 role=compute

[cluster upb]
bandwidth_mbps=1000
rtt_ms=0.2
rmax_mbps=200
node upb-c1 capacity_gb=500 role=compute
node upb-c2 capacity_gb=500 role=compute

[link utcn upb]
bandwidth_mbps=100
rtt_ms=50
rmax_mbps=10
gamma=0.02
)";
    }

    GridTopology default_calibration_topology()
    {
        return load_topology(default_calibration_config());
    }
} // namespace mediogrid
