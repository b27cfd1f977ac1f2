#include "mediogrid/experiment.hpp"

#include "mediogrid/simcore.hpp"

#include <fmt/format.h>

#include <charconv>

namespace mediogrid
{
    namespace
    {
        DatasetSplit split(int count, std::uint64_t mb)
        {
            return DatasetSplit{fmt::format("{}x{}MB", count, mb), count, megabytes(mb)};
        }

        int parse_int(std::string_view s, std::string_view whole)
        {
            int v = 0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || v < 1)
                throw ExperimentError("invalid stream range '" + std::string(whole) + "'");
            return v;
        }
    } // namespace

    std::vector<DatasetSplit> canonical_splits()
    {
        return {split(1, 500), split(5, 100), split(10, 50), split(50, 10), split(100, 5)};
    }

    std::vector<DatasetSplit> literal_splits()
    {
        return {split(1, 500), split(5, 100), split(10, 10), split(50, 10), split(100, 5)};
    }

    void check_canonical(std::span<const DatasetSplit> splits)
    {
        for (const auto &s : splits)
        {
            if (s.total() != kDatasetTotal)
                throw ExperimentError("dataset '" + s.label + "' does not total 500 MB");
        }
    }

    Endpoints inter_cluster_endpoints(const GridTopology &topology)
    {
        const auto &clusters = topology.clusters();
        if (clusters.size() < 2)
            throw ExperimentError("inter-cluster experiment needs at least two clusters");
        const Node *server = &clusters[0].nodes.front();
        for (const auto &n : clusters[0].nodes)
        {
            if (n.role == NodeRole::storage)
            {
                server = &n;
                break;
            }
        }
        return Endpoints{server->name, clusters[1].nodes.front().name};
    }

    Endpoints intra_cluster_endpoints(const GridTopology &topology, std::optional<std::string> cluster)
    {
        const Cluster *chosen = nullptr;
        if (cluster)
        {
            chosen = &topology.cluster(*cluster);
        }
        else
        {
            const auto &clusters = topology.clusters();
            if (clusters.size() >= 2 && clusters[1].nodes.size() >= 2)
                chosen = &clusters[1];
            for (std::size_t i = 0; !chosen && i < clusters.size(); ++i)
            {
                if (clusters[i].nodes.size() >= 2)
                    chosen = &clusters[i];
            }
            if (!chosen)
                throw ExperimentError("intra-cluster experiment needs a cluster with at least two nodes");
        }
        if (chosen->nodes.size() < 2)
            throw ExperimentError("cluster '" + chosen->name + "' has a single node");
        return Endpoints{chosen->nodes[0].name, chosen->nodes[1].name};
    }

    TransferSpec split_transfer(const Endpoints &endpoints, const DatasetSplit &split, int p,
                                const TransferOptions &options)
    {
        TransferSpec spec;
        spec.source = PhysicalLocation{endpoints.source, "/data/experiment"};
        spec.dest_node = endpoints.dest;
        spec.parallelism = p;
        spec.options = options;
        spec.vo = "experiment";
        spec.job = split.label;
        spec.files.reserve(static_cast<std::size_t>(split.file_count));
        for (int i = 0; i < split.file_count; ++i)
            spec.files.push_back(FileItem{fmt::format("experiment/{}/f{:03d}", split.label, i), split.file_size, {}});
        return spec;
    }

    Seconds simulate_transfer_time(const GridTopology &topology, const Endpoints &endpoints, const DatasetSplit &split,
                                   int p, const TransferOptions &options)
    {
        Simulation sim(0, false);
        TransferEngine engine(sim, topology);
        Seconds elapsed = -1.0;
        engine.execute(split_transfer(endpoints, split, p, options),
                       [&elapsed](const TransferReport &r) { elapsed = r.end_time - r.start_time; });
        sim.run();
        return elapsed;
    }

    std::vector<ExperimentRow> run_experiment(const GridTopology &topology, const Endpoints &endpoints,
                                              std::span<const int> p_range, std::span<const DatasetSplit> splits,
                                              const ExperimentOptions &options)
    {
        const auto link = topology.resolve_link(endpoints.source, endpoints.dest);
        std::vector<ExperimentRow> rows;
        rows.reserve(p_range.size() * splits.size());
        for (const auto &s : splits)
        {
            for (int p : p_range)
            {
                const Seconds t = options.use_engine
                                      ? simulate_transfer_time(topology, endpoints, s, p, options.transfer)
                                      : estimate_time(split_transfer(endpoints, s, p, options.transfer), link);
                rows.push_back(ExperimentRow{s.label, p, t, to_megabits(s.total()) / t});
            }
        }
        return rows;
    }

    std::vector<ExperimentRow> experiment_inter(const GridTopology &topology, std::span<const int> p_range,
                                                std::span<const DatasetSplit> splits, const ExperimentOptions &options)
    {
        return run_experiment(topology, inter_cluster_endpoints(topology), p_range, splits, options);
    }

    std::vector<ExperimentRow> experiment_intra(const GridTopology &topology, std::span<const int> p_range,
                                                std::span<const DatasetSplit> splits, const ExperimentOptions &options,
                                                std::optional<std::string> cluster)
    {
        return run_experiment(topology, intra_cluster_endpoints(topology, std::move(cluster)), p_range, splits, options);
    }

    std::string experiment_csv(std::span<const ExperimentRow> rows)
    {
        std::string out = "dataset,p,seconds,throughput_mbps\n";
        for (const auto &r : rows)
            out += fmt::format("{},{},{:.9f},{:.6f}\n", csv_field(r.dataset), r.p, r.seconds, r.throughput);
        return out;
    }

    std::vector<int> parse_p_range(std::string_view text)
    {
        std::vector<int> out;
        if (text.empty())
            return out;
        if (auto dots = text.find(".."); dots != std::string_view::npos)
        {
            const int lo = parse_int(text.substr(0, dots), text);
            const int hi = parse_int(text.substr(dots + 2), text);
            for (int p = lo; p <= hi; ++p)
                out.push_back(p);
            return out;
        }
        std::size_t start = 0;
        while (start <= text.size())
        {
            auto comma = text.find(',', start);
            auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            out.push_back(parse_int(piece, text));
            if (comma == std::string_view::npos)
                break;
            start = comma + 1;
        }
        return out;
    }
} // namespace mediogrid
