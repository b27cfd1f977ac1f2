#pragma once

#include "mediogrid/topology.hpp"
#include "mediogrid/transfer.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mediogrid
{
    class ExperimentError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    struct DatasetSplit
    {
        std::string label;
        int file_count = 0;
        Bytes file_size = 0;

        Bytes total() const noexcept { return static_cast<Bytes>(file_count) * file_size; }
    };

    inline constexpr Bytes kDatasetTotal = megabytes(500);

    /// {1x500, 5x100, 10x50, 50x10, 100x5} MB, each totalling 500 MB.
    std::vector<DatasetSplit> canonical_splits();
    /// The five splits as originally listed; 10x10 MB totals only 100 MB.
    std::vector<DatasetSplit> literal_splits();
    /// Throws unless every split totals 500 MB.
    void check_canonical(std::span<const DatasetSplit> splits);

    struct ExperimentRow
    {
        std::string dataset;
        int p = 0;
        Seconds seconds = 0.0;
        Mbps throughput = 0.0;
    };

    struct ExperimentOptions
    {
        TransferOptions transfer;
        // Run every point through the event engine instead of the closed form.
        bool use_engine = false;
    };

    struct Endpoints
    {
        NodeId source;
        NodeId dest;
    };

    /// Storage node of the first cluster to the first node of the second.
    Endpoints inter_cluster_endpoints(const GridTopology &topology);
    /// First two nodes of `cluster`, or by default of the inter-experiment
    /// client's cluster (falling back to the first cluster with two nodes).
    Endpoints intra_cluster_endpoints(const GridTopology &topology, std::optional<std::string> cluster = std::nullopt);

    /// One row per (split, p), splits outer, p inner.
    std::vector<ExperimentRow> run_experiment(const GridTopology &topology, const Endpoints &endpoints,
                                              std::span<const int> p_range, std::span<const DatasetSplit> splits,
                                              const ExperimentOptions &options);

    std::vector<ExperimentRow> experiment_inter(const GridTopology &topology, std::span<const int> p_range,
                                                std::span<const DatasetSplit> splits, const ExperimentOptions &options);
    std::vector<ExperimentRow> experiment_intra(const GridTopology &topology, std::span<const int> p_range,
                                                std::span<const DatasetSplit> splits, const ExperimentOptions &options,
                                                std::optional<std::string> cluster = std::nullopt);

    /// Time for one split at one stream count through the event engine on an idle grid.
    Seconds simulate_transfer_time(const GridTopology &topology, const Endpoints &endpoints, const DatasetSplit &split,
                                   int p, const TransferOptions &options);

    TransferSpec split_transfer(const Endpoints &endpoints, const DatasetSplit &split, int p,
                                const TransferOptions &options);

    /// CSV `dataset,p,seconds,throughput_mbps`.
    std::string experiment_csv(std::span<const ExperimentRow> rows);

    /// "1..30", "5" or "1,2,8".
    std::vector<int> parse_p_range(std::string_view text);
} // namespace mediogrid
