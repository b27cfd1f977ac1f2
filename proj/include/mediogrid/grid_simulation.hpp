#pragma once

#include "mediogrid/replication.hpp"
#include "mediogrid/sim_config.hpp"
#include "mediogrid/simcore.hpp"
#include "mediogrid/transfer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mediogrid
{
    struct RequestStats
    {
        std::uint64_t issued = 0;
        std::uint64_t local_hits = 0;
        std::uint64_t coalesced = 0;
        std::uint64_t fetches = 0;
        std::uint64_t unsatisfiable = 0;
        std::uint64_t fetch_bytes = 0;
    };

    struct SimulationResult
    {
        int days = 0;
        std::uint64_t seed = 0;
        std::uint64_t granules_generated = 0;
        ReplicationStats replication;
        std::map<ClusterId, Bytes> predicted_bytes; // over the whole run
        RequestStats requests;
        RunStats at_horizon;
        RunStats drained;
        std::uint64_t samples_delivered = 0;
        std::uint64_t samples_lost = 0;
        std::uint64_t samples_rejected = 0;
        std::vector<TransferReport> reports;

        std::string event_log;        // CSV time,seq,kind,detail
        std::string metric_log;       // datagram lines
        std::string catalog_snapshot; // catalog snapshot format
        std::string transfers_csv;
        std::string summary; // key=value lines
    };

    /// Run ingest, static replication, the optional request workload and node
    /// sampling for `days` simulated days, then drain in-flight transfers.
    SimulationResult run_simulation(const SimConfig &config, int days, std::uint64_t seed);

    /// Write events.csv, metrics.log, catalog.tsv, transfers.csv and summary.txt.
    void write_simulation_outputs(const SimulationResult &result, const std::filesystem::path &out_dir);
} // namespace mediogrid
