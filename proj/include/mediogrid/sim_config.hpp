#pragma once

#include "mediogrid/replication.hpp"
#include "mediogrid/topology.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace mediogrid
{
    struct SchedSettings
    {
        double alpha = 0.25;
        int p_default = 10;
        // Synthetic processing workload; 0 disables it.
        int requests_per_day = 0;
        // Services a request passes its data through, one fetch per stage.
        int pipeline_stages = 1;
        std::string vo = "processing";
    };

    struct MonitorSettings
    {
        Seconds period = 60.0; // node statistics period; 0 disables sampling
        double loss_probability = 0.0;
    };

    /// Everything a run needs besides the day count and seed.
    struct SimConfig
    {
        GridTopology topology;
        std::optional<ReplicationPolicy> policy;
        IngestSchedule ingest;
        SchedSettings sched;
        MonitorSettings monitor;
    };

    /// Parse a full config: topology sections plus `[replication]`, `[ingest]`,
    /// `[sched]` and `[monitor]`.
    SimConfig load_sim_config(std::string_view text);

    std::string read_text_file(const std::string &path);
} // namespace mediogrid
