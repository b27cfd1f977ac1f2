#include "mediogrid/catalog.hpp"
#include "mediogrid/experiment.hpp"
#include "mediogrid/grid_simulation.hpp"
#include "mediogrid/report.hpp"
#include "mediogrid/sim_config.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

namespace
{
    using namespace mediogrid;

    struct UsageError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    bool on_off(const std::string &text, const char *flag)
    {
        if (text == "on")
            return true;
        if (text == "off")
            return false;
        throw UsageError(std::string(flag) + " expects on or off");
    }

    void write_or_print(const std::string &path, const std::string &text)
    {
        if (path.empty() || path == "-")
        {
            std::cout << text;
            return;
        }
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write '" + path + "'");
        out << text;
    }

    GridTopology topology_from(const std::string &config_path)
    {
        if (config_path.empty())
            return default_calibration_topology();
        return load_topology(read_text_file(config_path));
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"MedioGrid data grid simulator"};
    app.require_subcommand(1);

    auto *simulate = app.add_subcommand("simulate", "run ingest and replication over simulated days");
    std::string sim_config, sim_out;
    int days = 1;
    std::uint64_t seed = 1;
    simulate->add_option("--config", sim_config, "grid config file")->required();
    simulate->add_option("--days", days, "simulated days");
    simulate->add_option("--seed", seed, "random seed");
    simulate->add_option("--out", sim_out, "output directory")->required();

    auto *experiment = app.add_subcommand("experiment", "transfer time sweeps over parallel streams");
    std::string exp_kind, exp_config, exp_p = "1..30", exp_splits = "canonical", exp_reuse = "on",
                                      exp_pipeline = "on", exp_out, exp_cluster;
    bool exp_engine = false;
    experiment->add_option("kind", exp_kind, "inter or intra")->required()->check(CLI::IsMember({"inter", "intra"}));
    experiment->add_option("--config", exp_config, "topology config (default calibration when omitted)");
    experiment->add_option("--p", exp_p, "stream counts: 1..30, 5 or 1,2,8");
    experiment->add_option("--splits", exp_splits)->check(CLI::IsMember({"canonical", "paper-literal"}));
    experiment->add_option("--reuse", exp_reuse, "on|off");
    experiment->add_option("--pipeline", exp_pipeline, "on|off");
    experiment->add_option("--cluster", exp_cluster, "cluster for the intra experiment");
    experiment->add_flag("--engine", exp_engine, "run through the event engine");
    experiment->add_option("--out", exp_out, "CSV path (stdout when omitted)");

    auto *report = app.add_subcommand("report", "accounting over a metric log");
    std::string rep_log, rep_metric, rep_group = "node", rep_window, rep_agg = "sum", rep_config;
    report->add_option("--log", rep_log)->required();
    report->add_option("--metric", rep_metric)->required();
    report->add_option("--group-by", rep_group, "node|vo|cluster");
    report->add_option("--window", rep_window, "T0:T1 (default 0:inf)");
    report->add_option("--agg", rep_agg, "sum|avg|rate");
    report->add_option("--config", rep_config, "topology for cluster grouping");

    auto *catalog = app.add_subcommand("catalog", "catalog snapshot tools");
    catalog->require_subcommand(1);
    auto *dump = catalog->add_subcommand("dump", "print a snapshot as CSV");
    std::string snapshot_path, dump_collection;
    dump->add_option("--snapshot", snapshot_path)->required();
    dump->add_option("--collection", dump_collection);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try
    {
        if (*simulate)
        {
            if (days < 1)
                throw UsageError("--days must be at least 1");
            auto config = load_sim_config(read_text_file(sim_config));
            auto result = run_simulation(config, days, seed);
            write_simulation_outputs(result, sim_out);
            std::cout << result.summary;
        }
        else if (*experiment)
        {
            ExperimentOptions options;
            options.transfer.channel_reuse = on_off(exp_reuse, "--reuse");
            options.transfer.pipelining = on_off(exp_pipeline, "--pipeline");
            options.use_engine = exp_engine;
            std::vector<int> p_range;
            try
            {
                p_range = parse_p_range(exp_p);
            }
            catch (const ExperimentError &e)
            {
                throw UsageError(e.what());
            }
            auto splits = exp_splits == "canonical" ? canonical_splits() : literal_splits();
            if (exp_splits == "canonical")
                check_canonical(splits);
            const auto topology = topology_from(exp_config);
            std::vector<ExperimentRow> rows;
            if (exp_kind == "inter")
                rows = experiment_inter(topology, p_range, splits, options);
            else
                rows = experiment_intra(topology, p_range, splits, options,
                                        exp_cluster.empty() ? std::nullopt : std::optional(exp_cluster));
            write_or_print(exp_out, experiment_csv(rows));
        }
        else if (*report)
        {
            AccountingQuery query;
            query.metric = rep_metric;
            auto group = parse_group_by(rep_group);
            auto agg = parse_aggregation(rep_agg);
            if (!group)
                throw UsageError("unknown group '" + rep_group + "'");
            if (!agg)
                throw UsageError("unknown aggregation '" + rep_agg + "'");
            query.group_by = *group;
            query.agg = *agg;
            try
            {
                auto w = parse_window(rep_window);
                query.t0 = w.t0;
                query.t1 = w.t1;
            }
            catch (const MonitorError &e)
            {
                throw UsageError(e.what());
            }
            if (query.group_by == GroupBy::cluster && rep_config.empty())
                throw UsageError("--group-by cluster needs --config");
            std::optional<GridTopology> topology;
            if (!rep_config.empty())
                topology = load_topology(read_text_file(rep_config));
            if (query.agg == Aggregation::rate && std::isinf(query.t1))
                throw UsageError("--agg rate needs a finite --window");
            std::cout << accounting_report(read_text_file(rep_log), query, topology ? &*topology : nullptr);
        }
        else if (*dump)
        {
            auto cat = Catalog::restore(read_text_file(snapshot_path));
            std::string out = "lfn,collection,size,replicas\n";
            for (const auto &[lfn, rec] : cat.records())
            {
                if (!dump_collection.empty() && rec.collection != dump_collection)
                    continue;
                std::string replicas;
                for (const auto &loc : rec.replicas)
                {
                    if (!replicas.empty())
                        replicas += ';';
                    replicas += to_string(loc);
                }
                out += csv_field(lfn) + ',' + csv_field(rec.collection) + ',' + std::to_string(rec.size) + ',' +
                       csv_field(replicas) + '\n';
            }
            std::cout << out;
        }
    }
    catch (const UsageError &e)
    {
        std::fprintf(stderr, "mediogrid: %s\n", e.what());
        return 2;
    }
    catch (const std::exception &e)
    {
        std::fprintf(stderr, "mediogrid: %s\n", e.what());
        return 1;
    }
    return 0;
}
