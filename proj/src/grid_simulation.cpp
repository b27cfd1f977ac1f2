#include "mediogrid/grid_simulation.hpp"

#include "mediogrid/catalog.hpp"
#include "mediogrid/monitor.hpp"
#include "mediogrid/sched.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mediogrid
{
    namespace
    {
        constexpr Seconds kDay = 86400.0;
        constexpr std::string_view kRequestRootJob = "requests";

        // Synthetic processing workload: requests for channel files arrive at
        // compute nodes and each satisfied request feeds the next pipeline stage
        // on another node.
        class RequestDriver
        {
        public:
            RequestDriver(Simulation &sim, const GridTopology &topology, Catalog &catalog, TransferEngine &engine,
                          StorageLedger &storage, JobTree &jobs, const SchedSettings &settings, RequestStats &stats)
                : sim_(sim),
                  topology_(topology),
                  catalog_(catalog),
                  engine_(engine),
                  storage_(storage),
                  jobs_(jobs),
                  settings_(settings),
                  stats_(stats),
                  predictor_(settings.alpha, settings.p_default),
                  scheduler_(topology, catalog, predictor_, settings.p_default),
                  pick_(sim.stream("request-pick"))
            {
                for (const auto &c : topology.clusters())
                {
                    for (const auto &n : c.nodes)
                    {
                        if (n.role == NodeRole::compute)
                            workers_.push_back(n.name);
                    }
                }
                if (workers_.empty())
                {
                    for (const auto &c : topology.clusters())
                    {
                        for (const auto &n : c.nodes)
                        {
                            if (n.role != NodeRole::acquisition)
                                workers_.push_back(n.name);
                        }
                    }
                }
                jobs_.register_job(JobRecord{std::string(kRequestRootJob), std::nullopt, settings.vo, ""});
            }

            void schedule_arrivals(int days)
            {
                auto times = sim_.stream("request-arrival");
                std::vector<Seconds> at;
                for (int d = 0; d < days; ++d)
                {
                    for (int i = 0; i < settings_.requests_per_day; ++i)
                        at.push_back(d * kDay + times.uniform(0.0, kDay));
                }
                std::sort(at.begin(), at.end());
                for (auto t : at)
                {
                    sim_.schedule_at(t, EventKind::request_arrival, "new request", [this] { arrive(); });
                }
            }

        private:
            struct Pending
            {
                DataRequest request;
                std::string collection;
                int channel = 1;
                int stage = 1;
                std::size_t worker = 0;
            };

            void arrive()
            {
                const auto collections = catalog_.collections();
                if (collections.empty() || workers_.empty())
                {
                    ++stats_.issued;
                    ++stats_.unsatisfiable;
                    return;
                }
                Pending p;
                p.collection = collections[pick_.below(collections.size())];
                p.channel = static_cast<int>(pick_.below(kChannelsPerGranule)) + 1;
                p.worker = pick_.below(workers_.size());
                issue(std::move(p), std::string(kRequestRootJob));
            }

            void issue(Pending p, const std::string &parent_job)
            {
                p.request.id = ++next_request_;
                p.request.lfn = fmt::format("{}/ch{:02d}", p.collection, p.channel);
                p.request.dest_node = workers_[p.worker];
                p.request.vo = settings_.vo;
                p.request.job = fmt::format("req-{}", p.request.id);
                p.request.issued_at = sim_.now();
                jobs_.register_job(JobRecord{p.request.job, parent_job, settings_.vo, p.request.dest_node});
                ++stats_.issued;

                auto plan = scheduler_.select_source(p.request, in_flight_);
                switch (plan.decision)
                {
                case Decision::local_hit:
                    ++stats_.local_hits;
                    satisfied(p);
                    break;
                case Decision::coalesced:
                    ++stats_.coalesced;
                    waiters_[*plan.coalesced_transfer].push_back(std::move(p));
                    break;
                case Decision::fetch:
                    ++stats_.fetches;
                    fetch(std::move(p), plan);
                    break;
                case Decision::unsatisfiable:
                    ++stats_.unsatisfiable;
                    break;
                }
            }

            void fetch(Pending p, const SchedulePlan &plan)
            {
                const auto *record = catalog_.find(p.request.lfn);
                TransferSpec spec;
                spec.source = *plan.source;
                spec.dest_node = p.request.dest_node;
                spec.files = {FileItem{p.request.lfn, record->size, std::nullopt}};
                spec.parallelism = plan.parallelism;
                spec.vo = p.request.vo;
                spec.job = p.request.job;
                const auto key = std::pair{p.request.lfn, p.request.dest_node};
                const auto id = engine_.execute(std::move(spec), [this, p](const TransferReport &r) { fetched(p, r); });
                in_flight_[key] = id;
            }

            void fetched(const Pending &p, const TransferReport &report)
            {
                predictor_.observe(topology_.resolve_link(report.spec.source.node, report.spec.dest_node),
                                   report.effective_throughput);
                stats_.fetch_bytes += report.bytes_moved;
                in_flight_.erase({p.request.lfn, p.request.dest_node});

                const auto *record = catalog_.find(p.request.lfn);
                const bool present = std::any_of(record->replicas.begin(), record->replicas.end(),
                                                 [&](const PhysicalLocation &l) { return l.node == p.request.dest_node; });
                if (!present && storage_.reserve(p.request.dest_node, record->size))
                    catalog_.add_replica(p.request.lfn, PhysicalLocation{p.request.dest_node, "/cache/" + p.request.lfn});

                satisfied(p);
                auto it = waiters_.find(report.id);
                if (it == waiters_.end())
                    return;
                auto waiting = std::move(it->second);
                waiters_.erase(it);
                for (const auto &w : waiting)
                    satisfied(w);
            }

            // Hand the intermediate product to the next stage's service.
            void satisfied(const Pending &p)
            {
                if (p.stage >= settings_.pipeline_stages)
                    return;
                Pending next;
                next.collection = p.collection;
                next.channel = p.channel % kChannelsPerGranule + 1;
                next.stage = p.stage + 1;
                next.worker = (p.worker + 1) % workers_.size();
                const auto parent = p.request.job;
                sim_.schedule_at(sim_.now(), EventKind::request_arrival, "stage " + std::to_string(next.stage) + " of " + parent,
                                 [this, next, parent] { issue(next, parent); });
            }

            Simulation &sim_;
            const GridTopology &topology_;
            Catalog &catalog_;
            TransferEngine &engine_;
            StorageLedger &storage_;
            JobTree &jobs_;
            const SchedSettings &settings_;
            RequestStats &stats_;
            BandwidthPredictor predictor_;
            GreedyScheduler scheduler_;
            RandomStream pick_;
            std::vector<NodeId> workers_;
            InFlightIndex in_flight_;
            std::map<std::uint64_t, std::vector<Pending>> waiters_;
            std::uint64_t next_request_ = 0;
        };

        std::string transfers_csv(const std::vector<TransferReport> &reports)
        {
            std::string out = "id,src,dst,mode,vo,job,files,start,end,bytes,throughput_mbps\n";
            for (const auto &r : reports)
            {
                out += fmt::format("{},{},{},{},{},{},{},{:.9f},{:.9f},{},{:.6f}\n", r.id, csv_field(r.spec.source.node),
                                   csv_field(r.spec.dest_node),
                                   r.spec.mode == TransferMode::third_party ? "third_party" : "two_party",
                                   csv_field(r.spec.vo), csv_field(r.spec.job), r.spec.files.size(), r.start_time,
                                   r.end_time, r.bytes_moved, r.effective_throughput);
            }
            return out;
        }
    } // namespace

    SimulationResult run_simulation(const SimConfig &config, int days, std::uint64_t seed)
    {
        if (days < 1)
            throw SimulationError("days must be at least 1");

        SimulationResult result;
        result.days = days;
        result.seed = seed;
        const Seconds horizon = days * kDay;
        const auto &topology = config.topology;

        Simulation sim(seed);
        Collector collector;
        std::map<NodeId, Agent, std::less<>> agents;
        std::vector<NodeId> nodes;
        for (const auto &c : topology.clusters())
        {
            for (const auto &n : c.nodes)
            {
                nodes.push_back(n.name);
                agents.emplace(n.name, Agent(n.name, collector, config.monitor.loss_probability,
                                             sim.stream("datagram-loss/" + n.name)));
            }
        }
        MetricSink sink = [&agents](const MetricSample &s) { agents.at(s.node).emit(s); };

        Catalog catalog;
        StorageLedger storage(topology);
        JobTree jobs;
        TransferEngine engine(sim, topology, sink);

        std::optional<ReplicationDaemon> daemon;
        if (config.policy)
            daemon.emplace(sim, topology, catalog, engine, storage, *config.policy, sink, &jobs);

        if (daemon && !config.ingest.areas.empty())
        {
            auto granules = generate_granules(config.ingest, days, seed);
            result.granules_generated = granules.size();
            for (auto &g : granules)
            {
                const auto when = g.acquired_at;
                auto detail = "collection=" + g.collection();
                sim.schedule_at(when, EventKind::granule_arrival, std::move(detail),
                                [&daemon, g = std::move(g)] { daemon->on_arrival(g); });
            }
            const auto daily = predicted_daily_traffic(config.ingest, *config.policy, config.ingest.sizes, &topology);
            for (const auto &[cluster, bytes] : daily)
                result.predicted_bytes[cluster] = bytes * static_cast<Bytes>(days);
        }

        std::optional<RequestDriver> requests;
        if (config.sched.requests_per_day > 0)
        {
            requests.emplace(sim, topology, catalog, engine, storage, jobs, config.sched, result.requests);
            requests->schedule_arrivals(days);
        }

        std::function<void()> sample_nodes;
        if (config.monitor.period > 0.0)
        {
            const Seconds period = config.monitor.period;
            sample_nodes = [&, period] {
                for (const auto &n : nodes)
                {
                    for (const auto &s : node_stats_sample(n, engine.active_sessions(n), sim.now()))
                        sink(s);
                }
                const Seconds next = sim.now() + period;
                if (next < horizon)
                    sim.schedule_at(next, EventKind::metric_period, "node-stats", sample_nodes);
            };
            sim.schedule_at(0.0, EventKind::metric_period, "node-stats", sample_nodes);
        }
        result.at_horizon = sim.run_until(horizon);
        result.drained = sim.run();

        if (daemon)
            result.replication = daemon->stats();
        for (const auto &[name, agent] : agents)
        {
            result.samples_delivered += agent.delivered();
            result.samples_lost += agent.lost();
            result.samples_rejected += agent.rejected();
        }
        result.reports = engine.reports();

        std::ostringstream events;
        sim.write_event_log(events);
        result.event_log = events.str();
        result.metric_log = collector.log_text();
        result.catalog_snapshot = catalog.snapshot();
        result.transfers_csv = transfers_csv(result.reports);

        Bytes predicted_total = 0;
        for (const auto &[cluster, bytes] : result.predicted_bytes)
            predicted_total += bytes;
        const auto &rs = result.replication;
        std::string summary;
        summary += fmt::format("days={}\nseed={}\n", days, seed);
        summary += fmt::format("granules_generated={}\ngranules_ingested={}\ngranules_dropped={}\n",
                               result.granules_generated, rs.granules_ingested, rs.granules_dropped);
        summary += fmt::format("channel_files_registered={}\nreplication_transfers_scheduled={}\n"
                               "replication_transfers_completed={}\nreplicas_added={}\nreplicas_skipped={}\n",
                               rs.files_registered, rs.transfers_scheduled, rs.transfers_completed, rs.replicas_added,
                               rs.replicas_skipped);
        summary += fmt::format("bytes_replicated={}\nbytes_predicted={}\n", rs.bytes_replicated, predicted_total);
        for (const auto &[cluster, bytes] : result.predicted_bytes)
        {
            auto it = rs.bytes_by_cluster.find(cluster);
            summary += fmt::format("bytes_replicated.{}={}\nbytes_predicted.{}={}\n", cluster,
                                   it == rs.bytes_by_cluster.end() ? Bytes{0} : it->second, cluster, bytes);
        }
        const auto &rq = result.requests;
        summary += fmt::format("requests_issued={}\nrequests_local_hit={}\nrequests_coalesced={}\nrequests_fetch={}\n"
                               "requests_unsatisfiable={}\nrequest_fetch_bytes={}\n",
                               rq.issued, rq.local_hits, rq.coalesced, rq.fetches, rq.unsatisfiable, rq.fetch_bytes);
        summary += fmt::format("transfers_completed={}\ncatalog_records={}\n", result.reports.size(), catalog.size());
        summary += fmt::format("metric_samples_delivered={}\nmetric_samples_lost={}\nmetric_samples_rejected={}\n",
                               result.samples_delivered, result.samples_lost, result.samples_rejected);
        summary += fmt::format("events_executed_by_horizon={}\nevents_pending_at_horizon={}\nevents_drained={}\n",
                               result.at_horizon.executed, result.at_horizon.pending, result.drained.executed);
        result.summary = std::move(summary);
        return result;
    }

    void write_simulation_outputs(const SimulationResult &result, const std::filesystem::path &out_dir)
    {
        std::filesystem::create_directories(out_dir);
        auto write = [&](const char *name, const std::string &text) {
            std::ofstream out(out_dir / name, std::ios::binary | std::ios::trunc);
            if (!out)
                throw std::runtime_error("cannot write '" + (out_dir / name).string() + "'");
            out << text;
        };
        write("events.csv", result.event_log);
        write("metrics.log", result.metric_log);
        write("catalog.tsv", result.catalog_snapshot);
        write("transfers.csv", result.transfers_csv);
        write("summary.txt", result.summary);
    }
} // namespace mediogrid
