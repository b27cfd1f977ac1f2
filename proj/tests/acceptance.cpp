// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "mediogrid/experiment.hpp"
#include "mediogrid/grid_simulation.hpp"
#include "mediogrid/monitor.hpp"
#include "mediogrid/sched.hpp"
#include "mediogrid/sim_config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

using namespace mediogrid;

namespace
{
    struct Outcome
    {
        bool pass = true;
        std::string detail;

        void require(bool ok, const std::string &why)
        {
            if (!ok && pass)
            {
                pass = false;
                detail = why;
            }
        }
    };

    const std::string kConfigPath = std::string(MEDIOGRID_SOURCE_DIR) + "/configs/mediogrid.conf";

    const SimulationResult &replication_day()
    {
        static const SimulationResult result = [] {
            return run_simulation(load_sim_config(read_text_file(kConfigPath)), 1, 2024);
        }();
        return result;
    }

    std::vector<ExperimentRow> only(const std::vector<ExperimentRow> &rows, const std::string &label)
    {
        std::vector<ExperimentRow> out;
        for (const auto &r : rows)
            if (r.dataset == label)
                out.push_back(r);
        return out;
    }

    Outcome inter_optimum()
    {
        Outcome o;
        auto topo = default_calibration_topology();
        auto rows = experiment_inter(topo, parse_p_range("1..30"), canonical_splits(), {});
        auto big = only(rows, "1x500MB");
        auto best = std::min_element(big.begin(), big.end(),
                                     [](const auto &a, const auto &b) { return a.seconds < b.seconds; });
        o.require(best->p == 10, fmt::format("argmin p = {}", best->p));
        o.require(best->p < 15, "argmin not below 15");
        o.detail = o.pass ? fmt::format("argmin p = {} ({:.2f} s)", best->p, best->seconds) : o.detail;
        return o;
    }

    Outcome intra_invariance()
    {
        Outcome o;
        auto topo = default_calibration_topology();
        auto splits = canonical_splits();
        auto rows = experiment_intra(topo, std::vector{1, 5}, splits, {});
        double lo = INFINITY, hi = 0;
        for (const auto &s : splits)
        {
            auto r = only(rows, s.label);
            o.require(r[0].seconds > r[1].seconds, s.label + ": p=1 not slower than p=5");
            lo = std::min(lo, r[1].seconds);
            hi = std::max(hi, r[1].seconds);
        }
        o.require(hi / lo <= 1.05, fmt::format("spread {:.4f}", hi / lo));
        if (o.pass)
            o.detail = fmt::format("max/min at p=5 = {:.6f}", hi / lo);
        return o;
    }

    Outcome small_file_penalty()
    {
        Outcome o;
        auto topo = default_calibration_topology();
        ExperimentOptions off{{false, false}, false};
        auto rows = experiment_inter(topo, std::vector{10}, canonical_splits(), off);
        const double one = only(rows, "1x500MB")[0].seconds;
        const double many = only(rows, "100x5MB")[0].seconds;
        o.require(std::abs(many - 55.15) < 1e-9, fmt::format("100x5MB took {:.9f} s", many));
        o.require(many >= 1.25 * one, fmt::format("ratio {:.4f}", many / one));
        if (o.pass)
            o.detail = fmt::format("100x5MB {:.2f} s vs 1x500MB {:.2f} s (+{:.1f}%)", many, one, 100 * (many / one - 1));
        return o;
    }

    Outcome ingest_rate()
    {
        Outcome o;
        const auto &r = replication_day();
        o.require(r.granules_generated == 1000, fmt::format("{} granules generated", r.granules_generated));
        o.require(r.replication.granules_ingested == 1000, fmt::format("{} ingested", r.replication.granules_ingested));
        auto cat = Catalog::restore(r.catalog_snapshot);
        auto collections = cat.collections();
        o.require(collections.size() == 1000, fmt::format("{} collections", collections.size()));
        for (const auto &c : collections)
            o.require(cat.list_collection(c).size() == 36, c + " lacks 36 channels");
        if (o.pass)
            o.detail = "1000 granules x 36 channel files";
        return o;
    }

    Outcome replication_completeness()
    {
        Outcome o;
        const auto &r = replication_day();
        auto cat = Catalog::restore(r.catalog_snapshot);
        for (const auto &[lfn, rec] : cat.records())
            o.require(rec.replicas.size() == 4, fmt::format("{} has {} replicas", lfn, rec.replicas.size()));
        o.require(r.replication.replicas_skipped == 0, "replicas skipped");
        o.require(r.predicted_bytes.size() == 3, "expected three target clusters");
        for (const auto &[cluster, bytes] : r.predicted_bytes)
        {
            auto it = r.replication.bytes_by_cluster.find(cluster);
            const Bytes got = it == r.replication.bytes_by_cluster.end() ? 0 : it->second;
            o.require(got == bytes, fmt::format("{}: replicated {} vs predicted {}", cluster, got, bytes));
        }
        if (o.pass)
            o.detail = fmt::format("{} lfns x 4 replicas, {} bytes replicated = predicted", cat.size(),
                                   r.replication.bytes_replicated);
        return o;
    }

    Outcome accounting_conservation()
    {
        Outcome o;
        const auto &r = replication_day();
        o.require(r.samples_lost == 0, "samples lost with loss 0");
        auto repo = MetricRepository::replay(r.metric_log);
        std::map<std::string, double> by_node, by_vo;
        for (const auto &rep : r.reports)
        {
            by_node[rep.spec.dest_node] += static_cast<double>(rep.bytes_moved);
            by_vo[rep.spec.vo] += static_cast<double>(rep.bytes_moved);
        }
        auto check = [&](GroupBy g, const std::map<std::string, double> &expect) {
            AccountingQuery q{std::string(metric::ftp_in_bytes), g, 0, INFINITY, Aggregation::sum};
            auto rows = accounting(repo, q);
            o.require(rows.size() == expect.size(), fmt::format("{} groups", rows.size()));
            for (const auto &row : rows)
            {
                auto it = expect.find(row.group);
                o.require(it != expect.end() && it->second == row.value,
                          fmt::format("{}: accounted {} vs moved {}", row.group, row.value,
                                      it == expect.end() ? 0.0 : it->second));
            }
        };
        check(GroupBy::node, by_node);
        check(GroupBy::vo, by_vo);
        const auto nodes = by_node.size();

        // Second run with the processing workload so more than one VO moves data.
        const auto workload = run_simulation(
            load_sim_config(read_text_file(std::string(MEDIOGRID_SOURCE_DIR) + "/configs/workload.conf")), 1, 11);
        o.require(workload.samples_lost == 0, "samples lost with loss 0");
        repo = MetricRepository::replay(workload.metric_log);
        by_node.clear();
        by_vo.clear();
        for (const auto &rep : workload.reports)
        {
            by_node[rep.spec.dest_node] += static_cast<double>(rep.bytes_moved);
            by_vo[rep.spec.vo] += static_cast<double>(rep.bytes_moved);
        }
        check(GroupBy::node, by_node);
        check(GroupBy::vo, by_vo);
        if (o.pass)
            o.detail = fmt::format("exact over {} nodes / 1 VO, then {} nodes / {} VOs", nodes, by_node.size(),
                                   by_vo.size());
        return o;
    }

    Outcome scheduler_oracle()
    {
        Outcome o;
        auto topo = load_topology(R"(
[defaults]
rmax_mbps=10
bandwidth_mbps=100
rtt_ms=50
[cluster a]
rmax_mbps=200
node a1 capacity_gb=1
node a2 capacity_gb=1
[cluster b]
node b1 capacity_gb=1
node b2 capacity_gb=1
[cluster c]
node c1 capacity_gb=1
[link a c]
bandwidth_mbps=400
rtt_ms=15
rmax_mbps=40
)");
        const std::vector<std::string> nodes = {"a1", "a2", "b1", "b2", "c1"};
        std::mt19937_64 rng(2007);
        int instances = 0, agree = 0;
        while (instances < 200)
        {
            Catalog cat;
            BandwidthPredictor pred(0.25, 10);
            std::map<std::string, std::vector<double>> observed;
            for (int f = 0; f < 3; ++f)
            {
                const auto lfn = fmt::format("f{}", f);
                cat.register_file(lfn, "c", megabytes(1 + rng() % 800));
                const int reps = 1 + static_cast<int>(rng() % 4);
                std::set<std::string> used;
                for (int k = 0; k < reps; ++k)
                    if (const auto &n = nodes[rng() % nodes.size()]; used.insert(n).second)
                        cat.add_replica(lfn, {n, "/" + lfn});
            }
            for (int k = 0; k < 5; ++k)
            {
                auto link = topo.resolve_link(nodes[rng() % nodes.size()], nodes[rng() % nodes.size()]);
                const double x = 1 + static_cast<double>(rng() % 500);
                pred.observe(link, x);
                observed[link.id].push_back(x);
            }
            auto bandwidth = [&](const NetworkLink &link) {
                auto it = observed.find(link.id);
                if (it == observed.end())
                    return aggregate_throughput(link, 10);
                double e = it->second.front();
                for (std::size_t i = 1; i < it->second.size(); ++i)
                    e = 0.25 * it->second[i] + 0.75 * e;
                return e;
            };
            auto cost = [&](const std::string &lfn, const std::string &src, const std::string &dst) {
                auto link = topo.resolve_link(src, dst);
                return (link.handshake_rounds + link.per_file_rounds) * link.rtt() +
                       to_megabits(cat.lookup(lfn).size) / bandwidth(link);
            };

            std::vector<DataRequest> batch;
            const int n = 1 + static_cast<int>(rng() % 3);
            for (int i = 0; i < n; ++i)
                batch.push_back(DataRequest{static_cast<std::uint64_t>(i + 1), fmt::format("f{}", rng() % 3),
                                            nodes[rng() % nodes.size()], "vo", "j", static_cast<double>(rng() % 2)});
            bool distinct = true;
            for (const auto &r : batch)
            {
                std::set<double> t;
                auto reps = cat.lookup(r.lfn).replicas;
                for (const auto &l : reps)
                    t.insert(cost(r.lfn, l.node, r.dest_node));
                distinct &= t.size() == reps.size();
            }
            if (!distinct)
                continue;
            ++instances;

            GreedyScheduler sched(topo, cat, pred, 10);
            auto plans = sched.schedule(batch);
            std::map<std::uint64_t, const DataRequest *> by_id;
            for (const auto &r : batch)
                by_id[r.id] = &r;

            bool ok = plans.size() == batch.size();
            std::set<std::pair<std::string, std::string>> fetched;
            for (const auto &plan : plans)
            {
                const auto &r = *by_id.at(plan.request_id);
                if (plan.decision != Decision::fetch)
                    continue;
                ok &= fetched.insert({r.lfn, r.dest_node}).second;
                // Brute force over every replica.
                double best = INFINITY;
                std::string best_node;
                for (const auto &l : cat.lookup(r.lfn).replicas)
                {
                    const double c = cost(r.lfn, l.node, r.dest_node);
                    if (c < best)
                    {
                        best = c;
                        best_node = l.node;
                    }
                }
                ok &= plan.source && plan.source->node == best_node;
            }
            agree += ok;
        }
        o.require(agree == instances, fmt::format("{}/{} instances agree", agree, instances));
        if (o.pass)
            o.detail = fmt::format("{}/{} instances agree", agree, instances);
        return o;
    }

    Outcome determinism()
    {
        Outcome o;
        auto cfg = load_sim_config(read_text_file(kConfigPath));
        auto a = run_simulation(cfg, 1, 77);
        auto b = run_simulation(cfg, 1, 77);
        o.require(a.event_log == b.event_log, "event logs differ");
        o.require(a.metric_log == b.metric_log, "metric logs differ");
        o.require(a.catalog_snapshot == b.catalog_snapshot, "catalog snapshots differ");
        if (o.pass)
            o.detail = fmt::format("{} event bytes, {} metric bytes identical", a.event_log.size(), a.metric_log.size());
        return o;
    }

    Outcome engine_vs_closed_form()
    {
        Outcome o;
        auto topo = default_calibration_topology();
        auto p = parse_p_range("1..30");
        double worst = 0;
        std::size_t points = 0;
        for (auto splits : {canonical_splits(), literal_splits()})
        {
            for (bool reuse : {true, false})
            {
                for (bool pipeline : {true, false})
                {
                    ExperimentOptions closed{{reuse, pipeline}, false}, engine{{reuse, pipeline}, true};
                    for (int kind = 0; kind < 2; ++kind)
                    {
                        auto a = kind ? experiment_intra(topo, p, splits, closed) : experiment_inter(topo, p, splits, closed);
                        auto b = kind ? experiment_intra(topo, p, splits, engine) : experiment_inter(topo, p, splits, engine);
                        for (std::size_t i = 0; i < a.size(); ++i)
                        {
                            worst = std::max(worst, std::abs(a[i].seconds - b[i].seconds));
                            ++points;
                        }
                    }
                }
            }
        }
        o.require(worst <= 1e-9, fmt::format("max deviation {:.3e} s", worst));
        if (o.pass)
            o.detail = fmt::format("{} points, max deviation {:.3e} s", points, worst);
        return o;
    }

    Outcome codec()
    {
        Outcome o;
        std::mt19937_64 rng(100000);
        const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_./:@+";
        auto token = [&] {
            std::string s;
            const auto len = 1 + rng() % 16;
            for (std::size_t i = 0; i < len; ++i)
                s += alphabet[rng() % alphabet.size()];
            return s == "-" ? std::string("--") : s;
        };
        int failures = 0;
        for (int i = 0; i < 100000; ++i)
        {
            MetricSample s;
            s.ts = quantize_time(static_cast<double>(rng() % 8640000000000ULL) / 1e6);
            s.node = token();
            s.vo = token();
            if (rng() % 2)
                s.job = token();
            s.name = token();
            double v;
            do
            {
                auto bits = rng();
                std::memcpy(&v, &bits, sizeof v);
            } while (!std::isfinite(v));
            s.value = (rng() % 2) ? v : static_cast<double>(rng() % 1000000000);
            s.unit = token();
            try
            {
                failures += !(decode(encode(s)) == s);
            }
            catch (const std::exception &)
            {
                ++failures;
            }
        }
        o.require(failures == 0, fmt::format("{} round-trip failures", failures));

        const std::vector<std::string> malformed = {
            "",
            "\n",
            "MG1\n",
            "MG0|1.000000000|n|v|-|load|1|u\n",
            "MG1|1.000000000|n|v|-|load|1\n",
            "MG1|1.000000000|n|v|-|load|1|u|x\n",
            "MG1|one|n|v|-|load|1|u\n",
            "MG1|1.000000000|n|v|-|load|1e999|u\n",
            "MG1|1.000000000|n|v|-|load|0x10|u\n",
            "MG1|1.000000000|n|v|-|load|1|u",
            "MG1|1.000000000||v|-|load|1|u\n",
            "MG1|1.000000000|n|v|-||1|u\n",
            "MG1|-1.000000000|n|v|-|load|1|u\n",
            "MG1|inf|n|v|-|load|1|u\n",
            "MG1|1.000000000|n|v|-|load|nan|u\n",
            "MG1|1.000000000|n|v|-|load| 1|u\n",
            "MG1|1.000000000|n|v|-|load|1|u\r\n",
        };
        Collector collector;
        for (const auto &d : malformed)
            o.require(!collector.ingest(d), "accepted: " + d);
        o.require(collector.decode_errors() == malformed.size(),
                  fmt::format("decode counter {} of {}", collector.decode_errors(), malformed.size()));

        // Random corruption of valid datagrams must never crash or be half-applied.
        std::uint64_t rejected = 0;
        for (int i = 0; i < 20000; ++i)
        {
            auto d = encode(MetricSample{static_cast<double>(i), "n", "v", std::nullopt, "load", 1.0, "u"});
            const auto edits = 1 + rng() % 3;
            for (std::uint64_t e = 0; e < edits; ++e)
                d[rng() % d.size()] = static_cast<char>(rng() % 256);
            const auto before = collector.size();
            if (!collector.ingest(d))
            {
                ++rejected;
                o.require(collector.size() == before, "rejected datagram changed the repository");
            }
        }
        const auto counted = collector.decode_errors() + collector.unknown_metrics() + collector.time_regressions();
        o.require(counted == malformed.size() + rejected, "rejections not all counted");
        if (o.pass)
            o.detail = fmt::format("1e5 round trips, {} malformed + {} corrupted rejected", malformed.size(), rejected);
        return o;
    }
} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 inter-cluster optimum below 15 streams", inter_optimum},
        {"2 intra-cluster split invariance", intra_invariance},
        {"3 small-file penalty", small_file_penalty},
        {"4 ingest rate", ingest_rate},
        {"5 replication completeness and traffic", replication_completeness},
        {"6 accounting conservation", accounting_conservation},
        {"7 scheduler oracle", scheduler_oracle},
        {"8 determinism", determinism},
        {"9 engine vs closed form", engine_vs_closed_form},
        {"10 codec", codec},
    };
    int failed = 0;
    for (const auto &[name, check] : criteria)
    {
        Outcome o;
        try
        {
            o = check();
        }
        catch (const std::exception &e)
        {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        failed += !o.pass;
        fmt::print("{} criterion {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail);
    }
    return failed == 0 ? 0 : 1;
}
