#include "mediogrid/monitor.hpp"
#include "mediogrid/topology.hpp"

#include <doctest.h>

#include <fmt/format.h>

#include <cmath>
#include <cstring>
#include <random>
#include <thread>

using namespace mediogrid;

namespace
{
    MetricSample sample(Seconds ts, std::string node, std::string vo, std::string name, double value,
                        std::optional<std::string> job = std::nullopt)
    {
        return MetricSample{ts, std::move(node), std::move(vo), std::move(job), std::move(name), value, "B"};
    }

    std::string token(std::mt19937_64 &rng)
    {
        static const char alphabet[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_./:";
        std::string s;
        const auto len = 1 + rng() % 12;
        for (std::size_t i = 0; i < len; ++i)
            s += alphabet[rng() % (sizeof(alphabet) - 1)];
        return s == "-" ? "x-" : s;
    }

    double any_double(std::mt19937_64 &rng)
    {
        switch (rng() % 4)
        {
        case 0: return static_cast<double>(rng() % 1000000);
        case 1: return std::ldexp(static_cast<double>(rng() >> 11), -static_cast<int>(rng() % 80));
        case 2: return -std::ldexp(static_cast<double>(rng() >> 11), static_cast<int>(rng() % 40));
        default:
        {
            double d;
            do
            {
                auto bits = rng();
                std::memcpy(&d, &bits, sizeof d);
            } while (!std::isfinite(d));
            return d;
        }
        }
    }
} // namespace

TEST_CASE("encode matches the datagram grammar")
{
    CHECK(encode(sample(1.5, "n1", "vo-a", "ftp_in_bytes", 4096)) == "MG1|1.500000000|n1|vo-a|-|ftp_in_bytes|4096|B\n");
    CHECK(encode(sample(0, "n", "v", "load", 0.1, "job-7")) == "MG1|0.000000000|n|v|job-7|load|0.10000000000000001|B\n");
}

TEST_CASE("codec round trip on random samples")
{
    std::mt19937_64 rng(77);
    for (int i = 0; i < 1000; ++i)
    {
        MetricSample s;
        s.ts = quantize_time(static_cast<double>(rng() % 100000000000ULL) / 1e6);
        s.node = token(rng);
        s.vo = token(rng);
        if (rng() % 2)
            s.job = token(rng);
        s.name = token(rng);
        s.value = any_double(rng);
        s.unit = token(rng);
        CHECK(decode(encode(s)) == s);
    }
}

TEST_CASE("malformed datagrams are rejected")
{
    const char *bad[] = {
        "MG1|1.0|n1|vo|-|ftp_in_bytes|4096\n",
        "MG2|1.0|n1|vo|-|ftp_in_bytes|4096|B\n",
        "MG1|x|n1|vo|-|ftp_in_bytes|4096|B\n",
        "MG1|1.0|n1|vo|-|ftp_in_bytes|4e|B\n",
        "MG1|1.0|n1|vo|-|ftp_in_bytes|4096|B|extra\n",
        "MG1|1.0||vo|-|ftp_in_bytes|4096|B\n",
        "MG1|1.0|n1|vo|-|ftp_in_bytes|nan|B\n",
        "MG1|1.0|n1|vo|-|ftp_in_bytes|4096|B",
        "",
        "garbage",
    };
    for (auto d : bad)
        CHECK_THROWS_AS(decode(d), CodecError);
}

TEST_CASE("agent loss")
{
    SUBCASE("loss 0 delivers everything")
    {
        Collector c;
        Agent a("n1", c, 0.0, RandomStream(1, "datagram-loss/n1"));
        for (int i = 0; i < 50; ++i)
            a.emit(sample(i, "n1", "v", "load", i));
        CHECK(a.delivered() == 50);
        CHECK(c.size() == 50);
    }
    SUBCASE("loss 1 delivers nothing")
    {
        Collector c;
        Agent a("n1", c, 1.0, RandomStream(1, "datagram-loss/n1"));
        for (int i = 0; i < 50; ++i)
            a.emit(sample(i, "n1", "v", "load", i));
        CHECK(a.lost() == 50);
        CHECK(c.size() == 0);
    }
    SUBCASE("loss 0.5 is reproducible per seed")
    {
        auto run = [](std::uint64_t seed) {
            Collector c;
            Agent a("n1", c, 0.5, RandomStream(seed, "datagram-loss/n1"));
            for (int i = 0; i < 200; ++i)
                a.emit(sample(i, "n1", "v", "load", i));
            return c.log_text();
        };
        CHECK(run(3) == run(3));
        CHECK(run(3) != run(4));
    }
}

TEST_CASE("collector checks")
{
    Collector c;
    CHECK(c.ingest(encode(sample(5, "n1", "v", "load", 1))));
    CHECK(c.size() == 1);
    CHECK_FALSE(c.ingest("MG1|nope\n"));
    CHECK(c.size() == 1);
    CHECK(c.decode_errors() == 1);
    CHECK_FALSE(c.ingest(encode(sample(6, "n1", "v", "no_such_metric", 1))));
    CHECK(c.unknown_metrics() == 1);
    // Other sources may lag behind n1.
    CHECK(c.ingest(encode(sample(2, "n2", "v", "load", 1))));
    CHECK(c.ingest(encode(sample(5, "n1", "v", "load", 2))));
    CHECK_FALSE(c.ingest(encode(sample(4, "n1", "v", "load", 3))));
    CHECK(c.time_regressions() == 1);
    CHECK(c.size() == 3);
}

TEST_CASE("collector under concurrent agents")
{
    Collector c;
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
    {
        threads.emplace_back([&c, t] {
            for (int i = 0; i < 500; ++i)
                c.ingest(encode(sample(i, fmt::format("n{}", t), "v", "ftp_in_bytes", 1)));
        });
    }
    for (auto &th : threads)
        th.join();
    CHECK(c.size() == 2000);
    CHECK(c.time_regressions() == 0);
    auto repo = MetricRepository::replay(c.log_text());
    CHECK(repo.size() == 2000);
}

TEST_CASE("accounting")
{
    MetricRepository repo;
    repo.append(sample(1, "n1", "vo-a", "ftp_in_bytes", 10));
    repo.append(sample(2, "n1", "vo-b", "ftp_in_bytes", 20));
    repo.append(sample(3, "n1", "vo-a", "ftp_in_bytes", 30));
    repo.append(sample(3, "n2", "vo-a", "ftp_in_bytes", 5));
    repo.append(sample(10, "n2", "vo-a", "ftp_in_bytes", 1000));

    AccountingQuery q{"ftp_in_bytes", GroupBy::node, 0, 10, Aggregation::sum};
    CHECK(accounting(repo, q) == std::vector<AccountingRow>{{"n1", 60}, {"n2", 5}});
    q.agg = Aggregation::avg;
    CHECK(accounting(repo, q) == std::vector<AccountingRow>{{"n1", 20}, {"n2", 5}});
    q.agg = Aggregation::rate;
    CHECK(accounting(repo, q) == std::vector<AccountingRow>{{"n1", 6}, {"n2", 0.5}});
    q.agg = Aggregation::sum;
    q.group_by = GroupBy::vo;
    CHECK(accounting(repo, q) == std::vector<AccountingRow>{{"vo-a", 45}, {"vo-b", 20}});

    q.t0 = 20;
    q.t1 = 30;
    CHECK(accounting(repo, q).empty());

    q.t1 = 20;
    CHECK_THROWS_AS(accounting(repo, q), MonitorError);
    q.t1 = 30;
    q.metric = "bogus";
    CHECK_THROWS_AS(accounting(repo, q), MonitorError);
}

TEST_CASE("cluster grouping sums member nodes")
{
    auto topo = load_topology("[cluster a]\nnode n1 capacity_gb=1\nnode n2 capacity_gb=1\n[cluster b]\nnode n3 capacity_gb=1\n");
    std::mt19937_64 rng(4);
    MetricRepository repo;
    const char *nodes[] = {"n1", "n2", "n3"};
    for (int i = 0; i < 300; ++i)
        repo.append(sample(i, nodes[rng() % 3], fmt::format("vo{}", rng() % 3), "ftp_in_bytes",
                           static_cast<double>(rng() % 100000)));
    AccountingQuery q{"ftp_in_bytes", GroupBy::node, 0, 1e9, Aggregation::sum};
    std::map<std::string, double> by_cluster;
    for (const auto &row : accounting(repo, q))
        by_cluster[topo.cluster_of(row.group).name] += row.value;
    q.group_by = GroupBy::cluster;
    auto rows = accounting(repo, q, &topo);
    REQUIRE(rows.size() == 2);
    for (const auto &row : rows)
        CHECK(row.value == by_cluster[row.group]);
    CHECK_THROWS(accounting(repo, q));
}

TEST_CASE("replay reproduces accounting")
{
    Collector c;
    std::mt19937_64 rng(8);
    std::vector<double> clocks(4, 0.0);
    for (int i = 0; i < 500; ++i)
    {
        const auto n = rng() % 4;
        clocks[n] += static_cast<double>(rng() % 1000) / 7.0;
        c.ingest(encode(MetricSample{quantize_time(clocks[n]), fmt::format("n{}", n), fmt::format("vo{}", rng() % 2),
                                     std::nullopt, rng() % 2 ? "ftp_in_bytes" : "load",
                                     static_cast<double>(rng() % 5000), "B"}));
    }
    auto live = c.repository();
    auto replayed = MetricRepository::replay(c.log_text());
    for (auto metric : {"ftp_in_bytes", "load"})
        for (auto g : {GroupBy::node, GroupBy::vo})
            for (auto a : {Aggregation::sum, Aggregation::avg, Aggregation::rate})
            {
                AccountingQuery q{metric, g, 100, 20000, a};
                CHECK(accounting(live, q) == accounting(replayed, q));
            }
}

TEST_CASE("job rollup")
{
    JobTree tree;
    tree.register_job({"root", std::nullopt, "v", "n1"});
    tree.register_job({"leaf", "root", "v", "n1"});
    tree.register_job({"c2", "root", "v", "n2"});
    tree.register_job({"empty", std::nullopt, "v", "n1"});
    CHECK_THROWS(tree.register_job({"leaf", "root", "v", "n1"}));
    CHECK_THROWS(tree.register_job({"orphan", "missing", "v", "n1"}));
    CHECK_THROWS(tree.register_job({"self", "self", "v", "n1"}));

    MetricRepository repo;
    repo.append(sample(1, "n1", "v", "ftp_in_bytes", 5, "leaf"));
    repo.append(sample(2, "n1", "v", "ftp_in_bytes", 7, "leaf"));
    CHECK(job_rollup(tree, repo, "leaf", "ftp_in_bytes", 0, 10) == 12);

    MetricRepository r2;
    r2.append(sample(1, "n1", "v", "ftp_in_bytes", 1, "root"));
    r2.append(sample(1, "n1", "v", "ftp_in_bytes", 3, "leaf"));
    r2.append(sample(1, "n2", "v", "ftp_in_bytes", 4, "c2"));
    CHECK(job_rollup(tree, r2, "root", "ftp_in_bytes", 0, 10) == 8);
    CHECK(job_rollup(tree, r2, "empty", "ftp_in_bytes", 0, 10) == 0);
    CHECK_THROWS(job_rollup(tree, r2, "nope", "ftp_in_bytes", 0, 10));
}

TEST_CASE("rollup decomposes over children")
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial)
    {
        JobTree tree;
        std::vector<std::string> ids;
        MetricRepository repo;
        std::map<std::string, double> own;
        for (int j = 0; j < 40; ++j)
        {
            const auto id = fmt::format("j{}", j);
            std::optional<std::string> parent;
            if (!ids.empty() && rng() % 5)
                parent = ids[rng() % ids.size()];
            tree.register_job({id, parent, "v", "n"});
            ids.push_back(id);
        }
        for (int s = 0; s < 200; ++s)
        {
            const auto &job = ids[rng() % ids.size()];
            const double v = static_cast<double>(rng() % 100);
            const double ts = static_cast<double>(rng() % 100);
            repo.append(sample(ts, "n", "v", "ftp_in_bytes", v, job));
            if (ts < 80)
                own[job] += v;
        }
        for (const auto &id : ids)
        {
            double expect = own[id];
            for (const auto &child : tree.children(id))
                expect += job_rollup(tree, repo, child, "ftp_in_bytes", 0, 80);
            CHECK(job_rollup(tree, repo, id, "ftp_in_bytes", 0, 80) == expect);
        }
    }
}

TEST_CASE("node stats")
{
    auto idle = node_stats_sample("n1", 0, 60);
    CHECK(idle[0].name == "load");
    CHECK(idle[0].value == 0);
    CHECK(idle[1].name == "cpu_pct");
    CHECK(idle[1].value == 0);
    CHECK(idle[2].name == "mem_mb");
    CHECK(idle[2].value == 512);
    auto busy = node_stats_sample("n1", 3, 60);
    CHECK(busy[0].value == 3);
    CHECK(busy[1].value == 30);
    CHECK(busy[2].value == 704);
    CHECK(node_stats_sample("n1", 25, 0)[1].value == 100);
}
