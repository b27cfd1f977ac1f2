#include "mediogrid/simcore.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace mediogrid
{
    std::string_view to_string(EventKind kind) noexcept
    {
        switch (kind)
        {
        case EventKind::granule_arrival: return "granule-arrival";
        case EventKind::transfer_complete: return "transfer-complete";
        case EventKind::reshare: return "reshare";
        case EventKind::metric_period: return "metric-period";
        case EventKind::request_arrival: return "request-arrival";
        }
        return "reshare";
    }

    namespace
    {
        std::uint64_t splitmix64(std::uint64_t &x)
        {
            std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            return z ^ (z >> 31);
        }

        std::uint64_t fnv1a(std::string_view s)
        {
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (unsigned char c : s)
            {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
            return h;
        }
    } // namespace

    RandomStream::RandomStream(std::uint64_t seed, std::string_view label)
    {
        std::uint64_t mix = seed ^ fnv1a(label);
        std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(mix)), static_cast<std::uint32_t>(splitmix64(mix)),
                          static_cast<std::uint32_t>(splitmix64(mix)), static_cast<std::uint32_t>(splitmix64(mix))};
        engine_.seed(seq);
    }

    std::uint64_t RandomStream::next_u64() { return engine_(); }

    double RandomStream::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double RandomStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    std::uint64_t RandomStream::below(std::uint64_t n)
    {
        if (n == 0)
            return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = engine_();
        while (x >= limit)
            x = engine_();
        return x % n;
    }

    Simulation::Simulation(std::uint64_t seed, bool record_events) : seed_(seed), record_(record_events) {}

    EventId Simulation::schedule_at(Seconds time, EventKind kind, std::string detail, Action action)
    {
        if (!std::isfinite(time))
            throw SimulationError("event scheduled at non-finite time");
        if (time < now_ - kTimeQuantum)
            throw SimulationError(fmt::format("event '{}' scheduled in the past: {:.9f} < now {:.9f}", to_string(kind),
                                              time, now_));
        time = std::max(time, now_);
        const EventId seq = next_seq_++;
        queue_.push_back(Entry{time, seq, kind, std::move(detail), std::move(action)});
        std::push_heap(queue_.begin(), queue_.end(), Later{});
        queued_.insert(seq);
        return seq;
    }

    EventId Simulation::schedule_after(Seconds delay, EventKind kind, std::string detail, Action action)
    {
        return schedule_at(now_ + delay, kind, std::move(detail), std::move(action));
    }

    bool Simulation::cancel(EventId id)
    {
        if (queued_.erase(id) == 0)
            return false;
        cancelled_.insert(id);
        return true;
    }

    bool Simulation::step(Seconds horizon)
    {
        while (!queue_.empty())
        {
            if (queue_.front().time > horizon)
                return false;
            std::pop_heap(queue_.begin(), queue_.end(), Later{});
            Entry entry = std::move(queue_.back());
            queue_.pop_back();
            if (cancelled_.erase(entry.seq) != 0)
            {
                ++cancelled_count_;
                continue;
            }
            queued_.erase(entry.seq);
            now_ = entry.time;
            ++executed_;
            if (record_)
                log_.push_back(EventRecord{entry.time, entry.seq, entry.kind, std::move(entry.detail)});
            if (entry.action)
                entry.action();
            return true;
        }
        return false;
    }

    RunStats Simulation::run_until(Seconds horizon)
    {
        const auto executed_before = executed_;
        const auto cancelled_before = cancelled_count_;
        while (step(horizon))
        {
        }
        if (horizon > now_ && std::isfinite(horizon))
            now_ = horizon;
        return RunStats{executed_ - executed_before, cancelled_count_ - cancelled_before, pending()};
    }

    RunStats Simulation::run()
    {
        const auto executed_before = executed_;
        const auto cancelled_before = cancelled_count_;
        while (step(std::numeric_limits<Seconds>::infinity()))
        {
        }
        return RunStats{executed_ - executed_before, cancelled_count_ - cancelled_before, pending()};
    }

    std::string csv_field(std::string_view value)
    {
        if (value.find_first_of(",\"\n") == std::string_view::npos)
            return std::string(value);
        std::string out = "\"";
        for (char c : value)
        {
            if (c == '"')
                out += '"';
            out += c;
        }
        out += '"';
        return out;
    }

    void Simulation::write_event_log(std::ostream &out) const
    {
        out << "time,seq,kind,detail\n";
        for (const auto &e : log_)
            out << fmt::format("{:.9f},{},{},{}\n", e.time, e.seq, to_string(e.kind), csv_field(e.detail));
    }
} // namespace mediogrid
