#pragma once

#include "mediogrid/units.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace mediogrid
{
    class SimulationError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    enum class EventKind
    {
        granule_arrival,
        transfer_complete,
        reshare,
        metric_period,
        request_arrival,
    };

    std::string_view to_string(EventKind kind) noexcept;

    using EventId = std::uint64_t;

    struct EventRecord
    {
        Seconds time = 0.0;
        EventId seq = 0;
        EventKind kind = EventKind::reshare;
        std::string detail;

        bool operator==(const EventRecord &) const = default;
    };

    /// Labeled pseudo-random substream. Each consumer derives its own stream
    /// from the run seed and a label, so streams never interfere.
    class RandomStream
    {
    public:
        RandomStream(std::uint64_t seed, std::string_view label);

        std::uint64_t next_u64();
        /// Uniform in [0, 1) with 53 random bits.
        double uniform01();
        double uniform(double lo, double hi);
        /// Uniform integer in [0, n).
        std::uint64_t below(std::uint64_t n);

    private:
        std::mt19937_64 engine_;
    };

    struct RunStats
    {
        std::uint64_t executed = 0;
        std::uint64_t cancelled = 0;
        std::uint64_t pending = 0;
    };

    /// Discrete-event engine with a virtual clock. Events are ordered by
    /// (time, insertion sequence) and executed on the calling thread.
    class Simulation
    {
    public:
        using Action = std::function<void()>;

        explicit Simulation(std::uint64_t seed = 0, bool record_events = true);

        Simulation(const Simulation &) = delete;
        Simulation &operator=(const Simulation &) = delete;

        Seconds now() const noexcept { return now_; }
        std::uint64_t seed() const noexcept { return seed_; }

        /// Enqueue an event. Times earlier than now() by more than one quantum
        /// are a consistency error; anything closer is clamped to now().
        EventId schedule_at(Seconds time, EventKind kind, std::string detail, Action action);
        EventId schedule_after(Seconds delay, EventKind kind, std::string detail, Action action);

        /// Drop a queued event. Returns false when it already ran or was cancelled.
        bool cancel(EventId id);

        /// Execute events with time <= horizon.
        RunStats run_until(Seconds horizon);
        /// Execute until the queue is empty.
        RunStats run();

        std::size_t pending() const noexcept { return queue_.size() - cancelled_.size(); }
        std::uint64_t executed() const noexcept { return executed_; }

        RandomStream stream(std::string_view label) const { return RandomStream(seed_, label); }

        const std::vector<EventRecord> &event_log() const noexcept { return log_; }
        void write_event_log(std::ostream &out) const;

    private:
        struct Entry
        {
            Seconds time;
            EventId seq;
            EventKind kind;
            std::string detail;
            Action action;
        };

        // Heap comparator: the earliest (time, seq) sits at the front.
        struct Later
        {
            bool operator()(const Entry &a, const Entry &b) const noexcept
            {
                if (a.time != b.time)
                    return a.time > b.time;
                return a.seq > b.seq;
            }
        };

        bool step(Seconds horizon);

        std::uint64_t seed_;
        bool record_;
        Seconds now_ = 0.0;
        EventId next_seq_ = 0;
        std::uint64_t executed_ = 0;
        std::uint64_t cancelled_count_ = 0;
        std::vector<Entry> queue_;
        std::unordered_set<EventId> cancelled_;
        std::unordered_set<EventId> queued_;
        std::vector<EventRecord> log_;
    };

    /// CSV field escaping used by every CSV writer in the project.
    std::string csv_field(std::string_view value);
} // namespace mediogrid
