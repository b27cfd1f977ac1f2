#include "mediogrid/report.hpp"

#include "mediogrid/topology.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <limits>

namespace mediogrid
{
    namespace
    {
        Seconds parse_bound(std::string_view text)
        {
            if (text == "inf")
                return std::numeric_limits<double>::infinity();
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
                throw MonitorError("invalid window bound '" + std::string(text) + "'");
            return v;
        }

        std::string bound_text(Seconds t)
        {
            return std::isinf(t) ? std::string("inf") : fmt::format("{}", t);
        }
    } // namespace

    ReportWindow parse_window(std::string_view text)
    {
        if (text.empty())
            return {0.0, std::numeric_limits<double>::infinity()};
        auto colon = text.find(':');
        if (colon == std::string_view::npos)
            throw MonitorError("window must be T0:T1");
        ReportWindow w{parse_bound(text.substr(0, colon)), parse_bound(text.substr(colon + 1))};
        if (!(w.t0 < w.t1))
            throw MonitorError("empty window interval");
        return w;
    }

    std::string accounting_report(std::string_view log_text, const AccountingQuery &query,
                                  const GridTopology *topology)
    {
        if (query.agg == Aggregation::rate && !std::isfinite(query.t1 - query.t0))
            throw MonitorError("rate needs a finite window");

        MetricDictionary dictionary;
        std::size_t start = 0;
        while (start < log_text.size())
        {
            auto end = log_text.find('\n', start);
            end = end == std::string_view::npos ? log_text.size() : end + 1;
            try
            {
                dictionary.add(decode(log_text.substr(start, end - start)).name);
            }
            catch (const CodecError &)
            {
                // replay() reports the line
            }
            start = end;
        }
        auto repo = MetricRepository::replay(log_text, std::move(dictionary));

        std::string out = "group,metric,agg,window_start,window_end,value\n";
        for (const auto &row : accounting(repo, query, topology))
        {
            out += fmt::format("{},{},{},{},{},{}\n", csv_field(row.group), csv_field(query.metric),
                               to_string(query.agg), bound_text(query.t0), bound_text(query.t1), row.value);
        }
        return out;
    }
} // namespace mediogrid
