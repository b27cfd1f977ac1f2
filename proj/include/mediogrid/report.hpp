#pragma once

#include "mediogrid/monitor.hpp"

#include <string>
#include <string_view>

namespace mediogrid
{
    struct ReportWindow
    {
        Seconds t0 = 0.0;
        Seconds t1 = 0.0;
    };

    /// "T0:T1"; either bound may be "inf". An empty text selects 0:inf.
    ReportWindow parse_window(std::string_view text);

    /// Accounting over a datagram log as CSV `group,metric,agg,window_start,window_end,value`.
    /// Metric names found in the log are accepted alongside the built-in set.
    std::string accounting_report(std::string_view log_text, const AccountingQuery &query,
                                  const GridTopology *topology = nullptr);
} // namespace mediogrid
