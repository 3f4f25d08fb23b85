#pragma once

#include <string>
#include <vector>

#include "powertrace/types.hpp"

namespace powertrace {

// trace.csv: header `timestamp_s,power_w`, rows sorted by timestamp with
// near-uniform spacing (1% tolerance around the median step). dt is
// inferred as the median timestamp difference. Row numbers in error
// messages count data rows from 1.
PowerTrace read_power_trace(const std::string& path);
void write_power_trace(const std::string& path, const PowerTrace& trace);

// requests.csv: header `arrival_s,n_in,n_out,ttft_s,tbt_s`. tbt_s may be
// empty only when n_out is 0. Records are returned sorted by arrival_s.
std::vector<RequestLogRecord> read_request_log(const std::string& path);
void write_request_log(const std::string& path,
                       const std::vector<RequestLogRecord>& records);

// schedule.csv: header `arrival_s,n_in,n_out`, sorted on read.
ArrivalSchedule read_arrival_schedule(const std::string& path);
void write_arrival_schedule(const std::string& path, const ArrivalSchedule& schedule);

// Shortest round-trip decimal for a double (used by all CSV/JSON writers
// so repeated runs are byte-identical).
std::string format_double(double v);

} // namespace powertrace
