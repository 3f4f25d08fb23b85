#include "powertrace/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "powertrace/log.hpp"

namespace powertrace {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& path, std::size_t row,
                    const char* what) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError(path + ": row " + std::to_string(row) + ": bad " +
                          what + " value '" + s + "'");
    return v;
}

std::int64_t parse_int(const std::string& s, const std::string& path, std::size_t row,
                       const char* what) {
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw FormatError(path + ": row " + std::to_string(row) + ": bad " +
                          what + " value '" + s + "'");
    return v;
}

std::string read_header(std::ifstream& in, const std::string& path,
                        const std::string& expected) {
    std::string header;
    if (!std::getline(in, header))
        throw FormatError(path + ": empty file, expected header '" + expected + "'");
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (header != expected)
        throw FormatError(path + ": expected header '" + expected + "', got '" +
                          header + "'");
    return header;
}

} // namespace

PowerTrace read_power_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open");
    read_header(in, path, "timestamp_s,power_w");

    std::vector<double> times;
    std::vector<double> watts;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": expected 2 columns, got " +
                              std::to_string(fields.size()));
        double t = parse_double(fields[0], path, row, "timestamp_s");
        double p = parse_double(fields[1], path, row, "power_w");
        if (p < 0.0)
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": negative power " + fields[1]);
        if (!times.empty() && t <= times.back())
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": timestamps not strictly increasing");
        times.push_back(t);
        watts.push_back(p);
    }
    if (times.empty()) throw FormatError(path + ": no samples");

    PowerTrace trace;
    trace.start_time = times.front();
    trace.samples = std::move(watts);
    if (times.size() == 1) {
        log_warn(path + ": single sample, defaulting dt to 0.25 s");
        trace.dt = 0.25;
        return trace;
    }

    std::vector<double> diffs(times.size() - 1);
    for (std::size_t i = 1; i < times.size(); ++i) diffs[i - 1] = times[i] - times[i - 1];
    std::vector<double> sorted = diffs;
    std::sort(sorted.begin(), sorted.end());
    double median = sorted.size() % 2 == 1
                        ? sorted[sorted.size() / 2]
                        : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    for (std::size_t i = 0; i < diffs.size(); ++i) {
        if (std::abs(diffs[i] - median) > 0.01 * median)
            throw FormatError(path + ": row " + std::to_string(i + 2) +
                              ": spacing " + format_double(diffs[i]) +
                              " deviates more than 1% from median step " +
                              format_double(median));
    }
    trace.dt = median;
    return trace;
}

void write_power_trace(const std::string& path, const PowerTrace& trace) {
    std::ofstream out(path);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << "timestamp_s,power_w\n";
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        double t = trace.start_time + static_cast<double>(i) * trace.dt;
        out << format_double(t) << ',' << format_double(trace.samples[i]) << '\n';
    }
    if (!out) throw FormatError(path + ": write failed");
}

std::vector<RequestLogRecord> read_request_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open");
    read_header(in, path, "arrival_s,n_in,n_out,ttft_s,tbt_s");

    std::vector<RequestLogRecord> records;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        auto fields = split_csv_line(line);
        if (fields.size() != 5)
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": expected 5 columns, got " +
                              std::to_string(fields.size()));
        RequestLogRecord rec;
        rec.arrival_s = parse_double(fields[0], path, row, "arrival_s");
        rec.n_in = parse_int(fields[1], path, row, "n_in");
        rec.n_out = parse_int(fields[2], path, row, "n_out");
        rec.ttft_s = parse_double(fields[3], path, row, "ttft_s");
        if (rec.arrival_s < 0.0)
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": negative arrival_s");
        if (rec.n_in < 0 || rec.n_out < 0)
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": negative token count");
        if (rec.ttft_s <= 0.0)
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": ttft_s must be positive");
        if (fields[4].empty()) {
            if (rec.n_out > 0)
                throw FormatError(path + ": row " + std::to_string(row) +
                                  ": tbt_s missing for request with n_out > 0");
        } else {
            double tbt = parse_double(fields[4], path, row, "tbt_s");
            if (tbt <= 0.0)
                throw FormatError(path + ": row " + std::to_string(row) +
                                  ": tbt_s must be positive");
            rec.tbt_s = tbt;
        }
        records.push_back(rec);
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const RequestLogRecord& a, const RequestLogRecord& b) {
                         return a.arrival_s < b.arrival_s;
                     });
    return records;
}

ArrivalSchedule read_arrival_schedule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open");
    read_header(in, path, "arrival_s,n_in,n_out");

    ArrivalSchedule schedule;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        auto fields = split_csv_line(line);
        if (fields.size() != 3)
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": expected 3 columns, got " +
                              std::to_string(fields.size()));
        Request req;
        req.arrival_s = parse_double(fields[0], path, row, "arrival_s");
        req.n_in = parse_int(fields[1], path, row, "n_in");
        req.n_out = parse_int(fields[2], path, row, "n_out");
        if (req.arrival_s < 0.0)
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": negative arrival_s");
        if (req.n_in < 0 || req.n_out < 0)
            throw FormatError(path + ": row " + std::to_string(row) +
                              ": negative token count");
        schedule.requests.push_back(req);
    }
    std::stable_sort(schedule.requests.begin(), schedule.requests.end(),
                     [](const Request& a, const Request& b) {
                         return a.arrival_s < b.arrival_s;
                     });
    return schedule;
}

void write_arrival_schedule(const std::string& path, const ArrivalSchedule& schedule) {
    std::ofstream out(path);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << "arrival_s,n_in,n_out\n";
    for (const auto& req : schedule.requests)
        out << format_double(req.arrival_s) << ',' << req.n_in << ',' << req.n_out
            << '\n';
    if (!out) throw FormatError(path + ": write failed");
}

void write_request_log(const std::string& path,
                       const std::vector<RequestLogRecord>& records) {
    std::ofstream out(path);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << "arrival_s,n_in,n_out,ttft_s,tbt_s\n";
    for (const auto& rec : records) {
        out << format_double(rec.arrival_s) << ',' << rec.n_in << ',' << rec.n_out
            << ',' << format_double(rec.ttft_s) << ',';
        if (rec.tbt_s) out << format_double(*rec.tbt_s);
        out << '\n';
    }
    if (!out) throw FormatError(path + ": write failed");
}

} // namespace powertrace
