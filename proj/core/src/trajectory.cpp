#include "plab/trajectory.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "plab/error.hpp"

namespace plab {

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw Error("csv: malformed number '" + s + "'");
    return v;
}

std::string to_csv(const std::vector<EvalRecord>& records) {
    std::ostringstream out;
    out << kTrajectoryHeader << '\n';
    for (const EvalRecord& r : records) {
        out << r.run_id << ',' << r.epoch << ',' << format_double(r.lr) << ',' << r.loss_mode << ','
            << format_double(r.accuracy) << ',' << format_double(r.asr) << ','
            << format_double(r.loss.mmcl) << ',' << format_double(r.loss.ssl) << ','
            << format_double(r.loss.deep_clust) << ',' << format_double(r.loss.l2) << '\n';
    }
    return out.str();
}

void write_trajectory_csv(const std::vector<EvalRecord>& records,
                          const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("csv: cannot open " + path.string() + " for writing");
    f << to_csv(records);
    if (!f) throw Error("csv: write failed for " + path.string());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

std::vector<EvalRecord> parse_trajectory_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error("csv: " + origin + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrajectoryHeader)
        throw Error("csv: " + origin + " has unexpected header '" + line + "'");

    std::vector<EvalRecord> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 10)
            throw Error("csv: " + origin + " line " + std::to_string(line_no) + " has " +
                        std::to_string(f.size()) + " fields, expected 10");
        EvalRecord r;
        r.run_id = f[0];
        r.epoch = static_cast<int>(parse_double(f[1]));
        r.lr = parse_double(f[2]);
        r.loss_mode = f[3];
        r.accuracy = parse_double(f[4]);
        r.asr = parse_double(f[5]);
        r.loss.mmcl = parse_double(f[6]);
        r.loss.ssl = parse_double(f[7]);
        r.loss.deep_clust = parse_double(f[8]);
        r.loss.l2 = parse_double(f[9]);
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<EvalRecord> read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("csv: cannot open " + path.string());
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_trajectory_csv(buf.str(), path.string());
}

} // namespace plab
