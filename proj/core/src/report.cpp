#include "plab/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "plab/error.hpp"
#include "plab/trajectory.hpp"

namespace plab {

std::string objective_of_run(const std::string& run_id) {
    const auto colon = run_id.find(':');
    return colon == std::string::npos ? run_id : run_id.substr(0, colon);
}

namespace {

struct RunSeries {
    std::string run_id;
    std::vector<const EvalRecord*> points; // sorted by epoch
};

std::vector<RunSeries> group_by_run(const std::vector<EvalRecord>& records) {
    std::vector<RunSeries> runs;
    std::map<std::string, std::size_t> index;
    for (const EvalRecord& r : records) {
        auto [it, inserted] = index.emplace(r.run_id, runs.size());
        if (inserted) runs.push_back(RunSeries{r.run_id, {}});
        runs[it->second].points.push_back(&r);
    }
    for (RunSeries& run : runs)
        std::sort(run.points.begin(), run.points.end(),
                  [](const EvalRecord* a, const EvalRecord* b) { return a->epoch < b->epoch; });
    return runs;
}

} // namespace

std::string render_scatter_svg(const std::vector<EvalRecord>& records) {
    const int width = 720, height = 520;
    const double left = 60, right = 40, top = 40, bottom = 50;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    auto x_of = [&](double asr) { return left + plot_w * asr / 100.0; };
    auto y_of = [&](double acc) { return top + plot_h * (1.0 - acc / 100.0); };

    const std::vector<RunSeries> runs = group_by_run(records);
    int max_epoch = 1;
    for (const RunSeries& run : runs)
        for (const EvalRecord* p : run.points) max_epoch = std::max(max_epoch, p->epoch);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    // Grid and axes.
    for (int v = 0; v <= 100; v += 20) {
        svg << "<line x1=\"" << x_of(v) << "\" y1=\"" << top << "\" x2=\"" << x_of(v) << "\" y2=\""
            << top + plot_h << "\" stroke=\"#dddddd\"/>\n";
        svg << "<line x1=\"" << left << "\" y1=\"" << y_of(v) << "\" x2=\"" << left + plot_w
            << "\" y2=\"" << y_of(v) << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << x_of(v) << "\" y=\"" << top + plot_h + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << v << "</text>\n";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y_of(v) + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << v << "</text>\n";
    }
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
        << "\" font-size=\"13\" text-anchor=\"middle\">ASR (%)</text>\n";
    svg << "<text x=\"18\" y=\"" << top + plot_h / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << top + plot_h / 2 << ")\">accuracy (%)</text>\n";

    for (std::size_t i = 0; i < runs.size(); ++i) {
        const int hue = static_cast<int>(360.0 * i / runs.size());
        const std::string color = "hsl(" + std::to_string(hue) + ",70%,40%)";
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
        for (const EvalRecord* p : runs[i].points) svg << x_of(p->asr) << "," << y_of(p->accuracy) << " ";
        svg << "\"/>\n";
        // Later epochs get larger markers so trajectory direction is visible.
        for (const EvalRecord* p : runs[i].points) {
            const double r = 2.0 + 4.0 * p->epoch / max_epoch;
            svg << "<circle cx=\"" << x_of(p->asr) << "\" cy=\"" << y_of(p->accuracy) << "\" r=\"" << r
                << "\" fill=\"" << color << "\" fill-opacity=\"0.75\"/>\n";
        }
        svg << "<text x=\"" << left + 10 << "\" y=\"" << top + 16 + 14.0 * i
            << "\" font-size=\"11\" fill=\"" << color << "\">" << runs[i].run_id << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_table_summary(const std::vector<EvalRecord>& records) {
    // Objective -> (earliest-epoch accuracy, best cleaned accuracy at ASR <= 5).
    std::map<std::string, std::vector<EvalRecord>> by_objective;
    for (const EvalRecord& r : records) by_objective[objective_of_run(r.run_id)].push_back(r);

    std::ostringstream out;
    out << "objective,Orig. Acc.,Clean Acc. (ASR <= 5%)\n";
    for (const auto& [objective, recs] : by_objective) {
        const EvalRecord* start = &recs.front();
        for (const EvalRecord& r : recs)
            if (r.epoch < start->epoch) start = &r;
        const auto best = success_filter(recs, 5.0);
        out << objective << ',' << format_double(start->accuracy) << ','
            << (best ? format_double(best->accuracy) : std::string("none")) << '\n';
    }
    return out.str();
}

void emit_report(const std::vector<EvalRecord>& records, const std::filesystem::path& out_dir) {
    if (records.empty()) throw Error("emit_report: no records");
    std::filesystem::create_directories(out_dir);

    write_trajectory_csv(records, out_dir / "trajectory.csv");

    auto write_file = [&](const std::filesystem::path& path, const std::string& content) {
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw Error("emit_report: cannot open " + path.string() + " for writing");
        f << content;
        if (!f) throw Error("emit_report: write failed for " + path.string());
    };
    write_file(out_dir / "scatter.svg", render_scatter_svg(records));
    write_file(out_dir / "table_summary.csv", render_table_summary(records));
}

} // namespace plab
