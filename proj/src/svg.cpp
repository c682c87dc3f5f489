#include "sce/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sce {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

void plot_metrics_svg(const std::string& metrics_csv, const std::string& out_svg,
                      std::vector<std::string> columns) {
    if (columns.empty())
        columns = {"loss", "loss_infonce", "loss_ressl", "loss_ceil", "lr"};
    CsvTable table = read_csv(metrics_csv);
    SCE_CHECK(!table.rows.empty(), "plot: metrics file has no rows: ", metrics_csv);

    std::vector<size_t> col_idx;
    for (const std::string& want : columns) {
        auto it = std::find(table.header.begin(), table.header.end(), want);
        if (it == table.header.end())
            throw IoError("plot: column '" + want + "' not in " + metrics_csv);
        col_idx.push_back(static_cast<size_t>(it - table.header.begin()));
    }

    const size_t n = table.rows.size();
    std::vector<std::vector<double>> series(col_idx.size(), std::vector<double>(n));
    double lo = 0.0, hi = 1e-12;
    for (size_t s = 0; s < col_idx.size(); ++s)
        for (size_t i = 0; i < n; ++i) {
            const double v = std::stod(table.rows[i][col_idx[s]]);
            series[s][i] = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }

    const double width = 900, height = 500;
    const double ml = 70, mr = 160, mt = 30, mb = 50;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto x_of = [&](size_t i) {
        return ml + (n == 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(n - 1));
    };
    auto y_of = [&](double v) { return mt + ph * (1.0 - (v - lo) / (hi - lo)); };

    std::ofstream out(out_svg, std::ios::trunc);
    if (!out) throw IoError("cannot write SVG: " + out_svg);
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"#333\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"#333\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        const double y = y_of(v);
        out << "<line x1=\"" << ml - 4 << "\" y1=\"" << y << "\" x2=\"" << ml << "\" y2=\"" << y
            << "\" stroke=\"#333\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
            << "\" font-size=\"12\" text-anchor=\"end\" fill=\"#333\">" << fmt(v) << "</text>\n";
    }
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
        << "\" font-size=\"13\" text-anchor=\"middle\" fill=\"#333\">step</text>\n";

    for (size_t s = 0; s < series.size(); ++s) {
        out << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 6]
            << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < n; ++i) out << fmt(x_of(i)) << "," << fmt(y_of(series[s][i])) << " ";
        out << "\"/>\n";
        const double ly = mt + 18 + 18 * static_cast<double>(s);
        out << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << ml + pw + 34
            << "\" y2=\"" << ly - 4 << "\" stroke=\"" << kPalette[s % 6]
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << ml + pw + 40 << "\" y=\"" << ly
            << "\" font-size=\"12\" fill=\"#333\">" << columns[s] << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError("failed writing SVG: " + out_svg);
}

}  // namespace sce
