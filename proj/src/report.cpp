#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "srlab/bench.hpp"
#include "srlab/metrics.hpp"

namespace srlab {

namespace fs = std::filesystem;

namespace {

std::string fmt(char const* spec, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string num(double v) { return format_double(v); }

std::string opt_num(std::optional<double> v) { return v ? num(*v) : std::string(); }

std::string xml(std::string const& s)
{
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '"') out += "&quot;";
        else out += c;
    }
    return out;
}

std::string file_token(std::string const& s)
{
    std::string out;
    for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out;
}

// Method rows in table order, as summarize() orders them.
struct Row {
    std::string method, init, label;
    friend bool operator==(Row const&, Row const&) = default;
};

std::vector<Row> ordered_rows(std::vector<RunRecord> const& records)
{
    std::vector<Row> rows;
    for (auto const& s : summarize(records)) rows.push_back({s.method, s.init, s.label});
    return rows;
}

bool in_row(RunRecord const& r, Row const& row) { return r.method == row.method && r.init == row.init; }

using Panel = std::pair<std::string, std::string>; // problem, variant

std::vector<Panel> panels(std::vector<RunRecord> const& records)
{
    std::set<Panel> s;
    for (auto const& r : records) s.insert({r.problem, r.variant});
    return {s.begin(), s.end()};
}

class Bundle {
public:
    explicit Bundle(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void write(std::string const& name, std::string const& text)
    {
        fs::path const path = dir_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("build_reports: cannot write " + path.string());
        out << text;
        files_.push_back(path);
    }

    void notice(std::string msg) { notices_.push_back(std::move(msg)); }

    std::vector<fs::path> finish()
    {
        std::string text;
        for (auto const& n : notices_) text += n + "\n";
        write("notices.txt", text);
        std::sort(files_.begin(), files_.end());
        return files_;
    }

private:
    fs::path dir_;
    std::vector<fs::path> files_;
    std::vector<std::string> notices_;
};

// --- SVG -----------------------------------------------------------------

class Svg {
public:
    Svg(double w, double h, std::string const& title) : w_(w), h_(h)
    {
        body_ += "<title>" + xml(title) + "</title>\n";
        text(w / 2, 18, title, "middle", 14);
    }

    void data(std::string const& csv) { body_ += "<desc>\n" + xml(csv) + "</desc>\n"; }

    void line(double x1, double y1, double x2, double y2, std::string const& stroke = "#000", std::string const& extra = "")
    {
        body_ += "<line x1=\"" + c(x1) + "\" y1=\"" + c(y1) + "\" x2=\"" + c(x2) + "\" y2=\"" + c(y2) + "\" stroke=\"" +
                 stroke + "\"" + extra + "/>\n";
    }

    void rect(double x, double y, double w, double h, std::string const& fill, std::string const& stroke = "#000")
    {
        body_ += "<rect x=\"" + c(x) + "\" y=\"" + c(y) + "\" width=\"" + c(w) + "\" height=\"" + c(h) + "\" fill=\"" +
                 fill + "\" stroke=\"" + stroke + "\"/>\n";
    }

    void circle(double x, double y, double r, std::string const& stroke)
    {
        body_ += "<circle cx=\"" + c(x) + "\" cy=\"" + c(y) + "\" r=\"" + c(r) + "\" fill=\"none\" stroke=\"" + stroke +
                 "\"/>\n";
    }

    void text(double x, double y, std::string const& s, char const* anchor = "middle", int size = 11, double rotate = 0)
    {
        body_ += "<text x=\"" + c(x) + "\" y=\"" + c(y) + "\" font-size=\"" + std::to_string(size) +
                 "\" text-anchor=\"" + anchor + "\"";
        if (rotate != 0) body_ += " transform=\"rotate(" + c(rotate) + " " + c(x) + " " + c(y) + ")\"";
        body_ += ">" + xml(s) + "</text>\n";
    }

    std::string str() const
    {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + c(w_) + "\" height=\"" + c(h_) +
               "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n" + body_ +
               "</svg>\n";
    }

private:
    static std::string c(double v) { return fmt("%.2f", v); }
    double w_, h_;
    std::string body_;
};

struct BoxStats {
    std::size_t n = 0;
    double lo = 0, q1 = 0, median = 0, q3 = 0, hi = 0; // whiskers at the most extreme non-outliers
    std::vector<double> outliers;
};

std::optional<BoxStats> box_stats(std::vector<double> const& values)
{
    std::vector<double> finite;
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) return std::nullopt;
    auto const flags = iqr_outliers(finite);
    BoxStats b;
    b.n = finite.size();
    b.q1 = quantile(finite, 0.25);
    b.median = quantile(finite, 0.5);
    b.q3 = quantile(finite, 0.75);
    b.lo = b.q3;
    b.hi = b.q1;
    for (std::size_t i = 0; i < finite.size(); ++i) {
        if (flags[i]) {
            b.outliers.push_back(finite[i]);
            continue;
        }
        b.lo = std::min(b.lo, finite[i]);
        b.hi = std::max(b.hi, finite[i]);
    }
    std::sort(b.outliers.begin(), b.outliers.end());
    return b;
}

struct BoxSeries {
    std::string label;
    std::vector<double> values; // already on the plotted scale
};

std::string box_plot(std::string const& title, std::string const& axis, std::vector<BoxSeries> const& series,
                     std::string const& csv, std::optional<double> marker = std::nullopt)
{
    double const left = 70, top = 40, plotH = 260, slot = 64;
    double const width = left + slot * static_cast<double>(series.size()) + 30;
    Svg svg(width, top + plotH + 120, title);
    svg.data(csv);

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto const& s : series)
        for (double v : s.values)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    if (marker) {
        lo = std::min(lo, *marker);
        hi = std::max(hi, *marker);
    }
    if (!std::isfinite(lo)) {
        lo = 0;
        hi = 1;
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    double const pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto y = [&](double v) { return top + plotH * (hi - v) / (hi - lo); };

    svg.line(left, top, left, top + plotH);
    svg.line(left, top + plotH, width - 20, top + plotH);
    for (int t = 0; t <= 5; ++t) {
        double const v = lo + (hi - lo) * t / 5.0;
        svg.line(left - 4, y(v), left, y(v));
        svg.text(left - 6, y(v) + 4, fmt("%.3g", v), "end", 10);
    }
    svg.text(16, top + plotH / 2, axis, "middle", 11, -90);

    for (std::size_t i = 0; i < series.size(); ++i) {
        double const cx = left + slot * (static_cast<double>(i) + 0.5);
        svg.text(cx, top + plotH + 14, series[i].label, "end", 10, -40);
        auto const b = box_stats(series[i].values);
        if (!b) continue;
        double const half = slot * 0.3;
        svg.line(cx, y(b->lo), cx, y(b->q1));
        svg.line(cx, y(b->q3), cx, y(b->hi));
        svg.line(cx - half / 2, y(b->lo), cx + half / 2, y(b->lo));
        svg.line(cx - half / 2, y(b->hi), cx + half / 2, y(b->hi));
        svg.rect(cx - half, y(b->q3), 2 * half, std::max(y(b->q1) - y(b->q3), 0.5), "#cfe0f3");
        svg.line(cx - half, y(b->median), cx + half, y(b->median), "#c00");
        for (double o : b->outliers) svg.circle(cx, y(o), 2.5, "#555");
    }
    if (marker) svg.line(left, y(*marker), width - 20, y(*marker), "#d00", " stroke-dasharray=\"4 3\"");
    return svg.str();
}

std::string heat_color(double frac)
{
    int const shade = static_cast<int>(std::lround(255.0 - 200.0 * std::clamp(frac, 0.0, 1.0)));
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", shade, shade, 255);
    return buf;
}

struct HeatRow {
    std::string label;
    std::size_t n = 0;
    std::vector<std::size_t> counts;
};

std::string heatmap(std::string const& title, std::vector<HeatRow> const& rows, long ted_max, std::string const& csv)
{
    double const left = 150, top = 40, cell = 30;
    double const cols = static_cast<double>(ted_max + 1);
    Svg svg(left + cell * cols + 20, top + cell * static_cast<double>(rows.size()) + 50, title);
    svg.data(csv);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double const yy = top + cell * static_cast<double>(i);
        svg.text(left - 6, yy + cell / 2 + 4, rows[i].label, "end", 10);
        for (std::size_t k = 0; k < rows[i].counts.size(); ++k) {
            double const frac = rows[i].n ? static_cast<double>(rows[i].counts[k]) / static_cast<double>(rows[i].n) : 0.0;
            double const xx = left + cell * static_cast<double>(k);
            svg.rect(xx, yy, cell, cell, heat_color(frac), "#fff");
            svg.text(xx + cell / 2, yy + cell / 2 + 4, std::to_string(rows[i].counts[k]), "middle", 10);
        }
    }
    double const base = top + cell * static_cast<double>(rows.size());
    for (long k = 0; k <= ted_max; ++k)
        svg.text(left + cell * (static_cast<double>(k) + 0.5), base + 14, std::to_string(k), "middle", 10);
    svg.text(left + cell * cols / 2, base + 32, "TED", "middle", 11);
    return svg.str();
}

struct CorrBar {
    std::string label;
    std::optional<CorrelationResult> ted, mse;
};

std::string correlation_chart(std::vector<CorrBar> const& bars, std::string const& csv)
{
    double const left = 60, top = 50, plotH = 240, slot = 70;
    double const width = left + slot * static_cast<double>(bars.size()) + 140;
    Svg svg(width, top + plotH + 120, "Pearson r of size against TED and MSE");
    svg.data(csv);
    auto y = [&](double r) { return top + plotH * (1.0 - r) / 2.0; };
    svg.line(left, top, left, top + plotH);
    svg.line(left, y(0), width - 130, y(0));
    for (int t = -2; t <= 2; ++t) {
        double const r = t / 2.0;
        svg.line(left - 4, y(r), left, y(r));
        svg.text(left - 6, y(r) + 4, fmt("%.1f", r), "end", 10);
    }
    svg.text(16, top + plotH / 2, "Pearson r", "middle", 11, -90);
    auto bar = [&](double x, std::optional<CorrelationResult> const& c, std::string const& fill) {
        if (!c) {
            svg.text(x + 10, y(0) - 4, "n/a", "middle", 9);
            return;
        }
        double const y0 = y(0), y1 = y(c->r);
        svg.rect(x, std::min(y0, y1), 20, std::abs(y1 - y0), fill);
        double const ty = c->r >= 0 ? y1 - 4 : y1 + 12;
        svg.text(x + 10, ty, "p=" + fmt("%.2g", c->p_value), "middle", 8);
    };
    for (std::size_t i = 0; i < bars.size(); ++i) {
        double const x = left + slot * static_cast<double>(i) + 12;
        bar(x, bars[i].ted, "#4a78b5");
        bar(x + 22, bars[i].mse, "#e0913a");
        svg.text(x + 21, top + plotH + 14, bars[i].label, "end", 10, -40);
    }
    double const lx = width - 120;
    svg.rect(lx, top, 12, 12, "#4a78b5");
    svg.text(lx + 16, top + 10, "size vs TED", "start", 10);
    svg.rect(lx, top + 18, 12, 12, "#e0913a");
    svg.text(lx + 16, top + 28, "size vs MSE", "start", 10);
    return svg.str();
}

// --- tables ------------------------------------------------------------------

std::string averages_csv(std::vector<RunRecord> const& records)
{
    std::string out = "label,method,init,count,mse,r2,r2_undefined,ted,train_time_s,size\n";
    for (auto const& s : summarize(records))
        out += csv_quote(s.label) + "," + s.method + "," + s.init + "," + std::to_string(s.count) + "," + num(s.mse) +
               "," + opt_num(s.r2) + "," + std::to_string(s.r2_undefined) + "," + num(s.ted) + "," +
               num(s.train_time_s) + "," + num(s.size) + "\n";
    return out;
}

std::optional<long> target_size(std::string const& problem, ReportConfig const& cfg)
{
    for (auto const& p : cfg.custom_problems)
        if (p.name == problem) return static_cast<long>(size(p.target));
    if (auto p = find_problem(problem)) return static_cast<long>(size(p->target));
    return std::nullopt;
}

std::string corr_fields(std::optional<CorrelationResult> const& c)
{
    return c ? num(c->r) + "," + num(c->p_value) : std::string(",");
}

} // namespace

std::vector<fs::path> build_reports(std::vector<RunRecord> const& records, ReportConfig const& cfg, fs::path const& dir)
{
    if (records.empty()) throw std::invalid_argument("build_reports: no records");
    if (cfg.ted_max < 0) throw std::invalid_argument("build_reports: ted_max must be >= 0");
    Bundle bundle(dir);
    auto const rows = ordered_rows(records);

    // Distributions with outlier flags, per (problem, variant, method row).
    std::string dist = "problem,variant,label,method,init,run_id,mse,ted,size,mse_outlier,ted_outlier,size_outlier\n";
    std::string sizes = "problem,variant,label,method,init,n,min,q1,median,q3,max,mean,target_size\n";
    for (auto const& [problem, variant] : panels(records)) {
        std::vector<BoxSeries> mseSeries, tedSeries, sizeSeries;
        std::string panelCsv = "label,run_id,mse,ted,size\n";
        auto const target = target_size(problem, cfg);
        for (auto const& row : rows) {
            std::vector<RunRecord const*> group;
            for (auto const& r : records)
                if (r.problem == problem && r.variant == variant && in_row(r, row)) group.push_back(&r);
            if (group.empty()) continue;
            std::vector<double> m, t, s, logm;
            for (auto const* r : group) {
                m.push_back(r->mse);
                t.push_back(static_cast<double>(r->ted));
                s.push_back(static_cast<double>(r->size));
                // Exact fits are drawn at the floor of the log axis.
                logm.push_back(std::isfinite(r->mse) ? std::log10(std::max(r->mse, 1e-32)) : r->mse);
            }
            auto const fm = iqr_outliers(m), ft = iqr_outliers(t), fs_ = iqr_outliers(s);
            for (std::size_t i = 0; i < group.size(); ++i) {
                auto const& r = *group[i];
                dist += csv_quote(problem) + "," + variant + "," + csv_quote(row.label) + "," + row.method + "," +
                        row.init + "," + csv_quote(r.run_id) + "," + num(r.mse) + "," + std::to_string(r.ted) + "," +
                        std::to_string(r.size) + "," + (fm[i] ? "1" : "0") + "," + (ft[i] ? "1" : "0") + "," +
                        (fs_[i] ? "1" : "0") + "\n";
                panelCsv += csv_quote(row.label) + "," + csv_quote(r.run_id) + "," + num(r.mse) + "," +
                            std::to_string(r.ted) + "," + std::to_string(r.size) + "\n";
            }
            double mean = 0;
            for (double v : s) mean += v;
            mean /= static_cast<double>(s.size());
            sizes += csv_quote(problem) + "," + variant + "," + csv_quote(row.label) + "," + row.method + "," + row.init +
                     "," + std::to_string(s.size()) + "," + num(*std::min_element(s.begin(), s.end())) + "," +
                     num(quantile(s, 0.25)) + "," + num(quantile(s, 0.5)) + "," + num(quantile(s, 0.75)) + "," +
                     num(*std::max_element(s.begin(), s.end())) + "," + num(mean) + "," +
                     (target ? std::to_string(*target) : std::string()) + "\n";
            mseSeries.push_back({row.label, logm});
            tedSeries.push_back({row.label, t});
            sizeSeries.push_back({row.label, s});
        }
        std::string const tag = file_token(problem) + "_" + file_token(variant);
        std::string const name = problem + " (" + variant + ")";
        bundle.write("box_mse_" + tag + ".svg", box_plot("MSE, " + name, "log10 MSE", mseSeries, panelCsv));
        bundle.write("box_ted_" + tag + ".svg", box_plot("TED, " + name, "TED", tedSeries, panelCsv));
        std::optional<double> marker;
        if (target) marker = static_cast<double>(*target);
        bundle.write("box_size_" + tag + ".svg", box_plot("Size, " + name, "size", sizeSeries, panelCsv, marker));
    }
    bundle.write("distributions.csv", dist);
    bundle.write("sizes.csv", sizes);

    // Size correlations per method row, pooled over problems and variants.
    std::string corr = "label,method,init,n,size_ted_r,size_ted_p,n_mse,size_mse_r,size_mse_p\n";
    std::vector<CorrBar> bars;
    for (auto const& row : rows) {
        std::vector<double> size, ted, sizeM, mseV;
        for (auto const& r : records) {
            if (!in_row(r, row)) continue;
            size.push_back(static_cast<double>(r.size));
            ted.push_back(static_cast<double>(r.ted));
            if (std::isfinite(r.mse)) {
                sizeM.push_back(static_cast<double>(r.size));
                mseV.push_back(r.mse);
            }
        }
        if (sizeM.size() < size.size())
            bundle.notice(row.label + ": " + std::to_string(size.size() - sizeM.size()) +
                          " records with non-finite MSE left out of the size-MSE correlation");
        auto const ct = pearson(size, ted);
        auto const cm = pearson(sizeM, mseV);
        if (!ct) bundle.notice(row.label + ": size-TED correlation undefined (n = " + std::to_string(size.size()) +
                               " or constant input)");
        if (!cm) bundle.notice(row.label + ": size-MSE correlation undefined (n = " + std::to_string(sizeM.size()) +
                               " or constant input)");
        corr += csv_quote(row.label) + "," + row.method + "," + row.init + "," + std::to_string(size.size()) + "," +
                corr_fields(ct) + "," + std::to_string(sizeM.size()) + "," + corr_fields(cm) + "\n";
        bars.push_back({row.label, ct, cm});
    }
    bundle.write("correlations.csv", corr);
    bundle.write("correlations.svg", correlation_chart(bars, corr));

    // TED-MSE correlation per (method row, problem), variants pooled.
    std::set<std::string> problems;
    for (auto const& r : records) problems.insert(r.problem);
    std::string grid = "label,method,init,problem,n,r,p\n";
    for (auto const& row : rows)
        for (auto const& problem : problems) {
            std::vector<double> ted, mseV;
            for (auto const& r : records)
                if (in_row(r, row) && r.problem == problem && std::isfinite(r.mse)) {
                    ted.push_back(static_cast<double>(r.ted));
                    mseV.push_back(r.mse);
                }
            if (ted.empty()) continue;
            auto const c = pearson(ted, mseV);
            if (!c) bundle.notice(row.label + " on " + problem + ": TED-MSE correlation undefined (n = " +
                                  std::to_string(ted.size()) + " or constant input)");
            grid += csv_quote(row.label) + "," + row.method + "," + row.init + "," + csv_quote(problem) + "," +
                    std::to_string(ted.size()) + "," + corr_fields(c) + "\n";
        }
    bundle.write("ted_mse.csv", grid);

    // Cumulative heatmaps per (problem, variant).
    for (auto const& [tagName, criterion] :
         {std::pair{std::string("mse"), SuccessCriterion::mse_max()}, std::pair{std::string("r2"), SuccessCriterion::r2_min()}}) {
        std::string csv = "problem,variant,label,method,init,n";
        for (long k = 0; k <= cfg.ted_max; ++k) csv += ",ted_" + std::to_string(k);
        csv += "\n";
        for (auto const& [problem, variant] : panels(records)) {
            std::vector<HeatRow> heat;
            std::string panelCsv;
            for (auto const& row : rows) {
                std::vector<RunRecord> group;
                for (auto const& r : records)
                    if (r.problem == problem && r.variant == variant && in_row(r, row)) group.push_back(r);
                if (group.empty()) continue;
                HeatRow h{row.label, group.size(), cumulative_success(group, criterion, cfg.ted_max)};
                std::string line = csv_quote(problem) + "," + variant + "," + csv_quote(row.label) + "," + row.method +
                                   "," + row.init + "," + std::to_string(h.n);
                for (auto c : h.counts) line += "," + std::to_string(c);
                csv += line + "\n";
                panelCsv += line + "\n";
                heat.push_back(std::move(h));
            }
            std::string const title = (tagName == "mse" ? "MSE <= 1e-6" : "R2 >= 0.99") + std::string(", ") + problem +
                                      " (" + variant + ")";
            bundle.write("heatmap_" + tagName + "_" + file_token(problem) + "_" + file_token(variant) + ".svg",
                         heatmap(title, heat, cfg.ted_max, panelCsv));
        }
        bundle.write("heatmap_" + tagName + ".csv", csv);
    }

    // Averages pooled over variants, plus one table per variant.
    bundle.write("averages.csv", averages_csv(records));
    std::set<std::string> variants;
    for (auto const& r : records) variants.insert(r.variant);
    for (auto const& v : variants) {
        std::vector<RunRecord> sub;
        for (auto const& r : records)
            if (r.variant == v) sub.push_back(r);
        bundle.write("averages_" + file_token(v) + ".csv", averages_csv(sub));
    }
    for (auto const& s : summarize(records))
        if (s.r2_undefined)
            bundle.notice(s.label + ": " + std::to_string(s.r2_undefined) + " records with undefined R2 left out of its mean");

    return bundle.finish();
}

} // namespace srlab
