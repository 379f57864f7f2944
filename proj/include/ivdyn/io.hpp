#ifndef IVDYN_IO_HPP
#define IVDYN_IO_HPP

#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "attractor_types.hpp"
#include "attractors.hpp"
#include "decomposition.hpp"
#include "orbit.hpp"
#include "orbit_stats.hpp"
#include "structure.hpp"

namespace ivdyn::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchema = 1;

// 64-bit FNV-1a, printed as 16 hex digits.
inline std::string config_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct RunInfo {
    std::string command;
    std::string map;
    std::uint64_t seed = 0;
    std::string hash;
};

inline Json header(const RunInfo& r) {
    return Json{{"schema", kSchema}, {"command", r.command}, {"map", r.map}, {"seed", r.seed}, {"config_hash", r.hash}};
}

inline std::string csv_preamble(const RunInfo& r) {
    return "# schema=" + std::to_string(kSchema) + " command=" + r.command + " map=" + r.map +
           " seed=" + std::to_string(r.seed) + " config_hash=" + r.hash + "\n";
}

// Round-trip decimal representation.
inline std::string num(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline Json to_json(const Interval& i) { return Json::array({i.lo, i.hi}); }

inline Json to_json(const std::vector<Interval>& v) {
    Json a = Json::array();
    for (const auto& i : v) a.push_back(to_json(i));
    return a;
}

inline Json to_json(const CellSet& s) {
    Json runs = Json::array();
    for (const auto& r : cell_runs(s)) runs.push_back(to_json(r));
    return Json{{"eps", s.eps}, {"count", s.size()}, {"runs", runs}};
}

inline Json to_json(const CriticalValue& v) {
    return Json{{"critical_index", v.critical_index}, {"side", v.side == Side::Minus ? "minus" : "plus"}};
}

inline Json to_json(const AttractorEstimate& a) {
    Json g = Json::array();
    for (const auto& v : a.generators) g.push_back(to_json(v));
    Json j{{"kind", to_string(a.kind)},
           {"eps", a.eps},
           {"box_slope", a.box_slope},
           {"level_counts", a.level_counts},
           {"support", to_json(a.cells)},
           {"generators", g}};
    if (a.kind == AttractorKind::PeriodicLike) {
        j["points"] = a.points;
        j["one_sided"] = a.one_sided;
    }
    if (a.kind == AttractorKind::CycleOfIntervals) j["intervals"] = to_json(a.intervals);
    if (!a.note.empty()) j["note"] = a.note;
    return j;
}

inline Json to_json(const Census& c) {
    Json cl = Json::array();
    for (const auto& k : c.clusters)
        cl.push_back(Json{{"attractor", to_json(k.attractor)},
                          {"members", k.members},
                          {"basin_fraction", k.basin_fraction},
                          {"generator_dissent", k.generator_dissent}});
    return Json{{"samples", c.samples},
                {"truncated", c.truncated},
                {"degenerate", c.degenerate},
                {"attractor_count", c.clusters.size()},
                {"bound", c.bound},
                {"bound_ok", c.bound_ok},
                {"non_periodic_like", c.non_periodic_like},
                {"ambiguous_merges", c.ambiguous_merges},
                {"clusters", cl}};
}

inline Json to_json(const ReturnMap& rm, double tol = 1e-9) {
    Json b = Json::array();
    for (const auto& r : rm.branches)
        b.push_back(Json{{"domain", to_json(r.domain)},
                         {"time", r.time},
                         {"monotonicity", r.mono == Monotonicity::Increasing ? "increasing" : "decreasing"},
                         {"image", to_json(r.image)}});
    return Json{{"base", to_json(rm.base)},
                {"horizon", rm.horizon},
                {"full_branch", is_full_branch(rm, tol)},
                {"residual_length", rm.residual_length},
                {"branches", b}};
}

inline Json to_json(const EntropyEstimate& e) {
    Json j{{"h", e.h}, {"method", e.method}, {"slope", e.slope}, {"submultiplicative", e.submultiplicative}};
    if (e.kneading) j["kneading"] = *e.kneading;
    std::vector<double> laps(e.laps.laps.begin(), e.laps.laps.end());
    j["laps"] = laps;
    return j;
}

inline Json to_json(const ComponentEstimate& ce, const std::vector<double>& critical) {
    const std::size_t npos = static_cast<std::size_t>(-1);
    Json per = Json::array();
    for (std::size_t i = 0; i < ce.U.size(); ++i) {
        Json u{{"critical", critical[i]}, {"cells", to_json(ce.U[i])}};
        u["class"] = ce.class_of[i] == npos ? Json(nullptr) : Json(ce.class_of[i]);
        per.push_back(u);
    }
    return Json{{"classes", ce.classes}, {"class_count", ce.count()}, {"components", per}};
}

inline Json to_json(const BirkhoffSeries& s) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < s.checkpoints.size(); ++i)
        rows.push_back(Json{{"n", s.checkpoints[i]}, {"average", s.averages[i]}, {"tail_sup", s.tail_sup[i]}, {"tail_inf", s.tail_inf[i]}});
    return Json{{"observable", s.observable}, {"length", s.length}, {"truncated", s.truncated}, {"checkpoints", rows}};
}

// Orbit CSV: step, x (and the exact rational when available).
inline std::string orbit_csv(const RunInfo& r, const OrbitResult& o) {
    std::string s = csv_preamble(r);
    bool exact = o.exact_points.size() == o.points.size() && !o.points.empty();
    s += exact ? "n,x,p,q\n" : "n,x\n";
    for (std::size_t i = 0; i < o.points.size(); ++i) {
        s += std::to_string(i) + "," + num(o.points[i]);
        if (exact) s += "," + std::to_string(o.exact_points[i].p) + "," + std::to_string(o.exact_points[i].q);
        s += "\n";
    }
    return s;
}

// Birkhoff CSV: one row per checkpoint, then one frequency column per region.
inline std::string birkhoff_csv(const RunInfo& r, const BirkhoffSeries& b, const std::vector<std::string>& region_names,
                                const std::vector<FrequencySeries>& freq) {
    std::string s = csv_preamble(r);
    s += "n,average,tail_sup,tail_inf";
    for (const auto& nm : region_names) s += ",freq_" + nm;
    s += "\n";
    for (std::size_t i = 0; i < b.checkpoints.size(); ++i) {
        s += std::to_string(b.checkpoints[i]) + "," + num(b.averages[i]) + "," + num(b.tail_sup[i]) + "," + num(b.tail_inf[i]);
        for (const auto& f : freq) s += "," + (i < f.frequency.size() ? num(f.frequency[i]) : std::string());
        s += "\n";
    }
    return s;
}

inline std::string laps_csv(const RunInfo& r, const EntropyEstimate& e) {
    std::string s = csv_preamble(r);
    s += "n,laps,log_laps_over_n\n";
    for (std::size_t n = 0; n < e.laps.laps.size(); ++n) {
        double l = static_cast<double>(e.laps.laps[n]);
        s += std::to_string(n) + "," + num(l) + "," + (n ? num(std::log(l) / static_cast<double>(n)) : std::string("")) + "\n";
    }
    return s;
}

// Minimal self-contained SVG canvas mapping [x0,x1] x [y0,y1] onto a fixed pixel box.
class Svg {
public:
    Svg(double x0, double x1, double y0, double y1, int width = 640, int height = 480, std::string title = "")
        : x0_(x0), x1_(x1), y0_(y0), y1_(y1), w_(width), h_(height) {
        if (!title.empty()) text_at(w_ / 2.0, 18, title, "middle", 14);
        frame();
    }

    double px(double x) const { return m_ + (x - x0_) / (x1_ - x0_) * (w_ - 2 * m_); }
    double py(double y) const { return h_ - m_ - (y - y0_) / (y1_ - y0_) * (h_ - 2 * m_); }

    void line(double xa, double ya, double xb, double yb, const std::string& color = "#000", double width = 1.0) {
        body_ << "<line x1=\"" << f(px(xa)) << "\" y1=\"" << f(py(ya)) << "\" x2=\"" << f(px(xb)) << "\" y2=\"" << f(py(yb))
              << "\" stroke=\"" << color << "\" stroke-width=\"" << width << "\"/>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color = "#000", double width = 1.0) {
        if (pts.empty()) return;
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << "\" points=\"";
        for (const auto& p : pts) body_ << f(px(p.first)) << "," << f(py(p.second)) << " ";
        body_ << "\"/>\n";
    }
    void rect(double xa, double ya, double xb, double yb, const std::string& fill, double opacity = 1.0) {
        double l = std::min(px(xa), px(xb)), r = std::max(px(xa), px(xb));
        double t = std::min(py(ya), py(yb)), b = std::max(py(ya), py(yb));
        body_ << "<rect x=\"" << f(l) << "\" y=\"" << f(t) << "\" width=\"" << f(std::max(r - l, 0.5)) << "\" height=\""
              << f(std::max(b - t, 0.5)) << "\" fill=\"" << fill << "\" fill-opacity=\"" << opacity << "\"/>\n";
    }
    void dot(double x, double y, const std::string& color = "#000", double r = 2.0) {
        body_ << "<circle cx=\"" << f(px(x)) << "\" cy=\"" << f(py(y)) << "\" r=\"" << r << "\" fill=\"" << color << "\"/>\n";
    }
    void label(double x, double y, const std::string& s, const char* anchor = "start", int size = 11) {
        text_at(px(x), py(y), s, anchor, size);
    }
    std::string str() const {
        std::ostringstream os;
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_ << "\" viewBox=\"0 0 " << w_ << " "
           << h_ << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
           << body_.str() << "</svg>\n";
        return os.str();
    }

private:
    static std::string f(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return buf;
    }
    static std::string escape(const std::string& s) {
        std::string o;
        for (char c : s) {
            if (c == '<') o += "&lt;";
            else if (c == '>') o += "&gt;";
            else if (c == '&') o += "&amp;";
            else o += c;
        }
        return o;
    }
    void text_at(double x, double y, const std::string& s, const char* anchor, int size) {
        body_ << "<text x=\"" << f(x) << "\" y=\"" << f(y) << "\" font-family=\"sans-serif\" font-size=\"" << size
              << "\" text-anchor=\"" << anchor << "\">" << escape(s) << "</text>\n";
    }
    void frame() {
        body_ << "<rect x=\"" << m_ << "\" y=\"" << m_ << "\" width=\"" << w_ - 2 * m_ << "\" height=\"" << h_ - 2 * m_
              << "\" fill=\"none\" stroke=\"#888\"/>\n";
        text_at(m_, h_ - m_ + 14, num(x0_), "middle", 10);
        text_at(w_ - m_, h_ - m_ + 14, num(x1_), "middle", 10);
        text_at(m_ - 4, h_ - m_, num(y0_), "end", 10);
        text_at(m_ - 4, m_ + 4, num(y1_), "end", 10);
    }

    double x0_, x1_, y0_, y1_;
    int w_, h_;
    double m_ = 40;
    std::ostringstream body_;
};

// Graph of f sampled per branch.
inline void plot_map(Svg& svg, const PiecewiseMap& f, const std::string& color = "#1f77b4", int samples = 200) {
    for (std::size_t b = 0; b < f.branches().size(); ++b) {
        const auto& br = f.branches()[b];
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i <= samples; ++i) {
            double x = br.lo + (br.hi - br.lo) * i / samples;
            pts.push_back({x, std::clamp(f.raw(b, x), 0.0, 1.0)});
        }
        svg.polyline(pts, color, 1.5);
    }
}

inline std::string cobweb_svg(const PiecewiseMap& f, const OrbitResult& o, std::size_t max_steps = 200) {
    Svg svg(0, 1, 0, 1, 520, 520, "cobweb: " + f.name());
    svg.line(0, 0, 1, 1, "#aaa");
    plot_map(svg, f);
    std::vector<std::pair<double, double>> web;
    std::size_t n = std::min(o.points.size(), max_steps + 1);
    if (n > 0) web.push_back({o.points[0], 0.0});
    for (std::size_t i = 0; i + 1 < n; ++i) {
        web.push_back({o.points[i], o.points[i + 1]});
        web.push_back({o.points[i + 1], o.points[i + 1]});
    }
    svg.polyline(web, "#d62728", 0.7);
    return svg.str();
}

inline std::string attractor_strip_svg(const PiecewiseMap& f, const Census& c) {
    std::size_t rows = std::max<std::size_t>(c.clusters.size(), 1);
    Svg svg(0, 1, 0, static_cast<double>(rows), 720, 80 + 40 * static_cast<int>(rows), "attractors: " + f.name());
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
    for (std::size_t k = 0; k < c.clusters.size(); ++k) {
        const auto& a = c.clusters[k].attractor;
        double y = static_cast<double>(rows - k - 1);
        for (const auto& r : cell_runs(a.cells)) svg.rect(r.lo, y + 0.2, r.hi, y + 0.8, colors[k % 6]);
        svg.label(0.0, y + 0.85, std::string(to_string(a.kind)) + "  basin " + num(c.clusters[k].basin_fraction));
    }
    for (double cp : f.critical()) svg.line(cp, 0, cp, static_cast<double>(rows), "#999", 0.5);
    return svg.str();
}

inline std::string return_map_svg(const PiecewiseMap& f, const ReturnMap& rm) {
    Svg svg(rm.base.lo, rm.base.hi, rm.base.lo, rm.base.hi, 520, 520, "first return map: " + f.name());
    svg.line(rm.base.lo, rm.base.lo, rm.base.hi, rm.base.hi, "#aaa");
    for (const auto& b : rm.branches) {
        double ya = b.mono == Monotonicity::Increasing ? b.image.lo : b.image.hi;
        double yb = b.mono == Monotonicity::Increasing ? b.image.hi : b.image.lo;
        svg.line(b.domain.lo, ya, b.domain.hi, yb, "#1f77b4", 1.2);
    }
    return svg.str();
}

inline std::string cell_map_svg(const PiecewiseMap& f, const ComponentEstimate& ce) {
    std::size_t rows = std::max<std::size_t>(ce.U.size(), 1);
    Svg svg(0, 1, 0, static_cast<double>(rows), 720, 80 + 40 * static_cast<int>(rows), "components: " + f.name());
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
    for (std::size_t i = 0; i < ce.U.size(); ++i) {
        double y = static_cast<double>(rows - i - 1);
        std::size_t cls = ce.class_of[i] == static_cast<std::size_t>(-1) ? 0 : ce.class_of[i];
        for (const auto& r : cell_runs(ce.U[i])) svg.rect(r.lo, y + 0.2, r.hi, y + 0.8, colors[cls % 6]);
        svg.line(f.critical()[i], y, f.critical()[i], y + 1, "#000", 1.0);
        svg.label(0.0, y + 0.85, "c = " + num(f.critical()[i]) + "  class " + std::to_string(cls));
    }
    return svg.str();
}

} // namespace ivdyn::io

#endif
