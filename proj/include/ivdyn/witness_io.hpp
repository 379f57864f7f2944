#ifndef IVDYN_WITNESS_IO_HPP
#define IVDYN_WITNESS_IO_HPP

#include <string>

#include "generic_points.hpp"
#include "io.hpp"

namespace ivdyn::io {

inline Json to_json(const NestedWitness& w) {
    Json chain = Json::array();
    for (const auto& c : w.chain)
        chain.push_back(Json{{"lo", c.lo},
                             {"hi", c.hi},
                             {"precision", c.precision},
                             {"lo_approx", c.lo_approx},
                             {"hi_approx", c.hi_approx},
                             {"log2_width", c.log2_width},
                             {"margin", c.margin}});
    Json stages = Json::array();
    for (const auto& s : w.stages)
        stages.push_back(Json{{"index", s.index},
                              {"phase", s.phase},
                              {"connect", s.connect},
                              {"block", s.block},
                              {"start", s.start},
                              {"end", s.end},
                              {"orbit_phase", s.orbit_phase},
                              {"target_mean", s.target_mean},
                              {"delta", s.delta}});
    Json env = Json::array();
    for (const auto& r : w.envelope) env.push_back(Json{{"time", r.time}, {"stage", r.stage}, {"lower", r.lower}, {"upper", r.upper}});
    return Json{{"map", w.map_name},
                {"observable", w.observable},
                {"orbit_hi", w.orbit_hi},
                {"orbit_lo", w.orbit_lo},
                {"mean_hi", w.mean_hi},
                {"mean_lo", w.mean_lo},
                {"eps_shadow", w.eps_shadow},
                {"single_phase", w.single_phase},
                {"precision", w.precision},
                {"horizon", w.horizon()},
                {"certified_gap", w.certified_gap},
                {"limsup_proxy", w.limsup_proxy},
                {"liminf_proxy", w.liminf_proxy},
                {"chain", chain},
                {"stages", stages},
                {"envelope", env}};
}

inline NestedWitness witness_from_json(const Json& j) {
    try {
        NestedWitness w;
        w.map_name = j.at("map").get<std::string>();
        w.observable = j.at("observable").get<std::string>();
        w.orbit_hi = j.at("orbit_hi").get<std::vector<double>>();
        w.orbit_lo = j.at("orbit_lo").get<std::vector<double>>();
        w.mean_hi = j.at("mean_hi").get<double>();
        w.mean_lo = j.at("mean_lo").get<double>();
        w.eps_shadow = j.at("eps_shadow").get<double>();
        w.single_phase = j.at("single_phase").get<bool>();
        w.precision = j.at("precision").get<long>();
        w.certified_gap = j.at("certified_gap").get<double>();
        w.limsup_proxy = j.at("limsup_proxy").get<double>();
        w.liminf_proxy = j.at("liminf_proxy").get<double>();
        for (const auto& c : j.at("chain")) {
            ChainLink l;
            l.lo = c.at("lo").get<std::string>();
            l.hi = c.at("hi").get<std::string>();
            l.precision = c.at("precision").get<long>();
            l.lo_approx = c.at("lo_approx").get<double>();
            l.hi_approx = c.at("hi_approx").get<double>();
            l.log2_width = c.at("log2_width").get<double>();
            l.margin = c.at("margin").get<double>();
            w.chain.push_back(l);
        }
        for (const auto& s : j.at("stages")) {
            WitnessStage st;
            st.index = s.at("index").get<std::size_t>();
            st.phase = s.at("phase").get<std::string>();
            st.connect = s.at("connect").get<std::size_t>();
            st.block = s.at("block").get<std::size_t>();
            st.start = s.at("start").get<std::size_t>();
            st.end = s.at("end").get<std::size_t>();
            st.orbit_phase = s.at("orbit_phase").get<std::size_t>();
            st.target_mean = s.at("target_mean").get<double>();
            st.delta = s.at("delta").get<double>();
            w.stages.push_back(st);
        }
        for (const auto& r : j.at("envelope"))
            w.envelope.push_back({r.at("time").get<std::size_t>(), r.at("stage").get<std::size_t>(), r.at("lower").get<double>(),
                                  r.at("upper").get<double>()});
        if (w.chain.empty()) fail(ErrorCode::ParseError, "witness has an empty interval chain");
        return w;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("malformed witness: ") + e.what());
    }
}

inline Json to_json(const WitnessReport& r) {
    return Json{{"horizon", r.horizon},
                {"envelope_violations", r.violations},
                {"observed", r.observed},
                {"stage_gap", r.stage_gap},
                {"historic", r.historic.historic},
                {"tail_gap", r.historic.gap},
                {"midpoint", r.midpoint_hex},
                {"midpoint_approx", r.midpoint_approx},
                {"max_radius", r.max_radius}};
}

// Certified envelope bars with the observed partial averages of the midpoint run.
inline std::string envelope_svg(const NestedWitness& w, const WitnessReport* rep = nullptr) {
    double T = static_cast<double>(std::max<std::size_t>(w.horizon(), 1));
    double lx = std::log10(T) + 0.1;
    Svg svg(0, lx, 0, 1, 720, 420, "certified envelope: " + w.map_name + " / " + w.observable);
    auto X = [](std::size_t t) { return std::log10(static_cast<double>(std::max<std::size_t>(t, 1))); };
    svg.line(0, w.mean_hi, lx, w.mean_hi, "#2ca02c", 0.6);
    svg.line(0, w.mean_lo, lx, w.mean_lo, "#1f77b4", 0.6);
    for (const auto& r : w.envelope) {
        if (r.time == 0) continue;
        double x = X(r.time);
        svg.line(x, std::max(0.0, r.lower), x, std::min(1.0, r.upper), "#d62728", 3.0);
    }
    if (rep) {
        std::size_t i = 0;
        for (const auto& r : w.envelope) {
            if (r.time > rep->horizon) continue;
            if (r.time > 0 && i < rep->observed.size()) svg.dot(X(r.time), rep->observed[i], "#000", 2.0);
            ++i;
        }
    }
    svg.label(0.02, 0.95, "x axis: log10 n; bars: certified bounds on partial averages");
    return svg.str();
}

} // namespace ivdyn::io

#endif
