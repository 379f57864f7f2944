#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ivdyn/attractors.hpp"
#include "ivdyn/catalog.hpp"
#include "ivdyn/decomposition.hpp"
#include "ivdyn/generic_points.hpp"
#include "ivdyn/io.hpp"
#include "ivdyn/orbit_stats.hpp"
#include "ivdyn/spec_parser.hpp"
#include "ivdyn/structure.hpp"
#include "ivdyn/witness_io.hpp"

namespace fs = std::filesystem;
using namespace ivdyn;

namespace {

constexpr int kOk = 0;
constexpr int kAssertion = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AnalysisConfig {
    std::string command;
    std::string map_path;
    std::string catalog_key;
    std::string out_dir;
    std::uint64_t seed = 1;
    double eps = 1.0 / 4096;
    std::size_t horizon = 1000000;
    std::size_t n = 1000;
    std::size_t samples = 200;
    std::size_t nmax = 24;
    std::size_t Q = 8;
    std::size_t K = 4;
    std::string x0;
    std::string phi = "x";
    std::vector<std::string> regions;
    std::string base = "0,0.5";
    std::string replay;
    std::vector<std::string> formats;

    bool wants(const char* f) const {
        return formats.empty() || std::find(formats.begin(), formats.end(), f) != formats.end();
    }
    std::string canonical() const {
        std::ostringstream os;
        os << "command=" << command << ";seed=" << seed << ";eps=" << io::num(eps) << ";horizon=" << horizon << ";n=" << n
           << ";samples=" << samples << ";nmax=" << nmax << ";Q=" << Q << ";K=" << K << ";x0=" << x0 << ";phi=" << phi
           << ";base=" << base << ";replay=" << replay << ";regions=";
        for (const auto& r : regions) os << r << "|";
        return os.str();
    }
};

void guard(bool ok, const std::string& msg) {
    if (!ok) throw UsageError(msg);
}

std::pair<double, double> parse_pair(const std::string& s, const char* what) {
    detail::SpecLexer lx(s, 0, 0);
    try {
        double a = lx.number();
        lx.expect(',');
        double b = lx.number();
        if (!lx.done()) lx.error("trailing characters");
        return {a, b};
    } catch (const DynamicsError&) {
        throw UsageError(std::string(what) + " must look like 'lo,hi', got '" + s + "'");
    }
}

Seed parse_seed(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash != std::string::npos) {
            std::int64_t p = std::stoll(s.substr(0, slash)), q = std::stoll(s.substr(slash + 1));
            guard(q > 0 && p >= 0 && p <= q, "--x0 rational must lie in [0,1]");
            return Seed(make_rational(p, q));
        }
        std::size_t used = 0;
        double v = std::stod(s, &used);
        guard(used == s.size() && v >= 0.0 && v <= 1.0, "--x0 must be a number in [0,1]");
        return Seed(v);
    } catch (const std::logic_error&) {
        throw UsageError("--x0 must be a decimal or p/q, got '" + s + "'");
    }
}

// x | const:k | poly:c0,c1,...
Observable parse_observable(const std::string& s) {
    if (s == "x") return Observable::identity();
    auto colon = s.find(':');
    std::string kind = s.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);
    std::vector<double> c;
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            c.push_back(std::stod(tok));
        } catch (const std::logic_error&) {
            throw UsageError("bad coefficient '" + tok + "' in --phi");
        }
    }
    if (kind == "const" && c.size() == 1) return Observable::constant(c[0]);
    if (kind == "poly" && !c.empty()) return Observable::polynomial(c, s);
    throw UsageError("--phi must be x, const:k or poly:c0,c1,..., got '" + s + "'");
}

struct Session {
    AnalysisConfig cfg;
    PiecewiseMap map;
    std::string map_name;
    io::RunInfo info;
    fs::path out;

    void write(const std::string& name, const std::string& content) const {
        fs::create_directories(out);
        std::ofstream o(out / name, std::ios::binary);
        if (!o) throw std::runtime_error("cannot write " + (out / name).string());
        o << content;
        std::cout << "wrote " << (out / name).string() << "\n";
    }
    void write_json(const std::string& name, io::Json body) const {
        io::Json j = io::header(info);
        for (auto& [k, v] : body.items()) j[k] = v;
        write(name, j.dump(2) + "\n");
    }
    // Plots carry the run header as a leading XML comment.
    void write_svg(const std::string& name, const std::string& svg) const {
        write(name, "<!-- " + io::header(info).dump() + " -->\n" + svg);
    }
    std::string stem() const { return map_name + "." + cfg.command; }
};

Session open_session(const AnalysisConfig& cfg) {
    Session s;
    s.cfg = cfg;
    std::string text;
    if (!cfg.map_path.empty()) {
        auto p = load_map_spec(cfg.map_path);
        s.map = p.map;
        s.map_name = p.name;
        text = p.text;
    } else {
        guard(!cfg.catalog_key.empty(), "one of --map or --catalog is required");
        s.map = catalog::get(cfg.catalog_key);
        s.map_name = cfg.catalog_key;
        text = "catalog:" + cfg.catalog_key;
    }
    s.info = io::RunInfo{cfg.command, s.map_name, cfg.seed, io::config_hash(text + "\n" + cfg.canonical())};
    if (!cfg.out_dir.empty()) s.out = cfg.out_dir;
    else if (const char* e = std::getenv("IVDYN_OUT"); e && *e) s.out = e;
    else s.out = ".";
    return s;
}

Census run_census(const Session& s) {
    CensusOptions o;
    o.samples = s.cfg.samples;
    o.seed = s.cfg.seed;
    o.horizon = s.cfg.horizon;
    o.eps = s.cfg.eps;
    return basin_census(s.map, o);
}

const AttractorEstimate* first_cycle(const Census& c) {
    for (const auto& k : c.clusters)
        if (k.attractor.kind == AttractorKind::CycleOfIntervals) return &k.attractor;
    return nullptr;
}

int cmd_orbit(const Session& s) {
    Seed x0 = 0.5;
    if (!s.cfg.x0.empty()) x0 = parse_seed(s.cfg.x0);
    else {
        std::mt19937_64 rng(s.cfg.seed);
        x0 = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    auto o = iterate_orbit(s.map, x0, s.cfg.n);
    std::cout << "orbit of " << io::num(o.points.front()) << ": " << o.points.size() << " points, end " << to_string(o.end.kind)
              << "\n";
    if (s.cfg.wants("csv")) s.write(s.stem() + ".csv", io::orbit_csv(s.info, o));
    if (s.cfg.wants("svg")) s.write_svg(s.stem() + ".svg", io::cobweb_svg(s.map, o));
    return kOk;
}

int cmd_stats(const Session& s) {
    Seed x0 = 0.5;
    if (!s.cfg.x0.empty()) x0 = parse_seed(s.cfg.x0);
    else {
        std::mt19937_64 rng(s.cfg.seed);
        x0 = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }
    auto phi = parse_observable(s.cfg.phi);
    std::vector<std::string> names;
    std::vector<FrequencySeries> freq;
    std::vector<std::string> regions = s.cfg.regions;
    if (regions.empty()) regions = {"0,0.5", "0.5,1"};
    for (const auto& r : regions) {
        auto [lo, hi] = parse_pair(r, "--region");
        guard(0.0 <= lo && lo < hi && hi <= 1.0, "--region must satisfy 0 <= lo < hi <= 1");
        Region V{{Span{lo, hi}}};
        freq.push_back(visiting_frequency(s.map, x0, V, s.cfg.horizon));
        names.push_back(io::num(lo) + "_" + io::num(hi));
    }
    auto b = birkhoff_envelope(s.map, x0, phi, s.cfg.horizon);
    auto h = historic_from_series(b, 0.05);
    std::cout << "Birkhoff average of " << phi.id() << " at n=" << b.length << ": " << io::num(b.averages.back())
              << ", tail gap " << io::num(h.gap) << (h.historic ? " (historic)" : "") << "\n";
    if (s.cfg.wants("csv")) s.write(s.stem() + ".csv", io::birkhoff_csv(s.info, b, names, freq));
    if (s.cfg.wants("json")) s.write_json(s.stem() + ".json", io::Json{{"birkhoff", io::to_json(b)}, {"historic", h.historic}, {"tail_gap", h.gap}});
    return kOk;
}

int cmd_attractors(const Session& s) {
    auto c = run_census(s);
    std::cout << c.clusters.size() << " attractor(s), bound " << c.bound << (c.bound_ok ? "" : " VIOLATED") << "\n";
    for (const auto& k : c.clusters)
        std::cout << "  " << to_string(k.attractor.kind) << "  basin " << io::num(k.basin_fraction) << "  support "
                  << k.attractor.cells.size() << " cells\n";
    if (s.cfg.wants("json")) s.write_json(s.stem() + ".json", io::Json{{"census", io::to_json(c)}});
    if (s.cfg.wants("svg")) s.write_svg(s.stem() + ".svg", io::attractor_strip_svg(s.map, c));
    return kOk;
}

int cmd_returnmap(const Session& s) {
    auto [lo, hi] = parse_pair(s.cfg.base, "--base");
    auto rm = first_return_map(s.map, {lo, hi}, std::min<std::size_t>(s.cfg.horizon, 64));
    bool full = is_full_branch(rm);
    std::cout << rm.branches.size() << " branch(es), full-branch " << (full ? "yes" : "no") << ", residual "
              << io::num(rm.residual_length) << "\n";
    if (s.cfg.wants("json")) s.write_json(s.stem() + ".json", io::Json{{"return_map", io::to_json(rm)}});
    if (s.cfg.wants("svg")) s.write_svg(s.stem() + ".svg", io::return_map_svg(s.map, rm));
    return kOk;
}

int cmd_entropy(const Session& s) {
    auto e = lap_entropy(s.map, s.cfg.nmax);
    std::cout << "h = " << io::num(e.h) << " (" << e.method << "), lap slope " << io::num(e.slope) << "\n";
    if (s.cfg.wants("csv")) s.write(s.stem() + ".csv", io::laps_csv(s.info, e));
    if (s.cfg.wants("json")) s.write_json(s.stem() + ".json", io::Json{{"entropy", io::to_json(e)}});
    return kOk;
}

int cmd_decompose(const Session& s) {
    auto ce = decompose(s.map, s.cfg.eps);
    std::cout << ce.count() << " component class(es) for " << s.map.critical_count() << " critical point(s)\n";
    if (s.cfg.wants("json")) s.write_json(s.stem() + ".json", io::Json{{"decomposition", io::to_json(ce, s.map.critical())}});
    if (s.cfg.wants("svg")) s.write_svg(s.stem() + ".svg", io::cell_map_svg(s.map, ce));
    return kOk;
}

WitnessOptions witness_options(const AnalysisConfig& cfg) {
    WitnessOptions o;
    o.K = cfg.K;
    return o;
}

int cmd_historic(const Session& s) {
    auto phi = parse_observable(s.cfg.phi);
    NestedWitness w;
    if (!s.cfg.replay.empty()) {
        std::ifstream in(s.cfg.replay);
        guard(static_cast<bool>(in), "cannot open witness file '" + s.cfg.replay + "'");
        io::Json j;
        try {
            j = io::Json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ParseError, s.cfg.replay + ": " + e.what());
        }
        w = io::witness_from_json(j.contains("witness") ? j.at("witness") : j);
    } else {
        auto c = run_census(s);
        const AttractorEstimate* A = first_cycle(c);
        if (!A) {
            std::cout << "no cycle of intervals among " << c.clusters.size()
                      << " attractor(s); historic witnesses need one\n";
            return kAssertion;
        }
        auto ex = extremal_orbits(s.map, *A, phi, s.cfg.Q);
        w = construct_historic_point(s.map, *A, phi, ex.hi.points, ex.lo.points, witness_options(s.cfg));
    }
    auto rep = verify_witness(s.map, w, phi, w.horizon());
    std::cout << "witness: K=" << w.stages.size() << " T=" << w.horizon() << " precision " << w.precision
              << " bits, certified gap " << io::num(w.certified_gap) << ", envelope violations " << rep.violations << "\n";
    if (s.cfg.wants("json"))
        s.write_json(s.stem() + ".json", io::Json{{"witness", io::to_json(w)}, {"report", io::to_json(rep)}});
    if (s.cfg.wants("svg")) s.write_svg(s.stem() + ".svg", io::envelope_svg(w, &rep));
    return rep.violations == 0 ? kOk : kAssertion;
}

// Cross-checks of the finiteness and genericity statements on the configured map.
int cmd_verify(const Session& s) {
    io::Json checks = io::Json::array();
    bool all_ok = true;
    auto check = [&](const std::string& name, bool ok, io::Json detail) {
        std::cout << (ok ? "ok    " : "FAIL  ") << name << "\n";
        all_ok = all_ok && ok;
        checks.push_back(io::Json{{"check", name}, {"ok", ok}, {"detail", std::move(detail)}});
    };
    auto phi = parse_observable(s.cfg.phi);
    const auto& f = s.map;
    std::size_t nc = f.critical_count();

    auto c = run_census(s);
    std::size_t unresolved = 0, one_sided = 0;
    for (const auto& k : c.clusters) {
        if (k.attractor.kind == AttractorKind::Unresolved) ++unresolved;
        if (k.attractor.kind == AttractorKind::PeriodicLike && k.attractor.one_sided) ++one_sided;
    }
    check("attractor count within bound", c.bound_ok,
          {{"non_periodic_like", c.non_periodic_like}, {"bound", c.bound}, {"attractors", c.clusters.size()}});
    check("every attractor classified", unresolved == 0, {{"unresolved", unresolved}});
    check("one-sided periodic-like count <= 2#C", one_sided <= 2 * nc, {{"one_sided", one_sided}});

    // theta = 1/sqrt(n) only sees cells of frequency above theta, so the grid is coarsened
    // until the omega estimate has at most sqrt(n)/4 cells
    {
        std::mt19937_64 rng(s.cfg.seed ^ 0x9e3779b97f4a7c15ull);
        std::size_t n = s.cfg.horizon, agree = 0, tried = 0;
        double root = std::sqrt(static_cast<double>(n));
        double eps = std::max(s.cfg.eps, 1.0 / 1024);
        io::Json per = io::Json::array();
        for (int i = 0; i < 10; ++i) {
            // rational seeds keep integer-affine maps on their exact path
            Seed x = make_rational(static_cast<std::int64_t>(rng() % kCensusDenominator), kCensusDenominator);
            double e = eps;
            auto om = omega_limit_estimate(f, x, n / 2, n, e);
            while (static_cast<double>(om.cells.size()) > root / 4 && e < 1.0 / 8) {
                e *= 2;
                om = omega_limit_estimate(f, x, n / 2, n, e);
            }
            if (om.truncated) continue;
            auto st = statistical_omega_estimate(f, x, n, e, 1.0 / root);
            ++tried;
            if (st.cells == om.cells) ++agree;
            per.push_back(io::Json{{"x0", x.x}, {"eps", e}, {"omega_cells", om.cells.size()}, {"agree", st.cells == om.cells}});
        }
        check("omega = omega* on sampled points", tried > 0 && agree * 100 >= 95 * tried,
              {{"agree", agree}, {"tried", tried}, {"samples", per}});
    }

    const AttractorEstimate* cyc = first_cycle(c);
    bool has_cantor = false;
    for (const auto& k : c.clusters) has_cantor = has_cantor || k.attractor.kind == AttractorKind::Cantor;
    if (cyc) {
        auto e = lap_entropy(f, std::min<std::size_t>(s.cfg.nmax, 24), cyc->intervals);
        check("entropy on the cycle of intervals > 0.1", e.h > 0.1, {{"h", e.h}, {"method", e.method}});
        auto ex = extremal_orbits(f, *cyc, phi, s.cfg.Q);
        auto w = construct_historic_point(f, *cyc, phi, ex.hi.points, ex.lo.points, witness_options(s.cfg));
        auto rep = verify_witness(f, w, phi, w.horizon());
        check("historic witness validated", rep.violations == 0 && w.certified_gap > 0.0,
              {{"certified_gap", w.certified_gap}, {"violations", rep.violations}, {"horizon", w.horizon()}});
        auto bm = birkhoff_max_oracle(f, *cyc, phi, s.cfg.Q);
        WitnessOptions o = witness_options(s.cfg);
        o.K = std::min<std::size_t>(o.K, 4);
        o.single_phase = true;
        auto wm = construct_max_average_point(f, *cyc, phi, s.cfg.Q, o);
        const auto& last = wm.envelope.back();
        double dev = std::max(std::abs(last.lower - bm.value), std::abs(last.upper - bm.value));
        check("max-average witness matches the oracle within 0.02", dev <= 0.02, {{"oracle", bm.value}, {"deviation", dev}});
    } else {
        std::size_t rejected = 0;
        for (const auto& k : c.clusters) {
            try {
                construct_historic_point(f, k.attractor, phi, {}, {}, witness_options(s.cfg));
            } catch (const DynamicsError& e) {
                if (e.code() == ErrorCode::PreconditionFailed) ++rejected;
            }
        }
        check("historic constructor rejects non-cycle attractors", rejected == c.clusters.size(), {{"rejected", rejected}});
        if (has_cantor) {
            auto e = lap_entropy(f, std::min<std::size_t>(s.cfg.nmax, 24));
            check("entropy <= 0.1 with a Cantor attractor and no cycle", e.h <= 0.1, {{"h", e.h}, {"method", e.method}});
        }
    }
    std::cout << (all_ok ? "all checks passed" : "some checks FAILED") << "\n";
    if (s.cfg.wants("json")) s.write_json(s.stem() + ".json", io::Json{{"checks", checks}, {"passed", all_ok}});
    return all_ok ? kOk : kAssertion;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ivdyn: attractors, statistics and generic points of piecewise monotone interval maps"};
    app.require_subcommand(1);
    AnalysisConfig cfg;

    struct Cmd {
        const char* name;
        const char* help;
        int (*run)(const Session&);
    };
    const std::vector<Cmd> cmds{{"orbit", "orbit CSV and cobweb plot", cmd_orbit},
                                {"stats", "Birkhoff averages and visiting frequencies", cmd_stats},
                                {"attractors", "basin census", cmd_attractors},
                                {"returnmap", "first return map on a base interval", cmd_returnmap},
                                {"entropy", "lap numbers and topological entropy", cmd_entropy},
                                {"decompose", "component classes of critical points", cmd_decompose},
                                {"historic", "construct or replay a historic witness", cmd_historic},
                                {"verify", "cross-check suite on the configured map", cmd_verify}};
    std::vector<CLI::App*> subs;
    for (const auto& c : cmds) {
        auto* sub = app.add_subcommand(c.name, c.help);
        auto* src = sub->add_option_group("source");
        src->add_option("--map", cfg.map_path, "map spec file")->check(CLI::ExistingFile);
        src->add_option("--catalog", cfg.catalog_key, "built-in map key, e.g. logistic-4");
        src->require_option(1);
        sub->add_option("--out", cfg.out_dir, "output directory (default $IVDYN_OUT, else .)");
        sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
        sub->add_option("--format", cfg.formats, "csv, json or svg; repeatable (default: all)")
            ->check(CLI::IsMember({"csv", "json", "svg"}));
        sub->add_option("--eps", cfg.eps, "cell width")->check(CLI::Range(1e-5, 1.0))->capture_default_str();
        sub->add_option("--horizon", cfg.horizon, "orbit horizon")->check(CLI::Range(std::size_t{1}, std::size_t{1000000000}))
            ->capture_default_str();
        std::string name = c.name;
        if (name == "orbit" || name == "stats") sub->add_option("--x0", cfg.x0, "initial point, decimal or p/q");
        if (name == "orbit") sub->add_option("-n", cfg.n, "iterations")->check(CLI::Range(std::size_t{1}, std::size_t{100000000}));
        if (name == "stats") sub->add_option("--region", cfg.regions, "region lo,hi for visiting frequencies; repeatable");
        if (name == "stats" || name == "historic" || name == "verify")
            sub->add_option("--phi", cfg.phi, "observable: x, const:k, poly:c0,c1,...")->capture_default_str();
        if (name == "attractors" || name == "historic" || name == "verify")
            sub->add_option("--samples", cfg.samples, "census samples")->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
        if (name == "entropy" || name == "verify")
            sub->add_option("--nmax", cfg.nmax, "largest iterate for lap counts")->check(CLI::Range(std::size_t{8}, std::size_t{64}));
        if (name == "returnmap") sub->add_option("--base", cfg.base, "base interval lo,hi")->capture_default_str();
        if (name == "historic" || name == "verify") {
            sub->add_option("-Q", cfg.Q, "largest period for target orbits")->check(CLI::Range(std::size_t{1}, std::size_t{16}));
            sub->add_option("-K", cfg.K, "refinement stages")->check(CLI::Range(std::size_t{0}, std::size_t{8}));
        }
        if (name == "historic") sub->add_option("--replay", cfg.replay, "verify a saved witness JSON instead of constructing one");
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }
    for (std::size_t i = 0; i < cmds.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        cfg.command = cmds[i].name;
        try {
            Session s = open_session(cfg);
            return cmds[i].run(s);
        } catch (const UsageError& e) {
            std::cerr << "usage error: " << e.what() << "\n";
            return kUsage;
        } catch (const DynamicsError& e) {
            std::cerr << e.what() << "\n";
            bool usage = e.code() == ErrorCode::ParseError || e.code() == ErrorCode::PreconditionFailed ||
                         e.code() == ErrorCode::ResolutionTooFine || e.code() == ErrorCode::InvalidMap ||
                         e.code() == ErrorCode::DegenerateFamily || e.code() == ErrorCode::CriticalPoint;
            return usage ? kUsage : kAssertion;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kAssertion;
        }
    }
    return kUsage;
}
