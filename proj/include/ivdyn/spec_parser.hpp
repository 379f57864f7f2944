#ifndef IVDYN_SPEC_PARSER_HPP
#define IVDYN_SPEC_PARSER_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "catalog.hpp"
#include "map.hpp"

namespace ivdyn {

// Map-spec files: one `key = value` per line, `#` starts a comment.
//
//   family   = logistic | tent | doubling | lorenz | half | bimodal-halves | bimodal-transitive
//   lambda   = 3.83        (logistic, lorenz)
//   slope    = 2           (tent)
//   rho      = 0.618...    (lorenz)
//
// or an explicit map:
//
//   critical = 1/2
//   branch   = (0, 1/2) inc poly[0, 2]
//   branch   = (1/2, 1) dec pow[1, -4, 2] poly[0, 1] @ 1/2
//
// poly[c0, c1, ...] @ h is sum c_k (x - h)^k; pow[a, s, alpha] P is a + s P(x)^alpha.
// Numbers may be decimals or rationals p/q.
struct ParsedSpec {
    PiecewiseMap map;
    std::string name;
    std::string text; // the source, for config hashing
};

namespace detail {

class SpecLexer {
public:
    SpecLexer(std::string_view s, std::size_t line, std::size_t col0) : s_(s), line_(line), col0_(col0) {}

    [[noreturn]] void error(const std::string& msg) const {
        fail(ErrorCode::ParseError, std::to_string(line_) + ":" + std::to_string(col0_ + i_ + 1) + ": " + msg);
    }
    void skip_ws() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    bool done() {
        skip_ws();
        return i_ >= s_.size();
    }
    bool accept(char c) {
        skip_ws();
        if (i_ < s_.size() && s_[i_] == c) {
            ++i_;
            return true;
        }
        return false;
    }
    void expect(char c) {
        if (!accept(c)) error(std::string("expected '") + c + "'");
    }
    std::string word() {
        skip_ws();
        std::size_t b = i_;
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '-' || s_[i_] == '_' || s_[i_] == '.'))
            ++i_;
        if (b == i_) error("expected a word");
        return std::string(s_.substr(b, i_ - b));
    }
    double number() {
        skip_ws();
        double v = scalar();
        skip_ws();
        if (i_ < s_.size() && s_[i_] == '/') {
            ++i_;
            skip_ws();
            std::size_t at = i_;
            double q = scalar();
            if (q == 0.0) {
                i_ = at;
                error("zero denominator");
            }
            v /= q;
        }
        return v;
    }
    std::vector<double> list(char open, char close) {
        expect(open);
        std::vector<double> v;
        if (accept(close)) return v;
        do v.push_back(number());
        while (accept(','));
        expect(close);
        return v;
    }

private:
    double scalar() {
        const char* b = s_.data() + i_;
        const char* e = s_.data() + s_.size();
        if (b < e && *b == '+') ++b;
        double v = 0;
        auto r = std::from_chars(b, e, v);
        if (r.ec != std::errc()) error("expected a number");
        i_ = static_cast<std::size_t>(r.ptr - s_.data());
        return v;
    }

    std::string_view s_;
    std::size_t line_, col0_;
    std::size_t i_ = 0;
};

inline Form parse_form(SpecLexer& lx) {
    std::string kind = lx.word();
    double offset = 0, scale = 1, alpha = 1;
    bool power = false;
    if (kind == "pow") {
        auto p = lx.list('[', ']');
        if (p.size() != 3) lx.error("pow[...] takes offset, scale, alpha");
        offset = p[0];
        scale = p[1];
        alpha = p[2];
        if (!(alpha >= 1.0)) lx.error("exponent alpha must be >= 1");
        power = true;
        kind = lx.word();
    }
    if (kind != "poly") lx.error("expected poly[...] or pow[...] poly[...]");
    auto c = lx.list('[', ']');
    if (c.empty()) lx.error("empty coefficient list");
    double center = 0.0;
    if (lx.accept('@')) center = lx.number();
    return power ? Form::power(offset, scale, alpha, std::move(c), center) : Form::polynomial(std::move(c), center);
}

} // namespace detail

inline ParsedSpec parse_map_spec(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    std::map<std::string, std::pair<double, std::size_t>> params;
    std::optional<std::string> family;
    std::string name;
    std::optional<std::vector<double>> critical;
    struct PendingBranch {
        BranchSpec spec;
        std::size_t line;
    };
    std::vector<PendingBranch> branches;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw.substr(0, raw.find('#'));
        auto eq = line.find('=');
        std::string_view sv(line);
        std::size_t first = sv.find_first_not_of(" \t\r");
        if (first == std::string_view::npos) continue;
        if (eq == std::string::npos)
            fail(ErrorCode::ParseError, std::to_string(lineno) + ":" + std::to_string(first + 1) + ": expected 'key = value'");
        std::string key(sv.substr(first, eq - first));
        while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
        detail::SpecLexer lx(sv.substr(eq + 1), lineno, eq + 1);
        if (key == "family") {
            family = lx.word();
        } else if (key == "name") {
            name = lx.word();
        } else if (key == "lambda" || key == "slope" || key == "rho") {
            params[key] = {lx.number(), lineno};
        } else if (key == "critical") {
            std::vector<double> c;
            do c.push_back(lx.number());
            while (lx.accept(','));
            critical = std::move(c);
        } else if (key == "branch") {
            lx.expect('(');
            double lo = lx.number();
            lx.expect(',');
            double hi = lx.number();
            lx.expect(')');
            if (!(lo < hi)) lx.error("empty branch domain");
            std::string m = lx.word();
            Monotonicity mono;
            if (m == "inc") mono = Monotonicity::Increasing;
            else if (m == "dec") mono = Monotonicity::Decreasing;
            else lx.error("expected inc or dec");
            Form f = detail::parse_form(lx);
            branches.push_back({BranchSpec::single(lo, hi, mono, std::move(f)), lineno});
        } else {
            fail(ErrorCode::ParseError, std::to_string(lineno) + ":" + std::to_string(first + 1) + ": unknown key '" + key + "'");
        }
        if (!lx.done()) lx.error("trailing characters");
    }
    ParsedSpec out;
    out.text = text;
    if (family) {
        if (critical || !branches.empty()) fail(ErrorCode::ParseError, "family maps take no explicit branches");
        auto get = [&](const char* k, double d) { return params.count(k) ? params[k].first : d; };
        const std::string& fam = *family;
        if (fam == "logistic") out.map = catalog::logistic(get("lambda", 4.0));
        else if (fam == "tent") out.map = catalog::tent(get("slope", 2.0));
        else if (fam == "doubling") out.map = catalog::doubling();
        else if (fam == "lorenz") out.map = catalog::lorenz_contracting(get("lambda", 0.999), get("rho", 0.6180339887498949));
        else if (fam == "half") out.map = catalog::half_contraction();
        else if (fam == "bimodal-halves") out.map = catalog::bimodal_invariant_halves();
        else if (fam == "bimodal-transitive") out.map = catalog::bimodal_transitive();
        else fail(ErrorCode::ParseError, "unknown family '" + fam + "'");
    } else {
        if (branches.empty()) fail(ErrorCode::ParseError, "no family and no branches");
        std::vector<double> C = critical.value_or(std::vector<double>{});
        if (!std::is_sorted(C.begin(), C.end())) fail(ErrorCode::ParseError, "critical points must be increasing");
        std::sort(branches.begin(), branches.end(), [](const auto& a, const auto& b) { return a.spec.lo < b.spec.lo; });
        for (std::size_t i = 1; i < branches.size(); ++i)
            if (branches[i].spec.lo < branches[i - 1].spec.hi)
                fail(ErrorCode::ParseError, std::to_string(branches[i].line) + ":1: branch domain overlaps the branch on line " +
                                                std::to_string(branches[i - 1].line));
        if (branches.size() != C.size() + 1)
            fail(ErrorCode::ParseError, "expected " + std::to_string(C.size() + 1) + " branches for " +
                                            std::to_string(C.size()) + " critical points");
        std::vector<BranchSpec> bs;
        for (auto& b : branches) bs.push_back(std::move(b.spec));
        out.map = PiecewiseMap(std::move(C), std::move(bs), name.empty() ? "custom" : name);
    }
    out.name = name.empty() ? out.map.name() : name;
    return out;
}

inline ParsedSpec load_map_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::ParseError, path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_map_spec(ss.str());
    } catch (const DynamicsError& e) {
        if (e.code() != ErrorCode::ParseError) throw;
        std::string w = e.what();
        w = w.substr(w.find(": ") + 2);
        fail(ErrorCode::ParseError, path + (std::isdigit(static_cast<unsigned char>(w[0])) ? ":" : ": ") + w);
    }
}

} // namespace ivdyn

#endif
