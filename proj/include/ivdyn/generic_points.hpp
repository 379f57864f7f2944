#ifndef IVDYN_GENERIC_POINTS_HPP
#define IVDYN_GENERIC_POINTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <mpfr.h>

#include "attractor_types.hpp"
#include "interval.hpp"
#include "map.hpp"
#include "observable.hpp"
#include "orbit_stats.hpp"
#include "structure.hpp"

namespace ivdyn {

namespace mp {

class Real {
public:
    explicit Real(mpfr_prec_t p = 64) {
        mpfr_init2(v_, p);
        mpfr_set_zero(v_, 1);
    }
    Real(double d, mpfr_prec_t p) {
        mpfr_init2(v_, std::max<mpfr_prec_t>(p, 53));
        mpfr_set_d(v_, d, MPFR_RNDN);
    }
    Real(const Real& o) {
        mpfr_init2(v_, mpfr_get_prec(o.v_));
        mpfr_set(v_, o.v_, MPFR_RNDN);
    }
    Real(Real&& o) noexcept {
        mpfr_init2(v_, MPFR_PREC_MIN);
        mpfr_swap(v_, o.v_);
    }
    Real& operator=(const Real& o) {
        if (this != &o) {
            mpfr_set_prec(v_, mpfr_get_prec(o.v_));
            mpfr_set(v_, o.v_, MPFR_RNDN);
        }
        return *this;
    }
    Real& operator=(Real&& o) noexcept {
        mpfr_swap(v_, o.v_);
        return *this;
    }
    ~Real() { mpfr_clear(v_); }

    mpfr_ptr get() { return v_; }
    mpfr_srcptr get() const { return v_; }
    mpfr_prec_t prec() const { return mpfr_get_prec(v_); }
    double to_double(mpfr_rnd_t r = MPFR_RNDN) const { return mpfr_get_d(v_, r); }
    // Exponent e with 2^(e-1) <= |x| < 2^e; very negative for zero.
    long exponent() const { return mpfr_zero_p(v_) ? -(1L << 40) : static_cast<long>(mpfr_get_exp(v_)); }

    // Exact hexadecimal representation.
    std::string hex() const {
        char* s = nullptr;
        mpfr_asprintf(&s, "%Ra", v_);
        std::string out(s);
        mpfr_free_str(s);
        return out;
    }
    static Real from_hex(const std::string& s, mpfr_prec_t p) {
        Real r(p);
        if (mpfr_set_str(r.v_, s.c_str(), 0, MPFR_RNDN) != 0)
            fail(ErrorCode::ParseError, "bad hexadecimal float '" + s + "'");
        return r;
    }

private:
    mpfr_t v_;
};

inline Real rounded(const Real& x, mpfr_prec_t p, mpfr_rnd_t r) {
    Real y(p);
    mpfr_set(y.get(), x.get(), r);
    return y;
}

// Midpoint ball: the true value lies in [c - r, c + r]. The radius is kept at 64 bits, rounded up.
struct Ball {
    Real c;
    Real r{64};
};

inline void add_rounding(Ball& b) {
    Real e(64);
    mpfr_abs(e.get(), b.c.get(), MPFR_RNDU);
    mpfr_mul_2si(e.get(), e.get(), 1 - static_cast<long>(b.c.prec()), MPFR_RNDU);
    mpfr_add(b.r.get(), b.r.get(), e.get(), MPFR_RNDU);
}

inline void ball_add_d(Ball& b, double d) {
    if (d == 0.0) return;
    mpfr_add_d(b.c.get(), b.c.get(), d, MPFR_RNDN);
    add_rounding(b);
}

inline void ball_mul_d(Ball& b, double d) {
    mpfr_mul_d(b.c.get(), b.c.get(), d, MPFR_RNDN);
    mpfr_mul_d(b.r.get(), b.r.get(), std::abs(d), MPFR_RNDU);
    add_rounding(b);
}

inline void ball_mul(Ball& a, const Ball& b) {
    Real t1(64), t2(64), t3(64);
    mpfr_abs(t1.get(), a.c.get(), MPFR_RNDU);
    mpfr_mul(t1.get(), t1.get(), b.r.get(), MPFR_RNDU);
    mpfr_abs(t2.get(), b.c.get(), MPFR_RNDU);
    mpfr_mul(t2.get(), t2.get(), a.r.get(), MPFR_RNDU);
    mpfr_mul(t3.get(), a.r.get(), b.r.get(), MPFR_RNDU);
    mpfr_add(t1.get(), t1.get(), t2.get(), MPFR_RNDU);
    mpfr_add(a.r.get(), t1.get(), t3.get(), MPFR_RNDU);
    mpfr_mul(a.c.get(), a.c.get(), b.c.get(), MPFR_RNDN);
    add_rounding(a);
}

// Value at the center with its rounding error, plus r * sup |p'| over the ball. Plain ball Horner
// would bound the input radius by sum |c_k| k |t|^(k-1), which loses bits at every step of a long orbit.
inline Ball eval_polynomial(const Polynomial& p, const Ball& x, mpfr_prec_t prec) {
    Ball u{rounded(x.c, prec, MPFR_RNDN)};
    if (mpfr_cmp(u.c.get(), x.c.get()) != 0) add_rounding(u);
    ball_add_d(u, -p.center);
    std::size_t n = p.coeffs.size();
    if (n < 2) return Ball{Real(n ? p.coeffs[0] : 0.0, prec)};
    // the leading step is a scalar product; only the remaining ones need full multiplications
    Ball acc = u;
    ball_mul_d(acc, p.coeffs[n - 1]);
    ball_add_d(acc, p.coeffs[n - 2]);
    for (std::size_t k = n - 2; k-- > 0;) {
        ball_mul(acc, u);
        ball_add_d(acc, p.coeffs[k]);
    }
    if (mpfr_zero_p(x.r.get())) return acc;
    double rd = x.r.to_double(MPFR_RNDU);
    Interval S{rnd::sub_down(x.c.to_double(MPFR_RNDD), rd), rnd::add_up(x.c.to_double(MPFR_RNDU), rd)};
    S = S - Interval::point(p.center);
    auto kc = [&](std::size_t k) {
        double a = static_cast<double>(k), c = p.coeffs[k];
        return Interval{std::min(rnd::mul_down(a, c), rnd::mul_up(a, c)), std::max(rnd::mul_down(a, c), rnd::mul_up(a, c))};
    };
    Interval D = kc(n - 1);
    for (std::size_t k = n - 1; k-- > 1;) D = D * S + kc(k);
    Real lip(64), t(64);
    mpfr_set_d(lip.get(), std::max(std::abs(D.lo), std::abs(D.hi)), MPFR_RNDU);
    mpfr_mul(t.get(), lip.get(), x.r.get(), MPFR_RNDU);
    mpfr_add(acc.r.get(), acc.r.get(), t.get(), MPFR_RNDU);
    return acc;
}

inline Ball eval_polynomial(const Polynomial& p, const Real& x, mpfr_prec_t prec) {
    return eval_polynomial(p, Ball{x}, prec);
}

inline Ball eval_form(const Form& f, const Ball& x, mpfr_prec_t prec) {
    Ball p = eval_polynomial(f.phi, x, prec);
    if (f.is_polynomial()) return p;
    if (f.alpha != 1.0) {
        if (mpfr_sgn(p.c.get()) < 0) mpfr_set_zero(p.c.get(), 1);
        Real hi(64), d(64), a(64);
        mpfr_add(hi.get(), p.c.get(), p.r.get(), MPFR_RNDU);
        mpfr_set_d(a.get(), f.alpha - 1.0, MPFR_RNDU);
        mpfr_pow(d.get(), hi.get(), a.get(), MPFR_RNDU);
        mpfr_mul_d(d.get(), d.get(), f.alpha, MPFR_RNDU);
        mpfr_mul(p.r.get(), p.r.get(), d.get(), MPFR_RNDU);
        Real al(f.alpha, 64);
        mpfr_pow(p.c.get(), p.c.get(), al.get(), MPFR_RNDN);
        add_rounding(p);
    }
    ball_mul_d(p, f.scale);
    ball_add_d(p, f.offset);
    return p;
}

inline Ball eval_form(const Form& f, const Real& x, mpfr_prec_t prec) {
    return eval_form(f, Ball{x}, prec);
}

inline const Form& form_at(const BranchSpec& b, const Real& x) {
    for (std::size_t i = 0; i + 1 < b.pieces.size(); ++i)
        if (mpfr_cmp_d(x.get(), b.pieces[i].hi) < 0) return b.pieces[i].form;
    return b.pieces.back().form;
}

// Solve the branch equation value(x) = y at precision prec; `guess` picks the root.
inline Real branch_inverse(const PiecewiseMap& f, std::size_t branch, const Real& y, mpfr_prec_t prec) {
    const auto& b = f.branches()[branch];
    // a double estimate picks the piece and, for quadratics, the root
    auto estimate = [&] { return f.inverse<double>(branch, y.to_double(), b.lo, b.hi); };
    double guess = b.pieces.size() > 1 ? estimate() : 0.5 * (b.lo + b.hi);
    const Piece* pc = &b.pieces.back();
    for (const auto& p : b.pieces)
        if (guess <= p.hi) { pc = &p; break; }
    const Form& fm = pc->form;
    Real w(prec);
    mpfr_set(w.get(), y.get(), MPFR_RNDN);
    if (!fm.is_polynomial()) {
        mpfr_sub_d(w.get(), w.get(), fm.offset, MPFR_RNDN);
        mpfr_div_d(w.get(), w.get(), fm.scale, MPFR_RNDN);
        if (fm.alpha != 1.0) {
            if (mpfr_sgn(w.get()) < 0) mpfr_set_zero(w.get(), 1);
            if (fm.alpha == 2.0) {
                mpfr_sqrt(w.get(), w.get(), MPFR_RNDN);
            } else if (fm.alpha == std::floor(fm.alpha) && fm.alpha <= 64) {
                mpfr_rootn_ui(w.get(), w.get(), static_cast<unsigned long>(fm.alpha), MPFR_RNDN);
            } else {
                Real e(1.0, prec);
                mpfr_div_d(e.get(), e.get(), fm.alpha, MPFR_RNDN);
                mpfr_pow(w.get(), w.get(), e.get(), MPFR_RNDN);
            }
        }
    }
    const auto& P = fm.phi;
    std::size_t deg = P.degree();
    auto inside = [&](const Real& x) { return mpfr_cmp_d(x.get(), pc->lo) >= 0 && mpfr_cmp_d(x.get(), pc->hi) <= 0; };
    auto outside_by = [&](const Real& x) {
        double xd = x.to_double();
        return std::max({0.0, pc->lo - xd, xd - pc->hi});
    };
    Real x(prec);
    if (deg == 1) {
        mpfr_sub_d(x.get(), w.get(), P.coeffs[0], MPFR_RNDN);
        mpfr_div_d(x.get(), x.get(), P.coeffs[1], MPFR_RNDN);
        mpfr_add_d(x.get(), x.get(), P.center, MPFR_RNDN);
        return x;
    }
    if (deg == 2) {
        double a0 = P.coeffs[0], a1 = P.coeffs[1], a2 = P.coeffs[2];
        Real k(prec); // a0 - w
        mpfr_d_sub(k.get(), a0, w.get(), MPFR_RNDN);
        Real r1(prec), r2(prec);
        if (a1 == 0.0) {
            mpfr_div_d(r1.get(), k.get(), -a2, MPFR_RNDN);
            if (mpfr_sgn(r1.get()) < 0) mpfr_set_zero(r1.get(), 1);
            mpfr_sqrt(r1.get(), r1.get(), MPFR_RNDN);
            mpfr_neg(r2.get(), r1.get(), MPFR_RNDN);
        } else {
            Real D(prec);
            mpfr_mul_d(D.get(), k.get(), -4.0 * a2, MPFR_RNDN);
            mpfr_add_d(D.get(), D.get(), a1 * a1, MPFR_RNDN);
            if (mpfr_sgn(D.get()) < 0) mpfr_set_zero(D.get(), 1);
            mpfr_sqrt(D.get(), D.get(), MPFR_RNDN);
            Real q(prec);
            if (a1 > 0) mpfr_add_d(q.get(), D.get(), a1, MPFR_RNDN);
            else mpfr_sub_d(q.get(), D.get(), -a1, MPFR_RNDN), mpfr_neg(q.get(), q.get(), MPFR_RNDN);
            mpfr_div_2ui(q.get(), q.get(), 1, MPFR_RNDN);
            mpfr_neg(q.get(), q.get(), MPFR_RNDN); // q = -(a1 + sign(a1) sqrt D) / 2
            mpfr_div_d(r1.get(), q.get(), a2, MPFR_RNDN);
            if (mpfr_zero_p(q.get())) mpfr_set(r2.get(), r1.get(), MPFR_RNDN);
            else mpfr_div(r2.get(), k.get(), q.get(), MPFR_RNDN);
        }
        mpfr_add_d(r1.get(), r1.get(), P.center, MPFR_RNDN);
        mpfr_add_d(r2.get(), r2.get(), P.center, MPFR_RNDN);
        bool i1 = inside(r1), i2 = inside(r2);
        if (i1 && !i2) return r1;
        if (i2 && !i1) return r2;
        if (!i1 && !i2) return outside_by(r1) <= outside_by(r2) ? r1 : r2;
        guess = estimate();
        double d1 = std::abs(r1.to_double() - guess), d2 = std::abs(r2.to_double() - guess);
        return d1 <= d2 ? r1 : r2;
    }
    // Newton from the long double guess, doubling the precision each step; bisection on the piece if it stalls
    auto derivative_at = [&](const Real& at, mpfr_prec_t p) {
        Real t(p), d(p), ck(p);
        mpfr_sub_d(t.get(), at.get(), P.center, MPFR_RNDN);
        mpfr_set_d(d.get(), P.coeffs[deg], MPFR_RNDN);
        mpfr_mul_ui(d.get(), d.get(), static_cast<unsigned long>(deg), MPFR_RNDN);
        for (std::size_t k = deg - 1; k >= 1; --k) {
            mpfr_mul(d.get(), d.get(), t.get(), MPFR_RNDN);
            mpfr_set_d(ck.get(), P.coeffs[k], MPFR_RNDN);
            mpfr_mul_ui(ck.get(), ck.get(), static_cast<unsigned long>(k), MPFR_RNDN);
            mpfr_add(d.get(), d.get(), ck.get(), MPFR_RNDN);
        }
        return d;
    };
    mpfr_set_d(x.get(), estimate(), MPFR_RNDN);
    mpfr_prec_t p = 48;
    for (int it = 0; it < 64 + 2 * static_cast<int>(std::log2(static_cast<double>(prec))); ++it) {
        p = std::min<mpfr_prec_t>(2 * p, prec);
        Real xp(p);
        mpfr_set(xp.get(), x.get(), MPFR_RNDN);
        Ball v = eval_polynomial(P, xp, p);
        mpfr_sub(v.c.get(), v.c.get(), w.get(), MPFR_RNDN);
        Real d = derivative_at(xp, p);
        if (mpfr_zero_p(d.get())) break;
        Real step(p);
        mpfr_div(step.get(), v.c.get(), d.get(), MPFR_RNDN);
        mpfr_sub(x.get(), x.get(), step.get(), MPFR_RNDN);
        if (!mpfr_number_p(x.get()) || outside_by(x) > 1e-6) break;
        if (p == prec && (mpfr_zero_p(step.get()) || step.exponent() < x.exponent() - static_cast<long>(prec) + 2)) return x;
    }
    Real lo(pc->lo, prec), hi(pc->hi, prec), m(prec);
    bool inc = P.derivative(0.5 * (pc->lo + pc->hi)) > 0;
    for (mpfr_prec_t it = 0; it < prec + 8; ++it) {
        mpfr_add(m.get(), lo.get(), hi.get(), MPFR_RNDN);
        mpfr_div_2ui(m.get(), m.get(), 1, MPFR_RNDN);
        Ball v = eval_polynomial(P, m, prec);
        bool below = mpfr_cmp(v.c.get(), w.get()) < 0;
        if (below == inc) lo = m; else hi = m;
    }
    return lo;
}

struct RInterval {
    Real lo, hi;
};

inline Real width(const RInterval& I) {
    Real w(64);
    mpfr_sub(w.get(), I.hi.get(), I.lo.get(), MPFR_RNDU);
    return w;
}

// Bits needed to resolve I in absolute terms on [0,1], plus a guard. Branch formulas centered
// away from 0 cancel, so relative resolution is not enough.
inline mpfr_prec_t needed_bits(const RInterval& I, long guard = 64) {
    Real w = width(I);
    if (mpfr_zero_p(w.get())) return std::max<mpfr_prec_t>({I.lo.prec(), I.hi.prec(), 64});
    long b = 1 - w.exponent() + guard;
    return static_cast<mpfr_prec_t>(std::clamp<long>(b, 64, MPFR_PREC_MAX / 4));
}

} // namespace mp

// ---------------------------------------------------------------------------
// Nested witnesses

struct ChainLink {
    std::string lo, hi;      // exact endpoints, hexadecimal floats
    long precision = 0;
    double lo_approx = 0.0, hi_approx = 0.0;
    double log2_width = 0.0;
    double margin = 0.0;     // relative margin inside the previous link
};

struct WitnessStage {
    std::size_t index = 0;
    std::string phase;       // "hi" or "lo"
    std::size_t connect = 0; // steps of the connecting segment
    std::size_t block = 0;   // L_k
    std::size_t start = 0;   // time the block starts
    std::size_t end = 0;     // T_k
    std::size_t orbit_phase = 0;
    double target_mean = 0.0;
    double delta = 0.0;      // 2 eps Lip(phi) + (max - min) T_{k-1} / L_k
};

struct EnvelopeRow {
    std::size_t time = 0;    // partial average over the first `time` points
    std::size_t stage = 0;
    double lower = 0.0, upper = 0.0;
};

struct NestedWitness {
    std::string map_name;
    std::string observable;
    std::vector<double> orbit_hi, orbit_lo;
    double mean_hi = 0.0, mean_lo = 0.0;
    double eps_shadow = 1e-3;
    bool single_phase = false;
    std::vector<ChainLink> chain;     // J_0, ..., J_K
    std::vector<WitnessStage> stages; // 1..K
    std::vector<EnvelopeRow> envelope;
    long precision = 0;               // working precision of J_K
    double limsup_proxy = 0.0;        // largest certified lower bound at the end of a hi stage
    double liminf_proxy = 0.0;        // smallest certified upper bound at the end of a lo stage
    double certified_gap = 0.0;       // best lower(hi end) - upper(later lo end)

    std::size_t horizon() const { return stages.empty() ? 0 : stages.back().end; }
};

struct WitnessOptions {
    std::size_t K = 6;
    double eps_shadow = 1e-3;
    std::size_t min_block = 8;
    double dominance = 4.0;          // L_k >= dominance * (T_{k-1} + connect)
    std::size_t max_connect = 64;
    std::size_t max_pieces = 200000;
    double shrink = 0.1;             // connecting search starts inside the image with this relative margin
    bool single_phase = false;
};

namespace detail {

inline bool orbit_is_periodic(const PiecewiseMap& f, const std::vector<double>& o) {
    if (o.empty()) return false;
    for (std::size_t i = 0; i < o.size(); ++i) {
        if (f.critical_near(o[i], 1e-12)) return false;
        double y = f.evaluate(o[i]);
        if (std::abs(y - o[(i + 1) % o.size()]) > 1e-9) return false;
    }
    return true;
}

inline double orbit_mean(const Observable& phi, const std::vector<double>& o) {
    long double s = 0;
    for (double x : o) s += phi(x);
    return static_cast<double>(s / static_cast<long double>(o.size()));
}

// Points x with f^i(x) within eps of o[(s+i) mod q] for i < L, as a long double interval,
// stopping early once it is below double resolution (later constraints only shrink it).
inline std::pair<long double, long double> block_target_approx(const PiecewiseMap& f, const std::vector<double>& o, std::size_t s,
                                                               std::size_t L, double eps) {
    std::size_t q = o.size();
    auto pt = [&](std::size_t i) { return o[(s + i) % q]; };
    std::size_t e = L - 1;
    long double lo = std::max(0.0, pt(e) - eps), hi = std::min(1.0, pt(e) + eps);
    for (std::size_t i = e; i-- > 0;) {
        std::size_t b = f.branch_index(pt(i));
        const auto& br = f.branches()[b];
        long double a = f.inverse<long double>(b, lo, br.lo, br.hi), c = f.inverse<long double>(b, hi, br.lo, br.hi);
        lo = std::min(a, c);
        hi = std::max(a, c);
        lo = std::max<long double>(lo, pt(i) - eps);
        hi = std::min<long double>(hi, pt(i) + eps);
        long double mag = std::max<long double>(std::abs(pt(i)), 1e-300L);
        if (hi - lo < 1e-15L * std::max<long double>(mag, 1e-3L)) break;
    }
    return {lo, hi};
}

struct Connection {
    std::vector<std::uint16_t> word;
    std::size_t phase = 0;
    std::size_t block = 0;
};

} // namespace detail

namespace detail {

// Pull an interval back through word[from..to) in reverse order. Endpoints are rounded to nearest; soundness
// comes from the forward propagation afterwards.
inline mp::RInterval pull_back(const PiecewiseMap& f, mp::RInterval I, const std::vector<std::uint16_t>& word, std::size_t from,
                               std::size_t to, mpfr_prec_t& prec) {
    for (std::size_t t = to; t-- > from;) {
        if (mpfr_cmp(I.lo.get(), I.hi.get()) >= 0) fail(ErrorCode::ShadowingFailed, "pullback collapsed at step " + std::to_string(t + 1));
        mpfr_prec_t p = mp::needed_bits(I, 40);
        for (;;) {
            mp::Real a = mp::branch_inverse(f, word[t], I.lo, p), b = mp::branch_inverse(f, word[t], I.hi, p);
            mp::RInterval K = mpfr_cmp(a.get(), b.get()) <= 0 ? mp::RInterval{std::move(a), std::move(b)}
                                                              : mp::RInterval{std::move(b), std::move(a)};
            mp::Real w = mp::width(K);
            if (p >= MPFR_PREC_MAX / 8 || (!mpfr_zero_p(w.get()) && w.exponent() > 24 - static_cast<long>(p))) {
                I = std::move(K);
                break;
            }
            p *= 2;
        }
        prec = std::max(prec, p);
    }
    return I;
}

// Outward-rounded image of I under one branch. Precision is raised until rounding is negligible
// against the width of the result, which matters where the branch flattens near a critical point.
inline mp::RInterval image_step(const BranchSpec& br, const mp::RInterval& I) {
    mpfr_prec_t p = mp::needed_bits(I);
    for (;;) {
        mp::Ball a = mp::eval_form(mp::form_at(br, I.lo), I.lo, p);
        mp::Ball b = mp::eval_form(mp::form_at(br, I.hi), I.hi, p);
        mp::Real lo(p), hi(p), t1(p), t2(p);
        mpfr_sub(t1.get(), a.c.get(), a.r.get(), MPFR_RNDD);
        mpfr_sub(t2.get(), b.c.get(), b.r.get(), MPFR_RNDD);
        mpfr_min(lo.get(), t1.get(), t2.get(), MPFR_RNDD);
        mpfr_add(t1.get(), a.c.get(), a.r.get(), MPFR_RNDU);
        mpfr_add(t2.get(), b.c.get(), b.r.get(), MPFR_RNDU);
        mpfr_max(hi.get(), t1.get(), t2.get(), MPFR_RNDU);
        if (mpfr_cmp_d(lo.get(), 0.0) < 0) mpfr_set_d(lo.get(), 0.0, MPFR_RNDD);
        if (mpfr_cmp_d(hi.get(), 1.0) > 0) mpfr_set_d(hi.get(), 1.0, MPFR_RNDU);
        mp::RInterval J{std::move(lo), std::move(hi)};
        mp::Real w = mp::width(J);
        if (p >= MPFR_PREC_MAX / 8 || (!mpfr_zero_p(w.get()) && w.exponent() > 24 - static_cast<long>(p))) return J;
        p *= 2;
    }
}

struct Propagation {
    mp::RInterval end;
    std::vector<EnvelopeRow> rows;
};

// Outward-rounded forward images of I along word[0..T), with certified partial-average bounds
// at the requested times.
inline Propagation propagate(const PiecewiseMap& f, const mp::RInterval& I0, const std::vector<std::uint16_t>& word, std::size_t T,
                             const Observable& phi, const std::vector<std::pair<std::size_t, std::size_t>>& times) {
    Propagation out;
    mp::RInterval I = I0;
    double slo = 0.0, shi = 0.0;
    std::size_t ti = 0;
    bool constant = phi.is_constant();
    double kappa = phi.max_value();
    auto record = [&](std::size_t t) {
        while (ti < times.size() && times[ti].first == t) {
            if (constant) out.rows.push_back({t, times[ti].second, kappa, kappa});
            else if (t == 0) out.rows.push_back({0, times[ti].second, phi.min_value(), phi.max_value()});
            else out.rows.push_back({t, times[ti].second, rnd::div_down(slo, static_cast<double>(t)), rnd::div_up(shi, static_cast<double>(t))});
            ++ti;
        }
    };
    record(0);
    for (std::size_t t = 0; t < T; ++t) {
        Interval d{I.lo.to_double(MPFR_RNDD), I.hi.to_double(MPFR_RNDU)};
        Interval v = phi.enclose(d);
        slo = rnd::add_down(slo, v.lo);
        shi = rnd::add_up(shi, v.hi);
        const auto& br = f.branches()[word[t]];
        if (mpfr_cmp_d(I.lo.get(), br.lo) < 0 || mpfr_cmp_d(I.hi.get(), br.hi) > 0)
            fail(ErrorCode::ShadowingFailed, "interval left its planned branch at step " + std::to_string(t) + ": [" +
                                                 PiecewiseMap::fmt(I.lo.to_double()) + ", " + PiecewiseMap::fmt(I.hi.to_double()) +
                                                 "] vs branch " + std::to_string(word[t]));
        I = image_step(br, I);
        record(t + 1);
    }
    out.end = std::move(I);
    return out;
}

inline double relative_margin(const mp::RInterval& inner, const mp::RInterval& outer) {
    mp::Real a(64), b(64), w = mp::width(outer);
    mpfr_sub(a.get(), inner.lo.get(), outer.lo.get(), MPFR_RNDD);
    mpfr_sub(b.get(), outer.hi.get(), inner.hi.get(), MPFR_RNDD);
    mpfr_min(a.get(), a.get(), b.get(), MPFR_RNDD);
    if (mpfr_sgn(a.get()) <= 0) return mpfr_sgn(a.get()) < 0 ? -1.0 : 0.0;
    mpfr_div(a.get(), a.get(), w.get(), MPFR_RNDD);
    return a.to_double(MPFR_RNDD);
}

inline double log2_width(const mp::RInterval& I) {
    mp::Real w = mp::width(I);
    if (mpfr_zero_p(w.get())) return -std::numeric_limits<double>::infinity();
    long e = 0;
    double m = mpfr_get_d_2exp(&e, w.get(), MPFR_RNDN);
    return std::log2(m) + static_cast<double>(e);
}

inline ChainLink make_link(const mp::RInterval& I, double margin) {
    ChainLink c;
    c.lo = I.lo.hex();
    c.hi = I.hi.hex();
    c.precision = static_cast<long>(std::max(I.lo.prec(), I.hi.prec()));
    c.lo_approx = I.lo.to_double();
    c.hi_approx = I.hi.to_double();
    c.log2_width = log2_width(I);
    c.margin = margin;
    return c;
}

inline mp::RInterval link_interval(const ChainLink& c) {
    return {mp::Real::from_hex(c.lo, c.precision), mp::Real::from_hex(c.hi, c.precision)};
}

} // namespace detail

// Stage k alternates between shadowing orbit_hi and orbit_lo (or always orbit_hi when
// single_phase), joined by connecting segments found through monotone-piece propagation.
inline NestedWitness construct_historic_point(const PiecewiseMap& f, const std::vector<Interval>& J, const Observable& phi,
                                              const std::vector<double>& orbit_hi, const std::vector<double>& orbit_lo,
                                              const WitnessOptions& opt = {}) {
    if (J.empty()) fail(ErrorCode::PreconditionFailed, "empty cycle of intervals");
    auto in_J = [&](double x) {
        return std::any_of(J.begin(), J.end(), [&](const Interval& c) { return x >= c.lo - 1e-12 && x <= c.hi + 1e-12; });
    };
    if (!detail::orbit_is_periodic(f, orbit_hi) || (!opt.single_phase && !detail::orbit_is_periodic(f, orbit_lo)))
        fail(ErrorCode::PreconditionFailed, "target orbits must be periodic orbits avoiding C");
    if (!std::all_of(orbit_hi.begin(), orbit_hi.end(), in_J) ||
        (!opt.single_phase && !std::all_of(orbit_lo.begin(), orbit_lo.end(), in_J)))
        fail(ErrorCode::PreconditionFailed, "target orbits must lie in the cycle");
    NestedWitness w;
    w.map_name = f.name();
    w.observable = phi.id();
    w.orbit_hi = orbit_hi;
    w.orbit_lo = opt.single_phase ? orbit_hi : orbit_lo;
    w.mean_hi = detail::orbit_mean(phi, orbit_hi);
    w.mean_lo = detail::orbit_mean(phi, w.orbit_lo);
    w.eps_shadow = opt.eps_shadow;
    w.single_phase = opt.single_phase;
    if (!opt.single_phase && !(w.mean_hi > w.mean_lo))
        fail(ErrorCode::PreconditionFailed, "orbit means must satisfy m_hi > m_lo");
    {
        std::vector<Interval> probes;
        const Interval& c0 = J.front();
        double pw = std::min(1e-2, c0.width() / 10);
        for (double s : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            double m = c0.lo + s * c0.width();
            probes.push_back({m - pw / 2, m + pw / 2});
        }
        auto tv = strong_transitivity_check(f, J, probes, 60, 1.0 / 1024);
        if (!tv.strongly_transitive) fail(ErrorCode::PreconditionFailed, "J failed the strong transitivity check");
    }

    auto component_of = [&](double x) {
        for (const auto& c : J)
            if (x >= c.lo - 1e-12 && x <= c.hi + 1e-12) return c;
        return Interval{0.0, 1.0};
    };
    // J_0: the component of J holding the first hi point
    Interval J0 = J.front();
    for (const auto& c : J)
        if (orbit_hi[0] >= c.lo && orbit_hi[0] <= c.hi) J0 = c;
    mpfr_prec_t prec = 64;
    mp::RInterval cur{mp::Real(J0.lo, 64), mp::Real(J0.hi, 64)};
    w.chain.push_back(detail::make_link(cur, 0.0));
    w.envelope.push_back({0, 0, phi.min_value(), phi.max_value()});
    if (phi.is_constant()) w.envelope.back().lower = w.envelope.back().upper = phi.max_value();
    std::vector<std::uint16_t> word; // itinerary of J_k up to T_k
    mp::RInterval image = cur;       // f^{T_k}(J_k)
    std::size_t T = 0;
    double lip = phi.lipschitz(), spread = phi.max_value() - phi.min_value();

    for (std::size_t k = 1; k <= opt.K; ++k) {
        bool hi_phase = opt.single_phase || (k % 2 == 1);
        const auto& orbit = hi_phase ? orbit_hi : w.orbit_lo;
        std::size_t q = orbit.size();
        // search interval: the current image with a relative margin
        double ylo = image.lo.to_double(MPFR_RNDU), yhi = image.hi.to_double(MPFR_RNDD);
        double m = (yhi - ylo) * opt.shrink;
        ylo += m;
        yhi -= m;
        if (!(ylo < yhi)) fail(ErrorCode::ShadowingFailed, "stage " + std::to_string(k) + ": image interval too thin");
        std::vector<detail::WordLap> live{{ylo, yhi, ylo, yhi, {}}};
        bool found = false;
        detail::Connection conn;
        std::pair<long double, long double> target{0, 0};
        for (std::size_t j = 0; j <= opt.max_connect && !found; ++j) {
            std::size_t L = std::max<std::size_t>(opt.min_block, static_cast<std::size_t>(std::ceil(opt.dominance * static_cast<double>(T + j))));
            double best = -1;
            for (std::size_t s = 0; s < q; ++s) {
                auto tg = detail::block_target_approx(f, orbit, s, L, opt.eps_shadow);
                double tlo = static_cast<double>(tg.first), thi = static_cast<double>(tg.second);
                if (tlo > tg.first) tlo = std::nextafter(tlo, -1.0);
                if (thi < tg.second) thi = std::nextafter(thi, 2.0);
                Interval comp = component_of(orbit[s]);
                tlo = std::max(tlo, comp.lo);
                thi = std::min(thi, comp.hi);
                for (const auto& lap : live) {
                    double lo = std::min(lap.ya, lap.yb), hi = std::max(lap.ya, lap.yb);
                    bool ok = (lo < tlo || (lo == comp.lo && tlo == comp.lo)) && (hi > thi || (hi == comp.hi && thi == comp.hi));
                    if (ok && lap.b - lap.a > best) {
                        best = lap.b - lap.a;
                        conn = {lap.word, s, L};
                        target = tg;
                        found = true;
                    }
                }
            }
            if (found || j == opt.max_connect) break;
            std::vector<detail::WordLap> next;
            for (const auto& lap : live) detail::advance_word_lap(f, lap, next);
            if (next.size() > opt.max_pieces)
                fail(ErrorCode::ShadowingFailed, "stage " + std::to_string(k) + ": connecting search exceeded the piece budget");
            live = std::move(next);
        }
        if (!found)
            fail(ErrorCode::ShadowingFailed, "stage " + std::to_string(k) + ": no connection to the " + (hi_phase ? "hi" : "lo") +
                                                 " orbit within " + std::to_string(opt.max_connect) + " steps");
        std::size_t c = conn.word.size(), L = conn.block;
        // exact block target: pull back the eps-ball at the last block point, then keep the middle half
        std::vector<std::uint16_t> block_word(L);
        for (std::size_t i = 0; i < L; ++i) block_word[i] = static_cast<std::uint16_t>(f.branch_index(orbit[(conn.phase + i) % q]));
        double e_pt = orbit[(conn.phase + L - 1) % q];
        Interval e_comp = component_of(e_pt);
        mp::RInterval B{mp::Real(std::max(e_comp.lo, e_pt - opt.eps_shadow), 64), mp::Real(std::min(e_comp.hi, e_pt + opt.eps_shadow), 64)};
        mpfr_prec_t bprec = 64;
        B = detail::pull_back(f, std::move(B), block_word, 0, L - 1, bprec);
        {
            mp::Real qw(std::max(B.lo.prec(), B.hi.prec()) + 4);
            mpfr_sub(qw.get(), B.hi.get(), B.lo.get(), MPFR_RNDN);
            mpfr_div_2ui(qw.get(), qw.get(), 2, MPFR_RNDN);
            mp::Real lo(qw.prec()), hi(qw.prec());
            mpfr_add(lo.get(), B.lo.get(), qw.get(), MPFR_RNDN);
            mpfr_sub(hi.get(), B.hi.get(), qw.get(), MPFR_RNDN);
            B = {std::move(lo), std::move(hi)};
        }
        prec = std::max(prec, bprec);
        std::vector<std::uint16_t> full = word;
        full.insert(full.end(), conn.word.begin(), conn.word.end());
        mp::RInterval Jk = detail::pull_back(f, B, full, 0, full.size(), prec);
        double margin = detail::relative_margin(Jk, cur);
        if (!(margin >= 1e-3))
            fail(ErrorCode::ShadowingFailed, "stage " + std::to_string(k) + ": nesting margin " + PiecewiseMap::fmt(margin) +
                                                 " below 1e-3");
        full.insert(full.end(), block_word.begin(), block_word.end());
        std::size_t Tprev = T;
        T = full.size();
        WitnessStage st;
        st.index = k;
        st.phase = hi_phase ? "hi" : "lo";
        st.connect = c;
        st.block = L;
        st.start = Tprev + c;
        st.end = T;
        st.orbit_phase = conn.phase;
        st.target_mean = hi_phase ? w.mean_hi : w.mean_lo;
        st.delta = rnd::add_up(rnd::mul_up(2.0 * opt.eps_shadow, lip),
                               rnd::div_up(rnd::mul_up(spread, static_cast<double>(Tprev + c)), static_cast<double>(L)));
        if (static_cast<double>(L) < opt.dominance * static_cast<double>(Tprev + c))
            fail(ErrorCode::PreconditionFailed, "block dominance violated");
        auto prop = detail::propagate(f, Jk, full, T, phi, {{st.start, k}, {T, k}});
        for (auto& r : prop.rows)
            if (r.time > 0) w.envelope.push_back(r);
        w.stages.push_back(st);
        w.chain.push_back(detail::make_link(Jk, margin));
        word = std::move(full);
        image = std::move(prop.end);
        cur = std::move(Jk);
    }
    w.precision = static_cast<long>(std::max(cur.lo.prec(), cur.hi.prec()));

    // proxies from stage-end rows
    w.limsup_proxy = -std::numeric_limits<double>::infinity();
    w.liminf_proxy = std::numeric_limits<double>::infinity();
    w.certified_gap = 0.0;
    for (const auto& r : w.envelope) {
        if (r.stage == 0) continue;
        const auto& st = w.stages[r.stage - 1];
        if (r.time != st.end) continue;
        if (st.phase == "hi") w.limsup_proxy = std::max(w.limsup_proxy, r.lower);
        if (st.phase == "lo" || w.single_phase) w.liminf_proxy = std::min(w.liminf_proxy, r.upper);
        if (st.phase != "hi") continue;
        for (const auto& r2 : w.envelope) {
            if (r2.stage == 0 || r2.time <= r.time) continue;
            const auto& s2 = w.stages[r2.stage - 1];
            if (s2.phase == "lo" && r2.time == s2.end) w.certified_gap = std::max(w.certified_gap, r.lower - r2.upper);
        }
    }
    if (w.stages.empty()) {
        w.limsup_proxy = phi.min_value();
        w.liminf_proxy = phi.max_value();
    }
    return w;
}

inline NestedWitness construct_historic_point(const PiecewiseMap& f, const AttractorEstimate& A, const Observable& phi,
                                              const std::vector<double>& orbit_hi, const std::vector<double>& orbit_lo,
                                              const WitnessOptions& opt = {}) {
    if (A.kind != AttractorKind::CycleOfIntervals)
        fail(ErrorCode::PreconditionFailed, std::string("historic witnesses need a cycle of intervals, got ") + to_string(A.kind));
    return construct_historic_point(f, A.intervals, phi, orbit_hi, orbit_lo, opt);
}

struct ExtremalOrbits {
    PeriodicOrbit hi, lo; // largest and smallest phi-mean among periodic orbits of period <= Q in the cycle
};

inline ExtremalOrbits extremal_orbits(const PiecewiseMap& f, const AttractorEstimate& A, const Observable& phi, std::size_t Q) {
    if (A.kind != AttractorKind::CycleOfIntervals)
        fail(ErrorCode::PreconditionFailed, std::string("historic witnesses need a cycle of intervals, got ") + to_string(A.kind));
    if (Q < 1) fail(ErrorCode::PreconditionFailed, "Q must be >= 1");
    auto table = periodic_orbits(f, Q, {phi});
    auto inside = [&](double x) {
        return std::any_of(A.intervals.begin(), A.intervals.end(),
                           [&](const Interval& iv) { return x >= iv.lo - A.eps && x <= iv.hi + A.eps; });
    };
    const PeriodicOrbit *best = nullptr, *worst = nullptr;
    for (std::size_t q = 1; q <= Q; ++q)
        for (const auto& o : table.by_period[q]) {
            if (o.through_critical || !std::all_of(o.points.begin(), o.points.end(), inside)) continue;
            if (!best || o.means[0] > best->means[0]) best = &o;
            if (!worst || o.means[0] < worst->means[0]) worst = &o;
        }
    if (!best) fail(ErrorCode::PreconditionFailed, "no periodic orbit of period <= Q in the cycle");
    return {*best, *worst};
}

// Witness whose hi phase follows the orbit attaining the period-<=Q maximum of the phi-means.
inline NestedWitness construct_max_average_point(const PiecewiseMap& f, const AttractorEstimate& A, const Observable& phi,
                                                 std::size_t Q, WitnessOptions opt = {}) {
    auto ex = extremal_orbits(f, A, phi, Q);
    if (ex.hi.means[0] == ex.lo.means[0]) opt.single_phase = true;
    return construct_historic_point(f, A.intervals, phi, ex.hi.points, ex.lo.points, opt);
}

struct WitnessReport {
    std::size_t horizon = 0;
    std::size_t violations = 0;      // EnvelopeViolation count
    std::vector<double> observed;    // observed partial average per envelope row within the horizon
    HistoricVerdict historic;
    BirkhoffSeries series;
    double stage_gap = 0.0;          // observed: hi-stage-end average minus a later lo-stage-end average
    double midpoint_approx = 0.0;
    std::string midpoint_hex;
    double max_radius = 0.0;         // largest enclosure radius along the replay
};

// Replays the midpoint of J_K at the witness's working precision and checks the envelope.
inline WitnessReport verify_witness(const PiecewiseMap& f, const NestedWitness& w, const Observable& phi, std::size_t n,
                                    double gap_tol = 0.05) {
    WitnessReport rep;
    rep.horizon = std::min(n, w.horizon());
    const ChainLink& last = w.chain.back();
    mp::RInterval JK = detail::link_interval(last);
    const mpfr_prec_t base = static_cast<mpfr_prec_t>(last.precision) + 16;
    std::vector<double> orbit;
    std::string straddle;
    // the midpoint is exact at every p0; the ball radius only tracks rounding along the replay.
    // a pass through a fold squares distances, so a straddle is retried with more bits
    for (mpfr_prec_t p0 = base; p0 <= 8 * base; p0 *= 2) {
        mp::Ball x{mp::Real(p0)};
        mpfr_add(x.c.get(), JK.lo.get(), JK.hi.get(), MPFR_RNDN);
        mpfr_div_2ui(x.c.get(), x.c.get(), 1, MPFR_RNDN);
        mpfr_set_zero(x.r.get(), 1);
        if (p0 == base) {
            rep.midpoint_hex = x.c.hex();
            rep.midpoint_approx = x.c.to_double();
        }
        orbit.clear();
        orbit.reserve(rep.horizon);
        rep.max_radius = 0;
        straddle.clear();
        mp::Real edge(64);
        for (std::size_t t = 0; t < rep.horizon; ++t) {
            double xd = x.c.to_double();
            orbit.push_back(xd);
            rep.max_radius = std::max(rep.max_radius, x.r.to_double(MPFR_RNDU));
            if (t + 1 == rep.horizon) break;
            std::size_t b = 0;
            while (b < f.critical_count() && mpfr_cmp_d(x.c.get(), f.critical()[b]) > 0) ++b;
            const auto& br = f.branches()[b];
            mpfr_sub(edge.get(), x.c.get(), x.r.get(), MPFR_RNDD);
            bool ok = mpfr_cmp_d(edge.get(), br.lo) >= 0;
            mpfr_add(edge.get(), x.c.get(), x.r.get(), MPFR_RNDU);
            ok = ok && mpfr_cmp_d(edge.get(), br.hi) <= 0;
            if (!ok) {
                straddle = "replayed orbit straddles a critical point at step " + std::to_string(t) + ": x = " + PiecewiseMap::fmt(xd) +
                           ", radius " + PiecewiseMap::fmt(x.r.to_double(MPFR_RNDU)) + " at " + std::to_string(p0) + " bits";
                break;
            }
            x = mp::eval_form(mp::form_at(br, x.c), x, p0);
        }
        if (straddle.empty()) break;
    }
    if (!straddle.empty()) fail(ErrorCode::EnvelopeViolation, straddle);
    rep.series = birkhoff_envelope(SequenceSource(orbit), phi, std::max<std::size_t>(rep.horizon, 1));
    rep.historic = historic_from_series(rep.series, gap_tol);
    // observed averages at the envelope times
    std::vector<long double> prefix(orbit.size() + 1, 0.0L);
    for (std::size_t i = 0; i < orbit.size(); ++i) prefix[i + 1] = prefix[i] + phi(orbit[i]);
    const double slack = 1e-12;
    for (const auto& r : w.envelope) {
        if (r.time > rep.horizon) continue;
        double obs = r.time == 0 ? phi(orbit.empty() ? 0.0 : orbit[0]) : static_cast<double>(prefix[r.time] / r.time);
        if (phi.is_constant()) obs = phi.max_value();
        rep.observed.push_back(obs);
        if (r.time > 0 && (obs < r.lower - slack || obs > r.upper + slack)) ++rep.violations;
    }
    for (const auto& a : w.stages) {
        if (a.phase != "hi" || a.end > rep.horizon) continue;
        for (const auto& b : w.stages)
            if (b.phase == "lo" && b.end > a.end && b.end <= rep.horizon)
                rep.stage_gap = std::max(rep.stage_gap, static_cast<double>(prefix[a.end] / a.end - prefix[b.end] / b.end));
    }
    return rep;
}

} // namespace ivdyn

#endif
