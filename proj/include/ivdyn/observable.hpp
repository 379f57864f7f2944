#ifndef IVDYN_OBSERVABLE_HPP
#define IVDYN_OBSERVABLE_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "interval.hpp"
#include "map.hpp"

namespace ivdyn {

// A polynomial or piecewise-linear function on [0,1].
class Observable {
public:
    enum class Kind { Polynomial, PiecewiseLinear };

    static Observable identity() { return polynomial({0.0, 1.0}, "x"); }
    static Observable constant(double k) { return polynomial({k}, "const(" + PiecewiseMap::fmt(k) + ")"); }
    static Observable polynomial(std::vector<double> coeffs, std::string id = "") {
        if (coeffs.empty()) coeffs.push_back(0.0);
        Observable o;
        o.kind_ = Kind::Polynomial;
        o.poly_ = Polynomial{std::move(coeffs), 0.0};
        o.id_ = id.empty() ? "poly" : std::move(id);
        o.finish();
        return o;
    }
    // knots (x_i, y_i) with x_0 = 0 < ... < x_m = 1
    static Observable piecewise_linear(std::vector<std::pair<double, double>> knots, std::string id = "") {
        if (knots.size() < 2 || knots.front().first != 0.0 || knots.back().first != 1.0)
            fail(ErrorCode::PreconditionFailed, "piecewise-linear knots must span [0,1]");
        for (std::size_t i = 1; i < knots.size(); ++i)
            if (!(knots[i].first > knots[i - 1].first))
                fail(ErrorCode::PreconditionFailed, "knots must be strictly increasing");
        Observable o;
        o.kind_ = Kind::PiecewiseLinear;
        o.knots_ = std::move(knots);
        o.id_ = id.empty() ? "pl" : std::move(id);
        o.finish();
        return o;
    }

    Kind kind() const { return kind_; }
    const std::string& id() const { return id_; }
    const std::vector<double>& coefficients() const { return poly_.coeffs; }
    const std::vector<std::pair<double, double>>& knots() const { return knots_; }

    double operator()(double x) const {
        if (kind_ == Kind::Polynomial) return poly_(x);
        auto it = std::upper_bound(knots_.begin(), knots_.end(), x,
                                   [](double v, const std::pair<double, double>& k) { return v < k.first; });
        if (it == knots_.begin()) return knots_.front().second;
        if (it == knots_.end()) return knots_.back().second;
        auto a = *(it - 1), b = *it;
        return a.second + (b.second - a.second) * (x - a.first) / (b.first - a.first);
    }

    Interval enclose(Interval x) const {
        if (kind_ == Kind::Polynomial) {
            if (poly_.coeffs.size() == 2) { // affine: exact monotone endpoint evaluation
                Interval a = poly_.enclose(Interval::point(x.lo)), b = poly_.enclose(Interval::point(x.hi));
                return hull(a, b);
            }
            return poly_.enclose(x);
        }
        auto at = [&](double t) {
            auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                                       [](double v, const std::pair<double, double>& k) { return v < k.first; });
            if (it == knots_.begin()) return Interval::point(knots_.front().second);
            if (it == knots_.end()) return Interval::point(knots_.back().second);
            auto a = *(it - 1), b = *it;
            Interval s = (Interval::point(b.second) - Interval::point(a.second)) /
                         (Interval::point(b.first) - Interval::point(a.first));
            return Interval::point(a.second) + s * (Interval::point(t) - Interval::point(a.first));
        };
        Interval r = hull(at(x.lo), at(x.hi));
        for (const auto& k : knots_)
            if (k.first > x.lo && k.first < x.hi) r = hull(r, Interval::point(k.second));
        return r;
    }

    double min_value() const { return min_; }
    double max_value() const { return max_; }
    double lipschitz() const { return lip_; }
    bool is_constant() const { return max_ == min_; }

    // exact affine form a + b x, when available
    bool affine(double& a, double& b) const {
        if (kind_ != Kind::Polynomial || poly_.degree() > 1) return false;
        a = poly_.coeffs[0];
        b = poly_.coeffs.size() > 1 ? poly_.coeffs[1] : 0.0;
        return true;
    }

private:
    void finish() {
        std::vector<double> xs{0.0, 1.0};
        if (kind_ == Kind::PiecewiseLinear) {
            lip_ = 0;
            for (std::size_t i = 1; i < knots_.size(); ++i)
                lip_ = std::max(lip_, std::abs((knots_[i].second - knots_[i - 1].second) /
                                               (knots_[i].first - knots_[i - 1].first)));
            for (const auto& k : knots_) xs.push_back(k.first);
        } else {
            lip_ = 0;
            const int N = 4096;
            double prev = poly_.derivative(0.0);
            for (int i = 0; i <= N; ++i) {
                double t = static_cast<double>(i) / N;
                double d = poly_.derivative(t);
                lip_ = std::max(lip_, std::abs(d));
                if (i > 0 && ((prev < 0) != (d < 0))) {
                    double lo = static_cast<double>(i - 1) / N, hi = t;
                    for (int k = 0; k < 80; ++k) {
                        double m = 0.5 * (lo + hi);
                        if ((poly_.derivative(lo) < 0) == (poly_.derivative(m) < 0)) lo = m; else hi = m;
                    }
                    xs.push_back(0.5 * (lo + hi));
                }
                prev = d;
            }
            if (poly_.degree() >= 2) lip_ *= 1.0 + 1e-6;
        }
        min_ = max_ = (*this)(0.0);
        for (double t : xs) {
            double v = (*this)(t);
            min_ = std::min(min_, v);
            max_ = std::max(max_, v);
        }
        if (kind_ == Kind::Polynomial && poly_.degree() == 0) min_ = max_ = poly_.coeffs[0];
    }

    Kind kind_ = Kind::Polynomial;
    Polynomial poly_;
    std::vector<std::pair<double, double>> knots_;
    std::string id_;
    double min_ = 0, max_ = 0, lip_ = 0;
};

} // namespace ivdyn

#endif
