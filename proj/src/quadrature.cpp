#include "bq/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "bq/errors.hpp"

namespace bq {

namespace {

// Kronrod 15-point abscissae/weights with the embedded 7-point Gauss rule.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

enum class Map { identity, upper_tail, lower_tail };

// An interval in its native coordinate: x itself for identity maps, u in
// [0, 1) for the tails with x = base +/- scale*u/(1-u).
struct Segment {
    double a = 0.0;
    double b = 0.0;
    Map map = Map::identity;
    double base = 0.0;
    double scale = 1.0;
};

template <std::size_t D>
struct Piece {
    Segment seg;
    std::array<double, D> value{};
    std::array<double, D> error{};
    double weight = 0.0;
    bool frozen = false;
};

template <std::size_t D>
struct PieceOrder {
    bool operator()(const Piece<D>& l, const Piece<D>& r) const { return l.weight < r.weight; }
};

inline double to_x(const Segment& s, double t, double& jac) {
    switch (s.map) {
        case Map::identity: jac = 1.0; return t;
        case Map::upper_tail: {
            const double one_minus = 1.0 - t;
            jac = s.scale / (one_minus * one_minus);
            return s.base + s.scale * t / one_minus;
        }
        case Map::lower_tail: {
            const double one_minus = 1.0 - t;
            jac = s.scale / (one_minus * one_minus);
            return s.base - s.scale * t / one_minus;
        }
    }
    jac = 1.0;
    return t;
}

template <std::size_t D, class F>
void apply_rule(Piece<D>& p, F& f, std::size_t& evals) {
    const double centre = 0.5 * (p.seg.a + p.seg.b);
    const double half = 0.5 * (p.seg.b - p.seg.a);
    std::array<double, D> kronrod{};
    std::array<double, D> gauss{};
    auto eval = [&](double t) {
        double jac = 1.0;
        const double x = to_x(p.seg, t, jac);
        auto v = f(x);
        ++evals;
        for (std::size_t d = 0; d < D; ++d) {
            v[d] = std::isfinite(v[d]) ? v[d] * jac : 0.0;
        }
        return v;
    };
    const auto fc = eval(centre);
    for (std::size_t d = 0; d < D; ++d) {
        kronrod[d] = kWgk[7] * fc[d];
        gauss[d] = kWg[3] * fc[d];
    }
    for (std::size_t j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const auto f1 = eval(centre - dx);
        const auto f2 = eval(centre + dx);
        for (std::size_t d = 0; d < D; ++d) {
            kronrod[d] += kWgk[j] * (f1[d] + f2[d]);
            if (j % 2 == 1) gauss[d] += kWg[j / 2] * (f1[d] + f2[d]);
        }
    }
    for (std::size_t d = 0; d < D; ++d) {
        p.value[d] = kronrod[d] * half;
        p.error[d] = std::abs((kronrod[d] - gauss[d]) * half);
    }
    // Below this width the rule cannot resolve anything further.
    const double scale = std::max({std::abs(p.seg.a), std::abs(p.seg.b), 1e-300});
    p.frozen = (p.seg.b - p.seg.a) <= 64.0 * 0x1.0p-52 * scale;
}

template <std::size_t D>
struct EngineResult {
    std::array<double, D> value{};
    std::array<double, D> error{};
    std::size_t evaluations = 0;
    bool converged = false;
};

// Global adaptive bisection.  `weight(piece, totals)` ranks pieces; `done(value,
// error)` decides convergence of the totals.
template <std::size_t D, class F, class Weight, class Done>
EngineResult<D> adapt(F&& f, const std::vector<Segment>& segments, std::size_t max_intervals,
                      Weight&& weight, Done&& done) {
    std::vector<Piece<D>> heap;
    std::size_t evals = 0;
    std::array<double, D> frozen_value{};
    std::array<double, D> frozen_error{};
    auto totals = [&](std::array<double, D>& v, std::array<double, D>& e) {
        v = frozen_value;
        e = frozen_error;
        for (const auto& p : heap) {
            for (std::size_t d = 0; d < D; ++d) {
                v[d] += p.value[d];
                e[d] += p.error[d];
            }
        }
    };
    for (const auto& s : segments) {
        if (!(s.b > s.a)) continue;
        Piece<D> p;
        p.seg = s;
        apply_rule(p, f, evals);
        heap.push_back(p);
    }
    std::array<double, D> value{};
    std::array<double, D> error{};
    totals(value, error);
    for (auto& p : heap) p.weight = weight(p, value);
    std::make_heap(heap.begin(), heap.end(), PieceOrder<D>{});

    bool converged = done(value, error);
    while (!converged && !heap.empty() && heap.size() < max_intervals) {
        std::pop_heap(heap.begin(), heap.end(), PieceOrder<D>{});
        Piece<D> worst = heap.back();
        heap.pop_back();
        if (worst.frozen) {
            for (std::size_t d = 0; d < D; ++d) {
                frozen_value[d] += worst.value[d];
                frozen_error[d] += worst.error[d];
            }
        } else {
            const double mid = 0.5 * (worst.seg.a + worst.seg.b);
            Piece<D> left;
            Piece<D> right;
            left.seg = worst.seg;
            left.seg.b = mid;
            right.seg = worst.seg;
            right.seg.a = mid;
            apply_rule(left, f, evals);
            apply_rule(right, f, evals);
            for (auto* child : {&left, &right}) {
                heap.push_back(*child);
                std::push_heap(heap.begin(), heap.end(), PieceOrder<D>{});
            }
        }
        totals(value, error);
        // Re-rank lazily: weights depend on the totals only through a scale.
        for (auto& p : heap) p.weight = weight(p, value);
        std::make_heap(heap.begin(), heap.end(), PieceOrder<D>{});
        converged = done(value, error);
    }
    EngineResult<D> out;
    out.value = value;
    out.error = error;
    out.evaluations = evals;
    out.converged = converged;
    return out;
}

std::vector<Segment> segments_from_breakpoints(std::span<const double> bp) {
    std::vector<Segment> segs;
    for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
        const double a = bp[i];
        const double b = bp[i + 1];
        require(a < b, ErrorKind::invalid_input, "breakpoints must be strictly increasing");
        const bool lo_inf = std::isinf(a);
        const bool hi_inf = std::isinf(b);
        if (!lo_inf && !hi_inf) {
            segs.push_back({a, b, Map::identity, 0.0, 1.0});
        } else if (!lo_inf && hi_inf) {
            segs.push_back({0.0, 1.0, Map::upper_tail, a, std::max(1.0, std::abs(a))});
        } else if (lo_inf && !hi_inf) {
            segs.push_back({0.0, 1.0, Map::lower_tail, b, std::max(1.0, std::abs(b))});
        } else {
            segs.push_back({0.0, 1.0, Map::lower_tail, 0.0, 1.0});
            segs.push_back({0.0, 1.0, Map::upper_tail, 0.0, 1.0});
        }
    }
    return segs;
}

}  // namespace

QuadResult integrate_adaptive(const RealFn& f, std::span<const double> breakpoints, double abs_tol,
                              double rel_tol, std::size_t max_intervals) {
    require(breakpoints.size() >= 2, ErrorKind::invalid_input, "need at least two breakpoints");
    require(abs_tol >= 0.0 && rel_tol >= 0.0 && (abs_tol > 0.0 || rel_tol > 0.0), ErrorKind::invalid_input,
            "tolerances must be >= 0 and not both zero");
    const auto segs = segments_from_breakpoints(breakpoints);
    auto fn = [&](double x) { return std::array<double, 1>{f(x)}; };
    auto weight = [](const Piece<1>& p, const std::array<double, 1>&) { return p.error[0]; };
    auto done = [&](const std::array<double, 1>& v, const std::array<double, 1>& e) {
        return e[0] <= std::max(abs_tol, rel_tol * std::abs(v[0]));
    };
    const auto r = adapt<1>(fn, segs, max_intervals, weight, done);
    return QuadResult{r.value[0], r.error[0], r.evaluations, r.converged};
}

QuadResult integrate_adaptive(const RealFn& f, double a, double b, double abs_tol, double rel_tol,
                              std::size_t max_intervals) {
    require(a < b, ErrorKind::invalid_input, "integration range must satisfy a < b");
    const std::array<double, 2> bp{a, b};
    return integrate_adaptive(f, bp, abs_tol, rel_tol, max_intervals);
}

namespace {

constexpr std::size_t kScoutPoints = 257;

struct Scout {
    bool log_scale = false;
    std::vector<double> y;  // grid coordinate (log x or x)
};

double from_y(const Scout& s, double y) { return s.log_scale ? std::exp(y) : y; }

Scout make_scout(Bracket domain, const std::optional<Bracket>& hint) {
    Bracket r = hint.value_or(domain);
    Scout s;
    if (r.lo >= 0.0) {
        s.log_scale = true;
        double lo = r.lo > 0.0 ? r.lo : (std::isfinite(r.hi) ? r.hi * 1e-12 : 1e-12);
        double hi = std::isfinite(r.hi) ? r.hi : std::max(1e12, lo * 1e24);
        require(lo < hi, ErrorKind::invalid_input, "empty scouting range");
        const double a = std::log(lo);
        const double b = std::log(hi);
        s.y.resize(kScoutPoints);
        for (std::size_t i = 0; i < kScoutPoints; ++i) {
            s.y[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(kScoutPoints - 1);
        }
    } else {
        require(std::isfinite(r.lo) && std::isfinite(r.hi), ErrorKind::invalid_input,
                "brackets reaching into negative values must be finite");
        s.y.resize(kScoutPoints);
        for (std::size_t i = 0; i < kScoutPoints; ++i) {
            s.y[i] = r.lo + (r.hi - r.lo) * static_cast<double>(i) /
                                static_cast<double>(kScoutPoints - 1);
        }
        // keep the scouting points strictly inside an open bracket
        s.y.front() = r.lo + 1e-9 * (r.hi - r.lo);
        s.y.back() = r.hi - 1e-9 * (r.hi - r.lo);
    }
    return s;
}

double safe_log_f(const RealFn& log_f, double x) {
    const double v = log_f(x);
    return std::isnan(v) ? -kInf : v;
}

// Golden-section maximization of log_f over [ya, yb] in grid coordinates.
double refine_mode(const RealFn& log_f, const Scout& s, double ya, double yb) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = ya;
    double b = yb;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = safe_log_f(log_f, from_y(s, c));
    double fd = safe_log_f(log_f, from_y(s, d));
    for (int it = 0; it < 100 && (b - a) > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = safe_log_f(log_f, from_y(s, c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = safe_log_f(log_f, from_y(s, d));
        }
    }
    return from_y(s, fc >= fd ? c : d);
}

// Distance from the mode at which log_f has dropped by 1/2, searched towards
// `limit`; returns |limit - mode| when the drop is not reached.
double half_width(const RealFn& log_f, double mode, double peak, double limit) {
    const double span = std::abs(limit - mode);
    if (!(span > 0.0)) return 0.0;
    const double dir = limit > mode ? 1.0 : -1.0;
    if (safe_log_f(log_f, limit) > peak - 0.5) return span;
    double lo = 0.0;
    double hi = span;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * span; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (safe_log_f(log_f, mode + dir * mid) > peak - 0.5) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return hi;
}

}  // namespace

LogDensityIntegral integrate_log_density(const RealFn& log_f, const RealFn& g, Bracket domain,
                                         double ratio_tol, const LogDensityOptions& opts) {
    require(domain.lo < domain.hi, ErrorKind::invalid_input, "bracket must satisfy lo < hi");
    require(ratio_tol > 0.0 && opts.z_rel_tol > 0.0, ErrorKind::invalid_input,
            "tolerances must be > 0");

    const Scout scout = make_scout(domain, opts.scout);
    std::size_t best = scout.y.size();
    double best_val = -kInf;
    for (std::size_t i = 0; i < scout.y.size(); ++i) {
        const double x = from_y(scout, scout.y[i]);
        if (x <= domain.lo || x >= domain.hi) continue;
        const double v = safe_log_f(log_f, x);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    require(best < scout.y.size() && std::isfinite(best_val), ErrorKind::degenerate_density,
            "log-density is -inf on the whole scouting grid");

    const double ya = scout.y[best > 0 ? best - 1 : best];
    const double yb = scout.y[best + 1 < scout.y.size() ? best + 1 : best];
    double mode = from_y(scout, scout.y[best]);
    if (yb > ya) {
        const double refined = refine_mode(log_f, scout, ya, yb);
        if (safe_log_f(log_f, refined) >= best_val) mode = refined;
    }
    mode = std::clamp(mode, std::nextafter(domain.lo, kInf), std::nextafter(domain.hi, -kInf));
    const double peak = safe_log_f(log_f, mode);

    const double left_limit = std::isfinite(domain.lo) ? domain.lo : mode - 1e6 * (1.0 + std::abs(mode));
    const double right_limit = std::isfinite(domain.hi) ? domain.hi : mode + 1e6 * (1.0 + std::abs(mode));
    double width = std::min(half_width(log_f, mode, peak, left_limit),
                            half_width(log_f, mode, peak, right_limit));
    if (!(width > 0.0)) width = 1e-8 * std::max(1.0, std::abs(mode));

    // Breakpoints at mode +/- width * 4^k until the density is negligible.
    std::vector<double> bp{mode};
    for (int side : {-1, 1}) {
        for (int k = 0; k < 40; ++k) {
            const double x = mode + side * width * std::pow(4.0, k);
            if (x <= domain.lo || x >= domain.hi) break;
            bp.push_back(x);
            if (safe_log_f(log_f, x) < peak - 750.0) break;
        }
    }
    bp.push_back(domain.lo);
    bp.push_back(domain.hi);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    const auto segs = segments_from_breakpoints(bp);

    const bool has_g = static_cast<bool>(g);
    auto fn = [&](double x) {
        if (!(x > domain.lo && x < domain.hi)) return std::array<double, 2>{0.0, 0.0};
        const double lf = safe_log_f(log_f, x);
        const double w = std::exp(lf - peak);
        if (w == 0.0) return std::array<double, 2>{0.0, 0.0};
        return std::array<double, 2>{w, has_g ? w * g(x) : w};
    };
    const double z_tol = opts.z_rel_tol;
    auto ratio_of = [](const std::array<double, 2>& v) { return v[0] != 0.0 ? v[1] / v[0] : 0.0; };
    auto weight = [&](const Piece<2>& p, const std::array<double, 2>& totals) {
        const double r = std::abs(ratio_of(totals));
        return p.error[0] / z_tol + (p.error[1] + r * p.error[0]) / ratio_tol;
    };
    auto done = [&](const std::array<double, 2>& v, const std::array<double, 2>& e) {
        if (!(v[0] > 0.0)) return false;
        const double r = std::abs(ratio_of(v));
        return e[0] <= z_tol * v[0] && (e[1] + r * e[0]) <= ratio_tol * v[0];
    };
    const auto res = adapt<2>(fn, segs, opts.max_intervals, weight, done);
    require(res.value[0] > 0.0, ErrorKind::degenerate_density,
            "density integrates to zero after max-log shift");

    LogDensityIntegral out;
    out.log_z = std::log(res.value[0]) + peak;
    out.z_rel_error = res.error[0] / res.value[0];
    out.ratio = ratio_of(res.value);
    out.ratio_error = (res.error[1] + std::abs(out.ratio) * res.error[0]) / res.value[0];
    out.mode = mode;
    out.log_peak = peak;
    out.evaluations = res.evaluations;
    out.converged = res.converged;
    return out;
}

QuadResult expectation_1d(const RealFn& g, const RealFn& log_density_unnormalized, Bracket bracket,
                          double tol) {
    const auto r = integrate_log_density(log_density_unnormalized, g, bracket, tol);
    return QuadResult{r.ratio, r.ratio_error, r.evaluations, r.converged};
}

}  // namespace bq
