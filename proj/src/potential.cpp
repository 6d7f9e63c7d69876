#include "geophase/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "geophase/errors.hpp"

namespace geophase {

namespace {

void require_finite(const ControlVector& R) {
    for (double v : R)
        if (!std::isfinite(v)) throw numerical_error("control vector has a non-finite entry");
}

double resolve(const PiecewiseConstant::Bound& b, const ControlVector& R) {
    if (b.control < 0) return b.base;
    if (static_cast<size_t>(b.control) >= R.size())
        throw numerical_error("piecewise-constant binding refers to a missing control component");
    return b.base + R[static_cast<size_t>(b.control)];
}

// Integral of the unit triangle kernel centred at xc with half-width h over
// the interval [lo, hi), as a fraction of the kernel mass.
double triangle_mass(double lo, double hi, double xc, double h) {
    const double alpha = std::clamp((std::max(lo, xc - h) - xc) / h, -1.0, 1.0);
    const double beta = std::clamp((std::min(hi, xc + h) - xc) / h, -1.0, 1.0);
    if (beta <= alpha) return 0.0;
    auto F = [](double t) { return t - 0.5 * t * std::abs(t); };
    return F(beta) - F(alpha);
}

struct Segment {
    double lo, hi, v;
};

// Resolved step layout for the two step families.
std::vector<Segment> step_layout(const PotentialModel& model, const ControlVector& R,
                                 double D) {
    std::vector<Segment> segs;
    if (model.family == PotentialModel::Family::structured_well) {
        const double a = model.sw.a;
        const double L = R[0];
        segs.push_back({0.0, 0.5 * a, 0.0});
        segs.push_back({0.5 * a, 0.5 * a + L, model.sw.V0});
        segs.push_back({0.5 * a + L, D, 0.0});
    } else {
        const auto& pc = model.pc;
        double prev = 0.0;
        for (size_t s = 0; s < pc.values.size(); ++s) {
            const double hi = (s < pc.edges.size()) ? resolve(pc.edges[s], R) : D;
            if (hi < prev - 1e-15 || hi > D + 1e-15)
                throw numerical_error("piecewise-constant edges must be ascending within [0, D]");
            segs.push_back({prev, hi, resolve(pc.values[s], R)});
            prev = hi;
        }
    }
    return segs;
}

}  // namespace

PotentialModel make_structured_well(double a) {
    if (!(a > 0.0)) throw config_error("structured well requires a > 0");
    PotentialModel m;
    m.family = PotentialModel::Family::structured_well;
    m.sw.a = a;
    m.sw.V0 = 9.0 * std::numbers::pi * std::numbers::pi / (a * a);
    return m;
}

PotentialModel make_piecewise_constant(PiecewiseConstant pc) {
    if (pc.values.size() != pc.edges.size() + 1)
        throw config_error("piecewise-constant family needs one value per segment "
                           "(edges + 1 values)");
    PotentialModel m;
    m.family = PotentialModel::Family::piecewise_constant;
    m.pc = std::move(pc);
    return m;
}

PotentialModel make_tabulated(Tabulated tab) {
    if (tab.x.size() < 2 || tab.x.size() != tab.V.size())
        throw config_error("tabulated potential needs at least two (x, V) samples");
    if (tab.x.front() != 0.0)
        throw config_error("tabulated potential must start at x = 0");
    for (size_t i = 1; i < tab.x.size(); ++i)
        if (!(tab.x[i] > tab.x[i - 1]))
            throw config_error("tabulated abscissae must be strictly increasing");
    PotentialModel m;
    m.family = PotentialModel::Family::tabulated;
    m.tab = std::move(tab);
    return m;
}

double domain_width(const PotentialModel& model, const ControlVector& R) {
    require_finite(R);
    switch (model.family) {
        case PotentialModel::Family::structured_well: {
            if (R.size() != 2)
                throw numerical_error("structured well expects a control vector (L, w)");
            if (R[0] < 0.0 || R[1] < 0.0)
                throw numerical_error("structured well requires L >= 0 and w >= 0");
            return model.sw.a + R[0] + R[1];
        }
        case PotentialModel::Family::piecewise_constant: {
            const double D = resolve(model.pc.domain, R);
            if (!(D > 0.0)) throw numerical_error("piecewise-constant domain width must be positive");
            return D;
        }
        case PotentialModel::Family::tabulated:
            return model.tab.x.back();
    }
    throw numerical_error("unknown potential family");
}

double evaluate_potential(const PotentialModel& model, const ControlVector& R, double x) {
    const double D = domain_width(model, R);
    if (!(x >= 0.0 && x <= D))
        throw numerical_error("evaluate_potential: x outside the domain [0, D]");
    if (model.family == PotentialModel::Family::tabulated) {
        const auto& t = model.tab;
        const auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
        if (it == t.x.begin()) return t.V.front();
        if (it == t.x.end()) return t.V.back();
        const size_t j = static_cast<size_t>(it - t.x.begin());
        const double f = (x - t.x[j - 1]) / (t.x[j] - t.x[j - 1]);
        return t.V[j - 1] + f * (t.V[j] - t.V[j - 1]);
    }
    // Left-closed/right-open step convention: the value exactly at an edge is
    // the value of the segment beginning there.
    double value = 0.0;
    for (const Segment& s : step_layout(model, R, D))
        if (x >= s.lo && (x < s.hi || (s.hi == D && x == D))) {
            value = s.v;
            if (x < s.hi) return value;
        }
    return value;
}

std::vector<double> grid_potential(const PotentialModel& model, const ControlVector& R, int N) {
    const double D = domain_width(model, R);
    if (N < 1) throw numerical_error("grid_potential: N must be positive");
    const double h = D / (N + 1);
    std::vector<double> v(static_cast<size_t>(N), 0.0);
    if (model.family == PotentialModel::Family::tabulated) {
        for (int i = 1; i <= N; ++i)
            v[static_cast<size_t>(i - 1)] = evaluate_potential(model, R, i * h);
        return v;
    }
    for (const Segment& s : step_layout(model, R, D)) {
        if (s.v == 0.0 || s.hi <= s.lo) continue;
        // Only nodes whose kernel support overlaps the segment contribute.
        const int i_lo = std::max(1, static_cast<int>(std::floor(s.lo / h)) - 1);
        const int i_hi = std::min(N, static_cast<int>(std::ceil(s.hi / h)) + 1);
        for (int i = i_lo; i <= i_hi; ++i)
            v[static_cast<size_t>(i - 1)] += s.v * triangle_mass(s.lo, s.hi, i * h, h);
    }
    return v;
}

ControlPath build_path(const RectangleSpec& spec) {
    if (spec.samples_per_edge < 1)
        throw config_error("rectangle path needs at least 1 sample per edge");
    if (!(spec.y_length > 0.0))
        throw config_error("rectangle path needs a positive y extent");
    const ControlVector corners[4] = {
        {spec.L_in, spec.w_in},
        {spec.L_in, spec.w_fin},
        {spec.L_fin, spec.w_fin},
        {spec.L_fin, spec.w_in},
    };
    const int n = spec.samples_per_edge;
    ControlPath path;
    path.closed = true;
    path.samples.reserve(static_cast<size_t>(4 * n + 1));
    for (int k = 0; k < 4 * n; ++k) {
        const int edge = k / n;
        const double t = static_cast<double>(k % n) / n;
        const ControlVector& c0 = corners[edge];
        const ControlVector& c1 = corners[(edge + 1) % 4];
        PathSample s;
        s.y = spec.y_start + spec.y_length * (static_cast<double>(k) / (4 * n));
        s.R = {c0[0] + t * (c1[0] - c0[0]), c0[1] + t * (c1[1] - c0[1])};
        path.samples.push_back(std::move(s));
    }
    PathSample last;
    last.y = spec.y_start + spec.y_length;
    last.R = corners[0];
    path.samples.push_back(std::move(last));
    return path;
}

ControlPath build_path(std::vector<PathSample> samples, bool closed) {
    if (samples.size() < 2)
        throw config_error("a control path needs at least 2 samples");
    const size_t dim = samples.front().R.size();
    for (size_t k = 0; k < samples.size(); ++k) {
        if (samples[k].R.size() != dim)
            throw config_error("control path samples must share one control dimension");
        require_finite(samples[k].R);
        if (!std::isfinite(samples[k].y))
            throw config_error("control path ordinates must be finite");
        if (k > 0 && !(samples[k].y > samples[k - 1].y))
            throw config_error("control path ordinates must be strictly increasing");
    }
    if (closed && samples.front().R != samples.back().R)
        throw config_error("a closed path must repeat its first control point exactly");
    ControlPath path;
    path.samples = std::move(samples);
    path.closed = closed;
    return path;
}

ControlPath reparameterize(const ControlPath& path, const std::function<double(double)>& g) {
    ControlPath out = path;
    for (PathSample& s : out.samples) s.y = g(s.y);
    for (size_t k = 0; k < out.samples.size(); ++k) {
        if (!std::isfinite(out.samples[k].y))
            throw config_error("reparameterize: map produced a non-finite ordinate");
        if (k > 0 && !(out.samples[k].y > out.samples[k - 1].y))
            throw config_error("reparameterize: map must be strictly increasing");
    }
    return out;
}

}  // namespace geophase
