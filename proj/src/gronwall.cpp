#include "viscomem/gronwall.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "viscomem/csv.hpp"

namespace viscomem {

void GronwallInstance::validate() const {
    const std::size_t n = Lambda.size();
    if (n < 2) throw std::invalid_argument("gronwall instance: need at least two samples");
    if (q1.size() != n || q2.size() != n) {
        throw std::invalid_argument("gronwall instance: Lambda, q1, q2 must share one grid");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("gronwall instance: dt must be positive");
    if (!(eps > 0.0)) throw std::invalid_argument("gronwall instance: eps must be positive");
    if (c1 < 0.0 || c2 < 0.0) throw std::invalid_argument("gronwall instance: c1, c2 must be >= 0");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(Lambda[i]) || !std::isfinite(q1[i]) || !std::isfinite(q2[i])) {
            throw std::invalid_argument("gronwall instance: non-finite sample at index " + std::to_string(i));
        }
        if (q1[i] < 0.0 || q2[i] < 0.0) {
            throw std::invalid_argument("gronwall instance: q1, q2 must be nonnegative (index " +
                                        std::to_string(i) + ")");
        }
    }
}

namespace {

/// Cumulative trapezoid of samples with spacing h.
std::vector<double> cumulative_trapezoid(const std::vector<double>& f, double h) {
    std::vector<double> c(f.size(), 0.0);
    for (std::size_t i = 1; i < f.size(); ++i) c[i] = c[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    return c;
}

/// Cumulative magnitude of the cubic correction to the trapezoid rule: per
/// cell h/24 (|D2 f[i]| + |D2 f[i+1]|), the second differences at both cell
/// ends, with the stencil shifted inside at the ends. Its increments bound the
/// trapezoid error over a window, including cells where a sampled step or kink
/// makes the signed second differences cancel.
std::vector<double> cumulative_correction(const std::vector<double>& f, double h) {
    const std::size_t n = f.size();
    std::vector<double> c(n, 0.0);
    if (n < 4) return c;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t lo = std::clamp<std::size_t>(i, 1, n - 3) - 1;
        const double d = std::abs(f[lo + 2] - 2.0 * f[lo + 1] + f[lo]) +
                         std::abs(f[lo + 3] - 2.0 * f[lo + 2] + f[lo + 1]);
        c[i + 1] = c[i] + h / 24.0 * d;
    }
    return c;
}

struct PairEval {
    const GronwallInstance& inst;
    std::vector<double> I_L, I_q1L, I_q2, C_L, C_q1L, C_q2;
    double floor_scale = 0.0;

    explicit PairEval(const GronwallInstance& in) : inst(in) {
        std::vector<double> q1L(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) q1L[i] = in.q1[i] * in.Lambda[i];
        I_L = cumulative_trapezoid(in.Lambda, in.dt);
        I_q1L = cumulative_trapezoid(q1L, in.dt);
        I_q2 = cumulative_trapezoid(in.q2, in.dt);
        C_L = cumulative_correction(in.Lambda, in.dt);
        C_q1L = cumulative_correction(q1L, in.dt);
        C_q2 = cumulative_correction(in.q2, in.dt);
        for (double x : in.Lambda) floor_scale = std::max(floor_scale, std::abs(x));
        floor_scale = std::max(floor_scale, std::abs(I_q2.back()));
    }

    double slack(std::size_t a, std::size_t b) const {
        const double lhs = inst.Lambda[b] + 2.0 * inst.eps * (I_L[b] - I_L[a]);
        const double rhs = inst.Lambda[a] + (I_q1L[b] - I_q1L[a]) + (I_q2[b] - I_q2[a]);
        return rhs - lhs;
    }

    double tolerance(std::size_t a, std::size_t b) const {
        const double q = 2.0 * inst.eps * (C_L[b] - C_L[a]) + (C_q1L[b] - C_q1L[a]) + (C_q2[b] - C_q2[a]);
        return 3.0 * q + 1e-12 * std::max(1.0, floor_scale);
    }
};

}  // namespace

double minimal_c1(const std::vector<double>& q1, double dt, double eps) {
    const auto I = cumulative_trapezoid(q1, dt);
    double best = 0.0;
    double min_G = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < I.size(); ++i) {
        const double G = I[i] - eps * dt * static_cast<double>(i);
        if (i > 0) best = std::max(best, G - min_G);
        min_G = std::min(min_G, G);
    }
    return best;
}

double window_mass(const std::vector<double>& q2, double dt) {
    const std::size_t n = q2.size();
    if (n == 0) return 0.0;
    const auto I = cumulative_trapezoid(q2, dt);
    // Integral of the piecewise-linear interpolant from t_0 to t_0 + x.
    auto upto = [&](double x) {
        if (x <= 0.0) return 0.0;
        const double cells = x / dt;
        const auto k = static_cast<std::size_t>(std::floor(cells));
        if (k + 1 >= n) return I.back();
        const double th = (cells - static_cast<double>(k)) * dt;
        const double slope = (q2[k + 1] - q2[k]) / dt;
        return I[k] + q2[k] * th + 0.5 * slope * th * th;
    };
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double start = static_cast<double>(i) * dt;
        best = std::max(best, upto(start + 1.0) - I[i]);
    }
    return best;
}

HypothesisReport verify_hypothesis(const GronwallInstance& inst, std::size_t max_full) {
    inst.validate();
    HypothesisReport r;
    const std::size_t n = inst.size();
    const PairEval ev(inst);

    std::vector<std::size_t> idx;
    if (n <= max_full) {
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    } else {
        r.subsampled = true;
        const std::size_t m = std::max<std::size_t>(2, max_full);
        for (std::size_t k = 0; k < m; ++k) {
            idx.push_back(static_cast<std::size_t>(
                std::llround(static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(m - 1))));
        }
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
    }

    r.worst_slack = std::numeric_limits<double>::infinity();
    bool ok = true;
    auto visit = [&](std::size_t a, std::size_t b) {
        const double s = ev.slack(a, b);
        const double tol = ev.tolerance(a, b);
        ++r.pairs_checked;
        if (s < r.worst_slack) {
            r.worst_slack = s;
            r.worst_a = inst.t(a);
            r.worst_b = inst.t(b);
            r.tolerance = tol;
        }
        if (s < -tol) ok = false;
    };
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = i + 1; j < idx.size(); ++j) visit(idx[i], idx[j]);
    }
    if (r.subsampled) {
        for (std::size_t i = 0; i + 1 < n; ++i) visit(i, i + 1);
    }
    r.integral_ok = ok;
    if (!ok) {
        std::ostringstream msg;
        msg << "integral inequality fails: worst slack " << r.worst_slack << " on [" << r.worst_a
            << ", " << r.worst_b << "]";
        r.failures.push_back(msg.str());
    }

    r.q1_budget_slack = inst.c1 - minimal_c1(inst.q1, inst.dt, inst.eps);
    r.q1_ok = r.q1_budget_slack >= -1e-12 * std::max(1.0, inst.c1);
    if (!r.q1_ok) {
        std::ostringstream msg;
        msg << "q1 budget fails: int q1 exceeds eps (b - a) + c1 by " << -r.q1_budget_slack;
        r.failures.push_back(msg.str());
    }
    r.q2_window_mass = window_mass(inst.q2, inst.dt);
    r.q2_ok = r.q2_window_mass <= inst.c2 + 1e-12 * std::max(1.0, inst.c2);
    if (!r.q2_ok) {
        std::ostringstream msg;
        msg << "q2 window mass " << r.q2_window_mass << " exceeds c2 = " << inst.c2;
        r.failures.push_back(msg.str());
    }
    return r;
}

double gronwall_bound(const GronwallInstance& inst, double t) {
    const double e1 = std::exp(inst.c1);
    return e1 * std::abs(inst.Lambda.front()) * std::exp(-inst.eps * (t - inst.tau)) +
           inst.c2 * e1 * std::exp(inst.eps) / (1.0 - std::exp(-inst.eps));
}

ConclusionReport check_conclusion(const GronwallInstance& inst, const HypothesisReport& hyp) {
    ConclusionReport r;
    if (!hyp.holds()) {
        r.refused = true;
        r.reason = "hypothesis not verified";
        for (const auto& f : hyp.failures) r.reason += "; " + f;
        return r;
    }
    r.max_ratio = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inst.size(); ++i) {
        const double t = inst.t(i);
        const double bound = gronwall_bound(inst, t);
        const double L = inst.Lambda[i];
        double ratio = 0.0;
        if (bound > 0.0) {
            ratio = L / bound;
        } else if (L > 0.0) {
            ratio = std::numeric_limits<double>::infinity();
        }
        if (ratio > r.max_ratio) {
            r.max_ratio = ratio;
            r.worst_t = t;
        }
        if (L > bound + 1e-12 * std::max(1.0, std::abs(bound))) ++r.violations;
    }
    return r;
}

ConclusionReport check_conclusion(const GronwallInstance& inst) {
    return check_conclusion(inst, verify_hypothesis(inst));
}

nlohmann::json to_json(const HypothesisReport& r) {
    return {{"worst_slack", r.worst_slack},
            {"worst_window", {r.worst_a, r.worst_b}},
            {"tolerance", r.tolerance},
            {"q1_budget_slack", r.q1_budget_slack},
            {"q2_window_mass", r.q2_window_mass},
            {"pairs_checked", r.pairs_checked},
            {"subsampled", r.subsampled},
            {"integral_ok", r.integral_ok},
            {"q1_ok", r.q1_ok},
            {"q2_ok", r.q2_ok},
            {"holds", r.holds()},
            {"failures", r.failures}};
}

nlohmann::json to_json(const ConclusionReport& r) {
    nlohmann::json j{{"refused", r.refused}, {"violations", r.violations}, {"holds", r.holds()}};
    if (r.refused) {
        j["reason"] = r.reason;
    } else {
        j["max_ratio"] = r.max_ratio;
        j["worst_t"] = r.worst_t;
    }
    return j;
}

void write_instance(std::ostream& csv, std::ostream& sidecar, const GronwallInstance& inst) {
    CsvWriter w(csv);
    w.row({"t", "Lambda", "q1", "q2"});
    for (std::size_t i = 0; i < inst.size(); ++i) {
        w.row_numbers({inst.t(i), inst.Lambda[i], inst.q1[i], inst.q2[i]});
    }
    const nlohmann::json j{{"tau", inst.tau}, {"dt", inst.dt}, {"eps", inst.eps}, {"c1", inst.c1}, {"c2", inst.c2}};
    sidecar << j.dump(2) << '\n';
}

GronwallInstance read_instance(std::istream& csv, std::istream& sidecar) {
    nlohmann::json j;
    try {
        sidecar >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("gronwall sidecar: ") + e.what());
    }
    GronwallInstance inst;
    inst.eps = j.at("eps").get<double>();
    inst.c1 = j.value("c1", 0.0);
    inst.c2 = j.value("c2", 0.0);
    const auto table = read_csv(csv);
    if (table.header != std::vector<std::string>{"t", "Lambda", "q1", "q2"}) {
        throw std::invalid_argument("gronwall csv: header must be t,Lambda,q1,q2");
    }
    std::vector<double> t;
    for (const auto& row : table.rows) {
        t.push_back(std::stod(row.at(0)));
        inst.Lambda.push_back(std::stod(row.at(1)));
        inst.q1.push_back(std::stod(row.at(2)));
        inst.q2.push_back(std::stod(row.at(3)));
    }
    if (t.size() < 2) throw std::invalid_argument("gronwall csv: need at least two rows");
    inst.tau = j.value("tau", t.front());
    inst.dt = j.value("dt", (t.back() - t.front()) / static_cast<double>(t.size() - 1));
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (std::abs(t[i] - inst.t(i)) > 1e-9 * std::max(1.0, std::abs(t[i]))) {
            throw std::invalid_argument("gronwall csv: time column is not the uniform grid tau + i dt");
        }
    }
    inst.validate();
    return inst;
}

GronwallInstance load_instance(const std::string& csv_path, const std::string& sidecar_path) {
    std::ifstream csv(csv_path), side(sidecar_path);
    if (!csv) throw std::invalid_argument("cannot open " + csv_path);
    if (!side) throw std::invalid_argument("cannot open " + sidecar_path);
    return read_instance(csv, side);
}

}  // namespace viscomem
