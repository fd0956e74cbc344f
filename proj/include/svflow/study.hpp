#pragma once

#include "svflow/pstokes.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace svf {

struct ConvergenceRecord {
    std::string method;  // "h_version" or "p_version"
    double p = 2.0;
    int N = 4;
    int level = 0;
    long long M = 0;  // dim V^N_Gamma + dim Q^{N-1}_Gamma
    double e_u_w1p = 0.0;
    double e_S = 0.0;
    double e_F = 0.0;
    double e_q = 0.0;
    double wall_time_s = 0.0;
    std::string flag = "ok";
};

struct StudyConfig {
    std::string method = "h";  // "h" or "p"
    std::string solution = "smooth";
    double p = 2.0;
    double nu = 1.0;
    int N = 4;
    int N_max = 12;
    int levels = 4;
    int base_refinements = 0;
    int max_newton_iters = 50;
    double eps_reg = 1e-10;
    int quad_bump = 0;
    unsigned seed = 42;
};

struct RateFit {
    double gamma = 0.0;
    int points_used = 0;
    double residual = 0.0;  // RMS of log-log fit residuals
};

inline std::vector<ConvergenceRecord> run_convergence_study(const StudyConfig& cfg)
{
    if (cfg.method != "h" && cfg.method != "p")
        throw std::invalid_argument("study: method must be h or p");
    std::vector<ConvergenceRecord> out;

    Mesh base = unit_square_initial();
    for (int i = 0; i < cfg.base_refinements; ++i) base = uniform_refine(base);

    struct Case {
        Mesh mesh;
        int N;
        int level;
    };
    std::vector<Case> cases;
    if (cfg.method == "h") {
        Mesh m = base;
        for (int lvl = cfg.base_refinements; lvl <= cfg.levels; ++lvl) {
            cases.push_back({m, cfg.N, lvl});
            if (lvl < cfg.levels) m = uniform_refine(m);
        }
    } else {
        for (int N = cfg.N; N <= cfg.N_max; ++N)
            cases.push_back({base, N, cfg.base_refinements});
    }

    for (const auto& c : cases) {
        ConvergenceRecord rec;
        rec.method = (cfg.method == "h") ? "h_version" : "p_version";
        rec.p = cfg.p;
        rec.N = c.N;
        rec.level = c.level;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const PowerLaw law(cfg.p, cfg.nu, cfg.eps_reg);
            const ManufacturedSolution sol = manufactured(cfg.solution, cfg.p);
            VelocitySpace V(c.mesh, c.N, true);
            PressureSpace Q(c.mesh, c.N - 1, c.mesh.enclosed());
            rec.M = static_cast<long long>(V.dim()) + Q.dim();
            SolverConfig scfg;
            scfg.max_iters = cfg.max_newton_iters;
            scfg.quad_bump = cfg.quad_bump;
            const PStokesSolution s = newton_solve(V, Q, sol, law, scfg);
            const ErrorMetrics e = error_metrics(s, sol, law);
            rec.e_u_w1p = e.e_u_w1p;
            rec.e_S = e.e_S;
            rec.e_F = e.e_F;
            rec.e_q = e.e_q;
            if (e.absolute) rec.flag = "absolute";
        } catch (const NewtonDivergenceError&) {
            rec.flag = "diverged";
        } catch (const SingularMatrixError&) {
            rec.flag = "singular";
        }
        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        out.push_back(std::move(rec));
    }
    return out;
}

inline double record_metric(const ConvergenceRecord& r, const std::string& name)
{
    if (name == "e_u_w1p") return r.e_u_w1p;
    if (name == "e_S") return r.e_S;
    if (name == "e_F") return r.e_F;
    if (name == "e_q") return r.e_q;
    throw std::invalid_argument("unknown metric: " + name);
}

/// Least squares of log(error) against log(M) over the last `window` usable
/// records; gamma = -2 * slope (error ~ M^{-gamma/2}). window <= 0 uses all.
inline RateFit fit_rate(const std::vector<ConvergenceRecord>& records,
                        const std::string& metric, int window = 0)
{
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : records) {
        if (r.flag != "ok") continue;
        const double e = record_metric(r, metric);
        if (!(e > 0.0) || r.M <= 0) continue;
        pts.emplace_back(std::log(static_cast<double>(r.M)), std::log(e));
    }
    if (window > 0 && static_cast<int>(pts.size()) > window)
        pts.erase(pts.begin(), pts.end() - window);
    if (pts.size() < 3)
        throw std::runtime_error("fit_rate: need at least 3 usable records");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(pts.size());
    for (const auto& [x, y] : pts) {
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    double ss = 0.0;
    for (const auto& [x, y] : pts) {
        const double d = y - (slope * x + icept);
        ss += d * d;
    }
    RateFit f;
    f.gamma = -2.0 * slope;
    f.points_used = static_cast<int>(pts.size());
    f.residual = std::sqrt(ss / n);
    return f;
}

/// Shortest round-trip decimal formatting.
inline std::string format_double(double v)
{
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline constexpr const char* kCsvHeader =
    "method,p,N,level,M,e_u_w1p,e_S,e_F,e_q,wall_time_s,flag";

inline void emit_csv(const std::vector<ConvergenceRecord>& records,
                     std::ostream& os)
{
    if (records.empty())
        throw std::invalid_argument("emit_csv: no records");
    os << kCsvHeader << "\n";
    for (const auto& r : records) {
        os << r.method << ',' << format_double(r.p) << ',' << r.N << ','
           << r.level << ',' << r.M << ',' << format_double(r.e_u_w1p) << ','
           << format_double(r.e_S) << ',' << format_double(r.e_F) << ','
           << format_double(r.e_q) << ',' << format_double(r.wall_time_s) << ','
           << r.flag << "\n";
    }
}

inline void emit_csv(const std::vector<ConvergenceRecord>& records,
                     const std::string& path)
{
    if (records.empty())
        throw std::invalid_argument("emit_csv: no records");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_csv: cannot open " + path);
    emit_csv(records, os);
}

inline std::vector<ConvergenceRecord> parse_csv(std::istream& is)
{
    std::vector<ConvergenceRecord> out;
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader)
        throw std::runtime_error("parse_csv: bad header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        ConvergenceRecord r;
        auto next = [&]() {
            if (!std::getline(ss, tok, ','))
                throw std::runtime_error("parse_csv: short row");
            return tok;
        };
        r.method = next();
        r.p = std::stod(next());
        r.N = std::stoi(next());
        r.level = std::stoi(next());
        r.M = std::stoll(next());
        r.e_u_w1p = std::stod(next());
        r.e_S = std::stod(next());
        r.e_F = std::stod(next());
        r.e_q = std::stod(next());
        r.wall_time_s = std::stod(next());
        r.flag = next();
        out.push_back(std::move(r));
    }
    return out;
}

/// Log-log scatter of e_F against M: one polyline per (method, p) series,
/// plus dashed reference-slope guide lines.
inline void emit_svg_plot(const std::vector<ConvergenceRecord>& records,
                          const std::string& path,
                          const std::string& metric = "e_F")
{
    std::vector<const ConvergenceRecord*> usable;
    for (const auto& r : records)
        if (r.flag == "ok" && record_metric(r, metric) > 0.0)
            usable.push_back(&r);
    if (usable.empty())
        throw std::invalid_argument("emit_svg_plot: no plottable records");

    const double W = 640, H = 480, margin = 60;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto* r : usable) {
        const double x = std::log10(static_cast<double>(r->M));
        const double y = std::log10(record_metric(*r, metric));
        xmin = std::min(xmin, x); xmax = std::max(xmax, x);
        ymin = std::min(ymin, y); ymax = std::max(ymax, y);
    }
    if (xmax - xmin < 1e-9) xmax = xmin + 1.0;
    if (ymax - ymin < 1e-9) ymax = ymin + 1.0;
    auto px = [&](double x) {
        return margin + (x - xmin) / (xmax - xmin) * (W - 2 * margin);
    };
    auto py = [&](double y) {
        return H - margin - (y - ymin) / (ymax - ymin) * (H - 2 * margin);
    };

    std::map<std::pair<std::string, double>,
             std::vector<std::pair<double, double>>>
        series;
    for (const auto* r : usable)
        series[{r->method, r->p}].emplace_back(
            std::log10(static_cast<double>(r->M)),
            std::log10(record_metric(*r, metric)));

    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_svg_plot: cannot open " + path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
       << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << H - margin << "\" x2=\""
       << W - margin << "\" y2=\"" << H - margin
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\""
       << margin << "\" y2=\"" << H - margin << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 15
       << "\" text-anchor=\"middle\">log10 M</text>\n";
    os << "<text x=\"15\" y=\"" << H / 2 << "\" text-anchor=\"middle\" "
          "transform=\"rotate(-90 15 "
       << H / 2 << ")\">log10 " << metric << "</text>\n";

    // reference slope guides through the last point of the first series
    const auto& ref = series.begin()->second;
    for (double slope : {-0.5, -1.0, -2.0}) {
        const auto [x1, y1] = ref.back();
        const double x0 = xmin;
        os << "<line x1=\"" << px(x0) << "\" y1=\"" << py(y1 + slope * (x0 - x1))
           << "\" x2=\"" << px(x1) << "\" y2=\"" << py(y1)
           << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    }

    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                            "#ff7f0e", "#8c564b"};
    int ci = 0;
    for (const auto& [key, pts] : series) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[ci % 6]
           << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : pts) os << px(x) << ',' << py(y) << ' ';
        os << "\"/>\n";
        for (const auto& [x, y] : pts)
            os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
               << "\" r=\"3\" fill=\"" << colors[ci % 6] << "\"/>\n";
        os << "<text x=\"" << W - margin + 5 << "\" y=\""
           << margin + 16 * ci + 10 << "\" fill=\"" << colors[ci % 6]
           << "\" font-size=\"12\">" << key.first << " p="
           << format_double(key.second) << "</text>\n";
        ++ci;
    }
    os << "</svg>\n";
}

} // namespace svf
