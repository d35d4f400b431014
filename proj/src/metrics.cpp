#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "nlsdn/harness.hpp"

namespace nlsdn {

bool MetricsRow::same_result(const MetricsRow& o) const {
    return scenario == o.scenario && delta == o.delta && l2_error == o.l2_error && eps == o.eps && gamma == o.gamma && rho == o.rho &&
           h == o.h && M == o.M;
}

std::string metrics_header() { return "scenario,delta,l2_error,runtime_s,eps,gamma,rho,h,M"; }

std::string to_csv(const MetricsRow& r) {
    char b[512];
    std::snprintf(b, sizeof b, "%s,%.17g,%.17g,%.3f,%.17g,%.17g,%.17g,%.17g,%.17g", r.scenario.c_str(), r.delta, r.l2_error, r.runtime_s,
                  r.eps, r.gamma, r.rho, r.h, r.M);
    return b;
}

MetricsRow parse_metrics_line(const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw std::runtime_error("metrics row needs 9 fields: " + line);
    MetricsRow r;
    r.scenario = f[0];
    double* v[] = {&r.delta, &r.l2_error, &r.runtime_s, &r.eps, &r.gamma, &r.rho, &r.h, &r.M};
    for (int i = 0; i < 8; ++i) *v[i] = std::stod(f[i + 1]);
    if (r.l2_error < 0) throw std::runtime_error("metrics row with negative error");
    return r;
}

void append_metrics(const std::string& path, const MetricsRow& r) {
    bool fresh = !std::ifstream(path).good();
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + path);
    if (fresh) out << metrics_header() << "\n";
    out << to_csv(r) << "\n";
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != metrics_header()) throw std::runtime_error("unexpected metrics header in " + path);
    std::vector<MetricsRow> rows;
    while (std::getline(in, line))
        if (!line.empty()) rows.push_back(parse_metrics_line(line));
    return rows;
}

namespace {
std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * (i + j) + 1;
        i = j + 1;
    }
    return r;
}
}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("spearman needs two equal-length samples");
    auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = (n + 1) / 2, sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - mx);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - mx) * (ry[i] - mx);
    }
    if (sxx == 0 || syy == 0) return 0;
    return sxy / std::sqrt(sxx * syy);
}

std::string sweep_svg(const std::vector<MetricsRow>& rows, const std::string& title) {
    const double W = 480, H = 320, L = 60, R = 20, Tm = 30, B = 50;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">log10 delta</text>\n";
    s << "<text x=\"14\" y=\"" << (Tm + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << (Tm + H - B) / 2
      << ")\" text-anchor=\"middle\">L2 error</text>\n";
    if (!rows.empty()) {
        double x0 = 1e300, x1 = -1e300, y0 = 0, y1 = 0;
        for (const auto& r : rows) {
            x0 = std::min(x0, std::log10(r.delta));
            x1 = std::max(x1, std::log10(r.delta));
            y1 = std::max(y1, r.l2_error);
        }
        if (x1 - x0 < 1e-9) x1 = x0 + 1;
        if (y1 <= 0) y1 = 1;
        y1 *= 1.1;
        auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
        auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - B - Tm); };
        std::vector<MetricsRow> sorted = rows;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.delta < b.delta; });
        s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
        for (const auto& r : sorted) s << px(std::log10(r.delta)) << "," << py(r.l2_error) << " ";
        s << "\"/>\n";
        for (const auto& r : sorted) {
            s << "<circle cx=\"" << px(std::log10(r.delta)) << "\" cy=\"" << py(r.l2_error) << "\" r=\"3\" fill=\"steelblue\"/>\n";
            s << "<text x=\"" << px(std::log10(r.delta)) << "\" y=\"" << H - B + 15 << "\" text-anchor=\"middle\" font-size=\"10\">"
              << std::log10(r.delta) << "</text>\n";
        }
        char b[64];
        std::snprintf(b, sizeof b, "%.3g", y1);
        s << "<text x=\"" << L - 4 << "\" y=\"" << Tm + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << b << "</text>\n";
        s << "<text x=\"" << L - 4 << "\" y=\"" << H - B << "\" text-anchor=\"end\" font-size=\"10\">0</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

ErrorNorms l2_error(const std::function<cplx(double, const Vec3&)>& est, const Potential& truth, const Domain& dom, double T, int cells,
                    int steps) {
    const int n = dom.n;
    Vec3 lo = dom.lo(), hi = dom.hi();
    const int nz = n == 3 ? cells : 0;
    double e2 = 0, t2 = 0;
    double cell_vol = T / steps;
    for (int d = 0; d < n; ++d) cell_vol *= (hi[d] - lo[d]) / cells;
    auto w1 = [](int i, int m) { return (i == 0 || i == m) ? 0.5 : 1.0; };
    for (int k = 0; k <= steps; ++k) {
        const double t = T * k / steps;
        for (int i = 0; i <= cells; ++i)
            for (int j = 0; j <= cells; ++j)
                for (int l = 0; l <= nz; ++l) {
                    Vec3 x = Vec3::Zero();
                    x[0] = lo[0] + (hi[0] - lo[0]) * i / cells;
                    x[1] = lo[1] + (hi[1] - lo[1]) * j / cells;
                    if (n == 3) x[2] = lo[2] + (hi[2] - lo[2]) * l / cells;
                    if (!dom.contains(x)) continue;
                    double w = w1(k, steps) * w1(i, cells) * w1(j, cells) * (n == 3 ? w1(l, nz) : 1.0);
                    cplx tr = truth(t, x);
                    e2 += w * std::norm(est(t, x) - tr);
                    t2 += w * std::norm(tr);
                }
    }
    return {std::sqrt(e2 * cell_vol), std::sqrt(t2 * cell_vol)};
}

}  // namespace nlsdn
