#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "nlsdn/harness.hpp"

namespace nlsdn {

namespace fs = std::filesystem;

namespace {

std::string delta_tag(double d) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3e", d);
    return b;
}

std::string put(const RunOptions& opt, ScenarioResult* res, const std::string& name, const std::string& content, bool append = false) {
    if (opt.out_dir.empty()) return {};
    fs::create_directories(opt.out_dir);
    std::string path = (fs::path(opt.out_dir) / name).string();
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
    if (res) res->artifacts.push_back(path);
    return path;
}

// DN data for the scenario: Λ_β f (or Λ_β1 f - Λ_β2 f) plus noise of norm δ.
// The noise seed depends on f, so the draw does not depend on evaluation order.
DNEvaluator scenario_data(const Scenario& sc, const GridPtr& g, double delta, std::uint64_t seed) {
    auto m1 = std::make_shared<Model>(Model{g, sc.q, sc.beta, sc.gamma, sc.solver_options()});
    std::shared_ptr<Model> m2;
    if (sc.beta2) m2 = std::make_shared<Model>(Model{g, sc.q, *sc.beta2, sc.gamma, sc.solver_options()});
    return [m1, m2, delta, seed](const BoundaryData& f) {
        NeumannTrace a = m1->dn(f);
        if (m2) a -= m2->dn(f);
        return inject_noise(a, delta, content_seed(seed, f));
    };
}

}  // namespace

Schedule scenario_schedule(const Scenario& sc, double delta) { return make_schedule(delta, sc.constants); }

double complement_violation(const Scenario& sc) {
    if (!sc.complement_margin) return 0;
    GridPtr g = sc.make_grid_ptr();
    std::vector<Vec3> outside;
    for (int b : g->boundary())
        if (!sc.gamma.contains(sc.domain, g->coord(b))) outside.push_back(g->coord(b));
    if (outside.empty()) return 0;
    const Potential d = sc.truth();
    const double w = *sc.complement_margin;
    double worst = 0;
    for (int i = 0; i < g->num_nodes(); ++i) {
        if (g->type(i) == Grid::NodeType::Inactive) continue;
        const Vec3 x = g->coord(i);
        bool near = false;
        for (const Vec3& y : outside) near = near || (x - y).norm() < w;
        if (!near) continue;
        for (int k = 0; k < g->time_levels(); k += std::max(1, g->time_levels() / 16)) worst = std::max(worst, std::abs(d(g->time(k), x)));
    }
    return worst;
}

ScenarioResult run_scenario(const Scenario& sc, const RunOptions& opt) {
    ScenarioResult res;
    if (double v = complement_violation(sc); v > 1e-12)
        throw ConfigError("config: complement_margin: beta1 - beta2 reaches " + std::to_string(v) + " near the unmeasured boundary");
    GridPtr g = sc.make_grid_ptr();
    const Potential truth = sc.truth();
    std::vector<double> deltas = sc.sweep.deltas;
    if (deltas.empty()) deltas.push_back(sc.noise_delta);
    FourierLattice lat;
    lat.n = sc.domain.n;
    lat.T_per = sc.probes.T_per;
    lat.L_per = sc.probes.L_per;

    std::string metrics_path;
    if (!opt.out_dir.empty()) {
        metrics_path = put(opt, &res, "metrics.csv", metrics_header() + "\n");
        put(opt, &res, "config.json", sc.source.dump(2) + "\n");
    }
    for (double delta : deltas) {
        auto t0 = std::chrono::steady_clock::now();
        DeltaResult dr;
        dr.schedule = scenario_schedule(sc, delta > 0 ? delta : sc.probes.reference_delta);
        const std::uint64_t seed = sc.seed ^ fnv1a(&delta, sizeof delta);
        DNEvaluator data = scenario_data(sc, g, delta, seed);
        if (opt.write_datasets && !opt.out_dir.empty()) {
            DNEvaluator inner = data;
            data = [inner, &sc, &opt, delta, seed](const BoundaryData& f) {
                NeumannTrace tr = inner(f);
                char id[64];
                std::snprintf(id, sizeof id, "f%016llx", static_cast<unsigned long long>(content_seed(0, f)));
                DNDataset d = DNDataset::from_trace(tr, sc, id, {}, delta, content_seed(seed, f));
                fs::create_directories(opt.out_dir);
                d.write((fs::path(opt.out_dir) / ("dn_" + delta_tag(delta) + "_" + id + ".nlsdn")).string());
                return tr;
            };
        }
        FourierSamplerOptions fo;
        fo.scale = sc.probes.scale;
        fo.threads = std::max(1, opt.threads);
        FourierSampler sampler(data, sc.q, g, dr.schedule, fo);
        auto pts = lat.points(dr.schedule.M_used());
        dr.samples = sampler.sample_all(pts);
        FourierInversion inv = invert_fourier(dr.samples, dr.schedule, lat);
        dr.error = l2_error([&](double t, const Vec3& x) { return inv.beta(t, x); }, truth, sc.domain, dr.schedule.c.T_star,
                            sc.sweep.eval_cells, sc.sweep.eval_steps);
        MetricsRow& r = dr.row;
        r.scenario = sc.name;
        r.delta = delta;
        r.l2_error = dr.error.abs;
        r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.eps = dr.schedule.eps;
        r.gamma = dr.schedule.gamma;
        r.rho = dr.schedule.rho_used();
        r.h = dr.schedule.h_used();
        r.M = dr.schedule.M_used();
        if (!metrics_path.empty()) {
            append_metrics(metrics_path, r);
            std::string csv = "tau,xi1,xi2,xi3,re,im,correction_bound\n";
            for (const auto& s : dr.samples) {
                char b[256];
                std::snprintf(b, sizeof b, "%.10g,%.10g,%.10g,%.10g,%.12g,%.12g,%.6g\n", s.tau, s.xi[0], s.xi[1], s.xi[2], s.value.real(),
                              s.value.imag(), s.correction_bound);
                csv += b;
            }
            put(opt, &res, "samples_" + delta_tag(delta) + ".csv", csv);
            // mid-horizon slice of the reconstruction
            std::string bs = "x1,x2,x3,re,im,truth\n";
            const double tm = dr.schedule.c.T_star / 2;
            const int c = sc.sweep.eval_cells;
            Vec3 lo = sc.domain.lo(), hi = sc.domain.hi();
            for (int i = 0; i <= c; ++i)
                for (int j = 0; j <= c; ++j) {
                    Vec3 x = Vec3::Zero();
                    x[0] = lo[0] + (hi[0] - lo[0]) * i / c;
                    x[1] = lo[1] + (hi[1] - lo[1]) * j / c;
                    if (sc.domain.n == 3) x[2] = 0.5 * (lo[2] + hi[2]);
                    if (!sc.domain.contains(x)) continue;
                    cplx v = inv.beta(tm, x);
                    char b[200];
                    std::snprintf(b, sizeof b, "%.6g,%.6g,%.6g,%.10g,%.10g,%.10g\n", x[0], x[1], x[2], v.real(), v.imag(), truth(tm, x).real());
                    bs += b;
                }
            put(opt, &res, "beta_" + delta_tag(delta) + ".csv", bs);
        }
        res.runs.push_back(std::move(dr));
    }
    if (res.runs.size() > 1) {
        std::vector<double> d, e;
        for (const auto& r : res.runs) {
            d.push_back(r.row.delta);
            e.push_back(r.row.l2_error);
        }
        res.spearman_rho = spearman(d, e);
        std::vector<std::size_t> idx(d.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return d[a] < d[b]; });
        for (std::size_t k = 1; k < idx.size(); ++k) res.monotone = res.monotone && e[idx[k]] >= e[idx[k - 1]];
    }
    if (!opt.out_dir.empty()) {
        json s;
        s["scenario"] = sc.name;
        s["seed"] = sc.seed;
        s["spearman"] = res.spearman_rho;
        s["monotone"] = res.monotone;
        for (const auto& r : res.runs) {
            json x;
            x["delta"] = r.row.delta;
            x["l2_error"] = r.error.abs;
            x["relative_error"] = r.error.rel();
            x["truth_norm"] = r.error.truth;
            x["samples"] = r.samples.size();
            x["schedule"] = {{"eps", r.schedule.eps}, {"gamma", r.schedule.gamma}, {"rho", r.schedule.rho}, {"h", r.schedule.h},
                             {"M", r.schedule.M}, {"rho_used", r.schedule.rho_used()}, {"h_used", r.schedule.h_used()},
                             {"M_used", r.schedule.M_used()}};
            s["runs"].push_back(x);
        }
        put(opt, &res, "summary.json", s.dump(2) + "\n");
        if (res.runs.size() > 1) {
            std::vector<MetricsRow> rows;
            for (const auto& r : res.runs) rows.push_back(r.row);
            put(opt, &res, "sweep.svg", sweep_svg(rows, sc.name + ": reconstruction error vs noise"));
        }
    }
    return res;
}

std::vector<LocalResult> run_local(const Scenario& sc, const RunOptions& opt) {
    GridPtr g = sc.make_grid_ptr();
    DNEvaluator data = scenario_data(sc, g, sc.noise_delta, sc.seed);
    const Potential truth = sc.truth();
    LocalRecoveryOptions lo;
    lo.rho = sc.probes.local_rho;
    lo.eta = sc.probes.eta;
    lo.iota = TimePlateau(sc.probes.iota_h, sc.grid.T);
    lo.n_phase = sc.probes.N >= 2 ? sc.probes.N : 2;
    lo.eps = sc.probes.eps;
    lo.cal_radius = sc.probes.cal_radius;
    lo.solver = sc.solver_options();
    lo.threads = std::max(1, opt.threads);
    std::vector<LocalResult> out;
    for (const Vec3& p : sc.probes.points) {
        LocalResult r;
        r.p = p;
        double num = 0, den = 0;
        const int Q = 400;
        for (int k = 0; k <= Q; ++k) {
            double t = sc.grid.T * k / Q;
            double w = std::pow(lo.iota(t), 3);
            num += w * truth(t, p).real();
            den += w;
        }
        r.truth = den > 0 ? num / den : 0;
        try {
            r.est = recover_beta_point(data, sc.q, g, p, sc.gamma, lo);
            r.accepted = true;
        } catch (const std::exception& e) {
            r.reason = e.what();
        }
        out.push_back(r);
    }
    if (!opt.out_dir.empty()) {
        std::string csv = "x1,x2,x3,accepted,estimate_re,estimate_im,truth,J_re,J_im,reason\n";
        for (const auto& r : out) {
            char b[512];
            std::snprintf(b, sizeof b, "%.6g,%.6g,%.6g,%d,%.10g,%.10g,%.10g,%.6g,%.6g,\"%s\"\n", r.p[0], r.p[1], r.p[2], r.accepted ? 1 : 0,
                          r.est.estimate.real(), r.est.estimate.imag(), r.truth, r.est.J.real(), r.est.J.imag(), r.reason.c_str());
            csv += b;
        }
        put(opt, nullptr, "local.csv", csv);
    }
    return out;
}

}  // namespace nlsdn
