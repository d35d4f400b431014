#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlsdn/reconstruct.hpp"

namespace nlsdn {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- configuration ----

struct GridConfig {
    std::vector<int> cells{48, 48};
    double T = 1.0;
    int steps = 400;
    LinearOptions::Backend backend = LinearOptions::Backend::Auto;
};

struct ProbeConfig {
    std::string kind = "fourier";  // fourier | local | go | beam
    // Fourier sampling
    double rho = 12, h = 0.2, M = 11;
    int N = 4;
    double scale = 1.0;
    double reference_delta = 1e-5;  // schedule prefactors pinned so ρ, h, M hit the targets here
    double T_per = 0;               // 0: horizon
    Vec3 L_per = Vec3::Zero();      // 0: domain extents
    // local recovery
    std::vector<Vec3> points;
    double local_rho = 30, eta = 0.25, iota_h = 0, eps = 1e-2, cal_radius = 0.3;
    // single probe (go / beam) for simulate-dn, probe, linearize
    Vec3 omega = Vec3(1, 0, 0), omega2 = Vec3(0, 1, 0);
    std::string flavor = "plain";
    double tau = 0;
    Vec3 xi = Vec3::Zero();
    Vec3 p = Vec3::Zero();
    double amplitude = 1.0;
    std::vector<double> rho_sweep;
    std::vector<double> eps_sweep;
};

struct SweepConfig {
    std::vector<double> deltas;
    int eval_cells = 32, eval_steps = 128;
};

struct Scenario {
    std::string name = "scenario";
    Domain domain = Domain::unit_square();
    GridConfig grid;
    BoundaryPatch gamma;
    Potential q = Potential::zero();
    Potential beta = Potential::zero();
    std::optional<Potential> beta2;
    ProbeConfig probes;
    ScheduleConstants constants;
    SweepConfig sweep;
    double noise_delta = 0;
    // width of the neighbourhood of the unmeasured boundary where β1 = β2 is assumed; unset: not checked
    std::optional<double> complement_margin;
    std::uint64_t seed = 1;
    int threads = 1;
    json source;  // normalised config, echoed into artifacts

    GridPtr make_grid_ptr() const;
    Potential truth() const;  // β, or β1 - β2
    NonlinearOptions solver_options() const;
};

Scenario parse_scenario(const json& j);
Scenario load_scenario(const std::string& path);
json parse_json_text(const std::string& text, const std::string& origin);

Potential make_potential(const json& j, const std::string& path, const Domain& dom, double T);
BoundaryPatch make_patch(const json& j, const std::string& path, const Domain& dom);

// ---- DN dataset files ----

struct DNDataset {
    json header;
    std::vector<cplx> payload;

    static DNDataset from_trace(const NeumannTrace& tr, const Scenario& sc, const std::string& f_id, std::vector<double> eps,
                                double delta, std::uint64_t seed);
    NeumannTrace to_trace(const GridPtr& g, const BoundaryPatch& gamma) const;

    std::string serialize() const;
    static DNDataset deserialize(const std::string& bytes);
    void write(const std::string& path) const;
    static DNDataset read(const std::string& path);
};

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull);
std::uint64_t content_seed(std::uint64_t seed, const BoundaryData& f);

// complex Gaussian perturbation rescaled to L²(Σ♯) norm exactly δ
NeumannTrace inject_noise(const NeumannTrace& tr, double delta, std::uint64_t seed);

// ---- metrics ----

struct MetricsRow {
    std::string scenario;
    double delta = 0, l2_error = 0, runtime_s = 0;
    double eps = 0, gamma = 0, rho = 0, h = 0, M = 0;

    // runtime is wall clock and excluded
    bool same_result(const MetricsRow& o) const;
};

std::string metrics_header();
std::string to_csv(const MetricsRow& r);
MetricsRow parse_metrics_line(const std::string& line);
void append_metrics(const std::string& path, const MetricsRow& r);
std::vector<MetricsRow> read_metrics(const std::string& path);

double spearman(const std::vector<double>& x, const std::vector<double>& y);
std::string sweep_svg(const std::vector<MetricsRow>& rows, const std::string& title);

// relative and absolute L²((0,T*)xΩ) distance on a trapezoid evaluation grid
struct ErrorNorms {
    double abs = 0, truth = 0;
    double rel() const { return truth > 0 ? abs / truth : abs; }
};
ErrorNorms l2_error(const std::function<cplx(double, const Vec3&)>& est, const Potential& truth, const Domain& dom, double T,
                    int cells, int steps);

// ---- scenario execution ----

struct RunOptions {
    std::string out_dir;  // empty: no files
    int threads = 1;
    bool write_datasets = false;
};

struct DeltaResult {
    MetricsRow row;
    Schedule schedule;
    ErrorNorms error;
    std::vector<FourierSample> samples;
};

struct ScenarioResult {
    std::vector<DeltaResult> runs;
    std::vector<std::string> artifacts;
    double spearman_rho = 0;
    bool monotone = true;
};

Schedule scenario_schedule(const Scenario& sc, double delta);
// largest |β1 - β2| on nodes within complement_margin of the boundary outside Γ (0 when unset or Γ is full)
double complement_violation(const Scenario& sc);
ScenarioResult run_scenario(const Scenario& sc, const RunOptions& opt);

// local recovery over the configured points; rejected points carry the reason
struct LocalResult {
    Vec3 p;
    bool accepted = false;
    std::string reason;
    LocalEstimate est;
    double truth = 0;
};
std::vector<LocalResult> run_local(const Scenario& sc, const RunOptions& opt);

// ---- invariant suite ----

struct VerifyItem {
    std::string module, name;
    bool pass = false;
    std::string measured;
};

struct VerifyOptions {
    std::string level = "fast";
    int threads = 1;
    LinearOptions solver;  // fault injection enters here
};

struct VerifyReport {
    std::vector<VerifyItem> items;
    double runtime_s = 0;
    bool all_pass() const;
    std::string text() const;
    json to_json() const;
};

VerifyReport verify_suite(const VerifyOptions& opt);

}  // namespace nlsdn
