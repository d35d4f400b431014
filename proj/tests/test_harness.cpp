#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"

using namespace nlsdn;
namespace fs = std::filesystem;

namespace {

std::string config_error(const json& j) {
    try {
        parse_scenario(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

json small_config() {
    return {{"name", "repro"},
            {"noise_delta", 1e-4},
            {"grid", {{"cells", 12}, {"T", 1.0}, {"steps", 60}}},
            {"q", 0.5},
            {"beta", {{"type", "bump"}, {"center", {0.5, 0.5}}, {"radius", 0.3}}},
            {"probes", {{"rho", 4}, {"h", 0.2}, {"M", 7}, {"N", 2}}},
            {"sweep", {{"eval_cells", 8}, {"eval_steps", 16}}}};
}

NeumannTrace random_trace(const GridPtr& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1, 1);
    NeumannTrace tr(g, BoundaryPatch::full().trace_slots(*g));
    for (auto& v : tr.raw()) v = cplx(U(rng), U(rng));
    return tr;
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("nlsdn_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Config, MalformedJsonReportsLineAndColumn) {
    try {
        parse_json_text("{\n  \"grid\": {\"cells\": 8,,}\n}", "bad.json");
        FAIL() << "no error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.json:2:"), std::string::npos) << e.what();
    }
}

TEST(Config, DiagnosticsNameTheField) {
    EXPECT_NE(config_error({{"grid", {{"cels", 8}}}}).find("grid.cels: unknown field"), std::string::npos);
    EXPECT_NE(config_error({{"grid", {{"cells", 2}}}}).find("grid.cells"), std::string::npos);
    EXPECT_NE(config_error({{"beta", {{"type", "wavy"}}}}).find("beta.type"), std::string::npos);
    EXPECT_NE(config_error({{"noise_delta", -1}}).find("noise_delta"), std::string::npos);
    EXPECT_NE(config_error({{"sweep", {{"deltas", {1e-3, 0}}}}}).find("sweep.deltas"), std::string::npos);
    EXPECT_NE(config_error({{"probes", {{"kind", "laser"}}}}).find("probes.kind"), std::string::npos);
    EXPECT_EQ(config_error(small_config()), "");
}

TEST(Config, SeparablePotential) {
    json j = small_config();
    j["beta"] = {{"type", "separable"}, {"amplitude", 2.0}, {"time", "one"}, {"space", {{"cosine", {{"axis", 0}, {"k", 1}, {"depth", 0.5}}}}}};
    Scenario sc = parse_scenario(j);
    EXPECT_NEAR(sc.truth()(0.3, Vec3(0, 0.4, 0)).real(), 3.0, 1e-12);
    EXPECT_NEAR(sc.truth()(0.3, Vec3(0.5, 0.4, 0)).real(), 1.0, 1e-12);
    j["beta"]["space"]["cosine"]["phase"] = 1;
    EXPECT_NE(config_error(j).find("phase"), std::string::npos);
}

TEST(Config, LoadFromFile) {
    fs::path d = scratch("cfg");
    std::ofstream(d / "a.json") << small_config().dump(2);
    Scenario sc = load_scenario((d / "a.json").string());
    EXPECT_EQ(sc.name, "repro");
    EXPECT_EQ(sc.grid.steps, 60);
    EXPECT_THROW(load_scenario((d / "missing.json").string()), ConfigError);
}

TEST(Dataset, RoundTripIsByteIdentical) {
    Scenario sc = parse_scenario(small_config());
    auto g = sc.make_grid_ptr();
    NeumannTrace tr = random_trace(g, 3);
    DNDataset d = DNDataset::from_trace(tr, sc, "random", {0.1, 0.2}, 1e-3, 7);
    fs::path p = scratch("ds") / "a.nlsdn";
    d.write(p.string());
    DNDataset back = DNDataset::read(p.string());
    EXPECT_EQ(back.serialize(), d.serialize());
    EXPECT_EQ(back.to_trace(g, BoundaryPatch::full()).raw(), tr.raw());
    EXPECT_EQ(back.header.at("eps").get<std::vector<double>>(), (std::vector<double>{0.1, 0.2}));
}

TEST(Dataset, CorruptionIsDetected) {
    Scenario sc = parse_scenario(small_config());
    auto g = sc.make_grid_ptr();
    std::string good = DNDataset::from_trace(random_trace(g, 4), sc, "x", {}, 0, 1).serialize();
    std::string magic = good, payload = good, header = good;
    magic[0] = 'X';
    payload[payload.size() - 3] ^= 0x40;
    header[good.find("\"seed\"") + 2] = 'S';
    EXPECT_THROW(DNDataset::deserialize(magic), DatasetError);
    EXPECT_THROW(DNDataset::deserialize(payload), DatasetError);
    EXPECT_THROW(DNDataset::deserialize(header), DatasetError);
    EXPECT_THROW(DNDataset::deserialize(good.substr(0, good.size() - 16)), DatasetError);
    // shape mismatch against another grid
    auto g2 = make_grid(Domain::unit_square(), {8, 8}, 1.0, 60);
    EXPECT_THROW(DNDataset::deserialize(good).to_trace(g2, BoundaryPatch::full()), DatasetError);
}

TEST(Noise, NormIsDeltaAndSeedMatters) {
    Scenario sc = parse_scenario(small_config());
    auto g = sc.make_grid_ptr();
    NeumannTrace tr = random_trace(g, 5);
    for (double d : {1e-5, 1e-3, 1e-1}) {
        NeumannTrace n = inject_noise(tr, d, 11) - tr;
        EXPECT_NEAR(n.l2_norm(), d, 1e-10 * d);
    }
    EXPECT_EQ(inject_noise(tr, 1e-3, 11).raw(), inject_noise(tr, 1e-3, 11).raw());
    EXPECT_GT((inject_noise(tr, 1e-3, 11) - inject_noise(tr, 1e-3, 12)).l2_norm(), 1e-4);
    EXPECT_EQ(inject_noise(tr, 0, 11).raw(), tr.raw());
    EXPECT_THROW(inject_noise(tr, -1, 11), std::invalid_argument);
}

TEST(Metrics, CsvRoundTrip) {
    MetricsRow r{"s", 1e-3, 0.123456789012345, 1.5, 0.1, 1.15, 12.0, 0.1, 7.5};
    fs::path p = scratch("metrics") / "m.csv";
    append_metrics(p.string(), r);
    append_metrics(p.string(), r);
    auto rows = read_metrics(p.string());
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_TRUE(rows[0].same_result(r));
    EXPECT_THROW(parse_metrics_line("s,1,2"), std::runtime_error);
    EXPECT_THROW(parse_metrics_line("s,1,-2,0,0,0,0,0,0"), std::runtime_error);
}

TEST(Metrics, Spearman) {
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {0.1, 0.5, 0.6, 2}), 1.0);
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), -1.0);
    EXPECT_NEAR(spearman({1, 2, 3, 4}, {1, 3, 2, 4}), 0.8, 1e-12);
    EXPECT_THROW(spearman({1}, {1}), std::invalid_argument);
}

TEST(Metrics, L2ErrorOfKnownDifference) {
    Potential one = Potential::uniform(1.0);
    auto e = l2_error([](double, const Vec3&) { return cplx(1.5); }, one, Domain::unit_square(), 1.0, 8, 8);
    EXPECT_NEAR(e.abs, 0.5, 1e-12);
    EXPECT_NEAR(e.truth, 1.0, 1e-12);
}

TEST(Scenario, ReproducibleAndSeedSensitive) {
    Scenario sc = parse_scenario(small_config());
    fs::path d = scratch("run");
    RunOptions ro;
    ro.out_dir = d.string();
    auto a = run_scenario(sc, ro), b = run_scenario(sc, {});
    EXPECT_TRUE(a.runs.at(0).row.same_result(b.runs.at(0).row));
    EXPECT_TRUE(fs::exists(d / "metrics.csv"));
    EXPECT_TRUE(fs::exists(d / "summary.json"));
    EXPECT_TRUE(read_metrics((d / "metrics.csv").string()).at(0).same_result(a.runs[0].row));
    sc.seed = 99;
    auto c = run_scenario(sc, {});
    EXPECT_NE(c.runs.at(0).row.l2_error, a.runs[0].row.l2_error);
}

TEST(Scenario, IdenticalPairReconstructsZero) {
    json j = small_config();
    j.erase("noise_delta");
    json b = {{"type", "bump"}, {"center", {0.5, 0.5}}, {"radius", 0.3}};
    j["beta"] = {{"pair", {b, b}}};
    auto r = run_scenario(parse_scenario(j), {});
    EXPECT_EQ(r.runs.at(0).error.abs, 0.0);
}

TEST(Scenario, ComplementMarginHypothesis) {
    json j = small_config();
    j["gamma_patch"] = {{"faces", {0, 1, 2}}};
    j["complement_margin"] = 0.15;
    EXPECT_EQ(complement_violation(parse_scenario(j)), 0.0);
    j["complement_margin"] = 0.5;
    EXPECT_GT(complement_violation(parse_scenario(j)), 0.1);
    EXPECT_THROW(run_scenario(parse_scenario(j), {}), ConfigError);
    j["complement_margin"] = -1;
    EXPECT_NE(config_error(j).find("complement_margin"), std::string::npos);
}

TEST(Verify, FastSuitePasses) {
    VerifyReport r = verify_suite({});
    EXPECT_TRUE(r.all_pass()) << r.text();
    EXPECT_GE(r.items.size(), 10u);
}

TEST(Verify, FlippedPotentialSignIsCaught) {
    VerifyOptions o;
    o.solver.flip_explicit_potential = true;
    VerifyReport r = verify_suite(o);
    EXPECT_FALSE(r.all_pass());
    bool conservation_failed = false;
    for (const auto& it : r.items)
        if (it.name.find("mass conserved") != std::string::npos) conservation_failed = !it.pass;
    EXPECT_TRUE(conservation_failed) << r.text();
}
