#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "nlsdn/harness.hpp"

namespace nlsdn {

namespace {

const char kMagic[6] = {'N', 'L', 'S', 'D', 'N', '1'};
constexpr int kFormatVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
    if (at + 8 > in.size()) throw DatasetError("dataset truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

std::string hex(std::uint64_t v) {
    char b[17];
    std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(v));
    return b;
}

std::string payload_bytes(const std::vector<cplx>& p) {
    std::string out;
    out.reserve(p.size() * 16);
    for (const cplx& z : p) {
        put_u64(out, std::bit_cast<std::uint64_t>(z.real()));
        put_u64(out, std::bit_cast<std::uint64_t>(z.imag()));
    }
    return out;
}

json grid_meta(const Scenario& sc) {
    json g;
    g["domain"] = sc.source.contains("domain") ? sc.source.at("domain") : json{{"kind", "box"}, {"lengths", {1.0, 1.0}}};
    g["cells"] = sc.grid.cells;
    g["T"] = sc.grid.T;
    g["steps"] = sc.grid.steps;
    return g;
}

std::uint64_t header_checksum(json h) {
    h.erase("header_checksum");
    std::string s = h.dump();
    return fnv1a(s.data(), s.size());
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t content_seed(std::uint64_t seed, const BoundaryData& f) {
    std::uint64_t h = fnv1a(&seed, sizeof seed);
    return fnv1a(f.raw().data(), f.raw().size() * sizeof(cplx), h);
}

NeumannTrace inject_noise(const NeumannTrace& tr, double delta, std::uint64_t seed) {
    if (!(delta >= 0)) throw std::invalid_argument("noise level must be nonnegative");
    if (delta == 0) return tr;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    NeumannTrace n = tr;
    for (auto& v : n.raw()) {
        double a = N(rng);
        double b = N(rng);
        v = cplx(a, b);
    }
    const double s = n.l2_norm();
    if (!(s > 0)) throw std::runtime_error("trace carries no quadrature weight; cannot scale noise");
    n *= delta / s;
    return tr + n;
}

DNDataset DNDataset::from_trace(const NeumannTrace& tr, const Scenario& sc, const std::string& f_id, std::vector<double> eps,
                                double delta, std::uint64_t seed) {
    DNDataset d;
    d.payload = tr.raw();
    json& h = d.header;
    h["format_version"] = kFormatVersion;
    h["grid"] = grid_meta(sc);
    h["gamma"] = sc.source.contains("gamma_patch") ? sc.source.at("gamma_patch") : json("full");
    h["f_id"] = f_id;
    h["eps"] = std::move(eps);
    h["delta"] = delta;
    h["seed"] = seed;
    h["levels"] = tr.grid()->time_levels();
    h["slots"] = tr.slots();
    h["payload_checksum"] = hex(fnv1a(payload_bytes(d.payload).data(), d.payload.size() * 16));
    h["header_checksum"] = hex(header_checksum(h));
    return d;
}

NeumannTrace DNDataset::to_trace(const GridPtr& g, const BoundaryPatch& gamma) const {
    std::vector<int> slots = header.at("slots").get<std::vector<int>>();
    if (slots != gamma.trace_slots(*g)) throw DatasetError("dataset boundary patch does not match the scenario");
    if (header.at("levels").get<int>() != g->time_levels()) throw DatasetError("dataset time levels do not match the grid");
    NeumannTrace tr(g, slots);
    if (tr.raw().size() != payload.size()) throw DatasetError("payload length does not match |Σ♯|");
    tr.raw() = payload;
    return tr;
}

std::string DNDataset::serialize() const {
    std::string hs = header.dump();
    std::string out(kMagic, kMagic + 6);
    put_u64(out, hs.size());
    out += hs;
    put_u64(out, payload.size());
    out += payload_bytes(payload);
    return out;
}

DNDataset DNDataset::deserialize(const std::string& in) {
    if (in.size() < 6 || std::memcmp(in.data(), kMagic, 6) != 0) throw DatasetError("not an NLSDN1 dataset (bad magic)");
    std::size_t at = 6;
    const std::uint64_t hl = get_u64(in, at);
    at += 8;
    if (at + hl > in.size()) throw DatasetError("dataset truncated in header");
    DNDataset d;
    try {
        d.header = json::parse(in.substr(at, hl));
    } catch (const json::parse_error&) {
        throw DatasetError("dataset header is not valid JSON");
    }
    at += hl;
    if (!d.header.contains("header_checksum") || d.header.at("header_checksum") != hex(header_checksum(d.header)))
        throw DatasetError("header checksum mismatch");
    if (d.header.value("format_version", 0) != kFormatVersion) throw DatasetError("unsupported dataset format version");
    const std::uint64_t count = get_u64(in, at);
    at += 8;
    const std::uint64_t expect = d.header.at("levels").get<std::uint64_t>() * d.header.at("slots").size();
    if (count != expect) throw DatasetError("payload length does not match |Σ♯|");
    if (at + count * 16 != in.size()) throw DatasetError("payload size mismatch");
    if (d.header.at("payload_checksum") != hex(fnv1a(in.data() + at, count * 16))) throw DatasetError("payload checksum mismatch");
    d.payload.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        double re = std::bit_cast<double>(get_u64(in, at + 16 * i));
        double im = std::bit_cast<double>(get_u64(in, at + 16 * i + 8));
        d.payload[i] = cplx(re, im);
    }
    return d;
}

void DNDataset::write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError("cannot write " + path);
    std::string s = serialize();
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

DNDataset DNDataset::read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize(ss.str());
}

}  // namespace nlsdn
