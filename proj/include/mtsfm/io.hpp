#pragma once

// Serialization: JSON documents for indices, regions, problems and reports;
// CSV with a '#'-prefixed JSON metadata line; binary AF grids with a sidecar
// JSON header.

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtsfm/ambiguity.hpp"
#include "mtsfm/optimize.hpp"
#include "mtsfm/phasecode.hpp"
#include "mtsfm/waveform.hpp"

namespace mtsfm {

using json = nlohmann::json;

// ---- indices --------------------------------------------------------------

inline void to_json(json& j, const ModulationIndices& m) {
    j = json{{"a0", m.a0}, {"alphas", m.alphas}, {"betas", m.betas}, {"T", m.T}};
}

inline void from_json(const json& j, ModulationIndices& m) {
    m = ModulationIndices{};
    m.a0 = j.value("a0", 0.0);
    m.T = j.value("T", 1.0);
    if (j.contains("alphas")) j.at("alphas").get_to(m.alphas);
    if (j.contains("betas")) j.at("betas").get_to(m.betas);
    if (m.betas.empty()) m.betas.assign(m.alphas.size(), 0.0);
    if (m.alphas.empty()) m.alphas.assign(m.betas.size(), 0.0);
    m.validate();
}

// ---- regions --------------------------------------------------------------

inline RegionKind parse_region_kind(const std::string& s) {
    if (s == "delay_band" || s == "band") return RegionKind::delay_band;
    if (s == "ellipse") return RegionKind::ellipse;
    if (s == "annulus") return RegionKind::annulus;
    throw Error("unknown region kind '" + s + "'");
}

inline void to_json(json& j, const DelayDopplerRegion& r) {
    j = json{{"kind", to_string(r.kind)}};
    switch (r.kind) {
        case RegionKind::delay_band:
            j["tau_lo"] = r.tau_lo ? json(*r.tau_lo) : json(nullptr);
            j["tau_hi"] = r.tau_hi;
            j["two_sided"] = r.two_sided;
            j["nu_max"] = r.nu_max ? json(*r.nu_max) : json(nullptr);
            break;
        case RegionKind::ellipse:
            j["tau0"] = r.tau0;
            j["nu0"] = r.nu0;
            j["r_tau"] = r.r_tau;
            j["r_nu"] = r.r_nu;
            break;
        case RegionKind::annulus:
            j["r_tau_inner"] = r.r_tau_inner;
            j["r_nu_inner"] = r.r_nu_inner;
            j["r_tau"] = r.r_tau;
            j["r_nu"] = r.r_nu;
            break;
    }
}

inline void from_json(const json& j, DelayDopplerRegion& r) {
    if (!j.is_object()) throw Error("region must be a JSON object");
    const auto kind = parse_region_kind(j.value("kind", std::string("delay_band")));
    auto opt = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>();
    };
    switch (kind) {
        case RegionKind::delay_band:
            r = DelayDopplerRegion::band(opt("tau_lo"), j.value("tau_hi", 1.0), j.value("two_sided", true));
            r.nu_max = opt("nu_max");
            break;
        case RegionKind::ellipse:
            r = DelayDopplerRegion::ellipse(j.value("tau0", 0.0), j.value("nu0", 0.0), j.at("r_tau").get<double>(),
                                            j.at("r_nu").get<double>());
            break;
        case RegionKind::annulus:
            r = DelayDopplerRegion::annulus(j.at("r_tau_inner").get<double>(), j.at("r_nu_inner").get<double>(),
                                            j.at("r_tau").get<double>(), j.at("r_nu").get<double>());
            break;
    }
    r.validate();
}

// Compact text form used on the command line:
//   band:lo:hi | band::hi | ellipse:tau0:nu0:rtau:rnu | annulus:rti:rni:rt:rn
// Delays are in units of T, Dopplers in units of 1/T.
inline DelayDopplerRegion parse_region(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.empty()) throw Error("empty region");
    auto num = [&](std::size_t i) {
        try {
            std::size_t used = 0;
            const double v = std::stod(parts.at(i), &used);
            if (used != parts[i].size()) throw Error("");
            return v;
        } catch (...) {
            throw Error("bad region '" + text + "'");
        }
    };
    DelayDopplerRegion r;
    const auto kind = parse_region_kind(parts[0]);
    if (kind == RegionKind::delay_band) {
        if (parts.size() != 3) throw Error("band region needs band:lo:hi");
        r = DelayDopplerRegion::band(parts[1].empty() ? std::nullopt : std::optional<double>(num(1)), num(2));
    } else {
        if (parts.size() != 5) throw Error("region '" + text + "' needs four numbers");
        r = kind == RegionKind::ellipse ? DelayDopplerRegion::ellipse(num(1), num(2), num(3), num(4))
                                        : DelayDopplerRegion::annulus(num(1), num(2), num(3), num(4));
    }
    r.validate();
    return r;
}

// ---- problem and reports --------------------------------------------------

inline void to_json(json& j, const QuadConfig& q) {
    j = json{{"samples_per_res_tau", q.samples_per_res_tau},
             {"mainlobe_samples_per_res", q.mainlobe_samples_per_res},
             {"samples_per_res_nu", q.samples_per_res_nu},
             {"null_search_samples_per_res", q.null_search_samples_per_res},
             {"tol", q.tol}};
}

inline void from_json(const json& j, QuadConfig& q) {
    q = QuadConfig{};
    q.samples_per_res_tau = j.value("samples_per_res_tau", q.samples_per_res_tau);
    q.mainlobe_samples_per_res = j.value("mainlobe_samples_per_res", q.mainlobe_samples_per_res);
    q.samples_per_res_nu = j.value("samples_per_res_nu", q.samples_per_res_nu);
    q.null_search_samples_per_res = j.value("null_search_samples_per_res", q.null_search_samples_per_res);
    q.tol = j.value("tol", q.tol);
}

inline void to_json(json& j, const StopConfig& s) {
    j = json{{"max_iters", s.max_iters},
             {"gradient_tol", s.gradient_tol},
             {"step_tol", s.step_tol},
             {"initial_step", s.initial_step}};
}

inline void from_json(const json& j, StopConfig& s) {
    s = StopConfig{};
    s.max_iters = j.value("max_iters", s.max_iters);
    s.gradient_tol = j.value("gradient_tol", s.gradient_tol);
    s.step_tol = j.value("step_tol", s.step_tol);
    s.initial_step = j.value("initial_step", s.initial_step);
}

inline void to_json(json& j, const OptimizeProblem& p) {
    j = json{{"objective", to_string(p.objective)},
             {"region", p.region},
             {"delta", p.delta},
             {"rms_constraint", p.rms_constraint},
             {"free_set", to_string(p.free_set)},
             {"quad", p.quad},
             {"stop", p.stop},
             {"order_margin", p.order_margin},
             {"perturb_zero_coordinates", p.perturb_zero_coordinates},
             {"seed", p.seed}};
}

inline void from_json(const json& j, OptimizeProblem& p) {
    p = OptimizeProblem{};
    if (j.contains("objective")) p.objective = parse_objective(j.at("objective").get<std::string>());
    if (j.contains("region")) j.at("region").get_to(p.region);
    p.delta = j.value("delta", p.delta);
    p.rms_constraint = j.value("rms_constraint", p.rms_constraint);
    if (j.contains("free_set")) p.free_set = parse_symmetry(j.at("free_set").get<std::string>());
    if (j.contains("quad")) j.at("quad").get_to(p.quad);
    if (j.contains("stop")) j.at("stop").get_to(p.stop);
    p.order_margin = j.value("order_margin", p.order_margin);
    p.perturb_zero_coordinates = j.value("perturb_zero_coordinates", p.perturb_zero_coordinates);
    p.seed = j.value("seed", p.seed);
}

// Wall time is left out so that reruns serialize identically.
inline void to_json(json& j, const OptimizeReport& r) {
    j = json{{"initial", r.initial},
             {"final", r.final_design},
             {"objective_initial", r.objective_initial},
             {"objective_final", r.objective_final},
             {"history", r.history},
             {"rms_ratio", r.rms_ratio},
             {"constraint_residual", r.constraint_residual},
             {"G", r.G},
             {"iterations", r.iterations},
             {"evaluations", r.evaluations},
             {"order", r.order},
             {"tau_m_initial", r.tau_m_initial},
             {"tau_m_final", r.tau_m_final},
             {"mainlobe_change", r.mainlobe_change()},
             {"status", r.status}};
}

inline void to_json(json& j, const BoxStats& b) {
    j = json{{"q1", b.q1},
             {"median", b.median},
             {"q3", b.q3},
             {"whisker_lo", b.whisker_lo},
             {"whisker_hi", b.whisker_hi},
             {"fence_lo", b.fence_lo},
             {"fence_hi", b.fence_hi},
             {"mean", b.mean},
             {"outliers", b.outliers}};
}

inline void to_json(json& j, const TrialRecord& t) {
    j = json{{"seed", t.seed},         {"A0", t.A0},
             {"A_opt", t.A_opt},       {"G", t.G},
             {"G_tilde", t.G_tilde},   {"isr_initial_db", t.isr_initial_db},
             {"isr_final_db", t.isr_final_db}, {"rms_ratio", t.rms_ratio},
             {"iterations", t.iterations}, {"feasible", t.feasible},
             {"status", t.status},     {"error", t.error}};
}

inline void to_json(json& j, const StudyReport& s) {
    j = json{{"K", s.K},
             {"tbp", s.tbp},
             {"symmetry", to_string(s.symmetry)},
             {"seed", s.seed},
             {"trials", s.trials.size()},
             {"G", s.G},
             {"isr_initial_db", s.isr_initial_db},
             {"isr_final_db", s.isr_final_db},
             {"median_G", s.median_G},
             {"mean_G", s.mean_G},
             {"all_feasible", s.all_feasible}};
}

inline void to_json(json& j, const PhaseCode& c) {
    j = json{{"N", c.size()}, {"thetas", c.thetas}, {"kind", c.kind}};
    json prov;
    if (c.kind == "mseq") {
        prov = json{{"degree", c.degree}, {"taps", c.taps}, {"seed_state", c.seed_state}, {"padded", c.padded}};
    } else if (c.kind == "can") {
        prov = json{{"seed", c.seed}, {"iterations", c.iterations}};
    } else if (c.kind == "random") {
        prov = json{{"seed", c.seed}};
    }
    j["provenance"] = prov;
}

inline void from_json(const json& j, PhaseCode& c) {
    c = PhaseCode{};
    j.at("thetas").get_to(c.thetas);
    c.kind = j.value("kind", std::string("custom"));
    if (c.thetas.size() < 2) throw Error("phase code needs at least 2 chips");
    if (j.contains("provenance") && j.at("provenance").is_object()) {
        const auto& p = j.at("provenance");
        c.degree = p.value("degree", 0);
        if (p.contains("taps")) p.at("taps").get_to(c.taps);
        c.seed_state = p.value("seed_state", 0u);
        c.padded = p.value("padded", false);
        c.seed = p.value("seed", std::uint64_t{0});
        c.iterations = p.value("iterations", 0);
    }
}

// ---- files ----------------------------------------------------------------

// Metadata header shared by every artifact.
inline json make_meta(const json& config, std::uint64_t seed, const std::string& kind) {
    return json{{"tool", "mtsfm"}, {"version", version}, {"seed", seed}, {"artifact", kind}, {"config", config}};
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed for " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

// Shortest round-trip formatting.
inline std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Numeric columns, optionally preceded by a text "label" column.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
};

inline std::string csv_string(const json& meta, const CsvTable& t) {
    const bool labelled = !t.labels.empty();
    if (labelled && t.labels.size() != t.rows.size()) throw Error("CSV label count mismatch");
    std::string s = "# " + meta.dump() + "\n";
    if (labelled) s += t.columns.empty() ? "label" : "label,";
    for (std::size_t i = 0; i < t.columns.size(); ++i) s += (i ? "," : "") + t.columns[i];
    s += "\n";
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        const auto& r = t.rows[k];
        if (r.size() != t.columns.size()) throw Error("CSV row width mismatch");
        if (labelled) s += t.labels[k] + (r.empty() ? "" : ",");
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) s += ",";
            s += fmt_num(r[i]);
        }
        s += "\n";
    }
    return s;
}

inline void write_csv(const std::filesystem::path& path, const json& meta, const CsvTable& t) {
    write_text_file(path, csv_string(meta, t));
}

// Parses a file produced by write_csv.
inline std::pair<json, CsvTable> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw Error("missing metadata line in " + path.string());
    json meta = json::parse(line.substr(2));
    CsvTable t;
    if (!std::getline(in, line)) throw Error("missing header in " + path.string());
    std::stringstream hs(line);
    for (std::string c; std::getline(hs, c, ',');) t.columns.push_back(c);
    const bool labelled = !t.columns.empty() && t.columns.front() == "label";
    if (labelled) t.columns.erase(t.columns.begin());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        bool first = true;
        for (std::string c; std::getline(ls, c, ',');) {
            if (labelled && first) t.labels.push_back(c);
            else row.push_back(std::stod(c));
            first = false;
        }
        t.rows.push_back(std::move(row));
    }
    return {meta, t};
}

inline CsvTable waveform_table(const SampledWaveform& w) {
    CsvTable t{{"t", "re", "im"}, {}, {}};
    t.rows.reserve(w.size());
    for (std::size_t n = 0; n < w.size(); ++n) t.rows.push_back({w.time(n), w.samples[n].real(), w.samples[n].imag()});
    return t;
}

// Power spectrum in dB relative to its peak.
inline CsvTable spectrum_table(const Spectrum& s) {
    CsvTable t{{"f", "power_db"}, {}, {}};
    double peak = 0.0;
    for (const auto& v : s.S) peak = std::max(peak, std::norm(v));
    t.rows.reserve(s.f.size());
    for (std::size_t i = 0; i < s.f.size(); ++i) {
        const double p = std::norm(s.S[i]);
        t.rows.push_back({s.f[i], p > 0.0 ? db10(p / peak) : -400.0});
    }
    return t;
}

inline CsvTable acf_table(std::span<const double> tau, std::span<const cplx> R) {
    CsvTable t{{"tau", "re", "im", "abs", "db"}, {}, {}};
    t.rows.reserve(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double a = std::abs(R[i]);
        t.rows.push_back({tau[i], R[i].real(), R[i].imag(), a, a > 0.0 ? 20.0 * std::log10(a) : -400.0});
    }
    return t;
}

// Binary AF grid: values as little-endian float64, row-major in tau, plus
// <stem>.json with the axes.
inline void write_af_binary(const std::filesystem::path& stem, const AmbiguitySurface& s, json meta) {
    if (s.values.size() != s.tau_grid.size() * s.nu_grid.size()) throw Error("AF grid shape mismatch");
    auto bin = stem;
    bin += ".bin";
    auto hdr = stem;
    hdr += ".json";
    std::string bytes(s.values.size() * 8, '\0');
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        auto u = std::bit_cast<std::uint64_t>(s.values[i]);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((u >> (8 * b)) & 0xffu);
    }
    write_text_file(bin, bytes);
    meta["data_file"] = bin.filename().string();
    meta["dtype"] = "float64";
    meta["byte_order"] = "little";
    meta["layout"] = "row-major";
    meta["shape"] = {s.tau_grid.size(), s.nu_grid.size()};
    meta["quantity"] = "|chi(tau,nu)|^2";
    meta["tau"] = s.tau_grid;
    meta["nu"] = s.nu_grid;
    write_json_file(hdr, meta);
}

inline AmbiguitySurface read_af_binary(const std::filesystem::path& stem) {
    auto hdr = stem;
    hdr += ".json";
    const json meta = read_json_file(hdr);
    AmbiguitySurface s;
    meta.at("tau").get_to(s.tau_grid);
    meta.at("nu").get_to(s.nu_grid);
    const auto path = stem.parent_path() / meta.at("data_file").get<std::string>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t n = s.tau_grid.size() * s.nu_grid.size();
    if (bytes.size() != n * 8) throw Error("AF data size mismatch in " + path.string());
    s.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b)
            u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)])) << (8 * b);
        s.values[i] = std::bit_cast<double>(u);
    }
    return s;
}

}  // namespace mtsfm
