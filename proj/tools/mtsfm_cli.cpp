// mtsfm: batch front-end for synthesis, analysis, optimization, trial
// studies and phase-code baselines. Every artifact carries a metadata echo of
// the resolved configuration, the seed and the toolkit version.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtsfm/mtsfm.hpp"

namespace fs = std::filesystem;
using namespace mtsfm;

namespace {

// JSON config files: top-level keys set global options, an object keyed by a
// subcommand name sets that subcommand's options. Keys are option long names.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j;
        try {
            j = json::parse(input);
        } catch (const json::parse_error& e) {
            throw CLI::ConversionError(std::string("malformed JSON config: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("JSON config must be an object");
        return items(j, "", {});
    }

private:
    static std::string scalar(const json& v) {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    }

    std::vector<CLI::ConfigItem> items(const json& j, const std::string& name, std::vector<std::string> prefix) const {
        std::vector<CLI::ConfigItem> out;
        // A region may be written as a JSON object; it travels as text.
        if (j.is_object() && (name.empty() || name.find("region") == std::string::npos)) {
            if (!name.empty()) prefix.push_back(name);
            for (auto it = j.begin(); it != j.end(); ++it) {
                auto sub = items(*it, it.key(), prefix);
                out.insert(out.end(), sub.begin(), sub.end());
            }
            return out;
        }
        CLI::ConfigItem item;
        item.name = name;
        item.parents = prefix;
        if (j.is_array()) {
            for (const auto& v : j) item.inputs.push_back(v.is_object() ? v.dump() : scalar(v));
        } else {
            item.inputs.push_back(j.is_object() ? j.dump() : scalar(j));
        }
        out.push_back(std::move(item));
        return out;
    }
};

struct Global {
    std::string out = ".";
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

// Resolved options of one subcommand (and the globals) as JSON.
json option_value(const CLI::Option* o) {
    if (o->get_expected_min() == 0) return o->count() > 0 && o->as<bool>();
    auto res = o->reduced_results();
    if (res.empty()) {
        const auto d = o->get_default_str();
        if (d.empty()) return nullptr;
        res = {d};
        // Vector defaults render as "[a,b]".
        if (o->get_items_expected_max() > 1 && d.size() >= 2 && d.front() == '[' && d.back() == ']') {
            res.clear();
            std::stringstream ss(d.substr(1, d.size() - 2));
            for (std::string item; std::getline(ss, item, ',');)
                if (!item.empty()) res.push_back(item);
        }
    }
    auto one = [](const std::string& s) -> json {
        if (s == "true") return true;
        if (s == "false") return false;
        try {
            std::size_t used = 0;
            const auto i = std::stoull(s, &used);
            if (used == s.size() && s.front() != '-' && s.front() != '+') return i;
        } catch (...) {
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used == s.size()) return v;
        } catch (...) {
        }
        if (!s.empty() && s.front() == '{') {
            try {
                return json::parse(s);
            } catch (...) {
            }
        }
        return s;
    };
    if (o->get_items_expected_max() > 1) {
        json arr = json::array();
        for (const auto& s : res) arr.push_back(one(s));
        return arr;
    }
    return one(res.front());
}

json resolved_config(const CLI::App& root, const CLI::App& sub) {
    json j;
    auto collect = [](const CLI::App& app, json& into) {
        for (const CLI::Option* o : app.get_options()) {
            const auto& name = o->get_lnames();
            if (name.empty() || name.front() == "help" || name.front() == "config" || name.front() == "version") continue;
            into[name.front()] = option_value(o);
        }
    };
    collect(root, j);
    json s;
    collect(sub, s);
    j[sub.get_name()] = s;
    j["subcommand"] = sub.get_name();
    return j;
}

struct Ctx {
    Global g;
    json config;

    json meta(const std::string& artifact) const { return make_meta(config, g.seed, artifact); }
    fs::path path(const std::string& name) const { return fs::path(g.out) / name; }
};

// ---- shared option groups -------------------------------------------------

struct Source {
    std::string preset;
    bool zero = false;
    bool random = false;
    std::string indices;
    std::size_t K = 32;
    double tbp = 200.0;
    std::string symmetry = "even";
    std::optional<double> T;
};

void add_source(CLI::App* app, Source& s) {
    app->add_option("--preset", s.preset, "Built-in design (table1)");
    app->add_flag("--zero", s.zero, "Unmodulated pulse");
    app->add_flag("--random", s.random, "Random thumbtack start (uses --K, --tbp, --symmetry, --seed)");
    app->add_option("--indices", s.indices, "Indices JSON {a0, alphas[], betas[], T}");
    app->add_option("--K", s.K, "Harmonics for --random/--zero")->capture_default_str();
    app->add_option("--tbp", s.tbp, "Time-bandwidth product for --random")->capture_default_str();
    app->add_option("--symmetry", s.symmetry, "even | odd | full")->capture_default_str();
    app->add_option("--T", s.T, "Pulse length (overrides the source)");
}

// Accepts a bare indices document, {"indices": ...} or an optimize report.
ModulationIndices load_indices(const std::string& path) {
    const json j = read_json_file(path);
    if (j.contains("report")) return j.at("report").at("final").get<ModulationIndices>();
    if (j.contains("indices")) return j.at("indices").get<ModulationIndices>();
    return j.get<ModulationIndices>();
}

PhaseCode load_code(const std::string& path) {
    const json j = read_json_file(path);
    return (j.contains("code") ? j.at("code") : j).get<PhaseCode>();
}

ModulationIndices resolve_source(const Source& s, std::uint64_t seed, bool allow_none = false) {
    const int count = !s.preset.empty() + s.zero + s.random + !s.indices.empty();
    if (count == 0 && allow_none) return {};
    if (count != 1) throw Error("give exactly one of --preset, --zero, --random, --indices");
    ModulationIndices idx;
    if (!s.preset.empty()) {
        if (s.preset != "table1") throw Error("unknown preset '" + s.preset + "'");
        idx = presets::table1();
    } else if (s.zero) {
        idx = presets::zero(s.K);
    } else if (s.random) {
        idx = random_thumbtack_init(s.K, s.tbp, parse_symmetry(s.symmetry), seed);
    } else {
        idx = load_indices(s.indices);
    }
    if (s.T) {
        if (!(*s.T > 0.0)) throw Error("--T must be positive");
        idx.T = *s.T;
    }
    idx.validate();
    return idx;
}

struct Sampling {
    double fs_mult = 10.0;
    std::optional<double> fs;
    std::string taper = "rect";
    double se_guard = 32.0;
};

void add_sampling(CLI::App* app, Sampling& s) {
    app->add_option("--fs-mult", s.fs_mult, "Sample rate as a multiple of max(swept bandwidth, 1/T); at least twice the SE band")->capture_default_str();
    app->add_option("--fs", s.fs, "Absolute sample rate (overrides --fs-mult)");
    app->add_option("--taper", s.taper, "rect | tukey:<alpha>")->capture_default_str();
    app->add_option("--se-guard", s.se_guard, "SE band is swept bandwidth + guard/T")->capture_default_str();
}

double se_band(const ModulationIndices& idx, const Sampling& s) { return swept_bandwidth(idx) + s.se_guard / idx.T; }

// Default rate: fs_mult * max(swept bandwidth, 1/T), and at least twice the SE band.
double sample_rate(const ModulationIndices& idx, const Sampling& s) {
    if (s.fs) return *s.fs;
    if (!(s.fs_mult > 0.0)) throw Error("--fs-mult must be positive");
    return std::max(s.fs_mult * std::max(swept_bandwidth(idx), 1.0 / idx.T), 2.0 * se_band(idx, s));
}

// Delay grid on exact sample lags.
std::vector<double> lag_grid(double fs, double lo, double hi, std::size_t n) {
    auto t = linspace(lo, hi, n);
    for (auto& v : t) v = static_cast<double>(std::llround(v * fs)) / fs;
    return t;
}

struct Measured {
    std::string label;
    SampledWaveform w;
    double tbp = 0.0;
    bool smooth = true;
};

json waveform_metrics(const Measured& m, const DelayDopplerRegion& isr_region, double band) {
    json j;
    j["label"] = m.label;
    j["tbp"] = m.tbp;
    j["fs"] = m.w.fs;
    j["samples"] = m.w.size();
    j["pmepr_db"] = pmepr(m.w);
    j["se"] = spectral_efficiency(m.w, band);
    j["se_band"] = band;
    const auto p = isr_sampled(m.w, isr_region, CorrelationOptions{m.smooth});
    j["isr_db"] = p.db();
    j["tau_m"] = p.tau_m;
    return j;
}

void write_comparison(const Ctx& ctx, const std::string& name, const json& rows) {
    CsvTable t{{"tbp", "pmepr_db", "se", "se_band", "isr_db", "tau_m"}, {}, {}};
    for (const auto& r : rows) {
        t.labels.push_back(r.at("label").get<std::string>());
        t.rows.push_back({r.at("tbp").get<double>(), r.at("pmepr_db").get<double>(), r.at("se").get<double>(),
                          r.at("se_band").get<double>(), r.at("isr_db").get<double>(), r.at("tau_m").get<double>()});
    }
    write_csv(ctx.path(name), ctx.meta("comparison"), t);
}

DelayDopplerRegion region_arg(const std::string& s) {
    if (!s.empty() && s.front() == '{') return json::parse(s).get<DelayDopplerRegion>();
    return parse_region(s);
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    Source src;
    Sampling smp;
    std::size_t pad = 8;
};

void cmd_synth(const Ctx& ctx, const SynthArgs& a) {
    const auto idx = resolve_source(a.src, ctx.g.seed);
    const double fs = sample_rate(idx, a.smp);
    const auto taper = parse_taper(a.smp.taper);
    const auto w = synthesize(idx, fs, taper);
    const double df = swept_bandwidth(idx);
    const double band = se_band(idx, a.smp);
    const auto spec = spectrum_fft(w, a.pad);

    write_json_file(ctx.path("indices.json"), json{{"meta", ctx.meta("indices")}, {"indices", idx}});
    write_csv(ctx.path("waveform.csv"), ctx.meta("waveform"), waveform_table(w));
    write_csv(ctx.path("spectrum.csv"), ctx.meta("spectrum"), spectrum_table(spec));
    json m;
    m["K"] = idx.K();
    m["T"] = idx.T;
    m["fs"] = w.fs;
    m["samples"] = w.size();
    m["taper"] = taper.describe();
    m["swept_bandwidth"] = df;
    m["tbp"] = df * idx.T;
    m["pmepr_db"] = pmepr(w);
    m["se"] = spectral_efficiency(w, band, a.pad);
    m["se_band"] = band;
    m["beta_rms_sq"] = rms_bandwidth_sq(idx);
    write_json_file(ctx.path("metrics.json"), json{{"meta", ctx.meta("metrics")}, {"metrics", m}});
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeArgs {
    Source src;
    Sampling smp;
    std::vector<std::string> isr_regions{"band::0.2"};
    std::vector<std::string> volume_regions;
    std::size_t acf_points = 1025;
    bool no_af = false;
    double af_tau_step = 0.4;  // in 1/B
    double af_nu_step = 0.5;   // in 1/T
    std::optional<double> af_nu_max;
};

void cmd_analyze(const Ctx& ctx, const AnalyzeArgs& a) {
    const auto idx = resolve_source(a.src, ctx.g.seed);
    const auto taper = parse_taper(a.smp.taper);
    const auto w = synthesize(idx, sample_rate(idx, a.smp), taper);
    const double fs = w.fs;
    const auto w_rect = taper.kind == TaperKind::rectangular ? w : synthesize(idx, fs);
    const double T = idx.T;
    const double B = resolution_bandwidth(idx);
    const QuadConfig cfg;
    const ClosedFormModel model(idx, cfg.tol);
    const double tau_m = mainlobe_null(model, B, cfg);

    // ACF: closed form against the direct correlation of the rectangular samples.
    if (a.acf_points < 2) throw Error("--acf-points must be at least 2");
    const auto taus = lag_grid(fs, -T, T, a.acf_points);
    const auto Rc = model.acf(taus);
    const auto Rd = acf_direct(w_rect, taus);
    double resid = 0.0;
    for (std::size_t i = 0; i < taus.size(); ++i) resid = std::max(resid, std::abs(Rc[i] - Rd[i]));
    const auto Rt = acf_direct(w, taus);
    CsvTable acf{{"tau", "closed_re", "closed_im", "closed_db", "direct_re", "direct_im", "direct_db"}, {}, {}};
    auto dbv = [](cplx v) { return std::abs(v) > 0.0 ? 20.0 * std::log10(std::abs(v)) : -400.0; };
    for (std::size_t i = 0; i < taus.size(); ++i)
        acf.rows.push_back({taus[i], Rc[i].real(), Rc[i].imag(), dbv(Rc[i]), Rt[i].real(), Rt[i].imag(), dbv(Rt[i])});
    json acf_meta = ctx.meta("acf");
    acf_meta["closed_vs_direct_max_abs"] = resid;
    acf_meta["direct_taper"] = taper.describe();
    write_csv(ctx.path("acf.csv"), acf_meta, acf);

    json m;
    m["tbp"] = swept_bandwidth(idx) * T;
    m["resolution_bandwidth"] = B;
    m["tau_m"] = tau_m;
    m["order"] = model.order();
    m["pmepr_db"] = pmepr(w);
    m["beta_rms_sq"] = rms_bandwidth_sq(idx);
    m["closed_vs_direct_max_abs"] = resid;
    m["isr"] = json::array();
    for (const auto& rs : a.isr_regions) {
        const auto r = region_arg(rs);
        const auto p = isr_parts(model, make_isr_grid(r, T, B, tau_m, cfg), tau_m);
        const auto ps = isr_sampled(w, r);
        m["isr"].push_back({{"region", r}, {"closed_form_db", p.db()}, {"sampled_db", ps.db()}, {"sampled_tau_m", ps.tau_m}});
    }
    m["volume"] = json::array();
    for (const auto& rs : a.volume_regions) {
        const auto r = region_arg(rs);
        const auto v = af_region_volume_detail(idx, r, cfg);
        m["volume"].push_back({{"region", r}, {"volume", v.volume}, {"area", v.area}, {"hofstetter_ok", v.hofstetter_ok}});
    }

    if (!a.no_af) {
        // Lag step of about af_tau_step/B and a Doppler step dividing fs.
        const auto lag = std::max<long long>(1, std::llround(a.af_tau_step * fs / B));
        const auto nlag = static_cast<long long>(w.size()) / lag;
        std::vector<double> tg;
        for (long long k = -nlag; k <= nlag; ++k) tg.push_back(static_cast<double>(k * lag) / fs);
        const auto Lf = std::max<long long>(std::llround(fs * T / a.af_nu_step), static_cast<long long>(w.size()));
        const double dnu = fs / static_cast<double>(Lf);
        const double nu_max = a.af_nu_max ? *a.af_nu_max : swept_bandwidth(idx) + 16.0 / T;
        const auto nn = static_cast<long long>(std::floor(nu_max / dnu));
        std::vector<double> ng;
        for (long long k = -nn; k <= nn; ++k) ng.push_back(static_cast<double>(k) * dnu);
        const auto surf = af_direct(w, tg, ng);
        double peak = 0.0;
        for (double v : surf.values) peak = std::max(peak, v);
        json af_meta = ctx.meta("af");
        af_meta["volume"] = surf.volume();
        write_af_binary(ctx.path("af"), surf, af_meta);
        m["af"] = {{"volume", surf.volume()}, {"peak", peak}, {"shape", {tg.size(), ng.size()}}};
    }
    write_json_file(ctx.path("metrics.json"), json{{"meta", ctx.meta("metrics")}, {"metrics", m}});
}

// ---- optimize -------------------------------------------------------------

struct OptimizeArgs {
    Source src;
    std::string objective = "isr";
    std::string region;
    double delta = 0.2;
    bool no_rms = false;
    std::string free_set;
    int max_iters = 500;
    double gradient_tol = 1e-6;
    double step_tol = 1e-10;
    double initial_step = 1.0;
    double order_margin = 1.25;
    bool perturb = false;
    bool af = false;
};

Symmetry infer_free_set(const ModulationIndices& idx) {
    const bool a = std::any_of(idx.alphas.begin(), idx.alphas.end(), [](double v) { return v != 0.0; });
    const bool b = std::any_of(idx.betas.begin(), idx.betas.end(), [](double v) { return v != 0.0; });
    if (a && b) return Symmetry::full;
    return b ? Symmetry::odd : Symmetry::even;
}

CsvTable closed_acf_table(const ModulationIndices& idx, std::size_t n) {
    const auto t = linspace(0.0, idx.T, n);
    const auto R = acf_closed_form(idx, t);
    return acf_table(t, R);
}

void cmd_optimize(const Ctx& ctx, const OptimizeArgs& a) {
    const auto idx = resolve_source(a.src, ctx.g.seed);
    OptimizeProblem p;
    p.objective = parse_objective(a.objective);
    if (!a.region.empty()) p.region = region_arg(a.region);
    else if (p.objective == ObjectiveKind::af_volume) p.region = DelayDopplerRegion::ellipse(0.0, 0.0, 0.1, 0.5);
    p.delta = a.delta;
    p.rms_constraint = !a.no_rms;
    p.free_set = a.free_set.empty() ? infer_free_set(idx) : parse_symmetry(a.free_set);
    p.stop.max_iters = a.max_iters;
    p.stop.gradient_tol = a.gradient_tol;
    p.stop.step_tol = a.step_tol;
    p.stop.initial_step = a.initial_step;
    p.order_margin = a.order_margin;
    p.perturb_zero_coordinates = a.perturb;
    p.seed = ctx.g.seed;
    p.threads = ctx.g.threads;
    const auto rep = minimize(idx, p);

    json r = rep;
    if (p.objective == ObjectiveKind::isr) {
        r["objective_initial_db"] = db10(rep.objective_initial);
        r["objective_final_db"] = db10(rep.objective_final);
    }
    write_json_file(ctx.path("report.json"), json{{"meta", ctx.meta("optimize_report")}, {"problem", p}, {"report", r}});
    write_json_file(ctx.path("final_indices.json"), json{{"meta", ctx.meta("indices")}, {"indices", rep.final_design}});
    write_csv(ctx.path("acf_before.csv"), ctx.meta("acf_before"), closed_acf_table(rep.initial, 2001));
    write_csv(ctx.path("acf_after.csv"), ctx.meta("acf_after"), closed_acf_table(rep.final_design, 2001));
    if (a.af) {
        for (const auto& [name, d] : {std::pair{"af_before", rep.initial}, std::pair{"af_after", rep.final_design}}) {
            const double T = d.T;
            const auto tg = linspace(-0.5 * T, 0.5 * T, 201);
            const auto ng = linspace(-4.0 / T, 4.0 / T, 81);
            const ClosedFormModel model(d, p.quad.tol);
            AmbiguitySurface s;
            s.tau_grid = tg;
            s.nu_grid = ng;
            for (double t : tg) {
                const auto row = model.af_row(t, ng);
                for (const auto& v : row) s.values.push_back(std::norm(v));
            }
            write_af_binary(ctx.path(name), s, ctx.meta(name));
        }
    }
}

// ---- trials ---------------------------------------------------------------

struct TrialsArgs {
    std::size_t n = 10;
    std::size_t K = 32;
    double tbp = 64.0;
    std::string symmetry = "even";
    std::string region = "band::1";
    double delta = 0.2;
    int max_iters = 500;
};

void cmd_trials(const Ctx& ctx, const TrialsArgs& a) {
    OptimizeProblem p;
    p.region = region_arg(a.region);
    p.delta = a.delta;
    p.stop.max_iters = a.max_iters;
    const auto st = trial_study(a.n, a.K, a.tbp, parse_symmetry(a.symmetry), p, ctx.g.seed, ctx.g.threads);
    CsvTable t{{"seed", "A0", "A_opt", "G", "G_tilde", "isr_initial_db", "isr_final_db", "rms_ratio", "iters", "feasible"},
               {},
               {}};
    for (const auto& r : st.trials)
        t.rows.push_back({static_cast<double>(r.seed), r.A0, r.A_opt, r.G, r.G_tilde, r.isr_initial_db, r.isr_final_db,
                          r.rms_ratio, static_cast<double>(r.iterations), r.feasible ? 1.0 : 0.0});
    write_csv(ctx.path("trials.csv"), ctx.meta("trials"), t);
    json failures = json::array();
    for (const auto& r : st.trials)
        if (!r.error.empty()) failures.push_back({{"seed", r.seed}, {"error", r.error}});
    json s = st;
    s["failures"] = failures;
    write_json_file(ctx.path("summary.json"), json{{"meta", ctx.meta("trials_summary")}, {"problem", p}, {"summary", s}});
}

// ---- pc -------------------------------------------------------------------

struct PcArgs {
    bool mseq = false;
    bool can = false;
    bool random = false;
    std::string code;
    int degree = 6;
    std::uint32_t seed_state = 1;
    bool no_pad = false;
    std::size_t N = 64;
    int can_max_iters = 10000;
    double can_tol = 1e-5;
    bool biphase = false;
    double T = 1.0;
    std::optional<double> fs;
    std::string taper = "rect";
    std::string region = "band::1";
    std::optional<double> band;
    double se_guard = 32.0;
    std::vector<std::string> mtsfm;
};

void cmd_pc(const Ctx& ctx, const PcArgs& a) {
    const int count = a.mseq + a.can + a.random + !a.code.empty();
    if (count != 1) throw Error("give exactly one of --mseq, --can, --random, --code");
    PhaseCode c;
    if (a.mseq) {
        c = mseq(a.degree, a.seed_state);
        if (!a.no_pad) c = pad_to_pow2(c);
    } else if (a.can) {
        c = can_optimize(a.N, ctx.g.seed, a.can_max_iters, a.can_tol);
    } else if (a.random) {
        c = random_phase_code(a.N, ctx.g.seed, a.biphase);
    } else {
        c = load_code(a.code);
    }
    const double N = static_cast<double>(c.size());
    const double fs = a.fs ? *a.fs : 10.0 * N / a.T;
    const auto pc = pc_synthesize(c, a.T, fs, parse_taper(a.taper));
    const double band = a.band ? *a.band : (N + a.se_guard) / a.T;
    const auto region = region_arg(a.region);

    write_json_file(ctx.path("code.json"), json{{"meta", ctx.meta("phase_code")}, {"code", c}});
    write_csv(ctx.path("waveform.csv"), ctx.meta("waveform"), waveform_table(pc.waveform));
    write_csv(ctx.path("spectrum.csv"), ctx.meta("spectrum"), spectrum_table(spectrum_fft(pc.waveform)));

    json rows = json::array();
    auto pm = waveform_metrics(Measured{c.kind, pc.waveform, N, false}, region, band);
    pm["merit_factor"] = merit_factor(c);
    pm["chips"] = c.size();
    pm["chip_duration"] = pc.chip_duration;
    rows.push_back(pm);
    for (std::size_t i = 0; i < a.mtsfm.size(); ++i) {
        const auto idx = load_indices(a.mtsfm[i]);
        const auto w = synthesize(idx, default_sample_rate(idx));
        rows.push_back(waveform_metrics(Measured{"mtsfm:" + fs::path(a.mtsfm[i]).filename().string(), w,
                                                 swept_bandwidth(idx) * idx.T, true},
                                        region, band));
    }
    write_json_file(ctx.path("metrics.json"), json{{"meta", ctx.meta("metrics")}, {"metrics", rows}});
    if (!a.mtsfm.empty()) write_comparison(ctx, "comparison.csv", rows);
}

// ---- compare --------------------------------------------------------------

struct CompareArgs {
    std::vector<std::string> indices;
    std::vector<std::string> codes;
    std::vector<std::string> reports;
    std::string region = "band::1";
    std::optional<double> band;
    double se_guard = 32.0;
    double fs_mult = 10.0;
    std::string taper = "rect";
};

void cmd_compare(const Ctx& ctx, const CompareArgs& a) {
    std::vector<Measured> items;
    const auto taper = parse_taper(a.taper);
    double widest = 0.0, T = 0.0;
    for (const auto& p : a.indices) {
        const auto idx = load_indices(p);
        const double df = swept_bandwidth(idx);
        items.push_back({fs::path(p).filename().string(),
                         synthesize(idx, a.fs_mult * std::max(df, 1.0 / idx.T), taper), df * idx.T, true});
        widest = std::max(widest, df);
        T = idx.T;
    }
    for (const auto& p : a.reports) {
        const auto idx = load_indices(p);
        const double df = swept_bandwidth(idx);
        items.push_back({fs::path(p).filename().string(),
                         synthesize(idx, a.fs_mult * std::max(df, 1.0 / idx.T), taper), df * idx.T, true});
        widest = std::max(widest, df);
        T = idx.T;
    }
    for (const auto& p : a.codes) {
        const auto c = load_code(p);
        const double N = static_cast<double>(c.size());
        const double Tc = T > 0.0 ? T : 1.0;
        items.push_back({fs::path(p).filename().string(), pc_synthesize(c, Tc, a.fs_mult * N / Tc, taper).waveform, N, false});
        widest = std::max(widest, N / Tc);
        T = Tc;
    }
    if (items.empty()) throw Error("nothing to compare: give --indices, --report or --code");
    const double band = a.band ? *a.band : widest + a.se_guard / T;
    const auto region = region_arg(a.region);
    json rows = json::array();
    for (const auto& m : items) rows.push_back(waveform_metrics(m, region, band));
    write_json_file(ctx.path("compare.json"), json{{"meta", ctx.meta("comparison")}, {"rows", rows}});
    write_comparison(ctx, "compare.csv", rows);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MTSFM waveform design toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    app.config_formatter(std::make_shared<JsonConfig>());
    app.set_config("--config", "", "JSON config file (flags override file values)");
    app.set_version_flag("--version", std::string(version));
    Global g;
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::Range(1u, 1024u));

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Synthesize a waveform, its spectrum and metrics");
    add_source(s_synth, synth.src);
    add_sampling(s_synth, synth.smp);
    s_synth->add_option("--pad", synth.pad, "Spectrum zero-padding factor")->capture_default_str();

    AnalyzeArgs an;
    auto* s_an = app.add_subcommand("analyze", "ACF, AF grid, ISR and region volumes");
    add_source(s_an, an.src);
    add_sampling(s_an, an.smp);
    s_an->add_option("--region", an.isr_regions, "ISR delay band(s), e.g. band::0.2")->capture_default_str();
    s_an->add_option("--volume-region", an.volume_regions, "AF volume region(s), e.g. ellipse:0:0:0.1:0.5");
    s_an->add_option("--acf-points", an.acf_points, "ACF delay points over [-T, T]")->capture_default_str();
    s_an->add_flag("--no-af", an.no_af, "Skip the AF grid");
    s_an->add_option("--af-tau-step", an.af_tau_step, "AF delay step in resolution cells")->capture_default_str();
    s_an->add_option("--af-nu-step", an.af_nu_step, "AF Doppler step in units of 1/T")->capture_default_str();
    s_an->add_option("--af-nu-max", an.af_nu_max, "AF Doppler half-span (default swept bandwidth + 16/T)");

    OptimizeArgs op;
    auto* s_op = app.add_subcommand("optimize", "Constrained sidelobe minimization");
    add_source(s_op, op.src);
    s_op->add_option("--objective", op.objective, "isr | af_volume | acf_area")->capture_default_str();
    s_op->add_option("--region", op.region, "Objective region (default band::0.2 or ellipse:0:0:0.1:0.5)");
    s_op->add_option("--delta", op.delta, "RMS bandwidth corridor half-width")->capture_default_str();
    s_op->add_flag("--no-rms", op.no_rms, "Drop the RMS bandwidth constraint");
    s_op->add_option("--free-set", op.free_set, "even | odd | full (default from the start)");
    s_op->add_option("--max-iters", op.max_iters)->capture_default_str();
    s_op->add_option("--gradient-tol", op.gradient_tol)->capture_default_str();
    s_op->add_option("--step-tol", op.step_tol)->capture_default_str();
    s_op->add_option("--initial-step", op.initial_step)->capture_default_str();
    s_op->add_option("--order-margin", op.order_margin)->capture_default_str();
    s_op->add_flag("--perturb-zeros", op.perturb, "Seeded 1e-8 perturbation of zero coordinates");
    s_op->add_flag("--af", op.af, "Also write closed-form AF grids before and after");

    TrialsArgs tr;
    auto* s_tr = app.add_subcommand("trials", "Multi-trial optimization study from random starts");
    s_tr->add_option("--n", tr.n, "Number of trials")->capture_default_str();
    s_tr->add_option("--K", tr.K)->capture_default_str();
    s_tr->add_option("--tbp", tr.tbp)->capture_default_str();
    s_tr->add_option("--symmetry", tr.symmetry)->capture_default_str();
    s_tr->add_option("--region", tr.region)->capture_default_str();
    s_tr->add_option("--delta", tr.delta)->capture_default_str();
    s_tr->add_option("--max-iters", tr.max_iters)->capture_default_str();

    PcArgs pc;
    auto* s_pc = app.add_subcommand("pc", "Phase-coded baselines (m-sequence, CAN)");
    s_pc->add_flag("--mseq", pc.mseq, "Maximal-length binary sequence");
    s_pc->add_flag("--can", pc.can, "CAN polyphase code from a seeded random start");
    s_pc->add_flag("--random", pc.random, "Random phase code");
    s_pc->add_option("--code", pc.code, "Phase code JSON");
    s_pc->add_option("--degree", pc.degree)->capture_default_str();
    s_pc->add_option("--seed-state", pc.seed_state)->capture_default_str();
    s_pc->add_flag("--no-pad", pc.no_pad, "Keep the 2^n - 1 m-sequence length");
    s_pc->add_option("--N", pc.N)->capture_default_str();
    s_pc->add_option("--can-max-iters", pc.can_max_iters)->capture_default_str();
    s_pc->add_option("--can-tol", pc.can_tol)->capture_default_str();
    s_pc->add_flag("--biphase", pc.biphase, "Random code restricted to {0, pi}");
    s_pc->add_option("--T", pc.T)->capture_default_str();
    s_pc->add_option("--fs", pc.fs, "Sample rate (default 10 N/T)");
    s_pc->add_option("--taper", pc.taper)->capture_default_str();
    s_pc->add_option("--region", pc.region, "ISR delay band")->capture_default_str();
    s_pc->add_option("--band", pc.band, "SE band (default (N + guard)/T)");
    s_pc->add_option("--se-guard", pc.se_guard)->capture_default_str();
    s_pc->add_option("--mtsfm", pc.mtsfm, "MTSFM indices JSON to tabulate alongside");

    CompareArgs cmp;
    auto* s_cmp = app.add_subcommand("compare", "Metric table across designs and codes");
    s_cmp->add_option("--indices", cmp.indices, "Indices JSON file(s)");
    s_cmp->add_option("--code", cmp.codes, "Phase code JSON file(s)");
    s_cmp->add_option("--report", cmp.reports, "Optimize report JSON file(s); the final design is used");
    s_cmp->add_option("--region", cmp.region)->capture_default_str();
    s_cmp->add_option("--band", cmp.band, "SE band (default widest bandwidth + guard/T)");
    s_cmp->add_option("--se-guard", cmp.se_guard)->capture_default_str();
    s_cmp->add_option("--fs-mult", cmp.fs_mult)->capture_default_str();
    s_cmp->add_option("--taper", cmp.taper)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        Ctx ctx;
        ctx.g = g;
        const CLI::App* sub = app.get_subcommands().front();
        ctx.config = resolved_config(app, *sub);
        fs::create_directories(g.out);
        const auto& name = sub->get_name();
        if (name == "synth") cmd_synth(ctx, synth);
        else if (name == "analyze") cmd_analyze(ctx, an);
        else if (name == "optimize") cmd_optimize(ctx, op);
        else if (name == "trials") cmd_trials(ctx, tr);
        else if (name == "pc") cmd_pc(ctx, pc);
        else if (name == "compare") cmd_compare(ctx, cmp);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
