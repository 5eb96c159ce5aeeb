#pragma once

// Command-line front end. Needs CLI11.hpp on the include path.
//
// Settings come from flags, optionally preceded by a JSON config file
// (--config). The config file has the shape printed by --print-config:
// global keys at the top level, per-command keys under the command name.
// Flags given on the command line win over the file.
//
// Exit codes: 0 success, 2 usage, 3 input data, 4 numerical failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "biopar/eval.hpp"
#include "biopar/model_io.hpp"
#include "biopar/retrieval.hpp"
#include "biopar/simdb.hpp"
#include "biopar/uncert.hpp"

namespace biopar::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kInputData = 3, kNumerical = 4 };

namespace detail {

using nlohmann::json;
namespace fs = std::filesystem;

/// Options of one command, remembered so that config files can fill them
/// and --print-config can echo them.
struct Registry {
    struct Entry {
        CLI::Option* opt;
        std::function<void(const json&)> set;
        std::function<json()> get;
        bool required = false;
        bool from_config = false;
    };
    std::map<std::string, Entry> entries;

    template <class T>
    CLI::Option* add(CLI::App* app, const std::string& name, T& var, std::string desc, bool required = false) {
        if (required) desc += " (required)";
        auto* o = app->add_option("--" + name, var, desc);
        if (!required) o->capture_default_str();
        if constexpr (requires { var.begin(); } && !std::is_same_v<T, std::string>) o->delimiter(',');
        entries[name] = {o, [&var, name](const json& j) {
                             try {
                                 var = j.get<T>();
                             } catch (const json::exception&) {
                                 throw ConfigError("config: key '" + name + "' has the wrong type");
                             }
                         },
                         [&var] { return json(var); }, required, false};
        return o;
    }

    void apply(const json& obj, const std::string& where) {
        if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
        for (const auto& [key, value] : obj.items()) {
            auto it = entries.find(key);
            if (it == entries.end()) throw ConfigError("config: unknown key '" + key + "' in " + where);
            if (it->second.opt->count() > 0) continue;  // command line wins
            it->second.set(value);
            it->second.from_config = true;
        }
    }

    void check_required(const std::string& cmd) const {
        for (const auto& [name, e] : entries)
            if (e.required && e.opt->count() == 0 && !e.from_config) throw ConfigError(cmd + ": --" + name + " is required");
    }

    json dump() const {
        json j = json::object();
        for (const auto& [name, e] : entries)
            if (!e.required || e.opt->count() > 0 || e.from_config) j[name] = e.get();
        return j;
    }
};

inline void require_file(const std::string& path, const std::string& flag) {
    if (path.empty()) throw ConfigError("--" + flag + " is required");
    if (!fs::is_regular_file(path)) throw ConfigError("--" + flag + ": no such file '" + path + "'");
}

inline std::vector<eval::Method> parse_methods(const std::vector<std::string>& names) {
    if (names.empty()) throw ConfigError("--methods must list at least one method");
    std::vector<eval::Method> m;
    for (const auto& s : names) m.push_back(eval::method_from_string(s));
    return m;
}

/// Reads the red,nir,mir columns of a CSV into an n x 3 matrix.
inline Matrix read_k0_csv(const fs::path& path) {
    const auto t = io::read_csv(path);
    const std::string ctx = path.filename().string();
    std::array<int, kBands> cols{};
    for (int b = 0; b < kBands; ++b) cols[static_cast<std::size_t>(b)] = t.require(std::string(kBandNames[static_cast<std::size_t>(b)]), ctx);
    Matrix x(static_cast<Eigen::Index>(t.rows.size()), kBands);
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (int b = 0; b < kBands; ++b) {
            const double v = io::parse_double(t.rows[r][static_cast<std::size_t>(cols[static_cast<std::size_t>(b)])]);
            if (!std::isfinite(v)) throw DataError(ctx + ": row " + std::to_string(r + 1) + ": non-finite reflectance");
            x(static_cast<Eigen::Index>(r), b) = v;
        }
    if (x.rows() == 0) throw DataError(ctx + ": no rows");
    return x;
}

inline std::pair<int, int> parse_size(const std::string& s) {
    const auto x = s.find('x');
    try {
        if (x == std::string::npos) throw std::invalid_argument(s);
        std::size_t p1 = 0, p2 = 0;
        const int w = std::stoi(s.substr(0, x), &p1);
        const int h = std::stoi(s.substr(x + 1), &p2);
        if (p1 != x || p2 != s.size() - x - 1 || w <= 0 || h <= 0) throw std::invalid_argument(s);
        return {w, h};
    } catch (const std::logic_error&) {
        throw ConfigError("scene size must look like WxH, got '" + s + "'");
    }
}

struct MethodOptions {
    std::string cost = "sq-loglik";
    int restarts = 5;
    int max_iter = 200;
    int hyperopt_subset = 500;
    int cv_subset = 1000;
    int folds = 5;
    int epochs = 500;
    int nn_inits = 5;

    void add(CLI::App* app, Registry& reg) {
        reg.add(app, "cost", cost, "GPR joint cost: sq-loglik (squared log-likelihoods) or sum-nll");
        reg.add(app, "restarts", restarts, "GPR hyperparameter restarts");
        reg.add(app, "max-iter", max_iter, "GPR optimiser iterations per restart");
        reg.add(app, "hyperopt-subset", hyperopt_subset, "GPR: records used for hyperparameter search");
        reg.add(app, "cv-subset", cv_subset, "KRR: records used for cross-validation");
        reg.add(app, "folds", folds, "KRR cross-validation folds");
        reg.add(app, "epochs", epochs, "NN maximum epochs");
        reg.add(app, "nn-inits", nn_inits, "NN random initialisations per grid point");
    }

    eval::MethodConfigs configs() const {
        if (hyperopt_subset < 2 || cv_subset < 2) throw ConfigError("--hyperopt-subset and --cv-subset must be >= 2");
        eval::MethodConfigs c;
        c.gpr.cost = joint_cost_from_string(cost);
        c.gpr.restarts = restarts;
        c.gpr.max_iter = max_iter;
        c.gpr.hyperopt_subset = hyperopt_subset;
        c.krr.cv_subset = cv_subset;
        c.krr.k_folds = folds;
        c.nn.epochs = epochs;
        c.nn.n_init = nn_inits;
        return c;
    }
};

/// Database construction shared by commands that simulate on the fly.
struct DbOptions {
    int n = 2950;
    double noise = 0.015;
    std::string model = "toy";
    std::string spec;
    std::string soils;

    void add(CLI::App* app, Registry& reg, int default_n, bool with_sources = true) {
        n = default_n;
        reg.add(app, "n", n, "number of simulated records");
        reg.add(app, "noise", noise, "Gaussian reflectance noise std added to every band");
        if (with_sources) {
            reg.add(app, "model", model, "forward model id");
            reg.add(app, "spec", spec, "JSON distribution spec replacing the default parameter laws");
            reg.add(app, "soils", soils, "soil library CSV (id,red,nir,mir)");
        }
    }

    simdb::BuildOptions build(std::uint64_t seed) const {
        if (n < 1) throw ConfigError("--n must be >= 1");
        simdb::BuildOptions b;
        b.n = n;
        b.seed = seed;
        b.noise = {noise, derive_seed(seed, 2)};
        b.model_id = model;
        if (!spec.empty()) {
            require_file(spec, "spec");
            std::ifstream in(spec);
            try {
                b.spec = simdb::distribution_spec_from_json(json::parse(in));
            } catch (const json::exception& e) {
                throw ConfigError(spec + ": " + e.what());
            }
        }
        if (!soils.empty()) {
            require_file(soils, "soils");
            b.soils = simdb::read_soil_library(soils);
        }
        return b;
    }
};

struct Context {
    std::uint64_t seed = 0;
    int workers = 1;
    std::string stage = "setup";
    json outputs = json::array();
    std::ostream* out = &std::cout;

    void produced(const fs::path& p) { outputs.push_back(p.string()); }
};

}  // namespace detail

/// Runs one command line. Messages go to `out` and `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace detail;
    CLI::App app{"Biophysical parameter retrieval from surface reflectance", "biopar"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1, 1);
    app.option_defaults()->always_capture_default();

    Context ctx;
    ctx.out = &out;
    Registry global;
    global.add(&app, "seed", ctx.seed, "global random seed");
    global.add(&app, "workers", ctx.workers, "worker threads for data-parallel stages");
    std::string config_path, manifest_path;
    bool print_config = false;
    app.add_option("--config", config_path, "JSON config file; flags override its values");
    app.add_flag("--print-config", print_config, "print the effective configuration as JSON and exit");
    app.add_option("--manifest", manifest_path, "run manifest path (default derived from the output)");

    std::map<std::string, Registry> regs;
    std::map<std::string, std::function<fs::path()>> runners;  // returns the default manifest path
    auto command = [&](const std::string& name, const std::string& desc) {
        auto* sub = app.add_subcommand(name, desc);
        sub->fallthrough();
        sub->footer("Global options (also accepted after the command):\n"
                    "  --seed UINT [0]       global random seed\n"
                    "  --workers INT [1]     worker threads for data-parallel stages\n"
                    "  --config TEXT         JSON config file; flags override its values\n"
                    "  --print-config        print the effective configuration as JSON and exit\n"
                    "  --manifest TEXT       run manifest path (default derived from the output)");
        return sub;
    };

    // simulate ---------------------------------------------------------------
    DbOptions sim_db;
    std::string sim_out, scene_out, scene_size = "64x64";
    double scene_err = 0.03;
    {
        auto* c = command("simulate", "simulate a training database with the toy canopy model");
        auto& r = regs["simulate"];
        sim_db.add(c, r, 2950);
        r.add(c, "out", sim_out, "output simulation CSV", true);
        r.add(c, "scene-out", scene_out, "also write a synthetic input scene to this path");
        r.add(c, "scene-size", scene_size, "synthetic scene size WxH");
        r.add(c, "scene-err", scene_err, "per-band reflectance error of the synthetic scene");
        runners["simulate"] = [&] {
            ctx.stage = "simulation";
            const auto db = simdb::build_database(sim_db.build(ctx.seed));
            ctx.stage = "export";
            simdb::export_simulations(db, sim_out);
            ctx.produced(sim_out);
            if (!scene_out.empty()) {
                ctx.stage = "scene";
                const auto [w, h] = parse_size(scene_size);
                raster::write_scene(eval::synthetic_scene(w, h, scene_err, derive_seed(ctx.seed, 3)), scene_out);
                ctx.produced(scene_out);
                ctx.produced(raster::sidecar_path(scene_out));
            }
            out << "wrote " << db.size() << " records to " << sim_out << '\n';
            return fs::path(sim_out + ".manifest.json");
        };
    }

    // import-sims ------------------------------------------------------------
    std::string imp_input, imp_manifest, imp_out;
    std::array<std::string, kBands> imp_srf;
    {
        auto* c = command("import-sims", "import externally simulated records into a simulation CSV");
        auto& r = regs["import-sims"];
        r.add(c, "input", imp_input, "band-level simulation CSV (red,nir,mir,lai,fvc,fapar[,p_*])");
        r.add(c, "manifest", imp_manifest, "spectral manifest CSV (spectrum,lai,fvc,fapar[,p_*])");
        r.add(c, "srf-red", imp_srf[0], "red spectral response CSV (wavelength_nm,response)");
        r.add(c, "srf-nir", imp_srf[1], "NIR spectral response CSV");
        r.add(c, "srf-mir", imp_srf[2], "MIR spectral response CSV");
        r.add(c, "out", imp_out, "output simulation CSV", true);
        runners["import-sims"] = [&] {
            if (imp_input.empty() == imp_manifest.empty()) throw ConfigError("import-sims: give exactly one of --input and --manifest");
            simdb::SimulationDatabase db;
            ctx.stage = "import";
            if (!imp_input.empty()) {
                require_file(imp_input, "input");
                db = simdb::import_simulations(imp_input);
            } else {
                require_file(imp_manifest, "manifest");
                std::array<rtm::Spectrum, kBands> srfs;
                for (int b = 0; b < kBands; ++b) {
                    const auto& p = imp_srf[static_cast<std::size_t>(b)];
                    require_file(p, "srf-" + std::string(kBandNames[static_cast<std::size_t>(b)]));
                    srfs[static_cast<std::size_t>(b)] = simdb::read_spectrum_csv(p, "response");
                }
                db = simdb::import_spectral_simulations(imp_manifest, srfs);
            }
            ctx.stage = "export";
            simdb::export_simulations(db, imp_out);
            ctx.produced(imp_out);
            out << "imported " << db.size() << " records to " << imp_out << '\n';
            return fs::path(imp_out + ".manifest.json");
        };
    }

    // train ------------------------------------------------------------------
    std::string tr_db, tr_method = "gpr", tr_mode = "multi", tr_out;
    MethodOptions tr_opts;
    {
        auto* c = command("train", "train a retrieval model on a simulation CSV");
        auto& r = regs["train"];
        r.add(c, "db", tr_db, "simulation CSV", true);
        r.add(c, "method", tr_method, "gpr | krr | nn");
        r.add(c, "mode", tr_mode, "multi (one model for all outputs) | single (one per output)");
        tr_opts.add(c, r);
        r.add(c, "out", tr_out, "output model file", true);
        runners["train"] = [&] {
            require_file(tr_db, "db");
            const auto method = eval::method_from_string(tr_method);
            const auto mode = output_mode_from_string(tr_mode);
            const auto cfgs = tr_opts.configs();
            ctx.stage = "loading database";
            const auto db = simdb::import_simulations(tr_db);
            ctx.stage = "training";
            const auto t0 = std::chrono::steady_clock::now();
            const AnyModel model = eval::train_model(method, mode, db.inputs(), db.targets(), cfgs, ctx.seed);
            ctx.stage = "saving model";
            save_model(model, fs::path(tr_out));
            ctx.produced(tr_out);
            out << "trained " << tr_method << "/" << tr_mode << " on " << db.size() << " records in "
                << io::format_double(eval::seconds_since(t0)) << " s\n";
            return fs::path(tr_out + ".manifest.json");
        };
    }

    // predict ----------------------------------------------------------------
    std::string pr_model, pr_input, pr_out;
    {
        auto* c = command("predict", "predict parameters for reflectances in a CSV (red,nir,mir)");
        auto& r = regs["predict"];
        r.add(c, "model", pr_model, "model file", true);
        r.add(c, "input", pr_input, "reflectance CSV", true);
        r.add(c, "out", pr_out, "also write the predictions to this CSV");
        runners["predict"] = [&] {
            require_file(pr_model, "model");
            require_file(pr_input, "input");
            ctx.stage = "loading model";
            const AnyModel model = load_model(fs::path(pr_model));
            ctx.stage = "reading input";
            const Matrix x = read_k0_csv(pr_input);
            ctx.stage = "prediction";
            Matrix mean, sigma;
            if (const auto* g = std::get_if<GprModel>(&model)) {
                auto p = predict_gpr(*g, x);
                mean = std::move(p.mean);
                sigma = std::move(p.sigma);
            } else {
                mean = predict_mean(model, x);
                sigma = Matrix::Constant(mean.rows(), mean.cols(), std::numeric_limits<double>::quiet_NaN());
            }
            std::ostringstream csv;
            for (int o = 0; o < mean.cols(); ++o) csv << (o ? "," : "") << kOutputNames[static_cast<std::size_t>(o)];
            for (int o = 0; o < mean.cols(); ++o) csv << ",sigma_" << kOutputNames[static_cast<std::size_t>(o)];
            csv << '\n';
            for (Eigen::Index i = 0; i < mean.rows(); ++i) {
                for (Eigen::Index o = 0; o < mean.cols(); ++o) csv << (o ? "," : "") << io::format_double(mean(i, o));
                for (Eigen::Index o = 0; o < mean.cols(); ++o)
                    csv << ',' << (std::isnan(sigma(i, o)) ? std::string("nan") : io::format_double(sigma(i, o)));
                csv << '\n';
            }
            out << csv.str();
            if (!pr_out.empty()) {
                auto f = io::open_out(pr_out);
                f << csv.str();
                ctx.produced(pr_out);
                return fs::path(pr_out + ".manifest.json");
            }
            return fs::path("predict.manifest.json");
        };
    }

    // build-lut --------------------------------------------------------------
    std::string lut_model, lut_out;
    int lut_m = 100;
    double k0_min = 0.0, k0_max = 0.70, k0_step = 0.02;
    std::vector<double> lut_err{0.01, 0.02, 0.03, 0.04, 0.05};
    {
        auto* c = command("build-lut", "tabulate Monte Carlo input-error propagation over (red, nir, mir, error)");
        auto& r = regs["build-lut"];
        r.add(c, "model", lut_model, "model file", true);
        r.add(c, "out", lut_out, "output LUT file", true);
        r.add(c, "m", lut_m, "Monte Carlo samples per node");
        r.add(c, "k0-min", k0_min, "lowest reflectance node (all bands)");
        r.add(c, "k0-max", k0_max, "highest reflectance node (all bands)");
        r.add(c, "k0-step", k0_step, "reflectance node spacing");
        r.add(c, "err-levels", lut_err, "error-axis nodes");
        runners["build-lut"] = [&] {
            require_file(lut_model, "model");
            if (!(k0_step > 0.0) || !(k0_max > k0_min)) throw ConfigError("build-lut: need k0-min < k0-max and k0-step > 0");
            LutAxes axes;
            for (auto& a : axes.k0) a = LutAxes::range(k0_min, k0_max, k0_step);
            axes.err = lut_err;
            axes.validate();
            ctx.stage = "loading model";
            const AnyModel model = load_model(fs::path(lut_model));
            ctx.stage = "LUT build";
            auto fn = [&](const Matrix& x) { return predict_mean(model, x); };
            const auto lut = build_lut(fn, axes, lut_m, ctx.seed, ctx.workers, fs::path(lut_model).filename().string());
            ctx.stage = "saving LUT";
            save_lut(lut, lut_out);
            ctx.produced(lut_out);
            out << "wrote " << axes.node_count() << " nodes to " << lut_out << '\n';
            return fs::path(lut_out + ".manifest.json");
        };
    }

    // retrieve ---------------------------------------------------------------
    std::string rt_model, rt_scene, rt_lut, rt_out, rt_out_dir, rt_period, rt_prefix = "biopar";
    int rt_mc = 100;
    {
        auto* c = command("retrieve", "retrieve LAI, FVC and FAPAR products from a scene with a GPR model");
        auto& r = regs["retrieve"];
        r.add(c, "model", rt_model, "GPR model file", true);
        r.add(c, "scene", rt_scene, "input scene planes", true);
        r.add(c, "lut", rt_lut, "uncertainty LUT; direct Monte Carlo when omitted");
        r.add(c, "out", rt_out, "product path");
        r.add(c, "out-dir", rt_out_dir, "product directory, named from --prefix and --period-end when --out is absent");
        r.add(c, "prefix", rt_prefix, "product name prefix");
        r.add(c, "period-end", rt_period, "compositing period end date, YYYYMMDD");
        r.add(c, "mc-samples", rt_mc, "Monte Carlo samples per pixel for direct propagation");
        runners["retrieve"] = [&] {
            require_file(rt_model, "model");
            require_file(rt_scene, "scene");
            if (!rt_lut.empty()) require_file(rt_lut, "lut");
            fs::path dest = rt_out;
            if (dest.empty()) {
                if (rt_out_dir.empty() || rt_period.empty())
                    throw ConfigError("retrieve: give --out, or --out-dir together with --period-end");
                dest = fs::path(rt_out_dir) / retrieval::product_filename(rt_prefix, rt_period);
            } else if (!rt_period.empty()) {
                retrieval::product_filename(rt_prefix, rt_period);  // validates the date
            }
            ctx.stage = "loading model";
            const AnyModel any = load_model(fs::path(rt_model));
            const auto* model = std::get_if<GprModel>(&any);
            if (!model) throw ConfigError("retrieve: model must be a GPR model");
            ctx.stage = "reading scene";
            const auto scene = raster::read_scene(rt_scene);
            UncertaintyLUT lut;
            if (!rt_lut.empty()) {
                ctx.stage = "loading LUT";
                lut = load_lut(rt_lut);
            }
            ctx.stage = "retrieval";
            retrieval::RetrievalOptions opt;
            opt.mc_samples = rt_mc;
            opt.seed = ctx.seed;
            opt.workers = ctx.workers;
            opt.model_id = fs::path(rt_model).filename().string();
            opt.period_end = rt_period;
            const auto prod = retrieval::retrieve_scene(*model, scene, rt_lut.empty() ? nullptr : &lut, opt);
            ctx.stage = "product encoding";
            retrieval::encode_product(prod, dest);
            ctx.produced(dest);
            ctx.produced(raster::sidecar_path(dest));
            out << "wrote " << scene.width << "x" << scene.height << " product to " << dest.string() << '\n';
            return fs::path(dest.string() + ".manifest.json");
        };
    }

    // evaluate ---------------------------------------------------------------
    DbOptions ev_db;
    std::string ev_db_path, ev_out_dir;
    std::vector<std::string> ev_methods{"gpr", "krr", "nn"};
    double ev_frac = 0.8, ev_sat = 5.0;
    MethodOptions ev_opts;
    {
        auto* c = command("evaluate", "train every method in single and multi mode and score a held-out split");
        auto& r = regs["evaluate"];
        ev_db.add(c, r, 2950);
        r.add(c, "db", ev_db_path, "use this simulation CSV instead of simulating");
        r.add(c, "methods", ev_methods, "methods to assess");
        r.add(c, "train-fraction", ev_frac, "training share of the split");
        r.add(c, "saturation-lai", ev_sat, "LAI above which residuals are averaged for the saturation check");
        ev_opts.add(c, r);
        r.add(c, "out-dir", ev_out_dir, "output directory", true);
        runners["evaluate"] = [&] {
            eval::AssessmentConfig cfg;
            cfg.methods = parse_methods(ev_methods);
            cfg.train_fraction = ev_frac;
            cfg.saturation_lai = ev_sat;
            cfg.cfg = ev_opts.configs();
            cfg.seed = ctx.seed;
            simdb::SimulationDatabase db;
            ctx.stage = "database";
            if (!ev_db_path.empty()) {
                require_file(ev_db_path, "db");
                db = simdb::import_simulations(ev_db_path);
            } else {
                db = simdb::build_database(ev_db.build(ctx.seed));
            }
            ctx.stage = "assessment";
            const auto res = eval::run_assessment(db, cfg);
            ctx.stage = "writing results";
            const fs::path dir = ev_out_dir;
            eval::write_assessment_csv(res, dir / "assessment.csv");
            io::open_out(dir / "assessment.json") << eval::assessment_summary(res).dump(2) << '\n';
            ctx.produced(dir / "assessment.csv");
            ctx.produced(dir / "assessment.json");
            for (const auto& run : res.runs) {
                out << eval::to_string(run.method) << '/' << to_string(run.mode) << ':';
                for (int o = 0; o < run.metrics.rmse.size(); ++o)
                    out << ' ' << kOutputNames[static_cast<std::size_t>(o)] << " rmse=" << io::format_double(run.metrics.rmse(o))
                        << " r2=" << io::format_double(run.metrics.r2(o));
                out << '\n';
            }
            return dir / "evaluate.manifest.json";
        };
    }

    // sensitivity ------------------------------------------------------------
    DbOptions se_db;
    std::vector<double> se_levels = eval::default_noise_ladder(), se_err{0.03, 0.05};
    int se_points = 200, se_m = 100;
    std::string se_out_dir;
    MethodOptions se_opts;
    {
        auto* c = command("sensitivity", "sigma_k0 over cover-type spheres as a function of training noise");
        auto& r = regs["sensitivity"];
        se_db.add(c, r, 2950, false);
        r.add(c, "levels", se_levels, "training-noise ladder");
        r.add(c, "err-levels", se_err, "input error levels");
        r.add(c, "n-per-sphere", se_points, "reflectance points drawn per sphere");
        r.add(c, "m", se_m, "Monte Carlo samples per point");
        se_opts.add(c, r);
        r.add(c, "out-dir", se_out_dir, "output directory", true);
        runners["sensitivity"] = [&] {
            eval::SensitivityConfig cfg;
            cfg.ladder = se_levels;
            cfg.err_levels = se_err;
            cfg.n_per_sphere = se_points;
            cfg.mc_samples = se_m;
            cfg.db = se_db.build(ctx.seed);
            cfg.gpr = se_opts.configs().gpr;
            cfg.seed = ctx.seed;
            cfg.workers = ctx.workers;
            ctx.stage = "sensitivity grid";
            const auto cells = eval::run_noise_sensitivity(cfg);
            ctx.stage = "writing results";
            const fs::path p = fs::path(se_out_dir) / "sensitivity.csv";
            eval::write_sensitivity_csv(cells, cfg.spheres, p);
            ctx.produced(p);
            out << "wrote " << cells.size() << " cells to " << p.string() << '\n';
            return fs::path(se_out_dir) / "sensitivity.manifest.json";
        };
    }

    // robustness -------------------------------------------------------------
    DbOptions ro_db;
    std::string ro_db_path, ro_out_dir, ro_mode = "multi";
    int ro_reps = 50;
    double ro_frac = 0.8;
    std::vector<std::string> ro_methods{"gpr", "krr", "nn"};
    MethodOptions ro_opts;
    {
        auto* c = command("robustness", "RMSE distribution over repeated random splits");
        auto& r = regs["robustness"];
        ro_db.add(c, r, 2950);
        r.add(c, "db", ro_db_path, "use this simulation CSV instead of simulating");
        r.add(c, "reps", ro_reps, "number of random splits");
        r.add(c, "methods", ro_methods, "methods to compare");
        r.add(c, "mode", ro_mode, "multi | single");
        r.add(c, "train-fraction", ro_frac, "training share of each split");
        ro_opts.add(c, r);
        r.add(c, "out-dir", ro_out_dir, "output directory", true);
        runners["robustness"] = [&] {
            eval::RobustnessConfig cfg;
            cfg.n_reps = ro_reps;
            cfg.methods = parse_methods(ro_methods);
            cfg.mode = output_mode_from_string(ro_mode);
            cfg.train_fraction = ro_frac;
            cfg.cfg = ro_opts.configs();
            cfg.seed = ctx.seed;
            cfg.workers = ctx.workers;
            simdb::SimulationDatabase db;
            ctx.stage = "database";
            if (!ro_db_path.empty()) {
                require_file(ro_db_path, "db");
                db = simdb::import_simulations(ro_db_path);
            } else {
                db = simdb::build_database(ro_db.build(ctx.seed));
            }
            ctx.stage = "repetitions";
            const auto res = eval::run_robustness_experiment(db, cfg);
            ctx.stage = "writing results";
            const fs::path dir = ro_out_dir;
            eval::write_robustness_csv(res, dir / "robustness_reps.csv", dir / "robustness_summary.csv");
            ctx.produced(dir / "robustness_reps.csv");
            ctx.produced(dir / "robustness_summary.csv");
            for (const auto& s : res.summary)
                out << eval::to_string(s.method) << ' ' << kOutputNames[static_cast<std::size_t>(s.output)]
                    << " median=" << io::format_double(s.median) << " iqr=" << io::format_double(s.q3 - s.q1) << '\n';
            return dir / "robustness.manifest.json";
        };
    }

    // sample-size ------------------------------------------------------------
    DbOptions ss_db;
    std::string ss_out_dir, ss_mode = "multi";
    int ss_test = 1000;
    std::vector<int> ss_sizes = eval::default_sample_sizes();
    std::vector<std::string> ss_methods{"gpr"};
    MethodOptions ss_opts;
    {
        auto* c = command("sample-size", "test RMSE as a function of training-set size");
        auto& r = regs["sample-size"];
        ss_db.add(c, r, 7000);
        r.add(c, "test-size", ss_test, "held-out test records");
        r.add(c, "sizes", ss_sizes, "training-set sizes");
        r.add(c, "methods", ss_methods, "methods to run");
        r.add(c, "mode", ss_mode, "multi | single");
        ss_opts.add(c, r);
        r.add(c, "out-dir", ss_out_dir, "output directory", true);
        runners["sample-size"] = [&] {
            eval::SampleSizeConfig cfg;
            cfg.db = ss_db.build(ctx.seed);
            cfg.test_size = ss_test;
            cfg.sizes = ss_sizes;
            cfg.methods = parse_methods(ss_methods);
            cfg.mode = output_mode_from_string(ss_mode);
            cfg.cfg = ss_opts.configs();
            cfg.seed = ctx.seed;
            cfg.workers = ctx.workers;
            ctx.stage = "training curve";
            const auto pts = eval::run_sample_size_experiment(cfg);
            ctx.stage = "writing results";
            const fs::path p = fs::path(ss_out_dir) / "sample_size.csv";
            eval::write_sample_size_csv(pts, p);
            ctx.produced(p);
            out << "wrote " << pts.size() << " points to " << p.string() << '\n';
            return fs::path(ss_out_dir) / "sample-size.manifest.json";
        };
    }

    // isolines ---------------------------------------------------------------
    std::string is_input, is_model, is_out;
    double red_min = 0.0, red_max = 0.40, nir_min = 0.0, nir_max = 0.60, is_step = 0.01;
    int min_count = 10;
    {
        auto* c = command("isolines", "mean parameter values on a red/NIR grid");
        auto& r = regs["isolines"];
        r.add(c, "input", is_input, "simulation CSV, or reflectance CSV when --model is given", true);
        r.add(c, "model", is_model, "predict values with this model instead of using the CSV targets");
        r.add(c, "red-min", red_min, "lowest red edge");
        r.add(c, "red-max", red_max, "highest red edge");
        r.add(c, "nir-min", nir_min, "lowest NIR edge");
        r.add(c, "nir-max", nir_max, "highest NIR edge");
        r.add(c, "step", is_step, "bin width in both bands");
        r.add(c, "min-count", min_count, "cells with fewer samples are reported as nan");
        r.add(c, "out", is_out, "output CSV", true);
        runners["isolines"] = [&] {
            require_file(is_input, "input");
            if (!(is_step > 0.0)) throw ConfigError("isolines: --step must be positive");
            if (min_count < 1) throw ConfigError("isolines: --min-count must be >= 1");
            Matrix k0, values;
            ctx.stage = "reading input";
            if (is_model.empty()) {
                const auto db = simdb::import_simulations(is_input);
                k0 = db.inputs();
                values = db.targets();
            } else {
                require_file(is_model, "model");
                k0 = read_k0_csv(is_input);
                ctx.stage = "prediction";
                values = predict_mean(load_model(fs::path(is_model)), k0);
            }
            ctx.stage = "binning";
            const auto g = eval::compute_isolines(k0, values, eval::bin_edges(red_min, red_max, is_step),
                                                  eval::bin_edges(nir_min, nir_max, is_step), static_cast<std::size_t>(min_count));
            eval::write_isolines_csv(g, is_out);
            ctx.produced(is_out);
            out << "wrote " << g.n_red() << "x" << g.n_nir() << " cells to " << is_out << '\n';
            return fs::path(is_out + ".manifest.json");
        };
    }

    std::string cmd;
    try {
        app.parse(argc, argv);
        for (auto* s : app.get_subcommands()) cmd = s->get_name();
        auto& reg = regs.at(cmd);
        if (!config_path.empty()) {
            require_file(config_path, "config");
            std::ifstream in(config_path);
            json cfg;
            try {
                cfg = json::parse(in);
            } catch (const json::exception& e) {
                throw ConfigError("config: " + std::string(e.what()));
            }
            if (!cfg.is_object()) throw ConfigError("config: top level must be an object");
            json top = json::object();
            for (const auto& [k, v] : cfg.items()) {
                if (regs.count(k)) {
                    if (k == cmd) reg.apply(v, k);
                    else if (!v.is_object()) throw ConfigError("config: '" + k + "' must be an object");
                } else {
                    top[k] = v;
                }
            }
            global.apply(top, "top level");
        }
        if (ctx.workers < 1) throw ConfigError("--workers must be >= 1");
        json effective = global.dump();
        effective[cmd] = reg.dump();
        if (print_config) {
            out << effective.dump(2) << '\n';
            return kOk;
        }
        reg.check_required(cmd);

        const auto t0 = std::chrono::steady_clock::now();
        fs::path manifest = runners.at(cmd)();
        if (!manifest_path.empty()) manifest = manifest_path;
        ctx.stage = "manifest";
        json argv_j = json::array();
        for (int i = 0; i < argc; ++i) argv_j.push_back(argv[i]);
        const json m{{"tool", "biopar"},
                     {"version", kVersion},
                     {"command", cmd},
                     {"argv", argv_j},
                     {"config", effective},
                     {"outputs", ctx.outputs},
                     {"seconds", eval::seconds_since(t0)}};
        io::open_out(manifest) << m.dump(2) << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const ConfigError& e) {
        err << "biopar" << (cmd.empty() ? "" : " " + cmd) << ": usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalError& e) {
        err << "biopar " << cmd << ": " << ctx.stage << " failed: " << e.what() << '\n';
        return kNumerical;
    } catch (const Error& e) {
        err << "biopar " << cmd << ": " << ctx.stage << " failed: " << e.what() << '\n';
        return kInputData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "biopar " << cmd << ": " << ctx.stage << " failed: " << e.what() << '\n';
        return kInputData;
    }
}

}  // namespace biopar::cli
