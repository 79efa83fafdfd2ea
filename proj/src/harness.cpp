#include "codl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace codl {

ConstraintSet dataset_constraints(Dataset d, const TimeSeries& train) {
    if (d == Dataset::Wpg) return capacity_bound_constraint(WpgParams{}.bound);
    auto r0 = train.row(0);
    double m_total = 0.0;
    for (double v : r0) m_total += v;
    return mass_conservation_constraint(m_total);
}

namespace {

std::string tol_dir_name(double tol) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0e", tol);
    return buf;
}

std::string seed_dir_name(uint64_t seed) { return "seed" + std::to_string(seed); }

} // namespace

RunReport run_single(const ExperimentSpec& spec, Strategy strategy, double tol, uint64_t seed,
                     const TrainConfig& base, const std::string& run_dir) {
    RunReport rep;
    rep.dataset = dataset_name(spec.dataset);
    rep.experiment = spec.id;
    rep.strategy = strategy_name(strategy);
    rep.tol = tol;
    rep.seed = seed;
    try {
        fs::create_directories(run_dir);
        DataBundle data = generate(spec);
        DynamicsNet net =
            spec.dataset == Dataset::Wpg ? build_wpg_net(seed) : build_cr_net(seed);
        ConstraintSet cs = dataset_constraints(spec.dataset, data.train);

        TrainConfig cfg = base;
        cfg.strategy = strategy;
        cfg.tol = tol;
        cfg.seed = seed;

        const auto t_start = std::chrono::steady_clock::now();
        TwoStageTrainer trainer(net, data.train, cs, cfg);
        TrainTrace trace = trainer.run();
        rep.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

        if ((strategy == Strategy::UpdatePrevious || strategy == Strategy::UpdateBest) &&
            trace.p_final > trace.p_stage2_start)
            throw Error("preference-point invariant violated: final admissibility " +
                        std::to_string(trace.p_final) + " above stage-two start " +
                        std::to_string(trace.p_stage2_start));

        NetEval ev(nullptr, net.spec, trace.theta);
        Trajectory traj = solve_rk4({ev.dynamics(), data.test.initial_state(), data.test.times});
        rep.test_mse = optimization_loss(traj, data.test).value();
        rep.test_v = violation_metric(traj, cs);
        rep.admissibility_iterations = trace.admissibility_iterations;

        write_trace_csv(trace, run_dir + "/trace.csv");
        DynamicsNet final_net = net;
        final_net.params = trace.theta;
        save_params(final_net, run_dir + "/params.bin");
        rep.trace_path = run_dir + "/trace.csv";
        rep.ok = true;
    } catch (const std::exception& e) {
        rep.ok = false;
        rep.error = e.what();
    }
    try {
        write_run_report_json(rep, run_dir + "/report.json");
    } catch (const std::exception& e) {
        if (rep.ok) {
            rep.ok = false;
            rep.error = e.what();
        }
    }
    return rep;
}

std::vector<RunReport> run_experiment(const ExperimentSpec& spec, Strategy strategy, double tol,
                                      const std::vector<uint64_t>& seeds, const TrainConfig& base,
                                      const std::string& out_dir, int jobs) {
    GridRequest req;
    req.spec = spec;
    req.strategies = {strategy};
    req.tols = {tol};
    req.seeds = seeds;
    req.base = base;
    req.out_dir = out_dir;
    req.jobs = jobs;
    return run_grid(req);
}

std::vector<RunReport> run_grid(const GridRequest& req) {
    if (req.strategies.empty() || req.tols.empty() || req.seeds.empty())
        throw ConfigError("experiment grid needs strategies, tols and seeds");
    {
        std::set<uint64_t> uniq(req.seeds.begin(), req.seeds.end());
        if (uniq.size() != req.seeds.size()) throw ConfigError("seeds must be distinct");
    }

    struct Job {
        Strategy strategy;
        double tol;
        uint64_t seed;
        std::string dir;
    };
    std::vector<Job> jobs_list;
    const std::string base_dir =
        req.out_dir + "/" + dataset_name(req.spec.dataset) + "/" + req.spec.id;
    auto single_stage = [](Strategy s) {
        return s == Strategy::Vanilla || s == Strategy::Penalty;
    };
    for (Strategy s : req.strategies) {
        const std::vector<double> tols =
            single_stage(s) ? std::vector<double>{req.tols.front()} : req.tols;
        for (double tol : tols)
            for (uint64_t seed : req.seeds) {
                Job j{s, tol,
                      seed,
                      base_dir + "/" + strategy_name(s) + "/" + tol_dir_name(tol) + "/" +
                          seed_dir_name(seed)};
                fs::create_directories(j.dir);
                jobs_list.push_back(std::move(j));
            }
    }

    std::vector<RunReport> reports(jobs_list.size());
    const int nthreads = std::max(1, req.jobs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(nthreads) if (nthreads > 1)
    for (size_t i = 0; i < jobs_list.size(); ++i) {
        const Job& j = jobs_list[i];
        reports[i] = run_single(req.spec, j.strategy, j.tol, j.seed, req.base, j.dir);
    }

    // Single-stage strategies ran once; replicate their reports into the
    // remaining tol cells so every (strategy, tol) cell is populated.
    std::vector<RunReport> out = reports;
    for (Strategy s : req.strategies) {
        if (!single_stage(s)) continue;
        for (size_t ti = 1; ti < req.tols.size(); ++ti) {
            for (size_t i = 0; i < jobs_list.size(); ++i) {
                if (jobs_list[i].strategy != s) continue;
                RunReport rep = reports[i];
                rep.tol = req.tols[ti];
                const std::string dir = base_dir + "/" + strategy_name(s) + "/" +
                                        tol_dir_name(req.tols[ti]) + "/" +
                                        seed_dir_name(rep.seed);
                fs::create_directories(dir);
                write_run_report_json(rep, dir + "/report.json");
                out.push_back(std::move(rep));
            }
        }
    }
    return out;
}

AggregateReport aggregate(const std::vector<RunReport>& reports) {
    struct Acc {
        std::vector<double> mse, v;
    };
    std::map<CellKey, Acc> groups;
    for (const RunReport& r : reports) {
        if (!r.ok) continue;
        Acc& a = groups[{r.dataset, r.experiment, r.tol, r.strategy}];
        a.mse.push_back(r.test_mse);
        a.v.push_back(r.test_v);
    }
    auto mean_of = [](const std::vector<double>& xs) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s / (double)xs.size();
    };
    auto pop_std = [](const std::vector<double>& xs, double mean) {
        double s = 0.0;
        for (double x : xs) s += (x - mean) * (x - mean);
        return std::sqrt(s / (double)xs.size());
    };
    AggregateReport agg;
    for (auto& [key, acc] : groups) {
        CellStats cs;
        cs.count = (int)acc.mse.size();
        cs.mse_avg = mean_of(acc.mse);
        cs.mse_std = pop_std(acc.mse, cs.mse_avg);
        cs.v_avg = mean_of(acc.v);
        cs.v_std = pop_std(acc.v, cs.v_avg);
        agg.cells[key] = cs;
    }
    return agg;
}

std::string format_sci(double v) {
    if (std::isnan(v)) return "nan";
    if (v == 0.0) return "0.00E+0";
    const bool neg = v < 0.0;
    double a = std::fabs(v);
    int e = (int)std::floor(std::log10(a));
    double m = a / std::pow(10.0, e);
    char mant[16];
    std::snprintf(mant, sizeof(mant), "%.2f", m);
    if (std::string(mant) == "10.00") {
        ++e;
        std::snprintf(mant, sizeof(mant), "%.2f", m / 10.0);
    }
    std::string s = neg ? "-" : "";
    s += mant;
    s += 'E';
    s += e < 0 ? '-' : '+';
    s += std::to_string(e < 0 ? -e : e);
    return s;
}

namespace {

const std::vector<std::string>& canonical_strategies() {
    static const std::vector<std::string> order = {"vanilla", "noStrategy", "updatePrevious",
                                                   "updateBest", "penalty"};
    return order;
}

} // namespace

void emit_table(const AggregateReport& agg, TableFormat format, const std::string& path) {
    // Row keys and the strategies that actually appear, in canonical order.
    std::set<std::tuple<std::string, std::string, double>> row_keys;
    std::set<std::string> present;
    for (const auto& [key, cell] : agg.cells) {
        row_keys.insert({key.dataset, key.experiment, key.tol});
        present.insert(key.strategy);
    }
    std::vector<std::string> strategies;
    for (const std::string& s : canonical_strategies())
        if (present.count(s)) strategies.push_back(s);

    std::string body;
    if (format == TableFormat::Csv) {
        body = "dataset,experiment,tol";
        for (const auto& s : strategies)
            body += "," + s + "_mse_avg," + s + "_mse_std," + s + "_v_avg," + s + "_v_std";
        body += '\n';
        for (const auto& [ds, exp, tol] : row_keys) {
            body += ds + "," + exp + "," + format_sci(tol);
            for (const auto& s : strategies) {
                auto it = agg.cells.find({ds, exp, tol, s});
                if (it == agg.cells.end()) {
                    body += ",-,-,-,-";
                } else {
                    body += "," + format_sci(it->second.mse_avg) + "," +
                            format_sci(it->second.mse_std) + "," + format_sci(it->second.v_avg) +
                            "," + format_sci(it->second.v_std);
                }
            }
            body += '\n';
        }
    } else {
        body = "| dataset | experiment | tol |";
        for (const auto& s : strategies) body += " " + s + " MSE | " + s + " V |";
        body += "\n|---|---|---|";
        for (size_t i = 0; i < strategies.size(); ++i) body += "---|---|";
        body += '\n';
        for (const auto& [ds, exp, tol] : row_keys) {
            body += "| " + ds + " | " + exp + " | " + format_sci(tol) + " |";
            for (const auto& s : strategies) {
                auto it = agg.cells.find({ds, exp, tol, s});
                if (it == agg.cells.end()) {
                    body += " - | - |";
                } else {
                    body += " " + format_sci(it->second.mse_avg) + " ± " +
                            format_sci(it->second.mse_std) + " | " +
                            format_sci(it->second.v_avg) + " ± " + format_sci(it->second.v_std) +
                            " |";
                }
            }
            body += '\n';
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << body;
    if (!out) throw Error("write failed: " + path);
}

void write_run_report_json(const RunReport& rep, const std::string& path) {
    json j;
    j["dataset"] = rep.dataset;
    j["experiment"] = rep.experiment;
    j["strategy"] = rep.strategy;
    j["tol"] = rep.tol;
    j["seed"] = rep.seed;
    j["ok"] = rep.ok;
    j["error"] = rep.error;
    j["test_mse"] = rep.test_mse;
    j["test_v"] = rep.test_v;
    j["admissibility_iterations"] = rep.admissibility_iterations;
    j["wall_seconds"] = rep.wall_seconds;
    j["trace_path"] = rep.trace_path;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

RunReport read_run_report_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    RunReport rep;
    try {
        rep.dataset = j.at("dataset").get<std::string>();
        rep.experiment = j.at("experiment").get<std::string>();
        rep.strategy = j.at("strategy").get<std::string>();
        rep.tol = j.at("tol").get<double>();
        rep.seed = j.at("seed").get<uint64_t>();
        rep.ok = j.at("ok").get<bool>();
        rep.error = j.at("error").get<std::string>();
        rep.test_mse = j.at("test_mse").get<double>();
        rep.test_v = j.at("test_v").get<double>();
        rep.admissibility_iterations = j.at("admissibility_iterations").get<int>();
        rep.wall_seconds = j.at("wall_seconds").get<double>();
        rep.trace_path = j.at("trace_path").get<std::string>();
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return rep;
}

std::vector<RunReport> collect_run_reports(const std::string& dir) {
    if (!fs::exists(dir)) throw ConfigError("no such directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() == "report.json")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    std::vector<RunReport> reports;
    reports.reserve(paths.size());
    for (const auto& p : paths) reports.push_back(read_run_report_json(p));
    return reports;
}

// --- config file -------------------------------------------------------------

RunRequest parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    static const std::set<std::string> known = {
        "dataset",      "experiment",    "lr",
        "tol",          "k_min",         "k_max",
        "strategy",     "loss_form",     "seed",
        "curve_stride", "penalty_mu0",   "penalty_growth",
        "penalty_period", "adam_reset_on_reject", "adam_carry_over",
        "admissibility_cap"};
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    for (const char* req : {"dataset", "experiment", "strategy"})
        if (!j.contains(req)) throw ConfigError(std::string("config missing key '") + req + "'");

    RunRequest rr;
    try {
        rr.spec = find_experiment(dataset_from_name(j.at("dataset").get<std::string>()),
                                  j.at("experiment").get<std::string>());
        rr.cfg.strategy = strategy_from_name(j.at("strategy").get<std::string>());
        if (j.contains("lr")) rr.cfg.lr = j.at("lr").get<double>();
        if (j.contains("tol")) rr.cfg.tol = j.at("tol").get<double>();
        if (j.contains("k_min")) rr.cfg.k_min = j.at("k_min").get<int>();
        if (j.contains("k_max")) rr.cfg.k_max = j.at("k_max").get<int>();
        if (j.contains("loss_form"))
            rr.cfg.loss_form = loss_form_from_name(j.at("loss_form").get<std::string>());
        if (j.contains("seed")) rr.cfg.seed = j.at("seed").get<uint64_t>();
        if (j.contains("curve_stride")) rr.cfg.curve_stride = j.at("curve_stride").get<int>();
        if (j.contains("penalty_mu0")) rr.cfg.penalty.mu0 = j.at("penalty_mu0").get<double>();
        if (j.contains("penalty_growth"))
            rr.cfg.penalty.growth = j.at("penalty_growth").get<double>();
        if (j.contains("penalty_period"))
            rr.cfg.penalty.period = j.at("penalty_period").get<int>();
        if (j.contains("adam_reset_on_reject"))
            rr.cfg.adam_reset_on_reject = j.at("adam_reset_on_reject").get<bool>();
        if (j.contains("adam_carry_over"))
            rr.cfg.adam_carry_over = j.at("adam_carry_over").get<bool>();
        if (j.contains("admissibility_cap"))
            rr.cfg.admissibility_cap = j.at("admissibility_cap").get<long>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    rr.cfg.validate();
    return rr;
}

// --- CLI ----------------------------------------------------------------------

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        try {
            size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad ") + what + " value '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
    return out;
}

std::vector<uint64_t> parse_seeds(const std::string& s) {
    std::vector<uint64_t> out;
    for (const auto& item : split_list(s)) {
        try {
            size_t pos = 0;
            out.push_back(std::stoull(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad seed value '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty seed list");
    return out;
}

int cmd_generate_data(const std::string& dataset, const std::string& experiment,
                      const std::string& out_dir) {
    const ExperimentSpec& spec = find_experiment(dataset_from_name(dataset), experiment);
    DataBundle data = generate(spec);
    fs::create_directories(out_dir);
    write_csv(data.train, out_dir + "/train.csv");
    write_csv(data.test, out_dir + "/test.csv");
    std::cout << "wrote " << out_dir << "/train.csv (" << data.train.n_points() << " rows), "
              << out_dir << "/test.csv (" << data.test.n_points() << " rows)\n";
    if (spec.dataset == Dataset::Cr) {
        json j;
        j["mass_drift_train"] = data.mass_drift_train;
        j["mass_drift_test"] = data.mass_drift_test;
        std::ofstream rep(out_dir + "/generation_report.json", std::ios::binary);
        rep << j.dump(2) << '\n';
        std::cout << "max mass drift: train " << format_sci(data.mass_drift_train) << ", test "
                  << format_sci(data.mass_drift_test) << '\n';
    }
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + config_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RunRequest rr = parse_run_config(text);
    RunReport rep = run_single(rr.spec, rr.cfg.strategy, rr.cfg.tol, rr.cfg.seed, rr.cfg, out_dir);
    if (!rep.ok) {
        std::cerr << "run failed: " << rep.error << '\n';
        return 1;
    }
    std::cout << "test MSE " << format_sci(rep.test_mse) << ", test V " << format_sci(rep.test_v)
              << ", admissibility iterations " << rep.admissibility_iterations << '\n';
    return 0;
}

int cmd_experiment(const std::string& dataset, const std::string& experiment,
                   const std::string& strategies, const std::string& tols,
                   const std::string& seeds, const std::string& out_dir, int jobs,
                   TrainConfig base) {
    GridRequest req;
    req.spec = find_experiment(dataset_from_name(dataset), experiment);
    for (const auto& s : split_list(strategies)) req.strategies.push_back(strategy_from_name(s));
    req.tols = parse_doubles(tols, "tol");
    req.seeds = parse_seeds(seeds);
    req.base = base;
    req.out_dir = out_dir;
    req.jobs = jobs;

    std::vector<RunReport> reports = run_grid(req);
    AggregateReport agg = aggregate(reports);
    fs::create_directories(out_dir);
    emit_table(agg, TableFormat::Csv, out_dir + "/report.csv");
    emit_table(agg, TableFormat::Markdown, out_dir + "/report.md");

    int failures = 0;
    for (const auto& r : reports)
        if (!r.ok) {
            ++failures;
            std::cerr << "run failed (" << r.strategy << ", tol " << format_sci(r.tol) << ", seed "
                      << r.seed << "): " << r.error << '\n';
        }
    std::cout << "wrote " << out_dir << "/report.csv and report.md (" << reports.size()
              << " runs, " << failures << " failed)\n";
    return failures ? 1 : 0;
}

int cmd_report(const std::string& in_dir, const std::string& format) {
    if (format != "csv" && format != "markdown")
        throw ConfigError("format must be csv or markdown");
    AggregateReport agg = aggregate(collect_run_reports(in_dir));
    const std::string path =
        in_dir + (format == "csv" ? "/report.csv" : "/report.md");
    emit_table(agg, format == "csv" ? TableFormat::Csv : TableFormat::Markdown, path);
    std::cout << "wrote " << path << '\n';
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"constrained neural-ODE training toolkit"};
    app.require_subcommand(1);

    std::string dataset, experiment, out_dir, config_path, in_dir;
    std::string strategies = "vanilla,noStrategy,updatePrevious,updateBest";
    std::string tols = "1e-2,1e-4,1e-6,1e-8";
    std::string seeds = "1,2,3,4";
    std::string format = "csv";
    int jobs = 1;
    TrainConfig base;

    auto* gen = app.add_subcommand("generate-data", "regenerate a dataset's train/test split");
    gen->add_option("--dataset", dataset, "wpg or cr")->required();
    gen->add_option("--experiment", experiment, "experiment id (1.0, 2.0, 2.1, 2.2, 3.0, 3.1, 3.2)")
        ->required();
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "run one training job from a JSON config");
    train->add_option("--config", config_path, "JSON config path")->required();
    train->add_option("--out", out_dir, "output directory")->required();

    auto* exp = app.add_subcommand("experiment", "run a strategy/tolerance/seed grid");
    exp->add_option("--dataset", dataset, "wpg or cr")->required();
    exp->add_option("--experiment", experiment, "experiment id")->required();
    exp->add_option("--strategies", strategies, "comma-separated strategy list");
    exp->add_option("--tols", tols, "comma-separated feasibility tolerances");
    exp->add_option("--seeds", seeds, "comma-separated seeds");
    exp->add_option("--out", out_dir, "output directory")->required();
    exp->add_option("--jobs", jobs, "parallel runs (default 1)");
    exp->add_option("--k-max", base.k_max, "optimization-stage iterations");
    exp->add_option("--k-min", base.k_min, "minimum admissibility iterations");
    exp->add_option("--lr", base.lr, "learning rate");
    exp->add_option("--curve-stride", base.curve_stride, "iterations between trace samples");
    exp->add_option("--admissibility-cap", base.admissibility_cap,
                    "admissibility-stage iteration guard (0 = 10*k_max)");
    exp->add_option("--adam-carry-over", base.adam_carry_over,
                    "carry stage-one optimizer state into stage two (default 1)");

    auto* rep = app.add_subcommand("report", "aggregate run reports into a table");
    rep->add_option("--in", in_dir, "directory tree containing report.json files")->required();
    rep->add_option("--format", format, "csv or markdown");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n' << app.help();
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_generate_data(dataset, experiment, out_dir);
        if (train->parsed()) return cmd_train(config_path, out_dir);
        if (exp->parsed())
            return cmd_experiment(dataset, experiment, strategies, tols, seeds, out_dir, jobs,
                                  base);
        if (rep->parsed()) return cmd_report(in_dir, format);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

} // namespace codl
