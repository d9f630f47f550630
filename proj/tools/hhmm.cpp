// hhmm: batch front end for ingesting prices, fitting, selecting, decoding,
// diagnosing and simulating two-level hidden Markov models.
//
// Exit codes: 0 success, 2 usage, 3 bad input data, 4 fit failure,
// 5 internal error. Failures print one JSON object on stderr:
//   {"error": {"kind": ..., "message": ..., "exit_code": ...}}
// Every run writes <command>_manifest.json next to its outputs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "hhmm/decoding.hpp"
#include "hhmm/diagnostics.hpp"
#include "hhmm/error.hpp"
#include "hhmm/estimation.hpp"
#include "hhmm/ingest.hpp"
#include "hhmm/io.hpp"
#include "hhmm/simulation.hpp"

namespace fs = std::filesystem;
using namespace hhmm;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { ok = 0, usage = 2, data = 3, fit_failed = 4, internal = 5 };

// Thrown for problems with the invocation itself (existing outputs, bad grid).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_parameter: return usage;
        case ErrorKind::fit_failure: return fit_failed;
        case ErrorKind::data:
        case ErrorKind::insufficient_data:
        case ErrorKind::io:
        case ErrorKind::layout:
        case ErrorKind::shape:
        case ErrorKind::domain:
        case ErrorKind::non_invertible:
        case ErrorKind::no_unique_stationary: return data;
    }
    return internal;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char byte[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof(byte), "%02x", digest[i]);
        hex += byte;
    }
    return hex;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json(const fs::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::data, path.string() + ": " + e.what());
    }
}

// State shared by all subcommands: where outputs go and what the manifest
// records.
struct Run {
    std::string command;
    fs::path out = ".";
    bool force = false;
    std::uint64_t seed = 0;
    Json config = Json::object();
    Json inputs = Json::object();
    Json outputs = Json::array();
    Json timings = Json::object();
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

    void input(const std::string& name, const fs::path& path) {
        inputs[name] = Json{{"path", path.string()}, {"sha256", sha256_file(path)}};
    }

    void check_outputs(const std::vector<std::string>& names) const {
        std::vector<std::string> all(names);
        all.push_back(command + "_manifest.json");
        for (const auto& n : all) {
            if (fs::exists(out / n) && !force) {
                throw UsageError((out / n).string() + " exists; pass --force to overwrite");
            }
        }
    }

    // Writes to a temporary file, lets `validate` re-read it, then renames.
    template <typename Validate>
    void write(const std::string& name, const std::string& content, Validate validate) {
        const fs::path target = out / name;
        const fs::path tmp = out / ("." + name + ".tmp");
        {
            std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
            if (!f) throw Error(ErrorKind::io, "cannot write " + tmp.string());
            f << content;
            if (!f.flush()) throw Error(ErrorKind::io, "cannot write " + tmp.string());
        }
        try {
            validate(tmp);
        } catch (...) {
            fs::remove(tmp);
            throw;
        }
        fs::rename(tmp, target);
        outputs.push_back(Json{{"path", target.string()}, {"sha256", sha256_file(target)}});
    }

    void stage(const std::string& name, std::chrono::steady_clock::time_point since) {
        timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
    }

    void write_manifest(const std::string& status, const Json& error = nullptr) {
        Json m;
        m["command"] = command;
        m["version"] = kVersion;
        m["status"] = status;
        m["seed"] = seed;
        m["config"] = config;
        m["inputs"] = inputs;
        m["outputs"] = outputs;
        if (!error.is_null()) m["error"] = error;
        stage("total_seconds", started);
        m["timings"] = timings;
        const fs::path target = out / (command + "_manifest.json");
        const fs::path tmp = out / ("." + command + "_manifest.json.tmp");
        {
            std::ofstream f(tmp, std::ios::trunc);
            f << m.dump(2) << '\n';
        }
        fs::rename(tmp, target);
    }
};

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

void validate_model_file(const fs::path& p) { model_from_json(read_json(p)); }
void validate_panel_file(const fs::path& p) { panel_from_json(read_json(p)); }
void validate_json_file(const fs::path& p) { read_json(p); }

ObservationPanel load_panel(Run& run, const fs::path& path) {
    run.input("panel", path);
    return panel_from_json(read_json(path));
}

HierarchicalModel load_model(Run& run, const fs::path& path) {
    run.input("model", path);
    return model_from_json(read_json(path));
}

// Options shared by fit and select.
struct FitOptions {
    int starts = 0;
    int max_iter = 500;
    double tol = 1e-6;
    int threads = 1;
    bool free_initial = false;

    void add(CLI::App* app) {
        app->add_option("--starts", starts, "Optimizer starts (0: grows with the parameter count)")
            ->check(CLI::NonNegativeNumber);
        app->add_option("--max-iter", max_iter, "Iterations per start")->check(CLI::PositiveNumber);
        app->add_option("--tol", tol, "Gradient tolerance, relative to max(1, |objective|)")
            ->check(CLI::PositiveNumber);
        app->add_option("--threads", threads, "Worker threads for the starts; results do not depend on it")
            ->check(CLI::PositiveNumber);
        app->add_flag("--free-initial", free_initial,
                      "Estimate initial distributions instead of using the stationary ones");
    }

    FitConfig config(std::uint64_t seed) const {
        FitConfig c;
        c.n_starts = starts;
        c.seed = seed;
        c.max_iterations = max_iter;
        c.gradient_tolerance = tol;
        c.threads = threads;
        c.free_initial = free_initial;
        return c;
    }

    Json json() const {
        return Json{{"starts", starts},
                    {"max_iter", max_iter},
                    {"tol", tol},
                    {"threads", threads},
                    {"free_initial", free_initial}};
    }
};

std::vector<std::pair<int, int>> parse_grid(const std::string& text) {
    std::vector<std::pair<int, int>> grid;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        int n = 0, nf = 0;
        char x = 0;
        std::istringstream is(item);
        if (!(is >> n >> x >> nf) || x != 'x' || n < 1 || nf < 1 || !is.eof()) {
            throw UsageError("grid entries look like 2x2, got '" + item + "'");
        }
        grid.emplace_back(n, nf);
    }
    if (grid.empty()) throw UsageError("empty grid");
    return grid;
}

void cmd_ingest(Run& run, const fs::path& prices, int chunk_length, const std::string& ragged) {
    run.config = Json{{"chunk_length", chunk_length}, {"ragged", ragged}};
    run.check_outputs({"panel.json"});
    run.input("prices", prices);
    const auto t0 = std::chrono::steady_clock::now();
    std::ifstream in(prices);
    if (!in) throw Error(ErrorKind::io, "cannot read " + prices.string());
    const auto series = read_prices_csv(in);
    const auto returns = log_returns(series);
    const auto panel = build_panel(returns, chunk_length, ragged == "keep" ? RaggedPolicy::keep : RaggedPolicy::drop);
    run.stage("ingest_seconds", t0);
    run.config["summary"] = Json{{"prices", series.closes.size()},
                                 {"returns", returns.values.size()},
                                 {"chunks", panel.n_chunks()},
                                 {"dropped_returns", panel.metadata().dropped_returns}};
    run.write("panel.json", dump(panel_to_json(panel)), validate_panel_file);
}

void cmd_fit(Run& run, const fs::path& panel_path, int n_coarse, int n_fine, const FitOptions& opts) {
    run.config = opts.json();
    run.config["n_coarse"] = n_coarse;
    run.config["n_fine"] = n_fine;
    run.check_outputs({"model.json", "fit_report.json"});
    const auto panel = load_panel(run, panel_path);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const auto result = fit(panel, n_coarse, n_fine, opts.config(run.seed));
        run.stage("fit_seconds", t0);
        run.write("model.json", dump(model_to_json(result.model)), validate_model_file);
        Json report = fit_result_to_json(result);
        report["status"] = "ok";
        run.write("fit_report.json", dump(report), validate_json_file);
    } catch (const FitFailure& e) {
        run.stage("fit_seconds", t0);
        Json report{{"status", "failed"}, {"message", e.what()}, {"runs", run_diagnostics_to_json(e.runs())}};
        run.write("fit_report.json", dump(report), validate_json_file);
        throw;
    }
}

void cmd_select(Run& run, const fs::path& panel_path, const std::string& grid_text, const FitOptions& opts) {
    const auto grid = parse_grid(grid_text);
    run.config = opts.json();
    run.config["grid"] = grid_text;
    run.check_outputs({"selection_table.csv"});
    const auto panel = load_panel(run, panel_path);
    const auto t0 = std::chrono::steady_clock::now();
    const auto table = select_order(panel, grid, opts.config(run.seed));
    run.stage("select_seconds", t0);
    std::ostringstream csv;
    write_selection_csv(csv, table);
    run.write("selection_table.csv", csv.str(), [&](const fs::path& p) {
        std::istringstream in(read_text(p));
        std::string line;
        std::size_t rows = 0;
        while (std::getline(in, line)) ++rows;
        if (rows != grid.size() + 1) throw Error(ErrorKind::io, "selection table is incomplete");
    });
    if (!table.bic_best) throw Error(ErrorKind::fit_failure, "every candidate failed to fit");
}

void cmd_decode(Run& run, const fs::path& panel_path, const fs::path& model_path) {
    run.check_outputs({"decoded.csv"});
    const auto panel = load_panel(run, panel_path);
    const auto model = load_model(run, model_path);
    const auto t0 = std::chrono::steady_clock::now();
    const auto states = decode_hierarchical(model, panel);
    run.stage("decode_seconds", t0);
    std::ostringstream csv;
    write_decoded_csv(csv, panel, states);
    run.write("decoded.csv", csv.str(), [&](const fs::path& p) {
        std::istringstream in(read_text(p));
        check_consistent(read_decoded_csv(in, panel), panel, model.n_coarse(), model.n_fine());
    });
}

void cmd_diagnose(Run& run, const fs::path& panel_path, const fs::path& model_path, const fs::path& decoded_path) {
    run.check_outputs({"residuals.json", "qq.csv"});
    const auto panel = load_panel(run, panel_path);
    const auto model = load_model(run, model_path);
    run.input("decoded", decoded_path);
    std::istringstream in(read_text(decoded_path));
    const auto states = read_decoded_csv(in, panel);
    const auto t0 = std::chrono::steady_clock::now();
    const auto report = pseudo_residuals(model, panel, states);
    run.stage("diagnose_seconds", t0);
    run.write("residuals.json", dump(residual_report_to_json(report)), validate_json_file);
    std::ostringstream qq;
    write_qq_csv(qq, report);
    run.write("qq.csv", qq.str(), [](const fs::path&) {});
}

void cmd_simulate(Run& run, const fs::path& model_path, int t_coarse, int t_fine, const std::string& mode) {
    run.config = Json{{"t_coarse", t_coarse}, {"t_fine", t_fine}, {"coarse_mode", mode}};
    run.check_outputs({"panel.json", "truth.csv"});
    const auto model = load_model(run, model_path);
    const auto t0 = std::chrono::steady_clock::now();
    const auto sim = simulate({model, t_coarse, t_fine, run.seed,
                               mode == "average" ? CoarseMode::chunk_average : CoarseMode::independent_emission});
    run.stage("simulate_seconds", t0);
    run.write("panel.json", dump(panel_to_json(sim.panel)), validate_panel_file);
    std::ostringstream csv;
    write_decoded_csv(csv, sim.panel, sim.truth);
    run.write("truth.csv", csv.str(), [&](const fs::path& p) {
        std::istringstream in(read_text(p));
        check_consistent(read_decoded_csv(in, sim.panel), sim.panel, model.n_coarse(), model.n_fine());
    });
}

Json error_json(const std::string& kind, const std::string& message, int code) {
    return Json{{"kind", kind}, {"message", message}, {"exit_code", code}};
}

int fail(Run* run, const std::string& kind, const std::string& message, int code) {
    const Json err = error_json(kind, message, code);
    std::cerr << Json{{"error", err}}.dump() << '\n';
    if (run && fs::is_directory(run->out)) {
        try {
            run->write_manifest("failed", err);
        } catch (...) {
            // The error report on stderr is what matters.
        }
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-level hidden Markov models for return series"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Run run;
    auto add_common = [&](CLI::App* sub, bool seeded) {
        sub->add_option("--out", run.out, "Output directory (created if missing)");
        sub->add_flag("--force", run.force, "Overwrite existing outputs");
        if (seeded) sub->add_option("--seed", run.seed, "Seed for every random draw");
    };

    fs::path prices, panel_path, model_path, decoded_path;
    int chunk_length = 30;
    std::string ragged = "drop";
    auto* ingest = app.add_subcommand("ingest", "Prices CSV -> panel.json");
    ingest->add_option("--prices", prices, "CSV with date and close columns")->required()->check(CLI::ExistingFile);
    ingest->add_option("--chunk-length", chunk_length, "Fine observations per chunk")->check(CLI::PositiveNumber);
    ingest->add_option("--ragged", ragged, "Trailing partial chunk")->check(CLI::IsMember({"drop", "keep"}));
    add_common(ingest, false);

    int n_coarse = 0, n_fine = 0;
    FitOptions fit_opts;
    auto* fit_cmd = app.add_subcommand("fit", "panel.json -> model.json + fit_report.json");
    fit_cmd->add_option("--panel", panel_path, "Panel document")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--n-coarse", n_coarse, "Coarse states")->required()->check(CLI::PositiveNumber);
    fit_cmd->add_option("--n-fine", n_fine, "Fine states per coarse state")->required()->check(CLI::PositiveNumber);
    fit_opts.add(fit_cmd);
    add_common(fit_cmd, true);

    std::string grid = "1x1,2x2,3x2";
    auto* select = app.add_subcommand("select", "panel.json -> selection_table.csv");
    select->add_option("--panel", panel_path, "Panel document")->required()->check(CLI::ExistingFile);
    select->add_option("--grid", grid, "Candidates as NxM, comma separated")->capture_default_str();
    fit_opts.add(select);
    add_common(select, true);

    auto* decode = app.add_subcommand("decode", "panel.json + model.json -> decoded.csv");
    decode->add_option("--panel", panel_path, "Panel document")->required()->check(CLI::ExistingFile);
    decode->add_option("--model", model_path, "Model document")->required()->check(CLI::ExistingFile);
    add_common(decode, false);

    auto* diagnose = app.add_subcommand("diagnose", "panel + model + decoded -> residuals.json + qq.csv");
    diagnose->add_option("--panel", panel_path, "Panel document")->required()->check(CLI::ExistingFile);
    diagnose->add_option("--model", model_path, "Model document")->required()->check(CLI::ExistingFile);
    diagnose->add_option("--decoded", decoded_path, "decoded.csv")->required()->check(CLI::ExistingFile);
    add_common(diagnose, false);

    int t_coarse = 0, t_fine = 0;
    std::string coarse_mode = "independent";
    auto* sim = app.add_subcommand("simulate", "model.json -> panel.json + truth.csv");
    sim->add_option("--model", model_path, "Model document")->required()->check(CLI::ExistingFile);
    sim->add_option("--t-coarse", t_coarse, "Number of chunks")->required()->check(CLI::PositiveNumber);
    sim->add_option("--t-fine", t_fine, "Fine observations per chunk")->required()->check(CLI::PositiveNumber);
    sim->add_option("--coarse-mode", coarse_mode, "Coarse observation: own emission or chunk mean")
        ->check(CLI::IsMember({"independent", "average"}));
    add_common(sim, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(nullptr, "usage", e.what(), usage);
    }

    run.command = app.get_subcommands().front()->get_name();
    try {
        fs::create_directories(run.out);
        if (run.command == "ingest") cmd_ingest(run, prices, chunk_length, ragged);
        if (run.command == "fit") cmd_fit(run, panel_path, n_coarse, n_fine, fit_opts);
        if (run.command == "select") cmd_select(run, panel_path, grid, fit_opts);
        if (run.command == "decode") cmd_decode(run, panel_path, model_path);
        if (run.command == "diagnose") cmd_diagnose(run, panel_path, model_path, decoded_path);
        if (run.command == "simulate") cmd_simulate(run, model_path, t_coarse, t_fine, coarse_mode);
        run.write_manifest("ok");
    } catch (const UsageError& e) {
        // Refusing to overwrite must not touch the existing manifest either.
        std::cerr << Json{{"error", error_json("usage", e.what(), usage)}}.dump() << '\n';
        return usage;
    } catch (const Error& e) {
        return fail(&run, std::string(to_string(e.kind())), e.what(), exit_code_for(e.kind()));
    } catch (const fs::filesystem_error& e) {
        return fail(&run, "io", e.what(), data);
    } catch (const std::exception& e) {
        return fail(&run, "internal", e.what(), internal);
    }
    return ok;
}
