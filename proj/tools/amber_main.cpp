// amber: online continual-learning runs from a single JSON config.
//   amber train    --config cfg.json --out DIR [--set k=v ...]
//   amber ablate   --config cfg.json --out DIR [--seeds N] [--set k=v ...]
//   amber report   RUN_DIR... [--out DIR]
//   amber gen-data --config cfg.json --out FILE [--set k=v ...]

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "amber/checkpoint.hpp"
#include "amber/config.hpp"
#include "amber/log.hpp"
#include "amber/report.hpp"
#include "amber/stream.hpp"

namespace fs = std::filesystem;

namespace {

amber::RunConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
    amber::json doc = amber::load_json_file(path);
    for (const auto& s : sets) amber::apply_override(doc, s);
    return amber::parse_run_config(doc);
}

struct RunResult {
    amber::RunLedger ledger;
    std::vector<amber::StepRecord> steps;
    amber::SdsmModel model;
    amber::PrototypeBank bank;
};

RunResult execute_run(const amber::RunConfig& rc, const amber::Dataset& train,
                      const amber::Dataset& test) {
    RunResult rr;
    amber::Rng init_rng = amber::Rng(rc.train.seed).split(1);
    rr.model = amber::SdsmModel(rc.model, init_rng);
    rr.bank = amber::PrototypeBank(rc.model.num_classes, rc.model.hidden_dim, rc.train.alpha,
                                   rc.train.tau, rc.train.normalize_prototypes);
    amber::StreamHooks hooks;
    hooks.on_step = [&rr](const amber::StepRecord& s) { rr.steps.push_back(s); };
    rr.ledger = amber::run_stream(rr.model, rr.bank, rc.schedule, train, test, rc.train, hooks);
    rr.ledger.config_hash = rc.hash;
    return rr;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& out_dir) {
    const amber::RunConfig rc = load_config(config_path, sets);
    const auto [train, test] = amber::load_datasets(rc);

    fs::create_directories(out_dir);
    const RunResult rr = execute_run(rc, train, test);

    amber::write_metrics_json(out_dir + "/metrics.json", rr.ledger, rc.echo);
    amber::write_accuracy_matrix_csv(out_dir + "/accuracy_matrix.csv", rr.ledger);
    amber::write_steps_csv(out_dir + "/steps.csv", rr.steps);
    amber::save_checkpoint(out_dir + "/checkpoint.bin", rr.model, rr.bank);

    std::printf("avg_accuracy=%.6f avg_forgetting=%.6f tasks=%zu out=%s\n",
                rr.ledger.avg_accuracy, rr.ledger.avg_forgetting, rr.ledger.matrix.size(),
                out_dir.c_str());
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::vector<std::string>& sets,
               const std::string& out_dir, unsigned seeds) {
    if (seeds == 0) throw amber::ConfigError("--seeds: must be >= 1");
    amber::json doc = amber::load_json_file(config_path);
    for (const auto& s : sets) amber::apply_override(doc, s);
    const amber::RunConfig base = amber::parse_run_config(doc); // full validation up front

    struct Variant {
        const char* name;
        bool use_apa;
        bool use_mf;
    };
    const std::vector<Variant> variants = {
        {"baseline", false, false}, {"wo_apa", false, true},
        {"wo_mf", true, false},     {"full", true, true}};

    fs::create_directories(out_dir);
    std::vector<amber::AblationRow> rows;
    for (unsigned i = 0; i < seeds; ++i) {
        const std::uint64_t seed = base.train.seed + i;
        amber::json seed_doc = doc;
        seed_doc["train.seed"] = seed;

        bool have_data = false;
        amber::Dataset train, test;
        for (const auto& v : variants) {
            amber::json run_doc = seed_doc;
            run_doc["train.use_apa"] = v.use_apa;
            run_doc["train.use_mf"] = v.use_mf;
            const amber::RunConfig rc = amber::parse_run_config(run_doc);
            if (!have_data) {
                // Data depends only on the seed, not the variant.
                auto pair = amber::load_datasets(rc);
                train = std::move(pair.first);
                test = std::move(pair.second);
                have_data = true;
            }
            const RunResult rr = execute_run(rc, train, test);
            rows.push_back({v.name, seed, rr.ledger.avg_accuracy, rr.ledger.avg_forgetting});
            amber::log_info(std::string("ablate: ") + v.name + " seed " +
                            std::to_string(seed) + " acc " +
                            std::to_string(rr.ledger.avg_accuracy));
        }
    }

    std::vector<std::string> order;
    for (const auto& v : variants) order.push_back(v.name);
    amber::write_ablation_csv(out_dir + "/ablation.csv", rows, order);

    for (const auto& name : order) {
        double acc = 0.0, forget = 0.0;
        std::size_t n = 0;
        for (const auto& r : rows)
            if (r.variant == name) {
                acc += r.avg_accuracy;
                forget += r.avg_forgetting;
                n += 1;
            }
        std::printf("%-9s mean_accuracy=%.6f mean_forgetting=%.6f (%zu seeds)\n", name.c_str(),
                    acc / static_cast<double>(n), forget / static_cast<double>(n), n);
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    std::vector<std::string> names;
    std::vector<amber::MetricsSummary> runs;
    for (const auto& dir : run_dirs) {
        runs.push_back(amber::read_metrics_json(dir + "/metrics.json"));
        names.push_back(fs::path(dir).filename().string().empty()
                            ? dir
                            : fs::path(dir).filename().string());
    }

    fs::create_directories(out_dir);
    const std::string csv = amber::incremental_csv(names, runs);
    amber::detail::write_text_file(out_dir + "/incremental_accuracy.csv", csv);

    std::printf("%-24s %6s %14s %16s\n", "run", "tasks", "avg_accuracy", "avg_forgetting");
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::printf("%-24s %6zu %14.6f %16.6f\n", names[i].c_str(), runs[i].matrix.size(),
                    runs[i].avg_accuracy, runs[i].avg_forgetting);
    }
    return 0;
}

int cmd_gen_data(const std::string& config_path, const std::vector<std::string>& sets,
                 const std::string& out_path) {
    amber::json doc = amber::load_json_file(config_path);
    for (const auto& s : sets) amber::apply_override(doc, s);
    const amber::RunConfig rc = amber::parse_run_config(doc);
    if (rc.data.source != amber::DataConfig::Source::synthetic)
        throw amber::ConfigError("data.source: gen-data requires the synthetic source");

    const auto [train, test] = amber::load_datasets(rc);
    auto bytes = amber::export_records(train);
    const auto test_bytes = amber::export_records(test);
    bytes.insert(bytes.end(), test_bytes.begin(), test_bytes.end());

    std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
    if (!f) throw amber::DataError("gen-data: cannot open " + out_path + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw amber::DataError("gen-data: write failed for " + out_path);
    std::printf("wrote %zu records (%zu bytes) to %s\n", train.size() + test.size(),
                bytes.size(), out_path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"online continual-learning engine"};
    app.require_subcommand(1);

    std::string config_path, out = ".";
    std::vector<std::string> sets;
    std::vector<std::string> run_dirs;
    unsigned seeds = 10;

    auto* train = app.add_subcommand("train", "run one class-incremental stream");
    train->add_option("--config", config_path, "JSON config path")->required();
    train->add_option("--set", sets, "override a config key (KEY=VALUE)");
    train->add_option("--out", out, "output directory")->required();

    auto* ablate = app.add_subcommand("ablate", "run the four-variant ablation grid");
    ablate->add_option("--config", config_path, "JSON config path")->required();
    ablate->add_option("--set", sets, "override a config key (KEY=VALUE)");
    ablate->add_option("--out", out, "output directory")->required();
    ablate->add_option("--seeds", seeds, "number of seeds (base seed from config)");

    auto* report = app.add_subcommand("report", "summarize finished runs");
    report->add_option("dirs", run_dirs, "run directories containing metrics.json")
        ->required();
    report->add_option("--out", out, "output directory for the combined CSV");

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset file");
    gen->add_option("--config", config_path, "JSON config path")->required();
    gen->add_option("--set", sets, "override a config key (KEY=VALUE)");
    gen->add_option("--out", out, "output file path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(config_path, sets, out);
        if (ablate->parsed()) return cmd_ablate(config_path, sets, out, seeds);
        if (report->parsed()) return cmd_report(run_dirs, out);
        if (gen->parsed()) return cmd_gen_data(config_path, sets, out);
    } catch (const amber::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const amber::FormatError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const amber::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const amber::EvalError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
