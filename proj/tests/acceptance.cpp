// Acceptance suite: runs every release criterion at its pinned tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "amber/checkpoint.hpp"
#include "amber/config.hpp"
#include "amber/report.hpp"
#include "amber/stream.hpp"

namespace fs = std::filesystem;
using namespace amber;

namespace {

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

struct Criterion {
    std::string name;
    std::function<bool(std::string&)> run;
};

// ---------------------------------------------------------------------- 1
bool gradient_suite(std::string& detail) {
    const double t0 = now_seconds();
    double worst = 0.0;

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        Parameter w(Tensor::uniform({5, 4}, -1.0, 1.0, rng), "w");
        Parameter b(Tensor::uniform({5}, -0.5, 0.5, rng), "b");
        const Tensor x = Tensor::uniform({4}, -1.0, 1.0, rng);
        std::vector<Parameter*> params = {&w, &b};
        const double err = grad_check(params, [&](Tape* tape) {
            return softmax_nll(add(matvec(w.tensor, x, tape), b.tensor, tape), 3, 1.0, tape);
        }, 1e-5);
        worst = std::max(worst, err);
    }

    // Full pipeline: forward with nonzero feedback, prototype loss plus
    // weighted cross-entropy on a 2-sample batch, all parameters checked.
    for (std::uint64_t seed = 11; seed <= 15; ++seed) {
        SdsmConfig cfg;
        cfg.input_dim = 6;
        cfg.patch_len = 3;
        cfg.hidden_dim = 4;
        cfg.num_classes = 3;
        Rng rng(seed);
        SdsmModel model(cfg, rng);
        for (auto& v : model.fb_WA.tensor.values()) v = rng.uniform(-0.3, 0.3);
        for (auto& v : model.fb_WB.tensor.values()) v = rng.uniform(-0.3, 0.3);
        for (auto& v : model.fb_WC.tensor.values()) v = rng.uniform(-0.3, 0.3);
        const Tensor fb = Tensor::uniform({3}, -0.8, 0.8, rng);

        PrototypeBank bank(3, 4, 0.9, 0.5);
        for (std::size_t k = 0; k < 3; ++k) {
            auto& p = bank.prototype_mut(k);
            for (auto& v : p) v = rng.uniform(0.2, 1.0);
            bank.mark_seen(k);
        }
        std::vector<std::vector<double>> xs(2, std::vector<double>(6));
        for (auto& xv : xs)
            for (auto& v : xv) v = rng.uniform(-1.0, 1.0);
        const std::vector<std::size_t> ys = {0, 2};
        const double lambda = 1.0;

        const double err = grad_check(model.parameters(), [&](Tape* tape) {
            std::vector<Tensor> hiddens, ce;
            for (std::size_t t = 0; t < xs.size(); ++t) {
                ForwardTrace tr = forward(xs[t], model, &fb, tape);
                ce.push_back(softmax_nll(tr.logits, ys[t], 1.0, tape));
                hiddens.push_back(tr.hidden);
            }
            Tensor l_apa = proto_loss(hiddens, ys, bank, tape);
            return add(l_apa, scale(average(ce, tape), lambda, tape), tape);
        }, 1e-5);
        worst = std::max(worst, err);
    }

    const double elapsed = now_seconds() - t0;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "max rel err %.3e, %.2f s", worst, elapsed);
    detail = buf;
    return worst <= 1e-4 && elapsed < 10.0;
}

// ---------------------------------------------------------------------- 2
bool closed_form_losses(std::string& detail) {
    for (std::size_t K : {2u, 10u, 100u}) {
        PrototypeBank bank(K, 3, 0.9, 0.37);
        for (std::size_t k = 0; k < K; ++k) {
            bank.prototype_mut(k) = {1.0, 1.0, 1.0}; // identical: uniform similarity
            bank.mark_seen(k);
        }
        const double loss =
            proto_loss({Tensor::vector({0.3, -0.9, 2.0})}, {K / 2}, bank).value();
        if (std::fabs(loss - std::log(static_cast<double>(K))) > 1e-9) {
            detail = "uniform-similarity loss differs from ln " + std::to_string(K);
            return false;
        }
    }

    PrototypeBank bank(2, 2, 0.9, 0.1);
    bank.prototype_mut(0) = {1.0, 0.0};
    bank.mark_seen(0);
    update_prototypes(bank, {{0.0, 1.0}}, {0});
    if (std::fabs(bank.prototype(0)[0] - 0.9) > 1e-12 ||
        std::fabs(bank.prototype(0)[1] - 0.1) > 1e-12) {
        detail = "momentum fixture [0.9, 0.1] violated";
        return false;
    }
    detail = "ln K for K in {2,10,100} within 1e-9; momentum fixture within 1e-12";
    return true;
}

// ---------------------------------------------------------------------- 3
bool feedback_oracles(std::string& detail) {
    Rng rng(2024);
    double max_asym = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t K = 2 + rng.uniform_int(5); // 2..6
        PrototypeBank bank(K, 4, 0.9, 0.1);
        for (std::size_t k = 0; k < K; ++k) {
            if (rng.uniform() < 0.2) continue;
            auto& p = bank.prototype_mut(k);
            for (auto& v : p) v = rng.uniform(-1.0, 1.0);
            bank.mark_seen(k);
        }
        const Tensor F = feedback_matrix(bank);
        const auto& fv = F.values();
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j)
                max_asym = std::max(max_asym, std::fabs(fv[i * K + j] - fv[j * K + i]));

        for (std::size_t m = 1; m <= 15; ++m) {
            const auto [pairs, signal] = feedback_signal(F, bank.seen_flags(), m);

            // Brute force: repeatedly scan for the best remaining pair.
            std::vector<std::pair<std::size_t, std::size_t>> remaining;
            for (std::size_t i = 0; i < K; ++i)
                for (std::size_t j = i + 1; j < K; ++j)
                    if (bank.is_seen(i) && bank.is_seen(j)) remaining.emplace_back(i, j);
            std::vector<std::pair<std::size_t, std::size_t>> picked;
            std::vector<double> expect(K, 0.0);
            while (picked.size() < m && !remaining.empty()) {
                std::size_t best = 0;
                for (std::size_t c = 1; c < remaining.size(); ++c) {
                    const auto [bi, bj] = remaining[best];
                    const auto [ci, cj] = remaining[c];
                    const double fbst = fv[bi * K + bj], fc = fv[ci * K + cj];
                    if (fc > fbst || (fc == fbst && (ci < bi || (ci == bi && cj < bj))))
                        best = c;
                }
                picked.push_back(remaining[best]);
                for (std::size_t k = 0; k < K; ++k)
                    expect[k] += fv[remaining[best].first * K + k];
                remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
            }
            if (!picked.empty())
                for (auto& v : expect) v /= static_cast<double>(picked.size());

            if (pairs != picked) {
                detail = "top-m selection differs from brute force";
                return false;
            }
            for (std::size_t k = 0; k < K; ++k) {
                if (std::fabs(signal.values()[k] - expect[k]) > 1e-12) {
                    detail = "signal differs from brute force";
                    return false;
                }
            }
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "symmetry max %.3e; 100 banks, K<=6, m<=15", max_asym);
    detail = buf;
    return max_asym <= 1e-12;
}

// ---------------------------------------------------------------------- 4
bool metrics_oracle(std::string& detail) {
    const std::vector<std::vector<double>> R = {{0.9}, {0.7, 0.8}};
    const double acc = average_accuracy(R);
    const double forget = average_forgetting(R);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "avg_accuracy=%.17g avg_forgetting=%.17g", acc, forget);
    detail = buf;
    return std::fabs(acc - 0.75) <= 1e-15 && std::fabs(forget - 0.2) <= 1e-15;
}

// ---------------------------------------------------------------------- 5
bool ablation_direction(std::string& detail) {
    const double t0 = now_seconds();
    const json base_doc = load_json_file(AMBER_REFERENCE_CONFIG);

    struct Variant {
        const char* name;
        bool use_apa, use_mf;
    };
    const std::vector<Variant> variants = {
        {"baseline", false, false}, {"wo_apa", false, true},
        {"wo_mf", true, false},     {"full", true, true}};

    const RunConfig probe = parse_run_config(base_doc);
    const std::uint64_t base_seed = probe.train.seed;
    constexpr int num_seeds = 10;

    std::vector<std::vector<double>> acc(4), forget(4);
    for (int si = 0; si < num_seeds; ++si) {
        json seed_doc = base_doc;
        seed_doc["train.seed"] = base_seed + static_cast<std::uint64_t>(si);
        Dataset train, test;
        bool have_data = false;
        for (std::size_t vi = 0; vi < variants.size(); ++vi) {
            json run_doc = seed_doc;
            run_doc["train.use_apa"] = variants[vi].use_apa;
            run_doc["train.use_mf"] = variants[vi].use_mf;
            const RunConfig rc = parse_run_config(run_doc);
            if (!have_data) {
                auto pair = load_datasets(rc);
                train = std::move(pair.first);
                test = std::move(pair.second);
                have_data = true;
            }
            Rng init_rng = Rng(rc.train.seed).split(1);
            SdsmModel model(rc.model, init_rng);
            PrototypeBank bank(rc.model.num_classes, rc.model.hidden_dim, rc.train.alpha,
                               rc.train.tau, rc.train.normalize_prototypes);
            const RunLedger ledger =
                run_stream(model, bank, rc.schedule, train, test, rc.train);
            acc[vi].push_back(ledger.avg_accuracy);
            forget[vi].push_back(ledger.avg_forgetting);
        }
    }

    const auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double acc_base = mean(acc[0]), acc_full = mean(acc[3]);
    const double fg_base = mean(forget[0]), fg_full = mean(forget[3]);
    int between_wo_apa = 0, between_wo_mf = 0;
    for (int si = 0; si < num_seeds; ++si) {
        between_wo_apa += (acc[0][si] <= acc[1][si] && acc[1][si] <= acc[3][si]);
        between_wo_mf += (acc[0][si] <= acc[2][si] && acc[2][si] <= acc[3][si]);
    }
    const double elapsed = now_seconds() - t0;

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "acc full %.3f vs base %.3f (gap %+.3f, need >= +0.02); "
                  "forget full %.3f vs base %.3f; between wo_apa %d/10 wo_mf %d/10; %.1f s",
                  acc_full, acc_base, acc_full - acc_base, fg_full, fg_base, between_wo_apa,
                  between_wo_mf, elapsed);
    detail = buf;
    return acc_full >= acc_base + 0.02 && fg_full <= fg_base && between_wo_apa >= 7 &&
           between_wo_mf >= 7 && elapsed < 120.0;
}

// ---------------------------------------------------------------------- 6
bool cifar_smoke(std::string& detail) {
    const char* env = std::getenv("CIFAR10_DIR");
    fs::path dir = env ? fs::path(env) : fs::path("data/cifar-10-batches-bin");
    if (!fs::exists(dir / "data_batch_1.bin") || !fs::exists(dir / "test_batch.bin")) {
        detail = "SKIP: CIFAR-10 binaries not present (set CIFAR10_DIR to enable)";
        return true;
    }
    const double t0 = now_seconds();
    const auto read_file = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                         std::istreambuf_iterator<char>());
    };
    const Dataset train = read_cifar10(read_file(dir / "data_batch_1.bin"));
    const Dataset test = read_cifar10(read_file(dir / "test_batch.bin"));

    SdsmConfig mc;
    mc.input_dim = 3072;
    mc.patch_len = 64;
    mc.hidden_dim = 64;
    mc.num_classes = 10;
    Rng init_rng = Rng(1).split(1);
    SdsmModel model(mc, init_rng);
    PrototypeBank bank(10, 64, 0.98, 0.1);

    TaskSchedule schedule;
    schedule.tasks = {{0, 1}, {2, 3}};
    schedule.samples_per_class = 500;
    schedule.batch_size = 10;
    TrainConfig cfg;
    cfg.alpha = 0.98;
    cfg.lambda = 2.0;
    cfg.m = 5;
    cfg.adam.lr = 1e-3;
    cfg.buffer_capacity = 100;
    cfg.replay_batch = 10;
    cfg.seed = 1;

    const RunLedger ledger = run_stream(model, bank, schedule, train, test, cfg);
    const double elapsed = now_seconds() - t0;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "final avg_accuracy %.3f (chance 0.25), %.1f s",
                  ledger.avg_accuracy, elapsed);
    detail = buf;
    return ledger.avg_accuracy >= 0.40 && elapsed < 600.0;
}

// ---------------------------------------------------------------------- 7
bool reservoir_statistics(std::string& detail) {
    constexpr std::size_t M = 10, N = 1000;
    constexpr int trials = 100000;
    Rng rng(97531);
    const std::vector<std::size_t> probes = {0, 137, 500, 999};
    std::vector<long> hits(probes.size(), 0);
    for (int t = 0; t < trials; ++t) {
        ReplayBuffer buf(M);
        for (std::size_t i = 0; i < N; ++i)
            buf.insert({{static_cast<double>(i)}, 0}, rng);
        for (std::size_t p = 0; p < probes.size(); ++p) {
            for (const auto& e : buf.items()) {
                if (static_cast<std::size_t>(e.input[0]) == probes[p]) {
                    hits[p] += 1;
                    break;
                }
            }
        }
    }
    const double p = static_cast<double>(M) / static_cast<double>(N);
    const double sigma = std::sqrt(p * (1.0 - p) / trials);
    double worst = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const double freq = static_cast<double>(hits[i]) / trials;
        worst = std::max(worst, std::fabs(freq - p));
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "max |freq - %.3f| = %.2e vs 3 sigma = %.2e", p, worst,
                  3.0 * sigma);
    detail = buf;
    return worst <= 3.0 * sigma;
}

// ---------------------------------------------------------------------- 8
bool cli_determinism(std::string& detail) {
    const fs::path dir = fs::temp_directory_path() / "amber_acceptance";
    fs::create_directories(dir);
    const auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string{std::istreambuf_iterator<char>(f),
                           std::istreambuf_iterator<char>()};
    };
    const std::string overrides = " --set data.samples_per_class=50";
    for (int i = 1; i <= 2; ++i) {
        const std::string cmd = std::string(AMBER_CLI_PATH) + " train --config " +
                                AMBER_REFERENCE_CONFIG + " --out " +
                                (dir / ("det" + std::to_string(i))).string() + overrides +
                                " > /dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0) {
            detail = "train command failed";
            return false;
        }
    }
    const bool metrics_equal =
        slurp(dir / "det1/metrics.json") == slurp(dir / "det2/metrics.json");
    const bool matrix_equal =
        slurp(dir / "det1/accuracy_matrix.csv") == slurp(dir / "det2/accuracy_matrix.csv");
    detail = std::string("metrics.json ") + (metrics_equal ? "identical" : "DIFFER") +
             ", accuracy_matrix.csv " + (matrix_equal ? "identical" : "DIFFER");
    return metrics_equal && matrix_equal;
}

// ---------------------------------------------------------------------- 9
bool ablation_identity(std::string& detail) {
    SyntheticSpec spec;
    spec.num_classes = 4;
    spec.d = 8;
    spec.samples_per_class = 50;
    spec.separation = 4.0;
    spec.stddev = 1.0;
    spec.seed = 5;
    const auto [train, test] = gen_synthetic(spec);

    TaskSchedule schedule;
    schedule.tasks = {{0, 1}, {2, 3}};

    auto run_variant = [&](bool use_mf, bool freeze) {
        SdsmConfig mc;
        mc.input_dim = 8;
        mc.patch_len = 4;
        mc.hidden_dim = 6;
        mc.num_classes = 4;
        Rng init_rng = Rng(9).split(1);
        SdsmModel model(mc, init_rng);
        PrototypeBank bank(4, 6, 0.9, 0.1);
        TrainConfig cfg;
        cfg.buffer_capacity = 20;
        cfg.replay_batch = 10;
        cfg.seed = 9;
        cfg.use_mf = use_mf;
        cfg.freeze_feedback = freeze;
        std::vector<StepRecord> steps;
        StreamHooks hooks;
        hooks.on_step = [&steps](const StepRecord& s) { steps.push_back(s); };
        RunLedger ledger = run_stream(model, bank, schedule, train, test, cfg, hooks);
        return std::make_pair(ledger, steps);
    };

    const auto [frozen, frozen_steps] = run_variant(true, true);
    const auto [without, without_steps] = run_variant(false, false);

    bool same = frozen.matrix == without.matrix &&
                frozen.avg_accuracy == without.avg_accuracy &&
                frozen.avg_forgetting == without.avg_forgetting &&
                frozen_steps.size() == without_steps.size();
    if (same) {
        for (std::size_t i = 0; i < frozen_steps.size(); ++i) {
            same = same && frozen_steps[i].losses.l_apa == without_steps[i].losses.l_apa &&
                   frozen_steps[i].losses.l_task == without_steps[i].losses.l_task &&
                   frozen_steps[i].losses.l_total == without_steps[i].losses.l_total;
        }
    }
    detail = same ? "ledger and step log bitwise identical" : "ledgers differ";
    return same;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"gradient suite (rel err <= 1e-4 at h=1e-5, 5 seeds, < 10 s)", gradient_suite},
        {"closed-form loss identities (ln K <= 1e-9; momentum fixture <= 1e-12)",
         closed_form_losses},
        {"feedback oracles (symmetry <= 1e-12; top-m vs brute force)", feedback_oracles},
        {"metrics oracle (avg_accuracy 0.75, avg_forgetting 0.2)", metrics_oracle},
        {"ablation direction on the reference config (10 seeds, < 2 min)",
         ablation_direction},
        {"CIFAR-10 smoke (optional, >= 40% on first two tasks, < 10 min)", cifar_smoke},
        {"reservoir statistics (inclusion within 3 sigma of M/N, 1e5 trials)",
         reservoir_statistics},
        {"CLI determinism (byte-identical metrics.json and accuracy_matrix.csv)",
         cli_determinism},
        {"ablation identity (frozen zero feedback == no-feedback run, bitwise)",
         ablation_identity},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::string detail;
        bool ok = false;
        try {
            ok = criteria[i].run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("%s criterion %zu: %s%s%s\n", ok ? "PASS" : "FAIL", i + 1,
                    criteria[i].name.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
        std::fflush(stdout);
        failures += !ok;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
