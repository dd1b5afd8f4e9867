#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "amber/data.hpp"
#include "amber/error.hpp"
#include "amber/sdsm.hpp"
#include "amber/stream.hpp"

namespace amber {

using json = nlohmann::ordered_json;

struct DataConfig {
    enum class Source { synthetic, cifar10, cifar100 };
    Source source = Source::synthetic;
    SyntheticSpec synthetic;
    std::vector<std::string> train_files;
    std::string test_file;
    LabelGranularity granularity = LabelGranularity::fine;
    bool standardize = false;
};

struct RunConfig {
    SdsmConfig model;
    TrainConfig train;
    DataConfig data;
    TaskSchedule schedule;
    json echo;        // resolved flat key/value view, canonical order
    std::string hash; // FNV-1a of the echo serialization
};

namespace detail {

// Flat key/value access over the raw JSON document with consumption
// tracking, so leftover keys can be reported as configuration errors.
class FlatConfig {
public:
    explicit FlatConfig(json raw) : raw_(std::move(raw)) {
        if (!raw_.is_object()) throw ConfigError("config: top level must be a JSON object");
    }

    bool has(const std::string& key) const { return raw_.contains(key); }

    double number(const std::string& key, std::optional<double> def = std::nullopt) {
        if (!raw_.contains(key)) return required_default(key, def);
        consumed_.insert(key);
        const auto& v = raw_.at(key);
        if (!v.is_number()) throw ConfigError(key + ": expected a number");
        return v.get<double>();
    }

    std::uint64_t uinteger(const std::string& key,
                           std::optional<std::uint64_t> def = std::nullopt) {
        if (!raw_.contains(key)) return required_default(key, def);
        consumed_.insert(key);
        const auto& v = raw_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
            throw ConfigError(key + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, std::optional<bool> def = std::nullopt) {
        if (!raw_.contains(key)) return required_default(key, def);
        consumed_.insert(key);
        const auto& v = raw_.at(key);
        if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, std::optional<std::string> def = std::nullopt) {
        if (!raw_.contains(key)) return required_default(key, def);
        consumed_.insert(key);
        const auto& v = raw_.at(key);
        if (!v.is_string()) throw ConfigError(key + ": expected a string");
        return v.get<std::string>();
    }

    std::string choice(const std::string& key, const std::vector<std::string>& allowed,
                       std::optional<std::string> def = std::nullopt) {
        const std::string v = string(key, std::move(def));
        for (const auto& a : allowed)
            if (v == a) return v;
        std::string msg = key + ": '" + v + "' is not one of {";
        for (std::size_t i = 0; i < allowed.size(); ++i)
            msg += (i ? ", " : "") + allowed[i];
        throw ConfigError(msg + "}");
    }

    std::vector<std::string> string_list(const std::string& key,
                                         std::optional<std::vector<std::string>> def) {
        if (!raw_.contains(key)) return required_default(key, std::move(def));
        consumed_.insert(key);
        const auto& v = raw_.at(key);
        if (!v.is_array()) throw ConfigError(key + ": expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : v) {
            if (!e.is_string()) throw ConfigError(key + ": expected an array of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    std::vector<std::vector<std::size_t>> task_list(const std::string& key) {
        if (!raw_.contains(key)) throw ConfigError(key + ": required key missing");
        consumed_.insert(key);
        const auto& v = raw_.at(key);
        if (!v.is_array()) throw ConfigError(key + ": expected an array of class-index arrays");
        std::vector<std::vector<std::size_t>> out;
        for (const auto& task : v) {
            if (!task.is_array())
                throw ConfigError(key + ": expected an array of class-index arrays");
            std::vector<std::size_t> t;
            for (const auto& c : task) {
                if (!c.is_number_integer() || c.get<std::int64_t>() < 0)
                    throw ConfigError(key + ": class indices must be non-negative integers");
                t.push_back(c.get<std::size_t>());
            }
            out.push_back(std::move(t));
        }
        return out;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : raw_.items()) {
            if (!consumed_.count(key))
                throw ConfigError(key + ": unknown configuration key");
        }
    }

private:
    template <typename T>
    T required_default(const std::string& key, std::optional<T> def) {
        if (!def) throw ConfigError(key + ": required key missing");
        return *def;
    }

    json raw_;
    std::set<std::string> consumed_;
};

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

} // namespace detail

// Parse and fully validate a flat-key configuration document. Nothing is
// executed and nothing is written until this returns.
inline RunConfig parse_run_config(const json& raw) {
    detail::FlatConfig f(raw);
    RunConfig rc;

    // model
    rc.model.input_dim = static_cast<std::size_t>(f.uinteger("model.input_dim"));
    rc.model.patch_len = static_cast<std::size_t>(f.uinteger("model.patch_len"));
    rc.model.hidden_dim = static_cast<std::size_t>(f.uinteger("model.hidden_dim"));
    rc.model.num_classes = static_cast<std::size_t>(f.uinteger("model.num_classes"));
    rc.model.pooling =
        f.choice("model.pooling", {"last", "mean"}, std::string("mean")) == "last"
            ? Pooling::last
            : Pooling::mean;
    rc.train.inference =
        f.choice("model.inference", {"proto", "logits"}, std::string("proto")) == "proto"
            ? InferenceRule::proto_nearest
            : InferenceRule::logit_argmax;
    rc.model.validate();

    // train
    rc.train.tau = f.number("train.tau", 0.1);
    rc.train.alpha = f.number("train.alpha", 0.9);
    rc.train.lambda = f.number("train.lambda", 1.0);
    rc.train.m = static_cast<std::size_t>(f.uinteger("train.m", 2));
    rc.train.adam.lr = f.number("train.lr", 1e-3);
    rc.train.adam.beta1 = f.number("train.beta1", 0.9);
    rc.train.adam.beta2 = f.number("train.beta2", 0.999);
    rc.train.adam.eps = f.number("train.eps", 1e-8);
    rc.train.buffer_capacity = static_cast<std::size_t>(f.uinteger("train.buffer_capacity", 100));
    rc.train.epochs_per_batch = static_cast<std::size_t>(f.uinteger("train.epochs_per_batch", 1));
    rc.train.seed = f.uinteger("train.seed", 1);
    rc.train.use_apa = f.boolean("train.use_apa", true);
    rc.train.use_mf = f.boolean("train.use_mf", true);
    rc.train.freeze_feedback = f.boolean("train.freeze_feedback", false);
    rc.train.feedback_both_rows = f.boolean("train.feedback_both_rows", false);
    rc.train.normalize_prototypes = f.boolean("train.normalize_prototypes", false);

    // schedule
    rc.schedule.tasks = f.task_list("schedule.tasks");
    rc.schedule.samples_per_class =
        static_cast<std::size_t>(f.uinteger("schedule.samples_per_class", 0));
    rc.schedule.batch_size = static_cast<std::size_t>(f.uinteger("schedule.batch_size", 10));
    rc.train.replay_batch = static_cast<std::size_t>(
        f.uinteger("train.replay_batch", rc.schedule.batch_size));

    rc.train.validate();
    rc.schedule.validate(rc.model.num_classes);

    // data
    const std::string source =
        f.choice("data.source", {"synthetic", "cifar10", "cifar100"}, std::string("synthetic"));
    rc.data.source = source == "synthetic" ? DataConfig::Source::synthetic
                     : source == "cifar10" ? DataConfig::Source::cifar10
                                           : DataConfig::Source::cifar100;
    rc.data.standardize = f.boolean("data.standardize", false);
    rc.data.granularity =
        f.choice("data.granularity", {"fine", "coarse"}, std::string("fine")) == "fine"
            ? LabelGranularity::fine
            : LabelGranularity::coarse;
    rc.data.synthetic.num_classes = rc.model.num_classes;
    rc.data.synthetic.d = rc.model.input_dim;
    rc.data.synthetic.samples_per_class =
        static_cast<std::size_t>(f.uinteger("data.samples_per_class", 200));
    rc.data.synthetic.separation = f.number("data.separation", 6.0);
    rc.data.synthetic.stddev = f.number("data.stddev", 1.0);
    rc.data.synthetic.seed = f.uinteger("data.seed", rc.train.seed);
    rc.data.train_files = f.string_list("data.train_files", std::vector<std::string>{});
    rc.data.test_file = f.string("data.test_file", std::string(""));

    if (rc.data.source == DataConfig::Source::synthetic) {
        if (rc.data.synthetic.samples_per_class == 0)
            throw ConfigError("data.samples_per_class: must be positive");
        if (rc.data.synthetic.separation <= 0.0)
            throw ConfigError("data.separation: must be positive");
        if (rc.data.synthetic.stddev <= 0.0)
            throw ConfigError("data.stddev: must be positive");
    } else {
        if (rc.data.train_files.empty())
            throw ConfigError("data.train_files: required for CIFAR sources");
        if (rc.data.test_file.empty())
            throw ConfigError("data.test_file: required for CIFAR sources");
    }

    f.reject_unknown();

    // Resolved echo in canonical order; its serialization is the config hash
    // input and lands in metrics.json.
    json echo;
    echo["model.input_dim"] = rc.model.input_dim;
    echo["model.patch_len"] = rc.model.patch_len;
    echo["model.hidden_dim"] = rc.model.hidden_dim;
    echo["model.num_classes"] = rc.model.num_classes;
    echo["model.pooling"] = rc.model.pooling == Pooling::last ? "last" : "mean";
    echo["model.inference"] =
        rc.train.inference == InferenceRule::proto_nearest ? "proto" : "logits";
    echo["train.tau"] = rc.train.tau;
    echo["train.alpha"] = rc.train.alpha;
    echo["train.lambda"] = rc.train.lambda;
    echo["train.m"] = rc.train.m;
    echo["train.lr"] = rc.train.adam.lr;
    echo["train.beta1"] = rc.train.adam.beta1;
    echo["train.beta2"] = rc.train.adam.beta2;
    echo["train.eps"] = rc.train.adam.eps;
    echo["train.buffer_capacity"] = rc.train.buffer_capacity;
    echo["train.replay_batch"] = rc.train.replay_batch;
    echo["train.epochs_per_batch"] = rc.train.epochs_per_batch;
    echo["train.seed"] = rc.train.seed;
    echo["train.use_apa"] = rc.train.use_apa;
    echo["train.use_mf"] = rc.train.use_mf;
    echo["train.freeze_feedback"] = rc.train.freeze_feedback;
    echo["train.feedback_both_rows"] = rc.train.feedback_both_rows;
    echo["train.normalize_prototypes"] = rc.train.normalize_prototypes;
    echo["schedule.tasks"] = rc.schedule.tasks;
    echo["schedule.samples_per_class"] = rc.schedule.samples_per_class;
    echo["schedule.batch_size"] = rc.schedule.batch_size;
    echo["data.source"] = source;
    echo["data.standardize"] = rc.data.standardize;
    echo["data.granularity"] =
        rc.data.granularity == LabelGranularity::fine ? "fine" : "coarse";
    echo["data.samples_per_class"] = rc.data.synthetic.samples_per_class;
    echo["data.separation"] = rc.data.synthetic.separation;
    echo["data.stddev"] = rc.data.synthetic.stddev;
    echo["data.seed"] = rc.data.synthetic.seed;
    echo["data.train_files"] = rc.data.train_files;
    echo["data.test_file"] = rc.data.test_file;
    rc.echo = echo;
    rc.hash = detail::hex64(detail::fnv1a64(echo.dump()));
    return rc;
}

inline json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    try {
        return json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
    }
}

// `--set key=value` overrides. The value is parsed as JSON when possible,
// otherwise taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set: expected KEY=VALUE, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    try {
        doc[key] = json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
        doc[key] = value;
    }
}

// Load the data source named by the config. Standardization statistics are
// fitted on the train split and applied to both splits.
inline std::pair<Dataset, Dataset> load_datasets(const RunConfig& rc) {
    Dataset train, test;
    if (rc.data.source == DataConfig::Source::synthetic) {
        auto pair = gen_synthetic(rc.data.synthetic);
        train = std::move(pair.first);
        test = std::move(pair.second);
    } else {
        const auto read_file = [](const std::string& path) {
            std::ifstream f(path, std::ios::binary);
            if (!f) throw DataError("data: cannot open " + path);
            return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                             std::istreambuf_iterator<char>());
        };
        std::vector<std::uint8_t> train_bytes;
        for (const auto& p : rc.data.train_files) {
            const auto b = read_file(p);
            train_bytes.insert(train_bytes.end(), b.begin(), b.end());
        }
        const auto test_bytes = read_file(rc.data.test_file);
        if (rc.data.source == DataConfig::Source::cifar10) {
            train = read_cifar10(train_bytes);
            test = read_cifar10(test_bytes);
        } else {
            train = read_cifar100(train_bytes, rc.data.granularity);
            test = read_cifar100(test_bytes, rc.data.granularity);
        }
    }
    if (rc.data.standardize) {
        const Standardization st = compute_standardization(train);
        apply_standardization(train, st);
        apply_standardization(test, st);
    }
    return {std::move(train), std::move(test)};
}

} // namespace amber
