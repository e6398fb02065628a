// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "ecolora/error.hpp"

namespace ecolora {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw InvalidConfig("config field '" + field + "': " + what);
}

bool fraction(double v) { return v > 0.0 && v <= 1.0; }

// Reads j[key] into out when present. Numbers may also be given as "inf".
template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        if constexpr (std::is_floating_point_v<T>) {
            const auto& v = j.at(key);
            if (v.is_string()) {
                const auto s = v.get<std::string>();
                if (s == "inf" || s == "infinity") {
                    out = std::numeric_limits<T>::infinity();
                    return;
                }
                throw InvalidConfig("config field '" + std::string(key) + "': expected a number, got \"" + s + "\"");
            }
        }
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidConfig("config field '" + std::string(key) + "': " + e.what());
    }
}

json number_or_inf(double v) { return std::isinf(v) ? json("inf") : json(v); }

}  // namespace

void RunConfig::validate() const {
    require(!model.layers.empty(), "model.layers", "at least one layer required");
    for (const auto& l : model.layers) {
        require(l.out > 0 && l.in > 0, "model.layers", "dimensions must be positive");
        require(model.rank <= std::min(l.out, l.in), "model.rank", "exceeds min(m, n) of a layer");
    }
    require(model.rank > 0, "model.rank", "must be positive");
    require(model.scaling > 0.0f, "model.scaling", "must be positive");
    require(model.layers.front().in == data.dim, "model.layers", "first layer input must equal data.dim");
    const std::size_t out_width = data.task == TaskKind::Classification ? data.classes : data.outputs;
    require(model.layers.back().out == out_width, "model.layers", "last layer output must match the task width");
    for (std::size_t l = 1; l < model.layers.size(); ++l) {
        require(model.layers[l].in == model.layers[l - 1].out, "model.layers", "consecutive layers must chain");
    }
    require(data.classes > 0 && data.dim > 0, "data", "classes and dim must be positive");
    require(data.samples >= fl.num_clients, "data.samples", "must be at least fl.num_clients");
    require(dirichlet_alpha > 0.0, "data.dirichlet_alpha", "must be positive");
    require(fl.num_clients > 0, "fl.num_clients", "must be positive");
    require(fl.clients_per_round > 0 && fl.clients_per_round <= fl.num_clients, "fl.clients_per_round",
            "must lie in [1, num_clients]");
    require(fl.rounds >= 0, "fl.rounds", "must be non-negative");
    require(fl.local_epochs >= 0, "fl.local_epochs", "must be non-negative");
    require(fl.lr > 0.0f, "fl.lr", "must be positive");
    require(eco.num_segments >= 1, "ecolora.num_segments", "must be at least 1");
    require(!eco.segments || eco.num_segments <= fl.clients_per_round, "ecolora.num_segments",
            "must not exceed fl.clients_per_round");
    require(fraction(eco.schedule.k_max), "ecolora.k_max", "must lie in (0, 1]");
    require(fraction(eco.schedule.k_min_A), "ecolora.k_min_A", "must lie in (0, 1]");
    require(fraction(eco.schedule.k_min_B), "ecolora.k_min_B", "must lie in (0, 1]");
    require(eco.schedule.k_min_A <= eco.schedule.k_max, "ecolora.k_min_A", "must not exceed k_max");
    require(eco.schedule.k_min_B <= eco.schedule.k_max, "ecolora.k_min_B", "must not exceed k_max");
    require(eco.schedule.gamma_A >= 0.0, "ecolora.gamma_A", "must be non-negative");
    require(eco.schedule.gamma_B >= 0.0, "ecolora.gamma_B", "must be non-negative");
    require(eco.beta > 0.0, "ecolora.beta", "must be positive");
    require(scenario.uplink_bps > 0.0 && scenario.downlink_bps > 0.0 && scenario.latency_s > 0.0, "network",
            "bandwidths and latency must be positive");
    require(!compute_seconds || *compute_seconds >= 0.0, "compute_seconds", "must be non-negative");
}

ProtocolConfig RunConfig::protocol() const {
    ProtocolConfig p;
    p.segments = eco.segments;
    p.sparsify = eco.sparsify;
    p.encode = eco.encode;
    p.rice = eco.rice;
    p.schedule = eco.schedule;
    p.beta = eco.beta;
    p.local_epochs = fl.local_epochs;
    p.lr = fl.lr;
    p.batch_size = fl.batch_size;
    p.compute_seconds = compute_seconds;
    p.scenario = scenario;
    p.threads = threads;
    p.seed = seed;
    return p;
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    if (!j.is_object()) throw InvalidConfig("config root must be an object");
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
    read(j, "out_dir", c.out_dir);
    if (j.contains("compute_seconds")) {
        if (j.at("compute_seconds").is_null()) {
            c.compute_seconds.reset();
        } else {
            double v = 0.0;
            read(j, "compute_seconds", v);
            c.compute_seconds = v;
        }
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        if (m.contains("layers")) {
            c.model.layers.clear();
            for (const auto& l : m.at("layers")) {
                if (!l.is_array() || l.size() != 2) throw InvalidConfig("config field 'model.layers': expected [out, in] pairs");
                c.model.layers.push_back({l[0].get<std::size_t>(), l[1].get<std::size_t>()});
            }
        }
        read(m, "rank", c.model.rank);
        read(m, "scaling", c.model.scaling);
    }
    c.data.seed = c.seed;
    if (j.contains("data")) {
        const auto& d = j.at("data");
        std::string task = "classification";
        read(d, "task", task);
        if (task == "classification") {
            c.data.task = TaskKind::Classification;
        } else if (task == "regression") {
            c.data.task = TaskKind::Regression;
        } else {
            throw InvalidConfig("config field 'data.task': expected classification or regression");
        }
        read(d, "classes", c.data.classes);
        read(d, "dim", c.data.dim);
        read(d, "samples", c.data.samples);
        read(d, "noise", c.data.noise);
        read(d, "separation", c.data.separation);
        read(d, "outputs", c.data.outputs);
        read(d, "seed", c.data.seed);
        read(d, "dirichlet_alpha", c.dirichlet_alpha);
    }
    if (j.contains("fl")) {
        const auto& f = j.at("fl");
        read(f, "num_clients", c.fl.num_clients);
        read(f, "clients_per_round", c.fl.clients_per_round);
        read(f, "rounds", c.fl.rounds);
        read(f, "local_epochs", c.fl.local_epochs);
        read(f, "lr", c.fl.lr);
        read(f, "batch_size", c.fl.batch_size);
    }
    if (j.contains("ecolora")) {
        const auto& e = j.at("ecolora");
        read(e, "num_segments", c.eco.num_segments);
        read(e, "k_max", c.eco.schedule.k_max);
        read(e, "k_min_A", c.eco.schedule.k_min_A);
        read(e, "k_min_B", c.eco.schedule.k_min_B);
        read(e, "gamma_A", c.eco.schedule.gamma_A);
        read(e, "gamma_B", c.eco.schedule.gamma_B);
        read(e, "beta", c.eco.beta);
        read(e, "segments", c.eco.segments);
        read(e, "sparsify", c.eco.sparsify);
        read(e, "encode", c.eco.encode);
        read(e, "rice", c.eco.rice);
    }
    if (j.contains("network")) {
        const auto& n = j.at("network");
        if (n.is_string()) {
            c.scenario = scenario_preset(n.get<std::string>());
        } else {
            c.scenario.name = "custom";
            read(n, "name", c.scenario.name);
            read(n, "uplink_bps", c.scenario.uplink_bps);
            read(n, "downlink_bps", c.scenario.downlink_bps);
            read(n, "latency_s", c.scenario.latency_s);
        }
    }
    return c;
}

json to_json(const RunConfig& c) {
    json layers = json::array();
    for (const auto& l : c.model.layers) layers.push_back({l.out, l.in});
    json j;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    j["out_dir"] = c.out_dir;
    j["compute_seconds"] = c.compute_seconds ? json(*c.compute_seconds) : json(nullptr);
    j["model"] = {{"layers", layers}, {"rank", c.model.rank}, {"scaling", c.model.scaling}};
    j["data"] = {{"task", c.data.task == TaskKind::Classification ? "classification" : "regression"},
                 {"classes", c.data.classes},
                 {"dim", c.data.dim},
                 {"samples", c.data.samples},
                 {"noise", c.data.noise},
                 {"separation", c.data.separation},
                 {"outputs", c.data.outputs},
                 {"seed", c.data.seed},
                 {"dirichlet_alpha", c.dirichlet_alpha}};
    j["fl"] = {{"num_clients", c.fl.num_clients},   {"clients_per_round", c.fl.clients_per_round},
               {"rounds", c.fl.rounds},             {"local_epochs", c.fl.local_epochs},
               {"lr", c.fl.lr},                     {"batch_size", c.fl.batch_size}};
    j["ecolora"] = {{"num_segments", c.eco.num_segments},
                    {"k_max", c.eco.schedule.k_max},
                    {"k_min_A", c.eco.schedule.k_min_A},
                    {"k_min_B", c.eco.schedule.k_min_B},
                    {"gamma_A", c.eco.schedule.gamma_A},
                    {"gamma_B", c.eco.schedule.gamma_B},
                    {"beta", number_or_inf(c.eco.beta)},
                    {"segments", c.eco.segments},
                    {"sparsify", c.eco.sparsify},
                    {"encode", c.eco.encode},
                    {"rice", c.eco.rice}};
    j["network"] = {{"name", c.scenario.name},
                    {"uplink_bps", c.scenario.uplink_bps},
                    {"downlink_bps", c.scenario.downlink_bps},
                    {"latency_s", c.scenario.latency_s}};
    return j;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidConfig("config file " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

}  // namespace ecolora
