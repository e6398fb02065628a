// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "ecolora/error.hpp"
#include "ecolora/lora_model.hpp"
#include "ecolora/rng.hpp"

using namespace ecolora;

namespace {

// Reference forward pass in double, written directly from the model
// definition: z = (W + s B A) h, tanh between layers.
double oracle_loss(const ToyModel& model, const std::vector<double>& flat, const Dataset& data) {
    const auto& layout = model.layout();
    const double s = model.factor_scale();
    double total = 0.0;
    for (std::size_t row = 0; row < data.size(); ++row) {
        std::vector<double> h(data.features.row(row).begin(), data.features.row(row).end());
        for (std::size_t l = 0; l < model.num_layers(); ++l) {
            const auto& ta = layout.tensors()[2 * l];
            const auto& tb = layout.tensors()[2 * l + 1];
            const auto& w = model.base(l);
            std::vector<double> z(w.rows(), 0.0);
            for (std::size_t i = 0; i < w.rows(); ++i) {
                for (std::size_t j = 0; j < w.cols(); ++j) {
                    double ba = 0.0;
                    for (std::size_t k = 0; k < ta.rows; ++k) {
                        ba += flat[tb.offset + i * tb.cols + k] * flat[ta.offset + k * ta.cols + j];
                    }
                    z[i] += (w(i, j) + s * ba) * h[j];
                }
            }
            if (l + 1 < model.num_layers()) {
                for (auto& v : z) v = std::tanh(v);
            }
            h = std::move(z);
        }
        if (model.task() == TaskKind::Classification) {
            double mx = *std::max_element(h.begin(), h.end());
            double sum = 0.0;
            for (double v : h) sum += std::exp(v - mx);
            total += mx + std::log(sum) - h[static_cast<std::size_t>(data.labels[row])];
        } else {
            for (std::size_t j = 0; j < h.size(); ++j) {
                const double d = h[j] - data.targets(row, j);
                total += 0.5 * d * d;
            }
        }
    }
    return total / static_cast<double>(data.size());
}

LoraParams random_params(const ParamLayout& layout, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<float> flat(layout.total_len());
    for (auto& v : flat) v = static_cast<float>(uniform01(rng) - 0.5);
    return LoraParams::unflatten(layout, flat);
}

}  // namespace

TEST_CASE("build_toy_model: zero-initialised B leaves the base weight unchanged") {
    const std::vector<LayerShape> dims{{8, 8}};
    const auto built = build_toy_model(dims, 2, 4.0f, 0);
    const auto w = built.model.effective_weight(built.init, 0);
    CHECK(w == built.model.base(0));
    for (float v : built.init.layers[0].b.data()) CHECK(v == 0.0f);
    const float bound = 1.0f / std::sqrt(8.0f);
    for (float v : built.init.layers[0].a.data()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("build_toy_model: total length from shapes") {
    const std::vector<LayerShape> dims{{4, 6}, {6, 2}};
    const auto built = build_toy_model(dims, 2, 2.0f, 0);
    CHECK(built.model.layout().total_len() == 36);
    CHECK(built.init.total_len() == 36);
    const auto& t = built.model.layout().tensors();
    REQUIRE(t.size() == 4);
    CHECK(t[0].id == 0);
    CHECK(t[0].kind == MatrixKind::A);
    CHECK(t[1].offset == 12);
    CHECK(t[2].offset == 20);
    CHECK(t[3].kind == MatrixKind::B);
    CHECK(t[3].offset == 24);
}

TEST_CASE("build_toy_model: deterministic and rejects rank above min(m, n)") {
    const std::vector<LayerShape> dims{{5, 7}, {3, 5}};
    const auto a = build_toy_model(dims, 3, 1.0f, 42);
    const auto b = build_toy_model(dims, 3, 1.0f, 42);
    CHECK(a.init == b.init);
    CHECK(a.model.base(1) == b.model.base(1));
    CHECK_THROWS_AS(build_toy_model(dims, 4, 1.0f, 0), InvalidConfig);
}

TEST_CASE("flatten and unflatten are inverse") {
    for (std::size_t rank = 1; rank <= 3; ++rank) {
        const std::vector<LayerShape> dims{{3, 4}, {5, 3}, {4, 5}};
        const auto built = build_toy_model(dims, rank, 1.0f, rank);
        const auto p = random_params(built.model.layout(), rank);
        const auto flat = p.flatten();
        CHECK(flat.size() == built.model.layout().total_len());
        CHECK(LoraParams::unflatten(built.model.layout(), flat) == p);
    }
}

TEST_CASE("gradient matches central finite differences of a double-precision oracle") {
    for (TaskKind task : {TaskKind::Classification, TaskKind::Regression}) {
        // 10 trainable scalars: A 1x2, B 3x1, A 1x3, B 2x1.
        const std::vector<LayerShape> dims{{3, 2}, {2, 3}};
        const auto built = build_toy_model(dims, 1, 1.0f, 7, task);
        const ToyModel& model = built.model;
        REQUIRE(model.layout().total_len() == 10);

        DataSpec spec;
        spec.task = task;
        spec.classes = 2;
        spec.dim = 2;
        spec.samples = 6;
        spec.outputs = 2;
        spec.seed = 3;
        const auto data = make_synthetic_dataset(spec);

        const auto params = random_params(model.layout(), 11);
        std::vector<std::size_t> rows(data.size());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        const auto grad = model.gradient(params, data, rows).flatten();

        const auto f = params.flatten();
        std::vector<double> x(f.begin(), f.end());
        const double h = 1e-4;
        for (std::size_t i = 0; i < x.size(); ++i) {
            auto xp = x;
            auto xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (oracle_loss(model, xp, data) - oracle_loss(model, xm, data)) / (2 * h);
            INFO("task ", static_cast<int>(task), " scalar ", i);
            CHECK(std::abs(grad[i] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-2));
        }
    }
}

TEST_CASE("model loss agrees with the oracle") {
    const std::vector<LayerShape> dims{{6, 4}, {3, 6}};
    const auto built = build_toy_model(dims, 2, 3.0f, 5);
    DataSpec spec;
    spec.classes = 3;
    spec.dim = 4;
    spec.samples = 30;
    const auto data = make_synthetic_dataset(spec);
    const auto p = random_params(built.model.layout(), 2);
    const auto f = p.flatten();
    const double ref = oracle_loss(built.model, std::vector<double>(f.begin(), f.end()), data);
    CHECK(built.model.loss(p, data) == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("local_train: zero epochs and a single step") {
    const std::vector<LayerShape> dims{{3, 4}};
    const auto built = build_toy_model(dims, 2, 2.0f, 1, TaskKind::Regression);
    DataSpec spec;
    spec.task = TaskKind::Regression;
    spec.classes = 1;
    spec.dim = 4;
    spec.outputs = 3;
    spec.samples = 1;
    const auto data = make_synthetic_dataset(spec);
    const auto start = random_params(built.model.layout(), 9);

    TrainOptions none;
    none.epochs = 0;
    const auto r0 = local_train(built.model, data, start, none);
    for (float d : r0.delta) CHECK(d == 0.0f);
    CHECK(r0.loss == built.model.loss(start, data));

    TrainOptions one;
    one.epochs = 1;
    one.lr = 1e-3f;
    const auto r1 = local_train(built.model, data, start, one);
    const std::vector<std::size_t> rows{0};
    const auto g = built.model.gradient(start, data, rows).flatten();
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(r1.delta[i] == doctest::Approx(-1e-3 * g[i]).epsilon(1e-4));
}

TEST_CASE("local_train: regression improves and never touches the base") {
    const std::vector<LayerShape> dims{{4, 8}};
    const auto built = build_toy_model(dims, 2, 4.0f, 3, TaskKind::Regression);
    const Matrix w_before = built.model.base(0);
    DataSpec spec;
    spec.task = TaskKind::Regression;
    spec.classes = 1;
    spec.dim = 8;
    spec.outputs = 4;
    spec.samples = 64;
    spec.noise = 1.0f;
    const auto data = make_synthetic_dataset(spec);
    TrainOptions opt;
    opt.epochs = 50;
    opt.lr = 0.01f;
    const double before = built.model.loss(built.init, data);
    const auto r = local_train(built.model, data, built.init, opt);
    CHECK(r.loss < before);
    CHECK(built.model.base(0) == w_before);
}

TEST_CASE("local_train: divergence is reported with round and client") {
    const std::vector<LayerShape> dims{{3, 4}};
    const auto built = build_toy_model(dims, 2, 2.0f, 1, TaskKind::Regression);
    DataSpec spec;
    spec.task = TaskKind::Regression;
    spec.classes = 1;
    spec.dim = 4;
    spec.outputs = 3;
    spec.samples = 8;
    const auto data = make_synthetic_dataset(spec);
    TrainOptions opt;
    opt.epochs = 200;
    opt.lr = 1e6f;
    opt.round = 4;
    opt.client_id = 17;
    try {
        local_train(built.model, data, random_params(built.model.layout(), 1), opt);
        FAIL("expected divergence");
    } catch (const DivergedTraining& e) {
        CHECK(e.round() == 4);
        CHECK(e.client_id() == 17);
    }
}

TEST_CASE("evaluate_global_loss weights by sample count") {
    const std::vector<LayerShape> dims{{2, 3}};
    const auto built = build_toy_model(dims, 1, 1.0f, 0, TaskKind::Regression);
    DataSpec spec;
    spec.task = TaskKind::Regression;
    spec.classes = 1;
    spec.dim = 3;
    spec.outputs = 2;
    spec.samples = 4;
    auto full = make_synthetic_dataset(spec);
    const auto p = built.init;

    // Identical clients give the client loss.
    const std::vector<Dataset> same{full, full};
    CHECK(evaluate_global_loss(built.model, p, same) == doctest::Approx(built.model.loss(p, full)));

    // n = 1 with loss 4 and n = 3 with loss 0 gives 1. Targets are set to the
    // model output plus an offset that yields the wanted loss.
    std::vector<Dataset> parts(2);
    const std::vector<std::size_t> r1{0};
    const std::vector<std::size_t> r3{1, 2, 3};
    parts[0] = subset(full, r1);
    parts[1] = subset(full, r3);
    const Matrix w = built.model.effective_weight(p, 0);
    for (auto* d : {&parts[0], &parts[1]}) {
        for (std::size_t i = 0; i < d->size(); ++i) {
            std::vector<float> z(2);
            matvec(w, d->features.row(i), z);
            d->targets(i, 0) = z[0];
            d->targets(i, 1) = z[1];
        }
    }
    parts[0].targets(0, 0) += static_cast<float>(std::sqrt(8.0));  // 0.5 * 8 = 4
    CHECK(built.model.loss(p, parts[0]) == doctest::Approx(4.0).epsilon(1e-5));
    CHECK(evaluate_global_loss(built.model, p, parts) == doctest::Approx(1.0).epsilon(1e-5));

    // Brute-force sum over every sample.
    double brute = 0.0;
    for (const auto& d : parts) {
        for (std::size_t i = 0; i < d.size(); ++i) brute += built.model.sample_loss(p, d, i);
    }
    CHECK(evaluate_global_loss(built.model, p, parts) == doctest::Approx(brute / 4.0).epsilon(1e-6));
}

TEST_CASE("dirichlet_partition: disjoint cover with non-empty clients") {
    DataSpec spec;
    spec.samples = 1000;
    const auto full = make_synthetic_dataset(spec);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (double alpha : {0.01, 0.5, 100.0}) {
            const auto parts = dirichlet_partition(full, 100, alpha, 10, seed);
            std::set<std::size_t> seen;
            std::size_t total = 0;
            for (const auto& p : parts) {
                CHECK(p.size() >= 1);
                total += p.size();
                for (auto o : p.origin) CHECK(seen.insert(o).second);
            }
            CHECK(total == full.size());
        }
    }
}

TEST_CASE("dirichlet_partition: concentration limits and determinism") {
    DataSpec spec;
    spec.classes = 4;
    spec.samples = 4000;
    const auto full = make_synthetic_dataset(spec);

    const auto flat = dirichlet_partition(full, 4, 1e6, 4, 1);
    for (const auto& p : flat) {
        std::map<int, double> hist;
        for (int l : p.labels) hist[l] += 1.0;
        for (int c = 0; c < 4; ++c) {
            CHECK(hist[c] / static_cast<double>(p.size()) == doctest::Approx(0.25).epsilon(0.1));
        }
    }

    const auto skew = dirichlet_partition(full, 4, 0.01, 4, 1);
    bool concentrated = false;
    for (const auto& p : skew) {
        std::map<int, std::size_t> hist;
        for (int l : p.labels) ++hist[l];
        std::size_t top = 0;
        for (auto& [_, n] : hist) top = std::max(top, n);
        if (static_cast<double>(top) > 0.8 * static_cast<double>(p.size())) concentrated = true;
    }
    CHECK(concentrated);

    const auto a = dirichlet_partition(full, 100, 0.5, 4, 9);
    const auto b = dirichlet_partition(full, 100, 0.5, 4, 9);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].origin == b[i].origin);

    CHECK_THROWS_AS(dirichlet_partition(full, 5000, 0.5, 4, 0), InvalidConfig);
}
