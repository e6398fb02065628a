// Copyright (c) 2026 The EcoLoRA Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecolora/lora_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "ecolora/error.hpp"
#include "ecolora/rng.hpp"

namespace ecolora {

const char* to_string(MatrixKind kind) noexcept { return kind == MatrixKind::A ? "A" : "B"; }

ParamLayout::ParamLayout(std::span<const LayerShape> shapes, std::size_t rank)
    : shapes_(shapes.begin(), shapes.end()), rank_(rank) {
    std::size_t offset = 0;
    for (std::size_t l = 0; l < shapes_.size(); ++l) {
        const auto& s = shapes_[l];
        TensorInfo a{static_cast<std::uint16_t>(2 * l), l, MatrixKind::A, offset, rank, s.in};
        offset += a.size();
        TensorInfo b{static_cast<std::uint16_t>(2 * l + 1), l, MatrixKind::B, offset, s.out, rank};
        offset += b.size();
        tensors_.push_back(a);
        tensors_.push_back(b);
    }
    total_len_ = offset;
}

std::size_t LoraParams::total_len() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.a.size() + l.b.size();
    return n;
}

std::vector<float> LoraParams::flatten() const {
    std::vector<float> flat;
    flat.reserve(total_len());
    for (const auto& l : layers) {
        flat.insert(flat.end(), l.a.data().begin(), l.a.data().end());
        flat.insert(flat.end(), l.b.data().begin(), l.b.data().end());
    }
    return flat;
}

LoraParams LoraParams::unflatten(const ParamLayout& layout, std::span<const float> flat) {
    if (flat.size() != layout.total_len()) {
        throw ContractViolation("unflatten: expected " + std::to_string(layout.total_len()) +
                                " scalars, got " + std::to_string(flat.size()));
    }
    LoraParams p;
    p.layers.resize(layout.shapes().size());
    for (const auto& t : layout.tensors()) {
        Matrix m(t.rows, t.cols);
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), m.data().begin());
        (t.kind == MatrixKind::A ? p.layers[t.layer].a : p.layers[t.layer].b) = std::move(m);
    }
    return p;
}

ToyModel::ToyModel(std::vector<Matrix> bases, std::size_t rank, float scaling, TaskKind task)
    : bases_(std::move(bases)), rank_(rank), scaling_(scaling), task_(task) {
    if (rank_ == 0) throw InvalidConfig("rank must be positive");
    if (!(scaling_ > 0.0f)) throw InvalidConfig("scaling must be positive");
    std::vector<LayerShape> shapes;
    for (std::size_t l = 0; l < bases_.size(); ++l) {
        const auto& w = bases_[l];
        if (rank_ > std::min(w.rows(), w.cols())) {
            throw InvalidConfig("rank " + std::to_string(rank_) + " exceeds min(m, n) of layer " +
                                std::to_string(l));
        }
        shapes.push_back({w.rows(), w.cols()});
    }
    layout_ = ParamLayout(shapes, rank_);
}

void ToyModel::check_chain(const Dataset& data) const {
    if (bases_.empty()) throw InvalidConfig("model has no layers");
    if (data.features.cols() != bases_.front().cols()) {
        throw ContractViolation("feature width does not match first layer input");
    }
    for (std::size_t l = 1; l < bases_.size(); ++l) {
        if (bases_[l].cols() != bases_[l - 1].rows()) {
            throw InvalidConfig("layer " + std::to_string(l) + " input does not match previous output");
        }
    }
    if (task_ == TaskKind::Regression && data.targets.cols() != bases_.back().rows()) {
        throw ContractViolation("target width does not match last layer output");
    }
}

Matrix ToyModel::effective_weight(const LoraParams& params, std::size_t layer) const {
    const auto& f = params.layers.at(layer);
    Matrix w = bases_.at(layer);
    const Matrix ba = matmul(f.b, f.a);
    const float s = factor_scale();
    auto wd = w.data();
    auto bd = ba.data();
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] += s * bd[i];
    return w;
}

namespace {

// Loss and dLoss/dz for the output layer. `grad` may be empty.
double output_loss(TaskKind task, std::span<const float> z, const Dataset& data, std::size_t row,
                   std::span<float> grad) {
    if (task == TaskKind::Classification) {
        const float zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (float v : z) sum += std::exp(static_cast<double>(v - zmax));
        const double lse = static_cast<double>(zmax) + std::log(sum);
        const auto label = static_cast<std::size_t>(data.labels[row]);
        if (!grad.empty()) {
            for (std::size_t j = 0; j < z.size(); ++j) {
                const double p = std::exp(static_cast<double>(z[j]) - lse);
                grad[j] = static_cast<float>(p - (j == label ? 1.0 : 0.0));
            }
        }
        return lse - static_cast<double>(z[label]);
    }
    const auto target = data.targets.row(row);
    double loss = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
        const float diff = z[j] - target[j];
        loss += 0.5 * static_cast<double>(diff) * static_cast<double>(diff);
        if (!grad.empty()) grad[j] = diff;
    }
    return loss;
}

struct Forward {
    std::vector<std::vector<float>> act;  // act[0] = input, act[l+1] = output of layer l
};

void forward(const std::vector<Matrix>& weights, std::span<const float> x, Forward& fw) {
    const std::size_t n = weights.size();
    fw.act.resize(n + 1);
    fw.act[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < n; ++l) {
        fw.act[l + 1].resize(weights[l].rows());
        matvec(weights[l], fw.act[l], fw.act[l + 1]);
        if (l + 1 < n) {
            for (auto& v : fw.act[l + 1]) v = std::tanh(v);
        }
    }
}

}  // namespace

double ToyModel::sample_loss(const LoraParams& params, const Dataset& data, std::size_t row) const {
    check_chain(data);
    std::vector<Matrix> weights;
    for (std::size_t l = 0; l < bases_.size(); ++l) weights.push_back(effective_weight(params, l));
    Forward fw;
    forward(weights, data.features.row(row), fw);
    return output_loss(task_, fw.act.back(), data, row, {});
}

double ToyModel::loss(const LoraParams& params, const Dataset& data) const {
    check_chain(data);
    if (data.size() == 0) return 0.0;
    std::vector<Matrix> weights;
    for (std::size_t l = 0; l < bases_.size(); ++l) weights.push_back(effective_weight(params, l));
    Forward fw;
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        forward(weights, data.features.row(i), fw);
        total += output_loss(task_, fw.act.back(), data, i, {});
    }
    return total / static_cast<double>(data.size());
}

LoraParams ToyModel::gradient(const LoraParams& params, const Dataset& data,
                              std::span<const std::size_t> rows, double* batch_loss) const {
    check_chain(data);
    const std::size_t n_layers = bases_.size();
    std::vector<Matrix> weights;
    std::vector<Matrix> grad_w;  // d(mean loss) / d(effective weight)
    for (std::size_t l = 0; l < n_layers; ++l) {
        weights.push_back(effective_weight(params, l));
        grad_w.emplace_back(bases_[l].rows(), bases_[l].cols());
    }

    Forward fw;
    std::vector<float> delta, prev_delta;
    double total = 0.0;
    for (std::size_t row : rows) {
        forward(weights, data.features.row(row), fw);
        delta.assign(fw.act.back().size(), 0.0f);
        total += output_loss(task_, fw.act.back(), data, row, delta);
        for (std::size_t l = n_layers; l-- > 0;) {
            const auto& input = fw.act[l];
            auto& g = grad_w[l];
            for (std::size_t i = 0; i < g.rows(); ++i) {
                const float di = delta[i];
                if (di == 0.0f) continue;
                auto gr = g.row(i);
                for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += di * input[j];
            }
            if (l == 0) break;
            prev_delta.resize(input.size());
            matvec_transposed(weights[l], delta, prev_delta);
            for (std::size_t j = 0; j < prev_delta.size(); ++j) {
                prev_delta[j] *= 1.0f - input[j] * input[j];  // tanh'
            }
            delta.swap(prev_delta);
        }
    }

    const float inv = rows.empty() ? 0.0f : 1.0f / static_cast<float>(rows.size());
    const float s = factor_scale();
    LoraParams grad;
    grad.layers.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        auto& g = grad_w[l];
        for (auto& v : g.data()) v *= inv;
        const auto& f = params.layers[l];
        // dL/dB = s * G * A^T, dL/dA = s * B^T * G
        Matrix gb(f.b.rows(), f.b.cols());
        for (std::size_t i = 0; i < gb.rows(); ++i) {
            for (std::size_t k = 0; k < gb.cols(); ++k) {
                float acc = 0.0f;
                const auto grow = g.row(i);
                const auto arow = f.a.row(k);
                for (std::size_t j = 0; j < g.cols(); ++j) acc += grow[j] * arow[j];
                gb(i, k) = s * acc;
            }
        }
        Matrix ga(f.a.rows(), f.a.cols());
        for (std::size_t i = 0; i < g.rows(); ++i) {
            const auto grow = g.row(i);
            for (std::size_t k = 0; k < ga.rows(); ++k) {
                const float bik = s * f.b(i, k);
                if (bik == 0.0f) continue;
                auto arow = ga.row(k);
                for (std::size_t j = 0; j < ga.cols(); ++j) arow[j] += bik * grow[j];
            }
        }
        grad.layers[l] = {std::move(ga), std::move(gb)};
    }
    if (batch_loss) *batch_loss = rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
    return grad;
}

BuiltModel build_toy_model(std::span<const LayerShape> dims, std::size_t rank, float scaling,
                           std::uint64_t seed, TaskKind task) {
    if (dims.empty()) throw InvalidConfig("layer_dims must not be empty");
    for (std::size_t l = 0; l < dims.size(); ++l) {
        if (dims[l].out == 0 || dims[l].in == 0) throw InvalidConfig("layer dims must be positive");
        if (rank == 0 || rank > std::min(dims[l].out, dims[l].in)) {
            throw InvalidConfig("rank " + std::to_string(rank) + " exceeds min(m, n) of layer " +
                                std::to_string(l));
        }
    }
    Rng rng(derive_seed(seed, {seed_tags::kModel}));
    std::vector<Matrix> bases;
    LoraParams init;
    for (const auto& d : dims) {
        std::normal_distribution<float> wdist(0.0f, 1.0f / std::sqrt(static_cast<float>(d.in)));
        Matrix w(d.out, d.in);
        for (auto& v : w.data()) v = wdist(rng);
        bases.push_back(std::move(w));

        const double bound = 1.0 / std::sqrt(static_cast<double>(d.in));
        Matrix a(rank, d.in);
        for (auto& v : a.data()) v = static_cast<float>((2.0 * uniform01(rng) - 1.0) * bound);
        init.layers.push_back({std::move(a), Matrix(d.out, rank)});
    }
    return {ToyModel(std::move(bases), rank, scaling, task), std::move(init)};
}

TrainResult local_train(const ToyModel& model, const Dataset& data, const LoraParams& start,
                        const TrainOptions& options) {
    if (data.size() == 0) throw ContractViolation("local_train: client holds no samples");
    if (options.epochs < 0) throw InvalidArgument("local_train: epochs must be non-negative");

    LoraParams params = start;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch =
        options.batch_size == 0 ? data.size() : std::min(options.batch_size, data.size());
    Rng rng(options.shuffle_seed);

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        if (batch < data.size()) {
            for (std::size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1], order[uniform_below(rng, i)]);
            }
        }
        for (std::size_t begin = 0; begin < order.size(); begin += batch) {
            const std::size_t end = std::min(begin + batch, order.size());
            double batch_loss = 0.0;
            const LoraParams g = model.gradient(
                params, data, std::span<const std::size_t>(order).subspan(begin, end - begin),
                &batch_loss);
            if (!std::isfinite(batch_loss)) throw DivergedTraining(options.round, options.client_id);
            for (std::size_t l = 0; l < params.layers.size(); ++l) {
                auto pa = params.layers[l].a.data();
                auto ga = g.layers[l].a.data();
                for (std::size_t i = 0; i < pa.size(); ++i) pa[i] -= options.lr * ga[i];
                auto pb = params.layers[l].b.data();
                auto gb = g.layers[l].b.data();
                for (std::size_t i = 0; i < pb.size(); ++i) pb[i] -= options.lr * gb[i];
            }
        }
    }

    TrainResult result;
    result.loss = model.loss(params, data);
    if (!std::isfinite(result.loss)) throw DivergedTraining(options.round, options.client_id);
    result.delta = params.flatten();
    const auto before = start.flatten();
    for (std::size_t i = 0; i < before.size(); ++i) result.delta[i] -= before[i];
    result.params = std::move(params);
    return result;
}

double evaluate_global_loss(const ToyModel& model, const LoraParams& params,
                            std::span<const Dataset> clients) {
    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        const auto n = static_cast<double>(clients[i].size());
        if (n == 0.0) continue;
        const double l = model.loss(params, clients[i]);
        if (!std::isfinite(l)) throw DivergedTraining(-1, static_cast<std::uint32_t>(i));
        weighted += n * l;
        total += n;
    }
    return total > 0.0 ? weighted / total : 0.0;
}

Dataset make_synthetic_dataset(const DataSpec& spec) {
    if (spec.classes == 0 || spec.dim == 0) throw InvalidConfig("data: classes and dim must be positive");
    if (spec.samples < spec.classes) throw InvalidConfig("data: need at least one sample per class");
    Rng rng(derive_seed(spec.seed, {seed_tags::kData}));
    std::normal_distribution<float> normal(0.0f, 1.0f);

    Matrix centers(spec.classes, spec.dim);
    for (auto& v : centers.data()) v = spec.separation * normal(rng);

    Dataset ds;
    ds.task = spec.task;
    ds.features = Matrix(spec.samples, spec.dim);
    ds.labels.resize(spec.samples);
    ds.origin.resize(spec.samples);
    const std::size_t per_class = spec.samples / spec.classes;
    const std::size_t extra = spec.samples % spec.classes;
    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        const std::size_t count = per_class + (c < extra ? 1 : 0);
        for (std::size_t k = 0; k < count; ++k, ++row) {
            auto r = ds.features.row(row);
            for (std::size_t j = 0; j < spec.dim; ++j) r[j] = centers(c, j) + spec.noise * normal(rng);
            ds.labels[row] = static_cast<int>(c);
            ds.origin[row] = row;
        }
    }

    if (spec.task == TaskKind::Regression) {
        if (spec.outputs == 0) throw InvalidConfig("data: regression outputs must be positive");
        Matrix teacher(spec.outputs, spec.dim);
        const float scale = 1.0f / std::sqrt(static_cast<float>(spec.dim));
        for (auto& v : teacher.data()) v = scale * normal(rng);
        ds.targets = Matrix(spec.samples, spec.outputs);
        for (std::size_t i = 0; i < spec.samples; ++i) {
            matvec(teacher, ds.features.row(i), ds.targets.row(i));
            for (auto& v : ds.targets.row(i)) v += 0.1f * spec.noise * normal(rng);
        }
    }
    return ds;
}

Dataset subset(const Dataset& full, std::span<const std::size_t> rows) {
    Dataset out;
    out.task = full.task;
    out.features = Matrix(rows.size(), full.features.cols());
    if (full.targets.rows() > 0) out.targets = Matrix(rows.size(), full.targets.cols());
    out.labels.reserve(rows.size());
    out.origin.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        std::copy_n(full.features.row(r).begin(), full.features.cols(), out.features.row(i).begin());
        if (full.targets.rows() > 0) {
            std::copy_n(full.targets.row(r).begin(), full.targets.cols(), out.targets.row(i).begin());
        }
        out.labels.push_back(full.labels[r]);
        out.origin.push_back(full.origin.empty() ? r : full.origin[r]);
    }
    return out;
}

namespace {

// Dirichlet(alpha, ..., alpha) via log-gamma draws; Gamma(a) = Gamma(a + 1) * U^(1/a)
// keeps tiny alphas from underflowing every component to zero.
std::vector<double> sample_dirichlet(Rng& rng, std::size_t k, double alpha) {
    std::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
    std::vector<double> logs(k);
    for (auto& l : logs) {
        double u = uniform01(rng);
        while (u == 0.0) u = uniform01(rng);
        l = std::log(gamma(rng)) + std::log(u) / alpha;
    }
    const double mx = *std::max_element(logs.begin(), logs.end());
    double sum = 0.0;
    for (auto& l : logs) {
        l = std::exp(l - mx);
        sum += l;
    }
    for (auto& l : logs) l /= sum;
    return logs;
}

}  // namespace

std::vector<Dataset> dirichlet_partition(const Dataset& full, std::size_t num_clients,
                                         double alpha, std::size_t num_classes,
                                         std::uint64_t seed) {
    if (num_clients == 0) throw InvalidConfig("partition: num_clients must be positive");
    if (!(alpha > 0.0)) throw InvalidConfig("partition: alpha must be positive");
    if (num_clients > full.size()) {
        throw InvalidConfig("partition: num_clients (" + std::to_string(num_clients) +
                            ") exceeds total samples (" + std::to_string(full.size()) + ")");
    }

    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < full.size(); ++i) {
        const auto c = static_cast<std::size_t>(full.labels[i]);
        if (c >= num_classes) throw InvalidArgument("partition: label out of range");
        by_class[c].push_back(i);
    }

    Rng rng(derive_seed(seed, {seed_tags::kPartition}));
    std::vector<std::vector<std::size_t>> assignment;
    constexpr int kMaxAttempts = 100;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        assignment.assign(num_clients, {});
        for (auto rows : by_class) {
            for (std::size_t i = rows.size(); i > 1; --i) {
                std::swap(rows[i - 1], rows[uniform_below(rng, i)]);
            }
            const auto p = sample_dirichlet(rng, num_clients, alpha);
            double cum = 0.0;
            std::size_t begin = 0;
            for (std::size_t c = 0; c < num_clients; ++c) {
                cum += p[c];
                std::size_t end = c + 1 == num_clients
                                      ? rows.size()
                                      : std::min(rows.size(), static_cast<std::size_t>(
                                                                  cum * static_cast<double>(rows.size())));
                end = std::max(end, begin);
                assignment[c].insert(assignment[c].end(), rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                     rows.begin() + static_cast<std::ptrdiff_t>(end));
                begin = end;
            }
        }
        const bool all_nonempty = std::all_of(assignment.begin(), assignment.end(),
                                              [](const auto& a) { return !a.empty(); });
        if (all_nonempty) break;
        if (attempt + 1 == kMaxAttempts) {
            // Hand one row from the currently largest client to each empty one.
            for (auto& a : assignment) {
                if (!a.empty()) continue;
                auto largest = std::max_element(assignment.begin(), assignment.end(),
                                                [](const auto& x, const auto& y) { return x.size() < y.size(); });
                a.push_back(largest->back());
                largest->pop_back();
            }
        }
    }

    std::vector<Dataset> out;
    out.reserve(num_clients);
    for (auto& rows : assignment) {
        std::sort(rows.begin(), rows.end());
        out.push_back(subset(full, rows));
    }
    return out;
}

}  // namespace ecolora
