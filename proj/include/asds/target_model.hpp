#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "asds/autodiff.hpp"
#include "asds/dataset.hpp"
#include "asds/rng.hpp"
#include "asds/serialize.hpp"

namespace asds {

enum class Activation { Relu, Tanh };

inline std::string activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "tanh";
}

inline Activation activation_from(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw ArgumentError("unknown activation \"" + s + "\"");
}

/// Fully connected classifier under attack. Feature taps are numbered
/// from 1: tap L is the post-activation output of hidden layer L, and
/// tap hidden_count + 1 is the logit layer.
template <typename T>
class TargetModel {
public:
    TargetModel() = default;

    TargetModel(std::size_t dims, int classes, std::vector<std::size_t> hidden,
                Activation activation, std::uint64_t seed)
        : dims_(dims), classes_(classes), hidden_(std::move(hidden)), activation_(activation) {
        require(dims >= 1 && classes >= 2, "target: bad dims/classes");
        Rng rng(seed);
        std::size_t in = dims;
        for (std::size_t l = 0; l <= hidden_.size(); ++l) {
            const std::size_t out = l < hidden_.size() ? hidden_[l] : std::size_t(classes_);
            require(out >= 1, "target: zero-width layer");
            // He init for relu, Xavier for tanh; biases start at zero.
            const double scale = activation_ == Activation::Relu
                                     ? std::sqrt(2.0 / static_cast<double>(in))
                                     : std::sqrt(1.0 / static_cast<double>(in));
            Tensor<T> w({in, out});
            for (auto& v : w.vec()) v = static_cast<T>(scale * rng.normal());
            Tensor<T> b({out});
            b.fill(T(0));
            weights_.push_back(std::move(w));
            biases_.push_back(std::move(b));
            in = out;
        }
    }

    std::size_t dims() const { return dims_; }
    int classes() const { return classes_; }
    std::size_t layer_count() const { return weights_.size(); }
    int max_tap() const { return static_cast<int>(weights_.size()); }
    Activation activation() const { return activation_; }
    const std::vector<std::size_t>& hidden() const { return hidden_; }

    std::vector<Tensor<T>>& weights() { return weights_; }
    std::vector<Tensor<T>>& biases() { return biases_; }
    const std::vector<Tensor<T>>& weights() const { return weights_; }
    const std::vector<Tensor<T>>& biases() const { return biases_; }

    /// Composes the network on a tape with parameters as constants.
    /// Returns the logits node; taps_out (if given) receives the node for
    /// every tap 1..max_tap in order.
    typename Tape<T>::Var build_forward(Tape<T>& tape, typename Tape<T>::Var x,
                                        std::vector<typename Tape<T>::Var>* taps_out = nullptr) const {
        typename Tape<T>::Var h = x;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            const auto w = tape.constant(weights_[l]);
            const auto b = tape.constant(biases_[l]);
            h = tape.add_bias(tape.matmul(h, w), b);
            if (l + 1 < weights_.size())
                h = activation_ == Activation::Relu ? tape.relu(h) : tape.tanh(h);
            if (taps_out) taps_out->push_back(h);
        }
        return h;
    }

    /// Plain forward pass to logits (no tape).
    Tensor<T> forward(const Tensor<T>& x) const {
        require(x.rank() == 2 && x.cols() == dims_, "target: input width mismatch");
        Tensor<T> h = x;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            Tensor<T> z = matmul(h, weights_[l]);
            add_bias_inplace(z, biases_[l]);
            if (l + 1 < weights_.size()) apply_activation(z);
            h = std::move(z);
        }
        return h;
    }

    std::vector<int> predict(const Tensor<T>& x) const {
        const Tensor<T> z = forward(x);
        std::vector<int> out(z.rows());
        for (std::size_t i = 0; i < z.rows(); ++i) out[i] = argmax_row(z, i);
        return out;
    }

    double accuracy(const Tensor<T>& x, const std::vector<int>& labels) const {
        const auto pred = predict(x);
        require(pred.size() == labels.size(), "target: label count mismatch");
        std::size_t hits = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
        return static_cast<double>(hits) / static_cast<double>(pred.size());
    }

    /// Deep features at the requested taps, one matrix per tap.
    std::vector<Tensor<T>> extract_features(const Tensor<T>& x, const std::vector<int>& taps) const {
        require(x.rank() == 2 && x.cols() == dims_, "target: input width mismatch");
        for (int t : taps)
            require(t >= 1 && t <= max_tap(), "target: tap out of range");
        std::vector<Tensor<T>> out(taps.size());
        Tensor<T> h = x;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            Tensor<T> z = matmul(h, weights_[l]);
            add_bias_inplace(z, biases_[l]);
            if (l + 1 < weights_.size()) apply_activation(z);
            for (std::size_t t = 0; t < taps.size(); ++t)
                if (taps[t] == static_cast<int>(l + 1)) out[t] = z;
            h = std::move(z);
        }
        return out;
    }

    /// d(sum of per-row cross-entropy)/dx. Row sums keep each row's
    /// gradient independent of the batch size.
    Tensor<T> input_gradient_ce(const Tensor<T>& x, const std::vector<int>& labels) const {
        Tape<T> tape;
        const auto xv = tape.leaf(x, true, "x");
        const auto z = build_forward(tape, xv);
        const auto loss = tape.ce_logits(z, labels, /*mean=*/false);
        tape.backward(loss);
        return tape.grad(xv);
    }

    /// d(sum of squared distances between tap features and per-row
    /// targets)/dx. Drives feature-space attacks.
    Tensor<T> input_gradient_feature(const Tensor<T>& x, int tap, const Tensor<T>& targets) const {
        require(tap >= 1 && tap <= max_tap(), "target: tap out of range");
        Tape<T> tape;
        const auto xv = tape.leaf(x, true, "x");
        std::vector<typename Tape<T>::Var> taps;
        build_forward(tape, xv, &taps);
        const auto diff = tape.sub(taps[static_cast<std::size_t>(tap - 1)], tape.constant(targets));
        tape.backward(tape.sumsq(diff));
        return tape.grad(xv);
    }

private:
    void apply_activation(Tensor<T>& z) const {
        if (activation_ == Activation::Relu) {
            for (auto& v : z.vec()) v = v > T(0) ? v : T(0);
        } else {
            for (auto& v : z.vec()) v = std::tanh(v);
        }
    }

    static void add_bias_inplace(Tensor<T>& z, const Tensor<T>& b) {
        for (std::size_t i = 0; i < z.rows(); ++i) {
            T* row = z.row(i);
            for (std::size_t j = 0; j < z.cols(); ++j) row[j] += b[j];
        }
    }

    std::size_t dims_ = 0;
    int classes_ = 0;
    std::vector<std::size_t> hidden_;
    Activation activation_ = Activation::Relu;
    std::vector<Tensor<T>> weights_;
    std::vector<Tensor<T>> biases_;
};

struct TargetTrainSpec {
    int epochs = 40;
    std::size_t batch = 64;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
};

struct TargetTrainLog {
    std::vector<double> epoch_loss;
    double train_accuracy = 0;
};

/// Minibatch SGD with momentum and decoupled weight decay. Throws
/// TrainingError if the loss goes non-finite, naming the epoch.
template <typename T>
TargetTrainLog train_target(TargetModel<T>& model, const LabeledDataset<T>& data,
                            const TargetTrainSpec& spec) {
    require(spec.epochs >= 1 && spec.batch >= 1, "train_target: bad epochs/batch");
    data.check();
    require(data.dims() == model.dims() && data.classes == model.classes(),
            "train_target: dataset/model shape mismatch");

    Rng rng(spec.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t(0));

    // Momentum buffers mirror the parameter list.
    std::vector<Tensor<T>> vel_w, vel_b;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        vel_w.push_back(Tensor<T>(model.weights()[l].shape()));
        vel_b.push_back(Tensor<T>(model.biases()[l].shape()));
        vel_w.back().fill(T(0));
        vel_b.back().fill(T(0));
    }

    TargetTrainLog log;
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += spec.batch) {
            const std::size_t stop = std::min(order.size(), start + spec.batch);
            Tensor<T> xb({stop - start, data.dims()});
            std::vector<int> yb(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                std::copy(data.inputs.row(order[i]), data.inputs.row(order[i]) + data.dims(),
                          xb.row(i - start));
                yb[i - start] = data.labels[order[i]];
            }

            Tape<T> tape;
            const auto xv = tape.constant(xb);
            typename Tape<T>::Var h = xv;
            std::vector<typename Tape<T>::Var> param_vars;
            for (std::size_t l = 0; l < model.layer_count(); ++l) {
                const auto w = tape.leaf(model.weights()[l], true, "W" + std::to_string(l));
                const auto b = tape.leaf(model.biases()[l], true, "b" + std::to_string(l));
                param_vars.push_back(w);
                param_vars.push_back(b);
                h = tape.add_bias(tape.matmul(h, w), b);
                if (l + 1 < model.layer_count())
                    h = model.activation() == Activation::Relu ? tape.relu(h) : tape.tanh(h);
            }
            const auto loss = tape.ce_logits(h, yb, /*mean=*/true);
            const double loss_value = tape.value(loss)[0];
            if (!std::isfinite(loss_value))
                throw TrainingError("target training diverged at epoch " + std::to_string(epoch));
            epoch_loss += loss_value;
            ++batches;
            tape.backward(loss);

            for (std::size_t l = 0; l < model.layer_count(); ++l) {
                const Tensor<T>& gw = tape.grad(param_vars[2 * l]);
                const Tensor<T>& gb = tape.grad(param_vars[2 * l + 1]);
                auto& w = model.weights()[l].vec();
                auto& b = model.biases()[l].vec();
                for (std::size_t i = 0; i < w.size(); ++i) {
                    vel_w[l][i] = static_cast<T>(spec.momentum * vel_w[l][i] -
                                                 spec.learning_rate *
                                                     (gw[i] + spec.weight_decay * w[i]));
                    w[i] += vel_w[l][i];
                }
                for (std::size_t i = 0; i < b.size(); ++i) {
                    vel_b[l][i] =
                        static_cast<T>(spec.momentum * vel_b[l][i] - spec.learning_rate * gb[i]);
                    b[i] += vel_b[l][i];
                }
            }
        }
        log.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    }
    log.train_accuracy = model.accuracy(data.inputs, data.labels);
    return log;
}

inline constexpr int kTargetSchemaVersion = 1;

template <typename T>
void save_target(const std::string& path, const TargetModel<T>& model) {
    NamedTensors archive;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        archive.add("W" + std::to_string(l), model.weights()[l]);
        archive.add("b" + std::to_string(l), model.biases()[l]);
    }
    save_archive(path, archive);

    nlohmann::ordered_json meta;
    meta["schema_version"] = kTargetSchemaVersion;
    meta["dims"] = model.dims();
    meta["classes"] = model.classes();
    meta["hidden"] = model.hidden();
    meta["activation"] = activation_name(model.activation());
    std::ofstream os(path + ".json");
    if (!os) throw FormatError("cannot write model sidecar \"" + path + ".json\"");
    os << meta.dump(2) << "\n";
}

template <typename T = float>
TargetModel<T> load_target(const std::string& path) {
    std::ifstream is(path + ".json");
    if (!is) throw FormatError("missing model sidecar \"" + path + ".json\"");
    nlohmann::json meta = nlohmann::json::parse(is);
    const int version = meta.value("schema_version", -1);
    if (version != kTargetSchemaVersion)
        throw FormatError("model schema version mismatch: expected " +
                          std::to_string(kTargetSchemaVersion) + ", found " +
                          std::to_string(version));

    TargetModel<T> model(meta.at("dims").get<std::size_t>(), meta.at("classes").get<int>(),
                         meta.at("hidden").get<std::vector<std::size_t>>(),
                         activation_from(meta.at("activation").get<std::string>()), 0);
    const NamedTensors archive = load_archive(path);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        model.weights()[l] = archive.get<T>("W" + std::to_string(l));
        model.biases()[l] = archive.get<T>("b" + std::to_string(l));
    }
    return model;
}

} // namespace asds
