#include "tiltxter/train.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace tiltxter::nn {

void SgdMomentum::step(std::vector<ParamRef>& params, double lr) {
    if (velocity_.size() != params.size()) {
        velocity_.clear();
        for (const auto& p : params) velocity_.emplace_back(p.value.size(), 0.0);
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& v = velocity_[k];
        auto& p = params[k];
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = momentum_ * v[i] + p.grad[i];
            p.value[i] -= lr * v[i];
        }
    }
}

ReduceLrOnPlateau::ReduceLrOnPlateau(double lr, PlateauConfig cfg) : cfg_(cfg), lr_(lr) {
    if (!(lr > 0.0)) throw DomainError("learning rate must be > 0");
    if (!(cfg.factor > 0.0 && cfg.factor < 1.0)) throw DomainError("plateau factor must be in (0, 1)");
    if (cfg.patience < 1) throw DomainError("plateau patience must be >= 1");
}

double ReduceLrOnPlateau::step(double val_loss) {
    if (val_loss < best_ - cfg_.threshold) {
        best_ = val_loss;
        bad_epochs_ = 0;
    } else if (++bad_epochs_ >= cfg_.patience) {
        lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
        bad_epochs_ = 0;
    }
    return lr_;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (batch_size < 2) throw DomainError("batch size must be >= 2 (batchnorm)");
    if (!(lr > 0.0)) throw DomainError("learning rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw DomainError("momentum must be in [0, 1)");
    if (!(plateau.factor > 0.0 && plateau.factor < 1.0)) throw DomainError("plateau factor must be in (0, 1)");
}

namespace {

std::pair<Tensor, std::vector<int>> gather(std::span<const sim::DatasetRecord> set,
                                           std::span<const std::size_t> idx) {
    std::vector<const BiFrame*> frames;
    std::vector<int> labels;
    frames.reserve(idx.size());
    labels.reserve(idx.size());
    for (auto i : idx) {
        frames.push_back(&set[i].biframe);
        labels.push_back(set[i].label.index());
    }
    return {to_input(frames), std::move(labels)};
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t k = logits.dim(1);
    const double* p = logits.ptr() + row * k;
    return static_cast<std::size_t>(std::max_element(p, p + k) - p);
}

}  // namespace

EvalResult evaluate(Model& model, std::span<const sim::DatasetRecord> set, std::size_t batch_size) {
    EvalResult r;
    r.count = set.size();
    if (set.empty()) return r;
    std::vector<std::size_t> idx(set.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t correct = 0;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += batch_size) {
        const std::size_t end = std::min(idx.size(), start + batch_size);
        auto [x, labels] = gather(set, std::span(idx).subspan(start, end - start));
        const Tensor logits = model.forward(x, Mode::Eval);
        const auto ce = cross_entropy(logits, labels);
        for (std::size_t s = 0; s < labels.size(); ++s) {
            const auto pred = argmax_row(logits, s);
            loss_sum += ce.per_sample[s];
            correct += pred == static_cast<std::size_t>(labels[s]);
            ++r.confusion[static_cast<std::size_t>(labels[s])][pred];
        }
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
    r.loss = loss_sum / static_cast<double>(set.size());
    return r;
}

TrainResult train(Model model, std::span<const sim::DatasetRecord> train_set,
                  std::span<const sim::DatasetRecord> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.size() < 2) throw DomainError("training set needs at least 2 records");
    if (val_set.empty()) throw DomainError("validation set is empty");

    SgdMomentum opt(cfg.momentum);
    ReduceLrOnPlateau sched(cfg.lr, cfg.plateau);
    auto params = model.params();

    TrainResult result{model, {}};
    double best_val_loss = std::numeric_limits<double>::infinity();
    result.report.best_val_acc = -1.0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::mt19937_64 rng(sim::derive_seed(cfg.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        const double lr = sched.lr();
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size();) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            // A trailing batch of one cannot be batch-normalized; fold it in.
            if (order.size() - end == 1) end = order.size();
            auto [x, labels] = gather(train_set, std::span(order).subspan(start, end - start));
            model.zero_grad();
            const Tensor logits = model.forward(x, Mode::Train);
            const auto ce = cross_entropy(logits, labels);
            model.backward(ce.dlogits);
            opt.step(params, lr);
            for (std::size_t s = 0; s < labels.size(); ++s) {
                loss_sum += ce.per_sample[s];
                correct += argmax_row(logits, s) == static_cast<std::size_t>(labels[s]);
            }
            start = end;
        }

        const auto val = evaluate(model, val_set);
        EpochStats st{epoch,
                      loss_sum / static_cast<double>(train_set.size()),
                      static_cast<double>(correct) / static_cast<double>(train_set.size()),
                      val.loss,
                      val.accuracy,
                      lr};
        result.report.curve.push_back(st);
        if (val.accuracy > result.report.best_val_acc ||
            (val.accuracy == result.report.best_val_acc && val.loss < best_val_loss)) {
            result.report.best_val_acc = val.accuracy;
            result.report.best_epoch = epoch;
            best_val_loss = val.loss;
            result.model = model;
        }
        sched.step(val.loss);
        if (on_epoch) on_epoch(st);
    }
    return result;
}

Prediction predict_tilt(Model& model, const BiFrame& frame) {
    const Tensor logits = model.forward(to_input(frame), Mode::Eval);
    const auto p = softmax(logits.data);
    Prediction out;
    std::copy(p.begin(), p.end(), out.probs.begin());
    const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    out.tilt = TiltClass::from_index(best);
    out.confidence = p[static_cast<std::size_t>(best)];
    return out;
}

double orientation_accuracy(const Confusion& confusion) {
    std::uint64_t total = 0, hit = 0;
    constexpr std::size_t kLast = TiltClass::kCount - 1;
    for (std::size_t t = 0; t < confusion.size(); ++t) {
        for (std::size_t p = 0; p < confusion.size(); ++p) {
            total += confusion[t][p];
            const bool vertical_pair = (t == 0 || t == kLast) && (p == 0 || p == kLast);
            if (t == p || vertical_pair) hit += confusion[t][p];
        }
    }
    return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

}  // namespace tiltxter::nn
