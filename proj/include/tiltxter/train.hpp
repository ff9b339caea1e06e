#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "tiltxter/model.hpp"
#include "tiltxter/sensor_sim.hpp"

namespace tiltxter::nn {

/// Classical momentum: v <- mu v + g; p <- p - lr v.
class SgdMomentum {
public:
    explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

    void step(std::vector<ParamRef>& params, double lr);

private:
    double momentum_;
    std::vector<std::vector<double>> velocity_;
};

struct PlateauConfig {
    double factor = 0.1;
    int patience = 5;
    double min_lr = 1e-5;
    double threshold = 1e-4;  // absolute
};

/// Lowers the learning rate when the validation loss stops improving: after
/// `patience` consecutive epochs with loss >= best - threshold,
/// lr <- max(lr * factor, min_lr) and the counter restarts.
class ReduceLrOnPlateau {
public:
    ReduceLrOnPlateau(double lr, PlateauConfig cfg = {});

    double step(double val_loss);
    double lr() const { return lr_; }
    int bad_epochs() const { return bad_epochs_; }

private:
    PlateauConfig cfg_;
    double lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
};

struct TrainConfig {
    int epochs = 50;
    std::size_t batch_size = 64;
    double lr = 0.01;
    double momentum = 0.9;
    PlateauConfig plateau{};
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
};

using Confusion = std::array<std::array<std::uint32_t, TiltClass::kCount>, TiltClass::kCount>;

struct EvalResult {
    double accuracy = 0.0;
    double loss = 0.0;
    Confusion confusion{};  // [true][predicted]
    std::size_t count = 0;
};

struct TrainReport {
    std::vector<EpochStats> curve;
    int best_epoch = 0;
    double best_val_acc = 0.0;
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
    Confusion test_confusion{};
};

using EpochCallback = std::function<void(const EpochStats&)>;

struct TrainResult {
    Model model;  // weights from the epoch with the best validation accuracy
    TrainReport report;
};

TrainResult train(Model model, std::span<const sim::DatasetRecord> train_set,
                  std::span<const sim::DatasetRecord> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

EvalResult evaluate(Model& model, std::span<const sim::DatasetRecord> set, std::size_t batch_size = 256);

struct Prediction {
    TiltClass tilt;
    double confidence = 0.0;
    std::array<double, TiltClass::kCount> probs{};
};

/// Eval-mode inference of one sample.
Prediction predict_tilt(Model& model, const BiFrame& frame);

/// Fraction of samples whose predicted line orientation matches, treating
/// +90 and -90 as the same class.
double orientation_accuracy(const Confusion& confusion);

}  // namespace tiltxter::nn
