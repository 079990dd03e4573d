#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hintpose/model.hpp"
#include "hintpose/synthdata.hpp"

namespace hintpose {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 16;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;
    double jitter_sigma = 2.0;  // cue augmentation, input pixels
    int eval_every = 1;
    uint64_t seed = 0;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    std::vector<double> val_mse_per_hop;
    double lr = 0.0;
    double wallclock_sec = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    double final_grad_norm = 0.0;
};

// Adam on the multi-hop masked MSE. The learning rate decays by 10x at 70%
// and 90% of the epoch budget. Gradients are clipped at clip_norm (global).
TrainResult train(Model& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg);

// CSV: epoch,train_loss,val_mse_hop1..hopT,lr,wallclock
void write_training_log_csv(const std::string& path, const std::vector<EpochLog>& log, int hops);
std::vector<EpochLog> read_training_log_csv(const std::string& path, int hops);

}  // namespace hintpose
