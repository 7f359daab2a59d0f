#include "smlc/trainer.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "smlc/checkpoint.hpp"

namespace smlc {

std::vector<std::vector<size_t>> make_batches(size_t n, size_t batch_size, uint64_t seed,
                                              uint64_t epoch) {
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (n == 0) throw DataError("cannot batch an empty dataset");
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(substream_seed(seed, "batches", epoch));
    shuffle(order, rng);
    std::vector<std::vector<size_t>> batches;
    for (size_t at = 0; at < n; at += batch_size) {
        size_t end = std::min(n, at + batch_size);
        batches.emplace_back(order.begin() + static_cast<long>(at),
                             order.begin() + static_cast<long>(end));
    }
    return batches;
}

Batch assemble_batch(const Dataset& data, const std::vector<size_t>& indices,
                     size_t target_frames, CropMode mode, Rng* rng) {
    Batch b;
    b.ids.reserve(indices.size());
    b.features.reserve(indices.size());
    b.targets = MatrixF(indices.size(), kNumLabels);
    for (size_t bi = 0; bi < indices.size(); ++bi) {
        const size_t idx = indices[bi];
        if (idx >= data.size()) throw ValidationError("assemble_batch: index out of range");
        b.ids.push_back(data.entries[idx].id);
        b.features.push_back(crop_or_pad(data.features[idx], target_frames, mode, rng));
        for (size_t k = 0; k < kNumLabels; ++k)
            b.targets(bi, k) = data.entries[idx].label.labels[k] ? 1.0f : 0.0f;
    }
    return b;
}

TrainResult train(const Dataset& data, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  std::ostream& log) {
    mcfg.validate();
    if (tcfg.epochs == 0) throw ConfigError("train: epochs must be positive");
    if (tcfg.batch_size == 0) throw ConfigError("train: batch size must be positive");
    if (!(tcfg.adam.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (mcfg.n_labels != kNumLabels)
        throw ConfigError("train: manifest targets carry " + std::to_string(kNumLabels) +
                          " labels, model has " + std::to_string(mcfg.n_labels));
    if (data.size() == 0) throw DataError("train: the training split is empty");
    for (size_t i = 0; i < data.size(); ++i)
        if (data.features[i].dim() != mcfg.input_dim)
            throw DataError("train: entry " + data.entries[i].id + " has feature dim " +
                            std::to_string(data.features[i].dim()) + ", model expects " +
                            std::to_string(mcfg.input_dim));

    const bool write_files = !tcfg.out_dir.empty();
    if (write_files) std::filesystem::create_directories(tcfg.out_dir);

    TrainResult result;
    result.params = init_parameters<float>(mcfg, tcfg.seed);
    AdamState<float> adam(mcfg);

    const auto t0 = std::chrono::steady_clock::now();
    for (size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const auto e0 = std::chrono::steady_clock::now();
        auto batches = make_batches(data.size(), tcfg.batch_size, tcfg.seed, epoch);
        Rng crop_rng(substream_seed(tcfg.seed, "crop", epoch));
        double loss_sum = 0.0;
        size_t item_count = 0;
        for (const auto& indices : batches) {
            Batch batch = assemble_batch(data, indices, mcfg.target_frames,
                                         CropMode::train_random, &crop_rng);
            auto fwd = forward(result.params, batch.features);
            auto bce = bce_with_logits(fwd.logits, batch.targets);
            auto grads = backward(result.params, fwd.trace, bce.dlogits);
            adam_step(result.params, grads, adam, tcfg.adam);
            loss_sum += bce.loss * static_cast<double>(indices.size());
            item_count += indices.size();
        }
        const double epoch_loss = loss_sum / static_cast<double>(item_count);
        result.epoch_losses.push_back(epoch_loss);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - e0).count();
        log << "epoch " << (epoch + 1) << "/" << tcfg.epochs << " loss " << std::fixed
            << std::setprecision(6) << epoch_loss << " (" << std::setprecision(1) << secs
            << "s)" << std::defaultfloat << std::setprecision(6) << "\n";
        log.flush();
        if (write_files && tcfg.per_epoch_checkpoints)
            save_checkpoint(tcfg.out_dir + "/checkpoint-epoch-" + std::to_string(epoch + 1) +
                                ".smlcckpt",
                            result.params);
    }
    const double wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (write_files) {
        result.final_checkpoint_path = tcfg.out_dir + "/model.smlcckpt";
        save_checkpoint(result.final_checkpoint_path, result.params);

        nlohmann::json summary{
            {"seed", tcfg.seed},
            {"epochs", tcfg.epochs},
            {"batch_size", tcfg.batch_size},
            {"adam",
             {{"lr", tcfg.adam.lr},
              {"beta1", tcfg.adam.beta1},
              {"beta2", tcfg.adam.beta2},
              {"eps", tcfg.adam.eps}}},
            {"model",
             {{"d_model", mcfg.d_model},
              {"n_layers", mcfg.n_layers},
              {"n_heads", mcfg.n_heads},
              {"n_labels", mcfg.n_labels},
              {"input_dim", mcfg.input_dim},
              {"ffn_dim", mcfg.ffn()},
              {"target_frames", mcfg.target_frames}}},
            {"n_train", data.size()},
            {"epoch_losses", result.epoch_losses},
            {"wall_s", wall_s},
            {"final_checkpoint", result.final_checkpoint_path},
        };
        std::ofstream js(tcfg.out_dir + "/run.json");
        if (!js) throw IoError("cannot write run summary in " + tcfg.out_dir);
        js << summary.dump(2) << "\n";
    }
    return result;
}

} // namespace smlc
