// smlc: command-line front end for the speaking-style toolkit.
// Subcommands: synth, featurize, augment, train, eval.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "smlc/augment.hpp"
#include "smlc/checkpoint.hpp"
#include "smlc/dataset.hpp"
#include "smlc/mel.hpp"
#include "smlc/metrics.hpp"
#include "smlc/synth.hpp"
#include "smlc/trainer.hpp"

namespace fs = std::filesystem;

namespace {

size_t parse_label_name(const std::string& name) {
    size_t idx = smlc::label_index(name);
    if (idx == smlc::kNumLabels)
        throw smlc::ValidationError("unknown label '" + name + "'");
    return idx;
}

// "Label=value" pairs for --reduce.
std::pair<size_t, double> parse_reduce(const std::string& arg) {
    auto eq = arg.find('=');
    if (eq == std::string::npos)
        throw smlc::ValidationError("--reduce wants Label=fraction, got '" + arg + "'");
    size_t idx = parse_label_name(arg.substr(0, eq));
    double frac = std::stod(arg.substr(eq + 1));
    if (!(frac > 0.0 && frac <= 1.0))
        throw smlc::ValidationError("--reduce fraction must be in (0, 1]");
    return {idx, frac};
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    size_t at = 0;
    while (at <= s.size()) {
        size_t comma = s.find(',', at);
        if (comma == std::string::npos) comma = s.size();
        if (comma > at) out.push_back(s.substr(at, comma - at));
        at = comma + 1;
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"speaking-style multi-label classification toolkit"};
    app.set_config("--config", "", "INI config file; command-line flags override it");
    app.require_subcommand(1);

    uint64_t seed = 1234;
    int workers = 1;
    app.add_option("--seed", seed, "root random seed; every stage derives named substreams")
        ->capture_default_str();
    app.add_option("--workers", workers,
                   "worker threads for data-parallel stages; outputs are identical for any value")
        ->capture_default_str();

    // --- synth ---------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate the synthetic style corpus");
    synth->fallthrough();
    size_t per_combo = 100, eval_per_combo = 0;
    double synth_duration = 5.0;
    std::string synth_out;
    std::vector<std::string> reduce_args;
    synth->add_option("--per-combo", per_combo, "train samples per style combination")
        ->capture_default_str();
    synth->add_option("--eval-per-combo", eval_per_combo, "held-out samples per combination")
        ->capture_default_str();
    synth->add_option("--duration", synth_duration, "seconds per sample")->capture_default_str();
    synth
        ->add_option("--reduce", reduce_args,
                     "Label=fraction keep rate for train combinations positive for Label "
                     "(repeatable; engineers imbalance)")
        ->take_all();
    synth->add_option("--out", synth_out, "output directory")
        ->envname("SMLC_OUT_ROOT")
        ->required();

    // --- featurize -----------------------------------------------------
    auto* feat = app.add_subcommand("featurize", "extract 80-band log-mel features from wav files");
    feat->fallthrough();
    std::vector<std::string> wav_paths;
    std::string feat_out;
    feat->add_option("wavs", wav_paths, "input .wav files")->required();
    feat->add_option("--out", feat_out, "output directory for .smlcfeat files")
        ->envname("SMLC_OUT_ROOT")
        ->required();

    // --- augment -------------------------------------------------------
    auto* aug = app.add_subcommand(
        "augment", "plan and run kNN voice-conversion augmentation for deficient labels");
    aug->fallthrough();
    std::string aug_manifest, aug_out;
    size_t knn_k = smlc::kDefaultKnnK;
    double budget_hours = 14.0, pool_cap_s = smlc::kDefaultPoolCapS;
    size_t target_count = 0;
    aug->add_option("--manifest", aug_manifest, "training manifest to augment")->required();
    aug->add_option("--k", knn_k, "neighbors averaged per converted frame")
        ->capture_default_str();
    aug->add_option("--budget-hours", budget_hours,
                    "total source audio converted at most")
        ->capture_default_str();
    aug->add_option("--target-count", target_count,
                    "per-label target sample count; 0 balances to the most frequent label")
        ->capture_default_str();
    aug->add_option("--pool-cap-s", pool_cap_s, "seconds of target speech pooled per speaker")
        ->capture_default_str();
    aug->add_option("--out", aug_out, "output directory (features, skip report, manifest)")
        ->envname("SMLC_OUT_ROOT")
        ->required();

    // --- train ---------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train the style classifier from scratch");
    train_cmd->fallthrough();
    std::string train_manifest, train_out;
    smlc::ModelConfig mcfg;
    smlc::TrainConfig tcfg;
    double crop_s = 5.0;
    size_t target_frames_flag = 0;
    bool exclude_augmented = false, no_epoch_ckpts = false;
    train_cmd->add_option("--manifest", train_manifest, "training manifest")->required();
    train_cmd->add_option("--dim", mcfg.d_model, "model width d_model")
        ->capture_default_str();
    train_cmd->add_option("--layers", mcfg.n_layers, "decoder layers")
        ->capture_default_str();
    train_cmd->add_option("--heads", mcfg.n_heads, "attention heads")
        ->capture_default_str();
    train_cmd->add_option("--input-dim", mcfg.input_dim, "feature dimension")
        ->capture_default_str();
    train_cmd
        ->add_option("--ffn", mcfg.ffn_dim, "feed-forward width; 0 means 4 x d_model")
        ->capture_default_str();
    train_cmd->add_option("--crop-s", crop_s, "training crop length in seconds")
        ->capture_default_str();
    train_cmd->add_option("--target-frames", target_frames_flag,
                          "crop length in frames; 0 derives it from --crop-s and the feature hop")
        ->capture_default_str();
    train_cmd->add_option("--epochs", tcfg.epochs, "training epochs")->capture_default_str();
    train_cmd->add_option("--batch", tcfg.batch_size, "batch size")
        ->capture_default_str();
    train_cmd->add_option("--lr", tcfg.adam.lr, "Adam learning rate")
        ->capture_default_str();
    train_cmd->add_option("--beta1", tcfg.adam.beta1, "Adam beta1")->capture_default_str();
    train_cmd->add_option("--beta2", tcfg.adam.beta2, "Adam beta2")->capture_default_str();
    train_cmd->add_option("--eps", tcfg.adam.eps, "Adam epsilon")->capture_default_str();
    train_cmd->add_flag("--exclude-augmented", exclude_augmented,
                        "train only on original rows of the manifest");
    train_cmd->add_flag("--no-epoch-checkpoints", no_epoch_ckpts,
                        "write only the final checkpoint");
    train_cmd->add_option("--out", train_out, "output directory for checkpoints and run.json")
        ->envname("SMLC_OUT_ROOT")
        ->required();

    // --- eval ----------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the eval split");
    eval_cmd->fallthrough();
    std::string eval_manifest, eval_ckpt, eval_out, detect_only;
    smlc::EvalOptions eopts;
    eval_cmd->add_option("--manifest", eval_manifest, "manifest with an eval split")->required();
    eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint to evaluate")->required();
    eval_cmd->add_option("--threshold", eopts.threshold, "decision threshold on sigmoid output")
        ->capture_default_str();
    eval_cmd
        ->add_option("--agreement-split", eopts.vote_split,
                     "votes needed for the high-agreement stratum")
        ->capture_default_str();
    eval_cmd->add_option("--batch", eopts.batch_size, "inference batch size")
        ->capture_default_str();
    eval_cmd->add_option("--detect-only", detect_only,
                         "comma-separated labels; report only detection probabilities");
    eval_cmd->add_option("--out", eval_out, "output directory for report.txt")
        ->envname("SMLC_OUT_ROOT")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        smlc::set_workers(workers);

        if (app.got_subcommand(synth)) {
            smlc::SynthCorpusConfig cfg;
            cfg.n_per_combination = per_combo;
            cfg.eval_per_combination = eval_per_combo;
            cfg.duration_s = synth_duration;
            cfg.seed = seed;
            for (const auto& r : reduce_args) cfg.imbalance.insert(parse_reduce(r));
            std::string manifest = smlc::synth_corpus(cfg, synth_out);
            size_t n = smlc::parse_manifest(manifest).size();
            std::cout << "wrote " << n << " samples, manifest " << manifest << "\n";
        }

        if (app.got_subcommand(feat)) {
            fs::create_directories(feat_out);
            size_t failures = 0;
            for (const auto& in : wav_paths) {
                try {
                    smlc::FeatureSequence f =
                        smlc::log_mel(smlc::load_wav(in), smlc::default_filterbank());
                    fs::path out_path =
                        fs::path(feat_out) / (fs::path(in).stem().string() + ".smlcfeat");
                    smlc::save_feature_file(out_path.string(), f);
                    std::cout << "ok " << in << " -> " << out_path.string() << " ("
                              << f.n_frames() << "x" << f.dim() << ")\n";
                } catch (const std::exception& ex) {
                    ++failures;
                    std::cerr << "error " << in << ": " << ex.what() << "\n";
                }
            }
            if (failures) {
                std::cerr << failures << " of " << wav_paths.size() << " files failed\n";
                return 1;
            }
        }

        if (app.got_subcommand(aug)) {
            auto entries = smlc::parse_manifest(aug_manifest);
            smlc::Dataset store = smlc::load_dataset(aug_manifest, smlc::Split::train);
            std::map<std::string, double> dur_by_id;
            for (size_t i = 0; i < store.size(); ++i)
                dur_by_id[store.entries[i].id] = store.features[i].duration_s();
            std::vector<double> durations(entries.size(), 0.0);
            for (size_t i = 0; i < entries.size(); ++i) {
                auto it = dur_by_id.find(entries[i].id);
                if (it != dur_by_id.end()) durations[i] = it->second;
            }

            std::array<size_t, smlc::kNumLabels> counts{};
            for (const auto& e : entries)
                if (e.split == smlc::Split::train && !e.excluded && !e.augmented)
                    for (size_t k = 0; k < smlc::kNumLabels; ++k)
                        counts[k] += e.label.labels[k];
            std::array<size_t, smlc::kNumLabels> targets{};
            const size_t max_count = *std::max_element(counts.begin(), counts.end());
            targets.fill(target_count == 0 ? max_count : target_count);

            bool deficit = false;
            for (size_t k = 0; k < smlc::kNumLabels; ++k)
                if (targets[k] > counts[k]) deficit = true;
            if (!deficit) {
                std::cout << "nothing to do: every label meets its target count\n";
                return 0;
            }

            auto plan = smlc::plan_augmentation(entries, durations, targets,
                                                budget_hours * 3600.0, seed);
            double planned_s = 0.0;
            for (const auto& item : plan.items) {
                auto it = dur_by_id.find(item.source_id);
                if (it != dur_by_id.end()) planned_s += it->second;
            }
            std::cout << "planned " << plan.items.size() << " conversions ("
                      << planned_s / 3600.0 << " h of source audio)\n";

            auto result = smlc::execute_plan(plan, store, knn_k, aug_out, pool_cap_s);
            // The merged manifest lives in aug_out, so re-anchor sources that
            // were relative to the input manifest's directory.
            const fs::path in_base = fs::absolute(fs::path(aug_manifest)).parent_path();
            std::vector<smlc::ManifestEntry> merged = entries;
            for (auto& e : merged) {
                fs::path src(e.source);
                if (src.is_relative()) e.source = (in_base / src).lexically_normal().string();
            }
            merged.insert(merged.end(), result.fragment.begin(), result.fragment.end());
            const std::string out_manifest = (fs::path(aug_out) / "manifest.tsv").string();
            smlc::write_manifest(out_manifest, merged);
            std::cout << "wrote " << result.fragment.size() << " converted samples, manifest "
                      << out_manifest << "\n";
            if (!result.skipped.empty()) {
                std::cerr << "skipped " << result.skipped.size()
                          << " items (see skip_report.txt)\n";
                return 2;
            }
        }

        if (app.got_subcommand(train_cmd)) {
            smlc::Dataset data =
                smlc::load_dataset(train_manifest, smlc::Split::train, !exclude_augmented);
            if (data.size() == 0) throw smlc::DataError("train: the training split is empty");
            if (target_frames_flag != 0) {
                mcfg.target_frames = target_frames_flag;
            } else {
                const double hop = data.features[0].frame_hop_s;
                mcfg.target_frames = static_cast<size_t>(std::llround(crop_s / hop));
            }
            tcfg.seed = seed;
            tcfg.out_dir = train_out;
            tcfg.per_epoch_checkpoints = !no_epoch_ckpts;
            smlc::TrainResult result = smlc::train(data, mcfg, tcfg, std::cout);
            std::cout << "final checkpoint " << result.final_checkpoint_path << "\n";
        }

        if (app.got_subcommand(eval_cmd)) {
            smlc::ModelParameters<float> params = smlc::load_checkpoint(eval_ckpt);
            smlc::Dataset data = smlc::load_dataset(eval_manifest, smlc::Split::eval);
            eopts.checkpoint_id = eval_ckpt;
            smlc::MetricsReport rep = smlc::evaluate(params, data, eopts);
            fs::create_directories(eval_out);
            const std::string report_path = (fs::path(eval_out) / "report.txt").string();
            if (detect_only.empty()) {
                smlc::write_report(rep, report_path);
                for (size_t k = 0; k < smlc::kNumLabels; ++k)
                    std::cout << "f1 " << smlc::label_names()[k] << " " << rep.labels[k].f1
                              << "\n";
                std::cout << "macro_f1 " << rep.macro_f1 << "\n";
            } else {
                std::string text;
                for (const auto& name : split_csv(detect_only)) {
                    size_t k = parse_label_name(name);
                    char buf[64];
                    std::snprintf(buf, sizeof buf, "detection %s %.6f\n",
                                  smlc::label_names()[k].c_str(), rep.labels[k].detection);
                    text += buf;
                }
                std::ofstream os(report_path, std::ios::binary);
                if (!os) throw smlc::IoError("cannot write report: " + report_path);
                os << text;
                std::cout << text;
            }
            std::cout << "report " << report_path << "\n";
        }
        return 0;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
