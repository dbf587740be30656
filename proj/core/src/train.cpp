#include "collossl/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "collossl/loss.hpp"
#include "collossl/mmd.hpp"

namespace collossl::train {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Relative-improvement plateau rule: stop after `patience` consecutive
// epochs without a relative improvement of at least rel_tol over the best.
struct PlateauTracker {
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    int patience;
    double rel_tol;

    PlateauTracker(int patience_, double rel_tol_) : patience(patience_), rel_tol(rel_tol_) {}

    bool should_stop(double epoch_loss) {
        if (!std::isfinite(best)) {
            best = epoch_loss;
            return false;
        }
        const double improvement =
            (best - epoch_loss) / std::max(std::abs(best), 1e-12);
        if (improvement > rel_tol) {
            best = epoch_loss;
            stall = 0;
        } else {
            ++stall;
        }
        return stall >= patience;
    }
};

std::vector<char> concat_masks(const std::vector<char>& a, const std::vector<char>& b) {
    std::vector<char> out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

template <typename T>
std::vector<nn::ParamRef<T>> concat_params(std::vector<nn::ParamRef<T>> a,
                                           const std::vector<nn::ParamRef<T>>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

struct ParamSnapshot {
    std::vector<std::vector<float>> values;

    explicit ParamSnapshot(const std::vector<nn::ParamRef<float>>& params) {
        for (const auto& p : params) values.push_back(*p.value);
    }
    void restore(const std::vector<nn::ParamRef<float>>& params) const {
        for (size_t i = 0; i < params.size(); ++i) *params[i].value = values[i];
    }
};

void update_params(const std::vector<nn::ParamRef<float>>& params,
                   const std::vector<char>& trainable, nn::OptimizerKind kind,
                   nn::Adam<float>& adam, double lr) {
    if (kind == nn::OptimizerKind::adam) {
        adam.update(params, trainable, lr);
    } else {
        nn::sgd_update(params, trainable, lr);
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(pretrain_lr > 0) || !(finetune_lr > 0) || !(autoencoder_lr > 0)) {
        throw ConfigError("learning rates must be positive");
    }
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (!(temperature > 0)) throw ConfigError("temperature must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(label_fraction > 0 && label_fraction <= 1)) {
        throw ConfigError("label_fraction must be in (0, 1]");
    }
    if (num_positives < 1) throw ConfigError("num_positives must be >= 1");
    if (mmd_subsample < 0) throw ConfigError("mmd_subsample must be >= 0");
    if (kernel_bandwidth < 0) throw ConfigError("kernel_bandwidth must be >= 0");
}

nn::MatX<float> embed_all(const nn::FeatureExtractor<float>& extractor,
                          const data::MultiDeviceDataset& ds, int device,
                          std::int64_t batch_size) {
    nn::MatX<float> out(ds.num_windows, extractor.cfg.embedding_dim());
    Rng dummy(0);
    typename nn::FeatureExtractor<float>::Ctx ctx;
    for (std::int64_t start = 0; start < ds.num_windows; start += batch_size) {
        const std::int64_t n = std::min(batch_size, ds.num_windows - start);
        std::vector<std::int64_t> idx(static_cast<size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = start + i;
        auto x = gather_windows<float>(ds, device, idx);
        out.middleRows(start, n) =
            extractor.forward(x, ds.window_len, /*train=*/false, dummy, ctx);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Contrastive pretraining
// ---------------------------------------------------------------------------

PretrainResult pretrain_collossl(const data::UnlabeledView& view, const TrainConfig& cfg) {
    cfg.validate();
    if (view.num_devices() < 2) {
        throw ConfigError("collossl pretraining needs >= 2 devices, got " +
                          std::to_string(view.num_devices()));
    }
    const std::string& anchor_id =
        cfg.pretrain_anchor_id.empty() ? cfg.anchor_id : cfg.pretrain_anchor_id;
    const int anchor = view.device_index(anchor_id);
    std::vector<int> candidates;
    for (int d = 0; d < view.num_devices(); ++d) {
        if (d == anchor) continue;
        const std::string& id = (*view.devices)[static_cast<size_t>(d)].device_id;
        if (std::find(cfg.exclude_devices.begin(), cfg.exclude_devices.end(), id) !=
            cfg.exclude_devices.end()) {
            continue;
        }
        candidates.push_back(d);
    }
    if (candidates.empty()) {
        throw ConfigError("no candidate devices left after exclusions");
    }
    if (view.window_len < cfg.extractor.min_window_len()) {
        throw ConfigError("window length " + std::to_string(view.window_len) +
                          " below extractor minimum " +
                          std::to_string(cfg.extractor.min_window_len()));
    }
    const std::int64_t batch = std::min<std::int64_t>(cfg.batch_size, view.num_windows);
    if (batch < 2 && cfg.sampling_mode == sampling::NegativeMode::asynchronous) {
        throw ConfigError("asynchronous sampling needs batches of >= 2 windows");
    }

    PretrainResult result{nn::FeatureExtractor<float>(cfg.extractor), {}};
    result.extractor.init(derive_seed(cfg.seed, "pretrain_init"));
    auto params = result.extractor.params("ext");
    const std::vector<char> trainable(params.size(), 1);
    nn::Adam<float> adam;
    adam.init(params);

    auto sampler_rng = make_rng(cfg.seed, "pretrain_sampler");
    auto dropout_rng = make_rng(cfg.seed, "pretrain_dropout");
    auto selection_rng = make_rng(cfg.seed, "pretrain_selection");
    auto negrow_rng = make_rng(cfg.seed, "pretrain_negrows");

    std::ofstream audit;
    if (!cfg.selection_audit_path.empty()) {
        audit.open(cfg.selection_audit_path, std::ios::trunc);
        if (!audit) throw DataError("cannot write selection audit: " + cfg.selection_audit_path);
        audit << "epoch,batch,device,mmd,weight,is_positive\n";
    }

    const auto kernel = cfg.kernel_bandwidth > 0 ? mmd::KernelSpec::rbf(cfg.kernel_bandwidth)
                                                 : mmd::KernelSpec::median();

    sampling::EpochSampler sampler(view.num_windows, batch, /*keep_partial=*/false, sampler_rng);
    PlateauTracker plateau(cfg.patience, cfg.plateau_rel_tol);
    ParamSnapshot last_good(params);
    const auto t_start = Clock::now();

    TrainLog& log = result.log;
    log.convergence_reason = "max_epochs";
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (epoch > 0) sampler.reshuffle();
        double epoch_loss = 0.0;
        std::int64_t batches = 0;
        std::vector<std::int64_t> batch_idx;
        std::optional<selection::SelectionResult> epoch_selection;
        while (sampler.next(batch_idx)) {
            // Device selection on (a subsample of) the current batch.
            selection::SelectionResult sel;
            if (cfg.selection_every_batch || !epoch_selection) {
                std::vector<std::int64_t> sub = batch_idx;
                if (cfg.mmd_subsample > 0 &&
                    static_cast<std::int64_t>(sub.size()) > cfg.mmd_subsample) {
                    sub.resize(static_cast<size_t>(cfg.mmd_subsample));
                }
                const auto anchor_mat = mmd::flatten_windows(view, anchor, sub);
                std::vector<mmd::Matrix> cand_mats;
                cand_mats.reserve(candidates.size());
                for (int d : candidates) cand_mats.push_back(mmd::flatten_windows(view, d, sub));
                std::vector<std::pair<std::string, const mmd::Matrix*>> cand_refs;
                for (size_t i = 0; i < candidates.size(); ++i) {
                    cand_refs.push_back(
                        {(*view.devices)[static_cast<size_t>(candidates[i])].device_id,
                         &cand_mats[i]});
                }
                sel = selection::select_devices(anchor_id, anchor_mat, cand_refs,
                                                cfg.selection_strategy, selection_rng, kernel,
                                                cfg.num_positives);
                epoch_selection = sel;
            } else {
                sel = *epoch_selection;
            }

            auto contrastive =
                sampling::resolve_contrastive(batch_idx, sel, negrow_rng, cfg.sampling_mode);

            // Forward every needed role through the one shared extractor.
            std::vector<std::string> used;
            for (const auto& id : contrastive.positive_ids) {
                if (std::find(used.begin(), used.end(), id) == used.end()) used.push_back(id);
            }
            for (const auto& id : contrastive.negative_ids) {
                if (std::find(used.begin(), used.end(), id) == used.end()) used.push_back(id);
            }

            auto anchor_x = gather_windows<float>(view, anchor, batch_idx);
            nn::FeatureExtractor<float>::Ctx anchor_ctx;
            auto anchor_emb = result.extractor.forward(anchor_x, view.window_len, /*train=*/true,
                                                       dropout_rng, anchor_ctx);

            std::map<std::string, nn::MatX<float>> embeddings;
            std::map<std::string, nn::FeatureExtractor<float>::Ctx> ctxs;
            for (const auto& id : used) {
                const int d = view.device_index(id);
                auto x = gather_windows<float>(view, d, batch_idx);
                embeddings[id] = result.extractor.forward(x, view.window_len, /*train=*/true,
                                                          dropout_rng, ctxs[id]);
            }

            std::vector<const nn::MatX<float>*> positives;
            for (const auto& id : contrastive.positive_ids) positives.push_back(&embeddings[id]);
            std::vector<loss::NegativeSet<float>> negatives;
            for (size_t j = 0; j < contrastive.negative_ids.size(); ++j) {
                negatives.push_back({&embeddings[contrastive.negative_ids[j]],
                                     &contrastive.negative_rows[j],
                                     static_cast<float>(contrastive.negative_weights[j])});
            }

            auto mcl = loss::mcl_batch<float>(anchor_emb, positives, negatives,
                                              static_cast<float>(cfg.temperature));
            const double step_loss =
                static_cast<double>(mcl.loss) +
                nn::l2_penalty(params, trainable, cfg.extractor.l2);
            if (!std::isfinite(step_loss)) {
                last_good.restore(params);
                if (!cfg.abort_checkpoint_path.empty()) {
                    nn::save_checkpoint(cfg.abort_checkpoint_path, cfg.extractor.signature(),
                                        cfg.seed, log.final_step, nn::dump_tensors(params));
                }
                throw NumericalError("non-finite contrastive loss at epoch " +
                                     std::to_string(epoch) + "; last good state restored");
            }

            nn::zero_gradients(params);
            result.extractor.backward(mcl.danchor, anchor_ctx);
            for (const auto& id : used) {
                nn::MatX<float> grad = nn::MatX<float>::Zero(anchor_emb.rows(), anchor_emb.cols());
                for (size_t i = 0; i < contrastive.positive_ids.size(); ++i) {
                    if (contrastive.positive_ids[i] == id) grad += mcl.dpositives[i];
                }
                for (size_t j = 0; j < contrastive.negative_ids.size(); ++j) {
                    if (contrastive.negative_ids[j] == id) grad += mcl.dnegatives[j];
                }
                result.extractor.backward(grad, ctxs[id]);
            }
            nn::add_l2_gradients(params, trainable, cfg.extractor.l2);
            update_params(params, trainable, cfg.optimizer, adam, cfg.pretrain_lr);

            if (audit.is_open()) {
                for (const auto& [id, score] : sel.mmd_scores) {
                    double weight = 0.0;
                    for (const auto& [nid, w] : sel.negative_weights) {
                        if (nid == id) weight = w;
                    }
                    const bool is_pos = std::find(sel.positive_ids.begin(), sel.positive_ids.end(),
                                                  id) != sel.positive_ids.end();
                    audit << epoch << "," << batches << "," << id << "," << format_real(score)
                          << "," << format_real(weight) << "," << (is_pos ? 1 : 0) << "\n";
                }
            }

            epoch_loss += step_loss;
            ++batches;
            ++log.final_step;
        }
        if (batches == 0) {
            throw ConfigError("batch_size " + std::to_string(batch) + " yields no full batch for " +
                              std::to_string(view.num_windows) + " windows");
        }
        epoch_loss /= static_cast<double>(batches);
        log.epoch_losses.push_back(epoch_loss);
        last_good = ParamSnapshot(params);
        if (plateau.should_stop(epoch_loss)) {
            log.convergence_reason = "plateau";
            break;
        }
    }
    log.wall_seconds = seconds_since(t_start);
    return result;
}

// ---------------------------------------------------------------------------
// Supervised fitting (shared by fine-tuning and the supervised baselines)
// ---------------------------------------------------------------------------

namespace {

struct SamplePair {
    int device;
    std::int64_t window;
};

FinetuneResult fit_classifier(const data::MultiDeviceDataset& ds,
                              const std::vector<SamplePair>& samples,
                              nn::FeatureExtractor<float> extractor, const TrainConfig& cfg,
                              nn::FreezeMode freeze_mode, double lr) {
    if (!ds.has_labels()) throw DataError("supervised training needs labels");
    if (samples.empty()) throw DataError("supervised training: no samples");
    const int num_classes = static_cast<int>(ds.class_names.size());

    FinetuneResult result{std::move(extractor), {}, {}};
    result.head.configure(cfg.extractor.embedding_dim(), num_classes, cfg.head_hidden_units);
    result.head.init(derive_seed(cfg.seed, "classifier_head"));

    auto ext_params = result.extractor.params("ext");
    auto head_params = result.head.params("head");
    auto ext_mask = nn::freeze_partition(ext_params, freeze_mode);
    auto params = concat_params(ext_params, head_params);
    auto trainable = concat_masks(ext_mask, std::vector<char>(head_params.size(), 1));
    const bool extractor_trains =
        std::any_of(ext_mask.begin(), ext_mask.end(), [](char c) { return c != 0; });
    nn::Adam<float> adam;
    adam.init(params);

    auto sampler_rng = make_rng(cfg.seed, "finetune_sampler");
    auto dropout_rng = make_rng(cfg.seed, "finetune_dropout");
    const auto n = static_cast<std::int64_t>(samples.size());
    const std::int64_t batch = std::min<std::int64_t>(cfg.batch_size, n);
    // Partial batches are kept here: labeled subsets are small.
    sampling::EpochSampler sampler(n, batch, /*keep_partial=*/true, sampler_rng);
    PlateauTracker plateau(cfg.patience, cfg.plateau_rel_tol);
    const auto t_start = Clock::now();

    TrainLog& log = result.log;
    log.convergence_reason = "max_epochs";
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (epoch > 0) sampler.reshuffle();
        double epoch_loss = 0.0;
        std::int64_t batch_count = 0;
        std::vector<std::int64_t> positions;
        while (sampler.next(positions)) {
            const auto rows = static_cast<Eigen::Index>(positions.size());
            nn::MatX<float> x(rows, ds.window_size());
            std::vector<int> y(static_cast<size_t>(rows));
            for (Eigen::Index r = 0; r < rows; ++r) {
                const auto& s = samples[static_cast<size_t>(positions[static_cast<size_t>(r)])];
                auto w = ds.window(s.device, s.window);
                std::copy(w.begin(), w.end(), x.row(r).data());
                y[static_cast<size_t>(r)] = ds.labels[static_cast<size_t>(s.window)];
            }

            nn::FeatureExtractor<float>::Ctx ext_ctx;
            nn::ClassifierHead<float>::Ctx head_ctx;
            auto emb = result.extractor.forward(x, ds.window_len, /*train=*/true, dropout_rng,
                                                ext_ctx);
            auto probs = result.head.forward_probs(emb, head_ctx);
            const double step_loss =
                static_cast<double>(loss::cross_entropy(probs, y)) +
                nn::l2_penalty(ext_params, ext_mask, cfg.extractor.l2);
            if (!std::isfinite(step_loss)) {
                throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
            }

            nn::MatX<float> dlogits = probs;
            const float inv_rows = 1.0f / static_cast<float>(rows);
            for (Eigen::Index r = 0; r < rows; ++r) {
                dlogits(r, y[static_cast<size_t>(r)]) -= 1.0f;
            }
            dlogits *= inv_rows;

            nn::zero_gradients(params);
            auto demb = result.head.backward_from_dlogits(dlogits, head_ctx);
            if (extractor_trains) result.extractor.backward(demb, ext_ctx);
            nn::add_l2_gradients(ext_params, ext_mask, cfg.extractor.l2);
            update_params(params, trainable, cfg.optimizer, adam, lr);

            epoch_loss += step_loss;
            ++batch_count;
            ++log.final_step;
        }
        epoch_loss /= static_cast<double>(batch_count);
        log.epoch_losses.push_back(epoch_loss);
        if (plateau.should_stop(epoch_loss)) {
            log.convergence_reason = "plateau";
            break;
        }
    }
    log.wall_seconds = seconds_since(t_start);
    return result;
}

}  // namespace

FinetuneResult finetune(const nn::FeatureExtractor<float>& pretrained,
                        const data::LabeledSubset& labeled, const TrainConfig& cfg) {
    cfg.validate();
    const auto& ds = *labeled.source;
    const int device = ds.device_index(labeled.device_id);
    std::vector<SamplePair> samples;
    samples.reserve(labeled.window_indices.size());
    for (std::int64_t j : labeled.window_indices) samples.push_back({device, j});
    return fit_classifier(ds, samples, pretrained, cfg, cfg.freeze_mode, cfg.finetune_lr);
}

BaselineKind baseline_from_string(const std::string& s) {
    if (s == "random_frozen") return BaselineKind::random_frozen;
    if (s == "supervised_single") return BaselineKind::supervised_single;
    if (s == "supervised_multi") return BaselineKind::supervised_multi;
    if (s == "autoencoder_single") return BaselineKind::autoencoder_single;
    if (s == "autoencoder_multi") return BaselineKind::autoencoder_multi;
    throw ConfigError("unknown baseline '" + s + "'");
}

std::string to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::random_frozen: return "random_frozen";
        case BaselineKind::supervised_single: return "supervised_single";
        case BaselineKind::supervised_multi: return "supervised_multi";
        case BaselineKind::autoencoder_single: return "autoencoder_single";
        case BaselineKind::autoencoder_multi: return "autoencoder_multi";
    }
    return "?";
}

AutoencoderResult pretrain_autoencoder(const data::UnlabeledView& view,
                                       const std::vector<int>& devices, const TrainConfig& cfg) {
    cfg.validate();
    if (devices.empty()) throw ConfigError("autoencoder pretraining: no devices given");

    AutoencoderResult result{nn::FeatureExtractor<float>(cfg.extractor), {}, {}};
    result.extractor.init(derive_seed(cfg.seed, "ae_encoder_init"));
    result.decoder.configure(cfg.extractor, view.window_len);
    result.decoder.init(derive_seed(cfg.seed, "ae_decoder_init"));

    auto ext_params = result.extractor.params("ext");
    auto ext_mask = std::vector<char>(ext_params.size(), 1);
    auto params = concat_params(ext_params, result.decoder.params("dec"));
    const std::vector<char> trainable(params.size(), 1);
    nn::Adam<float> adam;
    adam.init(params);

    std::vector<SamplePair> samples;
    for (int d : devices) {
        for (std::int64_t j = 0; j < view.num_windows; ++j) samples.push_back({d, j});
    }
    auto sampler_rng = make_rng(cfg.seed, "ae_sampler");
    auto dropout_rng = make_rng(cfg.seed, "ae_dropout");
    const auto n = static_cast<std::int64_t>(samples.size());
    const std::int64_t batch = std::min<std::int64_t>(cfg.batch_size, n);
    sampling::EpochSampler sampler(n, batch, /*keep_partial=*/true, sampler_rng);
    PlateauTracker plateau(cfg.patience, cfg.plateau_rel_tol);
    const auto t_start = Clock::now();

    TrainLog& log = result.log;
    log.convergence_reason = "max_epochs";
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (epoch > 0) sampler.reshuffle();
        double epoch_loss = 0.0;
        std::int64_t batch_count = 0;
        std::vector<std::int64_t> positions;
        while (sampler.next(positions)) {
            const auto rows = static_cast<Eigen::Index>(positions.size());
            nn::MatX<float> x(rows, view.window_size());
            for (Eigen::Index r = 0; r < rows; ++r) {
                const auto& s = samples[static_cast<size_t>(positions[static_cast<size_t>(r)])];
                auto w = view.window(s.device, s.window);
                std::copy(w.begin(), w.end(), x.row(r).data());
            }

            nn::FeatureExtractor<float>::Ctx ext_ctx;
            nn::Decoder<float>::Ctx dec_ctx;
            auto emb = result.extractor.forward(x, view.window_len, /*train=*/true, dropout_rng,
                                                ext_ctx);
            auto recon = result.decoder.forward(emb, dec_ctx);
            const double step_loss = static_cast<double>(loss::mse(recon, x)) +
                                     nn::l2_penalty(ext_params, ext_mask, cfg.extractor.l2);
            if (!std::isfinite(step_loss)) {
                throw NumericalError("non-finite reconstruction loss at epoch " +
                                     std::to_string(epoch));
            }

            nn::MatX<float> drecon =
                (recon - x) * (2.0f / static_cast<float>(recon.size()));
            nn::zero_gradients(params);
            auto demb = result.decoder.backward(drecon, dec_ctx);
            result.extractor.backward(demb, ext_ctx);
            nn::add_l2_gradients(ext_params, ext_mask, cfg.extractor.l2);
            update_params(params, trainable, cfg.optimizer, adam, cfg.autoencoder_lr);

            epoch_loss += step_loss;
            ++batch_count;
            ++log.final_step;
        }
        epoch_loss /= static_cast<double>(batch_count);
        log.epoch_losses.push_back(epoch_loss);
        if (plateau.should_stop(epoch_loss)) {
            log.convergence_reason = "plateau";
            break;
        }
    }
    log.wall_seconds = seconds_since(t_start);
    return result;
}

BaselineResult train_baseline(BaselineKind kind, const data::MultiDeviceDataset& ds,
                              const data::LabeledSubset& labeled, const TrainConfig& cfg) {
    cfg.validate();
    const int anchor = ds.device_index(cfg.anchor_id);

    BaselineResult result{nn::FeatureExtractor<float>(cfg.extractor), {}, {}, {}};

    switch (kind) {
        case BaselineKind::random_frozen: {
            result.extractor.init(derive_seed(cfg.seed, "random_baseline"));
            std::vector<SamplePair> samples;
            for (std::int64_t j : labeled.window_indices) samples.push_back({anchor, j});
            auto fit = fit_classifier(ds, samples, result.extractor, cfg,
                                      nn::FreezeMode::head_only, cfg.finetune_lr);
            result.extractor = std::move(fit.extractor);
            result.head = std::move(fit.head);
            result.finetune_log = std::move(fit.log);
            break;
        }
        case BaselineKind::supervised_single:
        case BaselineKind::supervised_multi: {
            result.extractor.init(derive_seed(cfg.seed, "supervised_init"));
            std::vector<SamplePair> samples;
            if (kind == BaselineKind::supervised_single) {
                for (std::int64_t j : labeled.window_indices) samples.push_back({anchor, j});
            } else {
                for (int d = 0; d < ds.num_devices(); ++d) {
                    for (std::int64_t j : labeled.window_indices) samples.push_back({d, j});
                }
            }
            auto fit = fit_classifier(ds, samples, result.extractor, cfg,
                                      nn::FreezeMode::all_trainable, cfg.finetune_lr);
            result.extractor = std::move(fit.extractor);
            result.head = std::move(fit.head);
            result.finetune_log = std::move(fit.log);
            break;
        }
        case BaselineKind::autoencoder_single:
        case BaselineKind::autoencoder_multi: {
            std::vector<int> devices;
            if (kind == BaselineKind::autoencoder_single) {
                devices.push_back(anchor);
            } else {
                for (int d = 0; d < ds.num_devices(); ++d) devices.push_back(d);
            }
            auto ae = pretrain_autoencoder(data::unlabeled_view(ds), devices, cfg);
            result.pretrain_log = std::move(ae.log);
            auto fit = finetune(ae.extractor, labeled, cfg);
            result.extractor = std::move(fit.extractor);
            result.head = std::move(fit.head);
            result.finetune_log = std::move(fit.log);
            break;
        }
    }
    return result;
}

}  // namespace collossl::train
