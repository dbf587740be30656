#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "collossl/eval.hpp"
#include "collossl/synth.hpp"
#include "collossl/train.hpp"
#include "test_util.hpp"

using namespace collossl;

namespace {

// Separable at desk scale: 3 devices, 3 classes, 2 subjects, W = 48.
synth::SynthConfig tiny_synth() {
    synth::SynthConfig cfg;
    cfg.num_devices = 3;
    cfg.num_classes = 3;
    cfg.num_subjects = 2;
    cfg.windows_per_subject_per_class = 8;
    cfg.sampling_rate_hz = 32.0;
    cfg.window_seconds = 1.5;
    cfg.device_transform_spread = 0.4;
    cfg.noise_std = 0.15;
    cfg.seed = 7;
    return cfg;
}

train::TrainConfig tiny_train() {
    train::TrainConfig cfg;
    cfg.anchor_id = "dev0";
    cfg.batch_size = 16;
    cfg.max_epochs = 8;
    cfg.patience = 8;
    cfg.pretrain_lr = 1e-3;  // fast convergence at unit-test scale
    cfg.seed = 3;
    return cfg;
}

double subset_accuracy(const nn::FeatureExtractor<float>& extractor,
                       const nn::ClassifierHead<float>& head,
                       const data::MultiDeviceDataset& ds, const data::LabeledSubset& subset) {
    const int device = ds.device_index(subset.device_id);
    auto predictions = eval::predict(extractor, head, ds, device);
    int correct = 0;
    for (auto j : subset.window_indices) {
        correct += predictions[static_cast<size_t>(j)] == ds.labels[static_cast<size_t>(j)];
    }
    return static_cast<double>(correct) / static_cast<double>(subset.window_indices.size());
}

}  // namespace

template <typename T>
constexpr bool view_has_labels = requires(T t) { t.labels; };

TEST_CASE("pretraining consumes a label-stripped view by construction") {
    static_assert(!view_has_labels<data::UnlabeledView>);
    static_assert(view_has_labels<data::MultiDeviceDataset>);
}

TEST_CASE("contrastive pretraining drives the loss down on separable data") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    auto result = train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    REQUIRE(result.log.epoch_losses.size() >= 2);
    CHECK(result.log.epoch_losses.back() < result.log.epoch_losses.front());
    for (double loss : result.log.epoch_losses) CHECK(std::isfinite(loss));
    CHECK(result.log.final_step > 0);
}

TEST_CASE("two pretraining runs with one seed produce identical logs") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 4;
    auto a = train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    auto b = train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    CHECK(a.log.epoch_losses == b.log.epoch_losses);

    // parameters are bit-identical as well
    auto pa = a.extractor.params("ext");
    auto pb = b.extractor.params("ext");
    for (size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pb[i].value);

    cfg.seed += 1;
    auto c = train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    CHECK(a.log.epoch_losses != c.log.epoch_losses);
}

TEST_CASE("excluding all but one candidate degenerates to a single positive/negative") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 2;
    cfg.exclude_devices = {"dev2"};
    auto result = train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    CHECK(result.log.epoch_losses.size() == 2);

    cfg.exclude_devices = {"dev1", "dev2"};
    CHECK_THROWS_AS((void)train::pretrain_collossl(data::unlabeled_view(ds), cfg), ConfigError);
}

TEST_CASE("pretraining a single-device dataset reports the device requirement") {
    auto cfg_synth = tiny_synth();
    auto ds = data::normalize(synth::generate(cfg_synth)).dataset;
    ds.devices.resize(1);
    ds.windows.resize(1);
    auto cfg = tiny_train();
    try {
        (void)train::pretrain_collossl(data::unlabeled_view(ds), cfg);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(">= 2 devices") != std::string::npos);
    }
}

TEST_CASE("pretraining writes a per-batch selection audit when asked") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 2;
    const auto path =
        (std::filesystem::temp_directory_path() / "collossl_audit_test.csv").string();
    cfg.selection_audit_path = path;
    (void)train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,batch,device,mmd,weight,is_positive");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) rows += !line.empty();
    CHECK(rows == 2 * 3 * 2);  // epochs x batches x candidates
    std::filesystem::remove(path);
}

TEST_CASE("fine-tuning freezes conv1/conv2 and trains conv3 plus the head") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 3;
    auto pre = train::pretrain_collossl(data::unlabeled_view(ds), cfg);

    auto subset = data::sample_label_fraction(ds, "dev0", 1.0, cfg.seed);
    cfg.max_epochs = 5;
    auto fit = train::finetune(pre.extractor, subset, cfg);

    auto before = pre.extractor.params("ext");
    auto after = fit.extractor.params("ext");
    for (size_t i = 0; i < before.size(); ++i) {
        const auto& name = before[i].name;
        if (name.rfind("ext.conv1", 0) == 0 || name.rfind("ext.conv2", 0) == 0) {
            CHECK(*after[i].value == *before[i].value);  // bit-equal
        }
    }
    // conv3 kernel moved
    CHECK(*after[4].value != *before[4].value);
    CHECK(after[4].name == "ext.conv3.weight");
}

TEST_CASE("fine-tuning raises training-subset accuracy over the initial head") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 6;
    auto pre = train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    auto subset = data::sample_label_fraction(ds, "dev0", 1.0, cfg.seed);

    cfg.max_epochs = 25;
    cfg.patience = 25;
    auto fit = train::finetune(pre.extractor, subset, cfg);
    REQUIRE(fit.log.epoch_losses.size() >= 2);
    CHECK(fit.log.epoch_losses.back() < fit.log.epoch_losses.front());

    const double accuracy = subset_accuracy(fit.extractor, fit.head, ds, subset);
    CHECK(accuracy > 1.0 / 3.0 + 0.2);
}

TEST_CASE("random_frozen baseline never touches the extractor") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 4;
    auto subset = data::sample_label_fraction(ds, "dev0", 1.0, cfg.seed);
    auto result = train::train_baseline(train::BaselineKind::random_frozen, ds, subset, cfg);

    nn::FeatureExtractor<float> reference(cfg.extractor);
    reference.init(derive_seed(cfg.seed, "random_baseline"));
    auto got = result.extractor.params("ext");
    auto expected = reference.params("ext");
    for (size_t i = 0; i < got.size(); ++i) CHECK(*got[i].value == *expected[i].value);
}

TEST_CASE("autoencoder reconstruction loss decreases over epochs") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 6;
    auto ae = train::pretrain_autoencoder(data::unlabeled_view(ds), {0}, cfg);
    REQUIRE(ae.log.epoch_losses.size() >= 2);
    CHECK(ae.log.epoch_losses.back() < ae.log.epoch_losses.front());
}

TEST_CASE("supervised_multi consumes T x D training windows") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 3;
    cfg.patience = 5;
    cfg.batch_size = 32;
    auto subset = data::sample_label_fraction(ds, "dev0", 1.0, cfg.seed);
    auto result = train::train_baseline(train::BaselineKind::supervised_multi, ds, subset, cfg);

    const std::int64_t samples = ds.num_windows * ds.num_devices();
    const std::int64_t batches_per_epoch = (samples + cfg.batch_size - 1) / cfg.batch_size;
    CHECK(result.finetune_log.final_step == 3 * batches_per_epoch);

    auto single = train::train_baseline(train::BaselineKind::supervised_single, ds, subset, cfg);
    const std::int64_t single_batches = (ds.num_windows + cfg.batch_size - 1) / cfg.batch_size;
    CHECK(single.finetune_log.final_step == 3 * single_batches);
}

TEST_CASE("autoencoder baselines pretrain then fine-tune with the partial freeze") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 3;
    auto subset = data::sample_label_fraction(ds, "dev0", 0.5, cfg.seed);
    auto result =
        train::train_baseline(train::BaselineKind::autoencoder_multi, ds, subset, cfg);
    CHECK(!result.pretrain_log.epoch_losses.empty());
    CHECK(!result.finetune_log.epoch_losses.empty());
    CHECK(result.head.num_classes == 3);
}

TEST_CASE("a numerical blow-up aborts with a checkpoint of the last good state") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.pretrain_lr = 1e30;
    cfg.max_epochs = 4;
    const auto path =
        (std::filesystem::temp_directory_path() / "collossl_abort_test.ckpt").string();
    cfg.abort_checkpoint_path = path;
    CHECK_THROWS_AS((void)train::pretrain_collossl(data::unlabeled_view(ds), cfg),
                    NumericalError);
    CHECK(std::filesystem::exists(path));
    auto ckpt = nn::load_checkpoint(path, cfg.extractor.signature());
    CHECK(!ckpt.tensors.empty());
    std::filesystem::remove(path);
}

TEST_CASE("transfer runs pretrain on a substitute anchor with the target excluded") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;
    auto cfg = tiny_train();
    cfg.max_epochs = 3;
    // dev0 stays unseen during pretraining; dev1 anchors the pretext task
    cfg.anchor_id = "dev0";
    cfg.pretrain_anchor_id = "dev1";
    cfg.exclude_devices = {"dev0"};
    auto pre = train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    CHECK(!pre.log.epoch_losses.empty());

    // fine-tuning and evaluation then run on the unseen device
    auto subset = data::sample_label_fraction(ds, "dev0", 1.0, cfg.seed);
    auto fit = train::finetune(pre.extractor, subset, cfg);
    CHECK(fit.head.num_classes == 3);
}

TEST_CASE("batch size larger than the dataset is clamped; partial pretrain batches skipped") {
    auto ds = data::normalize(synth::generate(tiny_synth())).dataset;  // T = 48
    auto cfg = tiny_train();
    cfg.batch_size = 512;  // clamps to 48
    cfg.max_epochs = 2;
    auto result = train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    CHECK(result.log.final_step == 2);  // one full batch per epoch

    cfg.batch_size = 20;  // 48 = 2 x 20 + 8 -> partial batch dropped
    auto dropped = train::pretrain_collossl(data::unlabeled_view(ds), cfg);
    CHECK(dropped.log.final_step == 4);
}
