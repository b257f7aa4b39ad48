// Library walk-through: synthesize two subjects, train a small model on one,
// generate a 3.75 s DUS segment for the other and estimate its heart rate.

#include <cstdio>

#include "fedus/model/train.hpp"
#include "fedus/preprocess/beats.hpp"
#include "fedus/preprocess/prepare.hpp"
#include "fedus/synth/synthgen.hpp"
#include "fedus/usecase/fhr.hpp"

using namespace fedus;

int main() {
    synth::SynthConfig sc;
    sc.n_subjects = 2;
    sc.duration_s = 120.0;
    const auto raw = synth::gen_dataset(sc);

    const auto train_subject = preprocess::prepare_subject(raw[0]);
    const auto test_subject = preprocess::prepare_subject(raw[1]);
    std::printf("lag estimates: %.4f s, %.4f s\n", train_subject.lag_s, test_subject.lag_s);

    const auto pairs = preprocess::extract_beat_pairs(train_subject.record, 1, model::samples_per_beat);
    std::printf("%zu training pairs\n", pairs.size());

    const auto arch = model::ArchConfig::for_beats(1, 4);
    model::TrainConfig tc;
    tc.max_epochs = 3;
    tc.patience = 2;
    const auto trained = model::train<float>(pairs, arch, tc, [](const model::HistoryRow& r) {
        std::printf("epoch %d  train %.5f  val %.5f\n", r.epoch, r.train_mse, r.val_mse);
    });

    const auto& rec = test_subject.record;
    const double start = 10 * usecase::segment_seconds;
    const auto dus = usecase::generate_segment(trained.params, rec.fecg_channels[0], rec.peaks, start);
    const auto est = usecase::estimate_fhr(dus);
    const double label = usecase::fhr_label(usecase::peaks_in_segment(rec.peaks, start));
    std::printf("segment FHR: label %.1f bpm, estimate %.1f bpm (%s)\n", label, est.bpm,
                est.valid ? "valid" : "invalid");
}
