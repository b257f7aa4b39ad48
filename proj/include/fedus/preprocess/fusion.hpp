#pragma once

#include <optional>
#include <tuple>

#include "fedus/preprocess/records.hpp"

namespace fedus::preprocess {

/// Picks the FECG channel for a segment, or nullopt when the segment is rejected.
///
///  1. The DUS must be rated 1 by both annotators.
///  2. Candidates: summed SQI <= 5 and neither annotator gave a 5.
///  3. Channels rated 1 by both annotators win; among them the best auto rank.
///  4. Otherwise lowest summed SQI, then lowest individual SQI, then best auto rank.
///
/// A channel rated 1 by only one annotator falls through to rule 4.
inline std::optional<std::size_t> select_fecg_channel(const SegmentAnnotation& seg) {
    if (seg.fecg_sqi.empty() || seg.fecg_sqi.size() != seg.auto_rank.size())
        throw DataError("select_fecg_channel: annotation missing channel scores");
    validate_annotation(seg, seg.fecg_sqi.size());

    if (seg.dus_sqi[0] != 1 || seg.dus_sqi[1] != 1) return std::nullopt;

    std::optional<std::size_t> best_clean, best_other;
    auto other_key = [&](std::size_t c) {
        const auto [a, b] = seg.fecg_sqi[c];
        return std::tuple(a + b, std::min(a, b), seg.auto_rank[c]);
    };
    for (std::size_t c = 0; c < seg.fecg_sqi.size(); ++c) {
        const auto [a, b] = seg.fecg_sqi[c];
        if (a + b > 5 || a == 5 || b == 5) continue;
        if (a == 1 && b == 1) {
            if (!best_clean || seg.auto_rank[c] < seg.auto_rank[*best_clean]) best_clean = c;
        } else if (!best_other || other_key(c) < other_key(*best_other)) {
            best_other = c;
        }
    }
    return best_clean ? best_clean : best_other;
}

} // namespace fedus::preprocess
