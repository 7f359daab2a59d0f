#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "smlc/augment.hpp"
#include "smlc/errors.hpp"
#include "smlc/rng.hpp"

using namespace smlc;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& leaf) {
    fs::path d = fs::temp_directory_path() / "smlc_test_augment" / leaf;
    fs::create_directories(d);
    return d;
}

FeatureSequence make_seq(size_t t, size_t d, uint64_t seed, double hop = 0.01) {
    FeatureSequence f;
    f.kind = FeatureKind::external;
    f.frame_hop_s = hop;
    f.frames = MatrixF(t, d);
    Rng rng(seed);
    for (float& v : f.frames.buffer()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return f;
}

// Independent double-precision cosine distance.
double cosine_dist(const float* a, const float* b, size_t d) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < d; ++i) {
        dot += static_cast<double>(a[i]) * b[i];
        na += static_cast<double>(a[i]) * a[i];
        nb += static_cast<double>(b[i]) * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 1.0;
    return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

// Brute-force kNN conversion oracle: full sort by (distance, index).
MatrixF brute_force_convert(const MatrixF& source, const MatrixF& pool, size_t k) {
    MatrixF out(source.rows(), source.cols());
    for (size_t t = 0; t < source.rows(); ++t) {
        std::vector<std::pair<double, size_t>> dists;
        for (size_t p = 0; p < pool.rows(); ++p)
            dists.emplace_back(cosine_dist(source.row(t), pool.row(p), source.cols()), p);
        std::sort(dists.begin(), dists.end());
        for (size_t j = 0; j < source.cols(); ++j) {
            double acc = 0.0;
            for (size_t i = 0; i < k; ++i) acc += pool(dists[i].second, j);
            out(t, j) = static_cast<float>(acc / static_cast<double>(k));
        }
    }
    return out;
}

// Minimal corpus: n speakers, each with one train entry carrying the given
// labels; features stored in the Dataset directly.
struct ToyStore {
    Dataset store;
    std::vector<double> durations;

    void add(const std::string& id, const std::string& speaker,
             std::initializer_list<size_t> positives, size_t frames, uint64_t seed,
             Split split = Split::train, bool augmented = false) {
        ManifestEntry e;
        e.id = id;
        e.source = id + ".smlcfeat";
        e.speaker_id = speaker;
        e.split = split;
        e.augmented = augmented;
        for (size_t kx : positives) {
            e.label.labels[kx] = 1;
            e.label.votes[kx] = 8;
        }
        store.entries.push_back(e);
        store.features.push_back(make_seq(frames, 6, seed));
        durations.push_back(store.features.back().duration_s());
    }
};

std::array<size_t, kNumLabels> counts_of(const std::vector<ManifestEntry>& entries) {
    std::array<size_t, kNumLabels> c{};
    for (const auto& e : entries)
        for (size_t k = 0; k < kNumLabels; ++k) c[k] += e.label.labels[k];
    return c;
}

} // namespace

TEST_CASE("build_pool: counting under the cap") {
    std::vector<FeatureSequence> seqs = {make_seq(1000, 6, 1), make_seq(1000, 6, 2),
                                         make_seq(1000, 6, 3)};
    // 3 sequences of 10 s each at 10 ms hop, cap 60 s -> all 3000 frames
    FramePool pool = build_pool(seqs, "spk", 60.0);
    CHECK(pool.frames.rows() == 3000);
    CHECK(pool.frames.cols() == 6);
    CHECK(pool.speaker_id == "spk");
    CHECK(pool.duration_s == doctest::Approx(30.0));
    CHECK(pool.frame_hop_s == doctest::Approx(0.01));
    // concatenation preserves order
    for (size_t j = 0; j < 6; ++j) {
        CHECK(pool.frames(0, j) == seqs[0].frames(0, j));
        CHECK(pool.frames(1000, j) == seqs[1].frames(0, j));
        CHECK(pool.frames(2999, j) == seqs[2].frames(999, j));
    }
}

TEST_CASE("build_pool: 90 s of input at a 60 s cap stops at exactly 6000 frames") {
    std::vector<FeatureSequence> seqs = {make_seq(3000, 4, 1), make_seq(3000, 4, 2),
                                         make_seq(3000, 4, 3)};
    FramePool pool = build_pool(seqs, "spk", 60.0);
    CHECK(pool.frames.rows() == 6000);
    CHECK(pool.duration_s == doctest::Approx(60.0));
    // the cut falls inside the third sequence? no: 2 x 3000 frames = 60 s exactly
    for (size_t j = 0; j < 4; ++j) CHECK(pool.frames(5999, j) == seqs[1].frames(2999, j));
}

TEST_CASE("build_pool: errors") {
    CHECK_THROWS_AS(build_pool({}, "spk", 60.0), DataError);
    std::vector<FeatureSequence> mixed = {make_seq(10, 4, 1, 0.01), make_seq(10, 4, 2, 0.02)};
    CHECK_THROWS_AS(build_pool(mixed, "spk", 60.0), ConfigError);
    std::vector<FeatureSequence> ragged = {make_seq(10, 4, 1), make_seq(10, 5, 2)};
    CHECK_THROWS_AS(build_pool(ragged, "spk", 60.0), ConfigError);
    CHECK_THROWS_AS(build_pool({make_seq(10, 4, 1)}, "spk", 0.0), ConfigError);
}

TEST_CASE("knn_convert: pool equal to source with k=1 is the identity") {
    FeatureSequence src = make_seq(25, 8, 7);
    FramePool pool;
    pool.frames = src.frames;
    pool.speaker_id = "self";
    pool.frame_hop_s = src.frame_hop_s;
    pool.duration_s = src.duration_s();

    FeatureSequence out = knn_convert(src, pool, 1);
    CHECK(out.frames == src.frames);
    CHECK(out.frame_hop_s == src.frame_hop_s);
    CHECK(out.kind == src.kind);
}

TEST_CASE("knn_convert: k = P collapses every frame to the pool mean") {
    FeatureSequence src = make_seq(10, 5, 8);
    FramePool pool;
    pool.frames = make_seq(17, 5, 9).frames;
    pool.frame_hop_s = 0.01;

    FeatureSequence out = knn_convert(src, pool, 17);
    for (size_t j = 0; j < 5; ++j) {
        double mean = 0.0;
        for (size_t p = 0; p < 17; ++p) mean += pool.frames(p, j);
        mean /= 17.0;
        for (size_t t = 0; t < 10; ++t)
            CHECK(out.frames(t, j) == doctest::Approx(mean).epsilon(1e-6));
    }
}

TEST_CASE("knn_convert: matches the brute-force oracle") {
    for (auto [t, p, k] : std::vector<std::array<size_t, 3>>{{20, 100, 4}, {9, 31, 7}, {5, 5, 5}}) {
        FeatureSequence src = make_seq(t, 16, 70 + t);
        FramePool pool;
        pool.frames = make_seq(p, 16, 71 + p).frames;
        pool.frame_hop_s = 0.01;
        FeatureSequence got = knn_convert(src, pool, k);
        MatrixF want = brute_force_convert(src.frames, pool.frames, k);
        REQUIRE(got.frames.rows() == t);
        for (size_t i = 0; i < got.frames.size(); ++i)
            CHECK(got.frames.buffer()[i] ==
                  doctest::Approx(want.buffer()[i]).epsilon(1e-6).scale(1e-6));
    }
}

TEST_CASE("knn_convert: output stays in the componentwise convex hull of the pool") {
    FeatureSequence src = make_seq(12, 6, 90);
    FramePool pool;
    pool.frames = make_seq(40, 6, 91).frames;
    pool.frame_hop_s = 0.01;
    FeatureSequence out = knn_convert(src, pool, 4);

    for (size_t j = 0; j < 6; ++j) {
        float lo = pool.frames(0, j), hi = pool.frames(0, j);
        for (size_t p = 1; p < 40; ++p) {
            lo = std::min(lo, pool.frames(p, j));
            hi = std::max(hi, pool.frames(p, j));
        }
        for (size_t t = 0; t < 12; ++t) {
            CHECK(out.frames(t, j) >= lo - 1e-6f);
            CHECK(out.frames(t, j) <= hi + 1e-6f);
        }
    }
}

TEST_CASE("knn_convert: exactly invariant to pool permutation with distinct distances") {
    FeatureSequence src = make_seq(15, 8, 92);
    MatrixF pool_frames = make_seq(33, 8, 93).frames; // random floats: distances distinct

    FramePool pool;
    pool.frames = pool_frames;
    pool.frame_hop_s = 0.01;
    FeatureSequence base = knn_convert(src, pool, 5);

    Rng rng(94);
    std::vector<size_t> perm(33);
    for (size_t i = 0; i < 33; ++i) perm[i] = i;
    shuffle(perm, rng);
    FramePool shuffled;
    shuffled.frame_hop_s = 0.01;
    shuffled.frames = MatrixF(33, 8);
    for (size_t i = 0; i < 33; ++i)
        for (size_t j = 0; j < 8; ++j) shuffled.frames(i, j) = pool_frames(perm[i], j);

    FeatureSequence out = knn_convert(src, shuffled, 5);
    CHECK(out.frames == base.frames); // bitwise equal, not just close
}

TEST_CASE("knn_convert: zero-norm frames sit at maximal distance") {
    FeatureSequence src = make_seq(3, 4, 95);
    FramePool pool;
    pool.frames = MatrixF(3, 4);
    pool.frame_hop_s = 0.01;
    // row 0 is all-zero (distance defined as 1), rows 1-2 point along the source
    for (size_t j = 0; j < 4; ++j) {
        pool.frames(0, j) = 0.0f;
        pool.frames(1, j) = src.frames(0, j);
        pool.frames(2, j) = src.frames(0, j) * 2.0f;
    }
    FeatureSequence out = knn_convert(src, pool, 2);
    // frame 0's two nearest are rows 1 and 2 (distance 0 each); zero row loses
    for (size_t j = 0; j < 4; ++j)
        CHECK(out.frames(0, j) ==
              doctest::Approx((pool.frames(1, j) + pool.frames(2, j)) / 2.0).epsilon(1e-6));
}

TEST_CASE("knn_convert: parameter errors") {
    FeatureSequence src = make_seq(4, 4, 96);
    FramePool pool;
    pool.frames = make_seq(6, 4, 97).frames;
    pool.frame_hop_s = 0.01;
    CHECK_THROWS_AS(knn_convert(src, pool, 0), ConfigError);
    CHECK_THROWS_AS(knn_convert(src, pool, 7), ConfigError); // k > P
    FeatureSequence narrow = make_seq(4, 3, 98);
    CHECK_THROWS_AS(knn_convert(narrow, pool, 2), ConfigError);
}

TEST_CASE("plan_augmentation: all labels at target gives an empty plan") {
    ToyStore toy;
    toy.add("a0", "spk-a", {kFemale, kAdult, kDark, kRough}, 100, 1);
    toy.add("b0", "spk-b", {kMale, kAdult, kDark, kSmooth}, 100, 2);
    std::array<size_t, kNumLabels> targets = counts_of(toy.store.entries);
    auto plan = plan_augmentation(toy.store.entries, toy.durations, targets, 3600.0, 5);
    CHECK(plan.items.empty());
}

TEST_CASE("plan_augmentation: rough deficit of 10 plans exactly 10 rough conversions") {
    ToyStore toy;
    // two rough speakers, four smooth speakers
    toy.add("r0", "spk-r0", {kFemale, kAdult, kDark, kRough}, 100, 1);
    toy.add("r1", "spk-r1", {kMale, kAdult, kDark, kRough}, 100, 2);
    for (int i = 0; i < 4; ++i)
        toy.add("s" + std::to_string(i), "spk-s" + std::to_string(i),
                {i % 2 ? kFemale : kMale, kAdult, kBright, kSmooth}, 100, 10 + i);

    std::array<size_t, kNumLabels> targets = counts_of(toy.store.entries);
    targets[kRough] = 12; // current count 2 -> deficit 10
    auto plan = plan_augmentation(toy.store.entries, toy.durations, targets, 36000.0, 9);

    CHECK(plan.items.size() == 10);
    std::set<std::string> output_ids;
    for (const auto& item : plan.items) {
        CHECK((item.target_speaker == "spk-r0" || item.target_speaker == "spk-r1"));
        // no self-conversion: the source entry's speaker differs from the target
        for (size_t i = 0; i < toy.store.entries.size(); ++i)
            if (toy.store.entries[i].id == item.source_id)
                CHECK(toy.store.entries[i].speaker_id != item.target_speaker);
        output_ids.insert(item.output_id);
    }
    CHECK(output_ids.size() == 10); // unique ids
}

TEST_CASE("plan_augmentation: a 0.5 h budget caps 5 s items at 360") {
    ToyStore toy;
    toy.add("r0", "spk-r0", {kFemale, kAdult, kDark, kRough}, 500, 1); // 5 s at 10 ms hop
    for (int i = 0; i < 8; ++i)
        toy.add("s" + std::to_string(i), "spk-s" + std::to_string(i),
                {i % 2 ? kFemale : kMale, kAdult, kBright, kSmooth}, 500, 10 + i);

    std::array<size_t, kNumLabels> targets = counts_of(toy.store.entries);
    targets[kRough] = 10000; // unreachable deficit
    auto plan = plan_augmentation(toy.store.entries, toy.durations, targets, 0.5 * 3600.0, 3);
    CHECK(plan.items.size() == 360);
}

TEST_CASE("plan_augmentation: deterministic in the seed") {
    ToyStore toy;
    toy.add("r0", "spk-r0", {kFemale, kAdult, kDark, kRough}, 100, 1);
    toy.add("r1", "spk-r1", {kMale, kTeenager, kDark, kRough}, 100, 2);
    for (int i = 0; i < 5; ++i)
        toy.add("s" + std::to_string(i), "spk-s" + std::to_string(i),
                {i % 2 ? kFemale : kMale, kAdult, kBright, kSmooth}, 100, 10 + i);
    std::array<size_t, kNumLabels> targets = counts_of(toy.store.entries);
    targets[kRough] = 8;

    auto p1 = plan_augmentation(toy.store.entries, toy.durations, targets, 3600.0, 42);
    auto p2 = plan_augmentation(toy.store.entries, toy.durations, targets, 3600.0, 42);
    REQUIRE(p1.items.size() == p2.items.size());
    for (size_t i = 0; i < p1.items.size(); ++i) {
        CHECK(p1.items[i].source_id == p2.items[i].source_id);
        CHECK(p1.items[i].target_speaker == p2.items[i].target_speaker);
        CHECK(p1.items[i].output_id == p2.items[i].output_id);
    }
}

TEST_CASE("plan_augmentation: no eligible donors names the label") {
    ToyStore toy;
    // nobody is Rough-positive, so a Rough deficit cannot be planned
    toy.add("s0", "spk-s0", {kFemale, kAdult, kDark, kSmooth}, 100, 1);
    toy.add("s1", "spk-s1", {kMale, kAdult, kBright, kSmooth}, 100, 2);
    std::array<size_t, kNumLabels> targets = counts_of(toy.store.entries);
    targets[kRough] = 3;
    try {
        plan_augmentation(toy.store.entries, toy.durations, targets, 3600.0, 7);
        FAIL("expected PlanningError");
    } catch (const PlanningError& ex) {
        CHECK(std::string(ex.what()).find("Rough") != std::string::npos);
    }
}

TEST_CASE("plan_augmentation: augmented and excluded rows are never sources or donors") {
    ToyStore toy;
    toy.add("r0", "spk-r0", {kFemale, kAdult, kDark, kRough}, 100, 1);
    toy.add("s0", "spk-s0", {kMale, kAdult, kBright, kSmooth}, 100, 2);
    toy.add("aug0", "spk-aug", {kMale, kAdult, kBright, kRough}, 100, 3, Split::train, true);
    ManifestEntry& excluded = toy.store.entries.emplace_back();
    excluded.id = "x0";
    excluded.source = "x0.smlcfeat";
    excluded.speaker_id = "spk-x";
    excluded.excluded = true;
    excluded.label.labels[kRough] = 1;
    excluded.label.votes[kRough] = 8;
    toy.store.features.push_back(make_seq(100, 6, 4));
    toy.durations.push_back(1.0);

    std::array<size_t, kNumLabels> targets{};
    targets[kRough] = 2; // counted over eligible rows: only r0 counts -> deficit 1
    auto plan = plan_augmentation(toy.store.entries, toy.durations, targets, 3600.0, 11);
    REQUIRE(plan.items.size() == 1);
    CHECK(plan.items[0].target_speaker == "spk-r0"); // only eligible Rough donor
    CHECK(plan.items[0].source_id == "s0");          // aug/excluded rows can't supply content
}

TEST_CASE("execute_plan: empty plan yields an empty fragment") {
    ToyStore toy;
    toy.add("a", "spk-a", {kFemale, kAdult, kDark, kSmooth}, 20, 1);
    AugmentationPlan plan;
    fs::path dir = temp_dir("empty");
    auto res = execute_plan(plan, toy.store, 2, dir.string());
    CHECK(res.fragment.empty());
    CHECK(res.skipped.empty());
    CHECK(fs::exists(dir / "skip_report.txt"));
}

TEST_CASE("execute_plan: one item writes one file with the donor's labels") {
    ToyStore toy;
    toy.add("src", "spk-src", {kMale, kAdult, kBright, kSmooth}, 30, 1);
    toy.add("tgt", "spk-tgt", {kFemale, kTeenager, kDark, kRough}, 40, 2);
    toy.store.entries[1].label.votes[kRough] = 6; // non-default vote to verify the copy

    AugmentationPlan plan;
    plan.items.push_back({"src", "spk-tgt", "aug-0-src-as-spk-tgt"});
    fs::path dir = temp_dir("one_item");
    auto res = execute_plan(plan, toy.store, 3, dir.string());

    CHECK(res.skipped.empty());
    REQUIRE(res.fragment.size() == 1);
    const ManifestEntry& e = res.fragment[0];
    CHECK(e.id == "aug-0-src-as-spk-tgt");
    CHECK(e.speaker_id == "spk-tgt");
    CHECK(e.augmented);
    CHECK(e.split == Split::train);
    CHECK(e.label == toy.store.entries[1].label); // bits and votes copied
    REQUIRE(fs::exists(e.source));

    // the written features equal a direct conversion against the donor pool
    FeatureSequence written = load_feature_file(e.source);
    FramePool pool = build_pool({toy.store.features[1]}, "spk-tgt", 60.0);
    FeatureSequence direct = knn_convert(toy.store.features[0], pool, 3);
    CHECK(written.frames == direct.frames);
    CHECK(written.n_frames() == 30); // content length comes from the source
}

TEST_CASE("execute_plan: re-running with the same inputs is byte-identical") {
    ToyStore toy;
    toy.add("src", "spk-src", {kMale, kAdult, kBright, kSmooth}, 25, 5);
    toy.add("tgt", "spk-tgt", {kFemale, kAdult, kDark, kRough}, 35, 6);
    AugmentationPlan plan;
    plan.items.push_back({"src", "spk-tgt", "aug-0"});

    fs::path dir = temp_dir("rerun");
    auto r1 = execute_plan(plan, toy.store, 4, dir.string());
    std::ifstream f1(r1.fragment[0].source, std::ios::binary);
    std::string bytes1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());

    auto r2 = execute_plan(plan, toy.store, 4, dir.string());
    std::ifstream f2(r2.fragment[0].source, std::ios::binary);
    std::string bytes2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(bytes1 == bytes2);
    CHECK(r1.fragment[0] == r2.fragment[0]);
}

TEST_CASE("execute_plan: unknown references are skipped and reported, not fatal") {
    ToyStore toy;
    toy.add("src", "spk-src", {kMale, kAdult, kBright, kSmooth}, 25, 7);
    toy.add("tgt", "spk-tgt", {kFemale, kAdult, kDark, kRough}, 35, 8);
    AugmentationPlan plan;
    plan.items.push_back({"missing-src", "spk-tgt", "aug-bad-0"});
    plan.items.push_back({"src", "spk-missing", "aug-bad-1"});
    plan.items.push_back({"src", "spk-tgt", "aug-ok"});

    fs::path dir = temp_dir("skips");
    auto res = execute_plan(plan, toy.store, 2, dir.string());
    REQUIRE(res.fragment.size() == 1);
    CHECK(res.fragment[0].id == "aug-ok");
    REQUIRE(res.skipped.size() == 2);
    CHECK(res.skipped[0].find("aug-bad-0") != std::string::npos);
    CHECK(res.skipped[1].find("aug-bad-1") != std::string::npos);

    std::ifstream report(dir / "skip_report.txt");
    std::string text((std::istreambuf_iterator<char>(report)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("aug-bad-0") != std::string::npos);
    CHECK(text.find("aug-bad-1") != std::string::npos);
}

TEST_CASE("execute_plan: label counts never decrease and originals are untouched") {
    ToyStore toy;
    toy.add("r0", "spk-r0", {kFemale, kAdult, kDark, kRough}, 60, 1);
    toy.add("s0", "spk-s0", {kMale, kAdult, kBright, kSmooth}, 60, 2);
    toy.add("s1", "spk-s1", {kFemale, kTeenager, kBright, kSmooth}, 60, 3);
    auto originals = toy.store.entries;

    std::array<size_t, kNumLabels> targets = counts_of(toy.store.entries);
    targets[kRough] = 3;
    auto plan = plan_augmentation(toy.store.entries, toy.durations, targets, 3600.0, 13);
    REQUIRE(plan.items.size() == 2);

    fs::path dir = temp_dir("counts");
    auto res = execute_plan(plan, toy.store, 4, dir.string());
    CHECK(res.skipped.empty());

    std::vector<ManifestEntry> merged = toy.store.entries;
    merged.insert(merged.end(), res.fragment.begin(), res.fragment.end());
    auto before = counts_of(originals);
    auto after = counts_of(merged);
    for (size_t k = 0; k < kNumLabels; ++k) CHECK(after[k] >= before[k]);
    CHECK(after[kRough] == 3); // deficit filled exactly
    CHECK(toy.store.entries == originals);
}
