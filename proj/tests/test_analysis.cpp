#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "geomlab/analysis.hpp"
#include "geomlab/rng.hpp"

using namespace geomlab;

namespace {

GeometryConfig cfg_of(GeometryKind kind, LogitVariant variant, int n) {
    return GeometryConfig::defaults(kind, variant, n);
}

// collinear toy corpus: three captions on the ray through the image, one far
// off-axis; ids deliberately not in similarity order
struct ToyCorpus {
    Vec image{4.0, 0.0};
    std::vector<Vec> captions{{4.0, 0.0}, {2.0, 0.0}, {0.5, 0.0}, {0.0, 3.0}};
    std::vector<int> ids{10, 11, 12, 13};
};

}  // namespace

TEST_CASE("root point per geometry") {
    const std::vector<Vec> texts{{1.0, 0.0}, {0.0, 1.0}};
    const std::vector<Vec> images{};

    const RootPoint origin =
        compute_root(cfg_of(GeometryKind::euclidean, LogitVariant::d2, 2), texts, images);
    CHECK(origin.is_origin);

    const RootPoint mean =
        compute_root(cfg_of(GeometryKind::clip, LogitVariant::d, 2), texts, images);
    CHECK_FALSE(mean.is_origin);
    CHECK(mean.value[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(mean.value[1] == doctest::Approx(0.5).epsilon(1e-15));

    const std::vector<Vec> single{{3.0, 4.0}};
    const RootPoint unit =
        compute_root(cfg_of(GeometryKind::clip, LogitVariant::d, 2), single, images);
    CHECK(unit.value[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(unit.value[1] == doctest::Approx(0.8).epsilon(1e-15));

    CHECK_THROWS_AS(compute_root(cfg_of(GeometryKind::clip, LogitVariant::d, 2), images, images),
                    std::invalid_argument);
}

TEST_CASE("root distances") {
    const GeometryConfig euc = cfg_of(GeometryKind::euclidean, LogitVariant::d2, 4);
    const RootPoint origin = compute_root(euc, {}, {});
    CHECK(root_distance(euc, {0, 0, 0, 0}, origin, Modality::text) == 0.0);
    CHECK(root_distance(euc, {2, 0, 0, 0}, origin, Modality::text) ==
          doctest::Approx(1.0).epsilon(1e-15));

    GeometryConfig clip = cfg_of(GeometryKind::clip, LogitVariant::d, 2);
    RootPoint root;
    root.kind = GeometryKind::clip;
    root.is_origin = false;
    root.value = {1.0, 0.0};
    CHECK(root_distance(clip, {2.5, 0.0}, root, Modality::text) ==
          doctest::Approx(0.0).epsilon(1e-15));
    CHECK(root_distance(clip, {-1.0, 0.0}, root, Modality::image) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(root_distance(clip, {0.0, 0.0}, root, Modality::text), std::domain_error);

    GeometryConfig hyp = cfg_of(GeometryKind::hyperbolic, LogitVariant::d, 3);
    hyp.log_alpha_txt = 0.0;
    hyp.log_c = 0.0;
    const RootPoint apex = compute_root(hyp, {}, {});
    CHECK(root_distance(hyp, {1.0, 0.0, 0.0}, apex, Modality::text) ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("distance histogram") {
    const std::vector<double> single{0.7};
    const HistogramTable t1 = distance_histogram(single, {}, 5);
    long total = 0;
    int nonzero = 0;
    for (std::size_t k = 0; k < t1.bins(); ++k) {
        total += t1.count_text[k];
        if (t1.count_text[k] > 0) ++nonzero;
    }
    CHECK(total == 1);
    CHECK(nonzero == 1);

    Rng rng(3);
    std::vector<double> dists;
    for (int i = 0; i < 100; ++i) dists.push_back(std::abs(rng.normal()));
    const HistogramTable t2 = distance_histogram(dists, dists, 8);
    long text_total = 0, image_total = 0;
    for (std::size_t k = 0; k < t2.bins(); ++k) {
        text_total += t2.count_text[k];
        image_total += t2.count_image[k];
        CHECK(t2.count_text[k] == t2.count_image[k]);  // identical inputs
    }
    CHECK(text_total == 100);
    CHECK(image_total == 100);
    CHECK(t2.bin_lo[0] == 0.0);

    CHECK_THROWS_AS(distance_histogram(dists, dists, 0), std::invalid_argument);
}

TEST_CASE("modality gap medians") {
    const std::vector<double> a{0.1, 0.2, 0.3};
    const ModalityGap same = modality_gap(a, a);
    CHECK(same.ratio == doctest::Approx(1.0).epsilon(1e-15));

    const std::vector<double> t(5, 0.1), im(7, 0.2);
    const ModalityGap gap = modality_gap(t, im);
    CHECK(gap.median_text == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(gap.median_image == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(gap.ratio == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("traversal endpoints on the toy corpus") {
    const ToyCorpus toy;
    const GeometryConfig cfg = cfg_of(GeometryKind::euclidean, LogitVariant::d2, 2);
    const RootPoint root = compute_root(cfg, {}, {});

    const TraversalResult r =
        traverse_image(cfg, toy.image, root, toy.captions, toy.ids, std::nullopt);
    REQUIRE(r.step_caption_ids.size() == kTraversalSteps);
    CHECK(r.step_caption_ids.front() == 10);  // image-nearest caption
    CHECK(r.step_caption_ids.back() == 12);   // root-nearest caption
    CHECK(r.step_t.front() == 0.0);
    CHECK(r.step_t.back() == 1.0);
    CHECK(r.distinct_count >= 1);
    CHECK(r.distinct_count <= kTraversalSteps);

    // euclidean root distance decreases strictly along the path
    double prev = root_distance(cfg, toy.image, root, Modality::image);
    for (int k = 1; k < kTraversalSteps; ++k) {
        Vec step = toy.image;
        for (double& v : step) v *= 1.0 - r.step_t[k];
        const double d = root_distance(cfg, step, root, Modality::image);
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("entailment filtering only narrows the retrieved set") {
    const ToyCorpus toy;
    const GeometryConfig cfg = cfg_of(GeometryKind::euclidean, LogitVariant::d2, 2);
    const RootPoint root = compute_root(cfg, {}, {});

    const TraversalResult unfiltered =
        traverse_image(cfg, toy.image, root, toy.captions, toy.ids, std::nullopt);
    for (const double k : {0.3, 0.8}) {
        const TraversalResult filtered =
            traverse_image(cfg, toy.image, root, toy.captions, toy.ids, k);
        const std::set<int> allowed(unfiltered.deduped_ids.begin(),
                                    unfiltered.deduped_ids.end());
        for (int id : filtered.deduped_ids) {
            CHECK(allowed.contains(id));
        }
    }

    // An effectively infinite minimum radius reproduces the unfiltered path
    // wherever reproduction is attainable: no caption can entail the root
    // itself (the exterior angle from any embedding to the origin is pi), so
    // the comparison stops one step short of t = 1. The corpus keeps the
    // winning caption inside every earlier step's radius.
    const std::vector<Vec> inner_captions{{0.08, 0.0}, {0.0, 10.0}};
    const std::vector<int> inner_ids{0, 1};
    const TraversalResult plain =
        traverse_image(cfg, toy.image, root, inner_captions, inner_ids, std::nullopt);
    const TraversalResult loose =
        traverse_image(cfg, toy.image, root, inner_captions, inner_ids, 1e6);
    for (int k = 0; k + 1 < kTraversalSteps; ++k) {
        CHECK(loose.step_caption_ids[k] == plain.step_caption_ids[k]);
    }
    CHECK(plain.step_caption_ids.back() == 0);
    CHECK(loose.step_caption_ids.back() == -1);  // nothing entails the root
}

TEST_CASE("clip traversal renormalizes every step") {
    Rng rng(9);
    const GeometryConfig cfg = cfg_of(GeometryKind::clip, LogitVariant::d, 4);
    std::vector<Vec> captions;
    std::vector<int> ids;
    for (int i = 0; i < 6; ++i) {
        captions.push_back(rng.normal_vec(4));
        ids.push_back(i);
    }
    const RootPoint root = compute_root(cfg, captions, captions);
    const Vec image = rng.normal_vec(4);
    const TraversalResult r = traverse_image(cfg, image, root, captions, ids, std::nullopt);
    CHECK(r.step_caption_ids.size() == kTraversalSteps);

    // replicate the step construction and check unit norms
    Vec start = scaled(image, 1.0 / norm(image));
    for (int k = 0; k < kTraversalSteps; ++k) {
        const double t = static_cast<double>(k) / (kTraversalSteps - 1);
        Vec step(4);
        for (int d = 0; d < 4; ++d) step[d] = (1.0 - t) * start[d] + t * root.value[d];
        const double ns = norm(step);
        Vec renorm = scaled(step, 1.0 / ns);
        CHECK(std::abs(norm(renorm) - 1.0) <= 1e-12);
    }

    // filtering is undefined without an entailment cone
    CHECK_THROWS_AS(traverse_image(cfg, image, root, captions, ids, 0.3),
                    std::invalid_argument);
}

TEST_CASE("hyperbolic traversal matches the euclidean retrieval order near flatness") {
    const ToyCorpus toy;
    GeometryConfig cfg = cfg_of(GeometryKind::hyperbolic, LogitVariant::d, 2);
    cfg.log_alpha_txt = std::log(0.05);
    cfg.log_alpha_img = std::log(0.05);
    const RootPoint root = compute_root(cfg, {}, {});
    const TraversalResult r =
        traverse_image(cfg, toy.image, root, toy.captions, toy.ids, std::nullopt);
    CHECK(r.step_caption_ids.front() == 10);
    CHECK(r.step_caption_ids.back() == 12);

    // root caption is excluded from the distinct count
    const TraversalResult with_root =
        traverse_image(cfg, toy.image, root, toy.captions, toy.ids, std::nullopt, 12);
    CHECK(with_root.distinct_count == r.distinct_count - 1);
}
