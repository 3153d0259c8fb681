#include <doctest.h>

#include <stdexcept>

#include <random>

#include "attnlab/mask.hpp"

using namespace attnlab;

namespace {

SequenceLayout img_qry(int v, int t) {
  return SequenceLayout({{"img", ModalityTag::image(), SegmentRole::Image, v},
                         {"qry", ModalityTag::text(), SegmentRole::Query, t}});
}

bool same_entries(const AttentionMask& a, const AttentionMask& b) {
  return a.n() == b.n() && a.entries() == b.entries();
}

// Random prefill layout: optional SYSTEM, then 1..3 IMAGE segments, then 1..3
// text segments, each length 1..max_seg.
SequenceLayout random_pairwise_layout(std::mt19937_64& rng, int max_seg) {
  std::vector<Segment> segs;
  auto len = [&] { return 1 + static_cast<int>(rng() % static_cast<uint64_t>(max_seg)); };
  if (rng() % 3 == 0) segs.push_back({"sys", ModalityTag::text(), SegmentRole::System, len()});
  const int n_img = 1 + static_cast<int>(rng() % 3);
  for (int k = 0; k < n_img; ++k) {
    segs.push_back({"i" + std::to_string(k), ModalityTag::image(), SegmentRole::Image, len()});
  }
  const int n_txt = 1 + static_cast<int>(rng() % 3);
  for (int k = 0; k < n_txt; ++k) {
    const bool caption = rng() % 2 == 0;
    segs.push_back({"t" + std::to_string(k), ModalityTag::text(),
                    caption ? SegmentRole::Caption : SegmentRole::Query, len()});
  }
  return SequenceLayout(std::move(segs));
}

// Random interleaved layout over text/image/audio for the generalized policy.
SequenceLayout random_interleaved_layout(std::mt19937_64& rng, int max_seg) {
  const int n_segs = 1 + static_cast<int>(rng() % 5);
  std::vector<Segment> segs;
  for (int k = 0; k < n_segs; ++k) {
    const int len = 1 + static_cast<int>(rng() % static_cast<uint64_t>(max_seg));
    if (rng() % 2 == 0) {
      segs.push_back({"i" + std::to_string(k), ModalityTag::image(), SegmentRole::Image, len});
    } else {
      segs.push_back({"t" + std::to_string(k), ModalityTag::text(),
                      rng() % 2 ? SegmentRole::Query : SegmentRole::Caption, len});
    }
  }
  return SequenceLayout(std::move(segs));
}

}  // namespace

TEST_CASE("causal mask matches the triangular rule") {
  AttentionMask m1 = build_causal(1);
  CHECK(m1.at(0, 0) == 0.0);

  AttentionMask m3 = build_causal(3);
  const double X = kNegInf;
  const std::vector<double> want = {0, X, X, 0, 0, X, 0, 0, 0};
  CHECK(m3.entries() == want);

  // zero count n=4: direct enumeration of the rule
  AttentionMask m4 = build_causal(4);
  int zeros = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (j <= i) ++zeros;
    }
  }
  CHECK(zeros == 10);  // n(n+1)/2
  int got = 0;
  for (double v : m4.entries()) {
    if (v == 0.0) ++got;
  }
  CHECK(got == zeros);

  CHECK_THROWS_AS(build_causal(0), std::invalid_argument);
  CHECK_THROWS_AS(build_causal(kMaxMaskLen + 1), std::invalid_argument);
}

TEST_CASE("pairwise MMA unlocks image rows into the query block") {
  AttentionMask m = build_mma_pairwise(img_qry(2, 2));
  const double X = kNegInf;
  const std::vector<double> want = {0, X, 0, 0,
                                    0, 0, 0, 0,
                                    0, 0, 0, X,
                                    0, 0, 0, 0};
  CHECK(m.entries() == want);

  // image tokens do not see future image tokens
  AttentionMask wide = build_mma_pairwise(img_qry(3, 2));
  CHECK(wide.at(0, 1) == kNegInf);
  CHECK(wide.at(0, 2) == kNegInf);
  CHECK(wide.at(0, 3) == 0.0);

  // SYSTEM stays causal on both sides of the diagonal
  SequenceLayout sys = build_layout(LayoutTemplate::IT, 1, 1, 1);
  AttentionMask ms = build_mma_pairwise(sys);
  CHECK(ms.entries() == std::vector<double>{0, X, X, 0, 0, 0, 0, 0, 0});

  CHECK_THROWS_AS(build_mma_pairwise(SequenceLayout(
                      {{"img", ModalityTag::image(), SegmentRole::Image, 2}})),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_mma_pairwise(build_layout(LayoutTemplate::TI, 0, 2, 2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_mma_pairwise(SequenceLayout(
                      {{"img", ModalityTag::image(), SegmentRole::Image, 2},
                       {"qry", ModalityTag::text(), SegmentRole::Query, 1},
                       {"ans", ModalityTag::text(), SegmentRole::Answer, 1}})),
                  std::invalid_argument);
}

TEST_CASE("generalized MMA follows the phi predicate") {
  // reduces to pairwise on [IMAGE, QUERY]
  CHECK(same_entries(build_mma_generalized(img_qry(2, 2)), build_mma_pairwise(img_qry(2, 2))));

  // text attends forward to image because phi differs
  SequenceLayout tit({{"t0", ModalityTag::text(), SegmentRole::Query, 1},
                      {"i0", ModalityTag::image(), SegmentRole::Image, 1},
                      {"t1", ModalityTag::text(), SegmentRole::Query, 1}});
  AttentionMask m = build_mma_generalized(tit);
  CHECK(m.at(0, 1) == 0.0);
  CHECK(m.at(0, 2) == kNegInf);  // text->future text stays locked
  CHECK(m.at(1, 2) == 0.0);

  // single modality collapses to causal
  SequenceLayout all_text({{"t", ModalityTag::text(), SegmentRole::Query, 3}});
  CHECK(same_entries(build_mma_generalized(all_text), build_causal(3)));
}

TEST_CASE("generalized equals pairwise exhaustively on [IMAGE, QUERY] layouts") {
  for (int v = 1; v <= 16; ++v) {
    for (int t = 1; t <= 16; ++t) {
      SequenceLayout l = img_qry(v, t);
      REQUIRE(same_entries(build_mma_generalized(l), build_mma_pairwise(l)));
    }
  }
}

TEST_CASE("decode rows are all zeros over the visible positions") {
  CHECK(build_decode_row(4, 0) == std::vector<double>(5, 0.0));
  CHECK(build_decode_row(1, 0) == std::vector<double>(2, 0.0));
  CHECK(build_decode_row(4, 2) == std::vector<double>(7, 0.0));
  CHECK_THROWS_AS(build_decode_row(0, 0), std::invalid_argument);
}

TEST_CASE("builders match the per-pair oracle") {
  std::mt19937_64 rng(42);
  for (int iter = 0; iter < 300; ++iter) {
    SequenceLayout pl = random_pairwise_layout(rng, 8);
    REQUIRE(same_entries(build_mma_pairwise(pl), oracle_mask(pl, MaskPolicy::MmaPairwise)));
    REQUIRE(same_entries(build_causal(pl.total_len()), oracle_mask(pl, MaskPolicy::Causal)));

    SequenceLayout il = random_interleaved_layout(rng, 8);
    REQUIRE(same_entries(build_mma_generalized(il), oracle_mask(il, MaskPolicy::MmaGeneralized)));
  }
}

TEST_CASE("oracle counts unlocked above-diagonal entries on [IMAGE x3, QUERY x5]") {
  AttentionMask m = oracle_mask(img_qry(3, 5), MaskPolicy::MmaPairwise);
  int above = 0;
  for (int i = 0; i < m.n(); ++i) {
    for (int j = i + 1; j < m.n(); ++j) {
      if (m.unlocked(i, j)) ++above;
    }
  }
  CHECK(above == 15);  // 3 x 5 unlock block

  AttentionMask single = oracle_mask(
      SequenceLayout({{"t", ModalityTag::text(), SegmentRole::Query, 1}}), MaskPolicy::Causal);
  CHECK(single.entries() == std::vector<double>{0.0});
}

TEST_CASE("every policy mask keeps the structural invariants") {
  std::mt19937_64 rng(3);
  for (int iter = 0; iter < 100; ++iter) {
    SequenceLayout l = random_pairwise_layout(rng, 6);
    for (MaskPolicy p : {MaskPolicy::Causal, MaskPolicy::MmaPairwise, MaskPolicy::MmaGeneralized}) {
      AttentionMask m = build_policy_mask(l, p);
      for (int i = 0; i < m.n(); ++i) {
        REQUIRE(m.at(i, i) == 0.0);
        for (int j = 0; j < i; ++j) REQUIRE(m.at(i, j) == 0.0);  // below diagonal all zeros
        for (int j = 0; j < m.n(); ++j) {
          REQUIRE((m.at(i, j) == 0.0 || m.at(i, j) == kNegInf));
        }
      }
    }
  }
}

TEST_CASE("pairwise never unlocks image->future-image nor SYSTEM rows") {
  std::mt19937_64 rng(9);
  for (int iter = 0; iter < 100; ++iter) {
    SequenceLayout l = random_pairwise_layout(rng, 6);
    AttentionMask m = build_mma_pairwise(l);
    for (int i = 0; i < m.n(); ++i) {
      for (int j = i + 1; j < m.n(); ++j) {
        if (!m.unlocked(i, j)) continue;
        CHECK(l.phi(i) == ModalityTag::image());
        CHECK(l.role_at(i) == SegmentRole::Image);
        CHECK(l.phi(j) == ModalityTag::text());
        CHECK(l.role_at(j) != SegmentRole::System);
      }
    }
  }
}

TEST_CASE("mask constructor rejects invalid entries") {
  CHECK_THROWS_AS(AttentionMask(2, {0.0, 0.5, 0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(AttentionMask(2, {kNegInf, 0.0, 0.0, 0.0}), std::invalid_argument);  // diagonal
  CHECK_THROWS_AS(AttentionMask(2, {0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("render and CSV output are exact") {
  CHECK(render_mask(build_causal(2)) == ".#\n..");
  CHECK(render_mask(build_mma_pairwise(img_qry(2, 2))) == ".#..\n....\n...#\n....");
  CHECK(mask_csv(build_causal(2)) == "i,j,value\n0,0,0\n0,1,-inf\n1,0,0\n1,1,0\n");
}

TEST_CASE("composite mask stacks policy block and decode rows") {
  SequenceLayout l = img_qry(2, 2);
  AttentionMask m = build_composite(l, MaskPolicy::MmaPairwise, 2);
  REQUIRE(m.n() == 6);
  AttentionMask pre = build_mma_pairwise(l);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) REQUIRE(m.at(i, j) == pre.at(i, j));
    for (int j = 4; j < 6; ++j) REQUIRE(m.at(i, j) == kNegInf);  // prefill never sees generated
  }
  for (int i = 4; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) REQUIRE(m.at(i, j) == (j <= i ? 0.0 : kNegInf));
  }
  CHECK(same_entries(build_composite(l, MaskPolicy::Causal, 0), build_causal(4)));
}
